"""model-adapter CLI: --embed, --serve, or --truncate-incipit.

Errors on the real-model paths exit nonzero after one machine-readable
JSON error line on stderr, so callers can surface the cause without
scraping tracebacks.
"""

from __future__ import annotations

import argparse
import json
import sys

from .dgem import write_dgem
from .embed import model_embed, stub_embed
from .encodings import count_and_truncate_incipit
from .serve import HFBackend, StubBackend, TableBackend, refuse, serve

DEFAULT_EMBEDDING_MODEL = "jinaai/jina-embeddings-v3"


def _fail(message: str, code: int = 1) -> int:
    sys.stderr.write(json.dumps({"type": "error", "message": message}) + "\n")
    return code


def _read_ndjson_texts(stream):
    ids, texts = [], []
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        rec = json.loads(line)
        if "text" not in rec:
            raise ValueError(f"stdin line {lineno}: record has no 'text' field")
        ids.append(str(rec.get("id", f"row-{lineno:06d}")))
        texts.append(rec["text"])
    return ids, texts


def _cmd_embed(args) -> int:
    if not args.out:
        return _fail("--embed requires --out")
    try:
        ids, texts = _read_ndjson_texts(sys.stdin)
    except (ValueError, json.JSONDecodeError) as exc:
        return _fail(f"bad input: {exc}")
    if not ids:
        return _fail("no input records on stdin")
    try:
        if args.stub:
            values = stub_embed(texts, dim=args.dim)
        else:
            values = model_embed(
                texts,
                args.model or DEFAULT_EMBEDDING_MODEL,
                device=args.device,
                batch_size=args.batch_size,
                trust_remote_code=args.trust_remote_code,
            )
    except Exception as exc:  # model load/encode failure -> machine-readable error
        return _fail(f"embedding failed: {type(exc).__name__}: {exc}")
    write_dgem(args.out, ids, values)
    sys.stderr.write(json.dumps({"type": "done", "rows": len(ids), "dim": int(values.shape[1])}) + "\n")
    return 0


def _cmd_truncate(args) -> int:
    for line in sys.stdin:
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            incipit, count = count_and_truncate_incipit(rec["text"], n=args.n, encoding=args.encoding)
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            return _fail(f"truncation failed: {exc}")
        out = {"incipit": incipit, "token_count": count}
        if "id" in rec:
            out["id"] = rec["id"]
        sys.stdout.write(json.dumps(out, ensure_ascii=False) + "\n")
        sys.stdout.flush()
    return 0


def _cmd_serve(args) -> int:
    try:
        if args.stub_tables:
            backend = TableBackend(args.stub_tables)
        elif args.stub:
            backend = StubBackend()
        else:
            if not (args.model and args.base_model):
                return _fail("--serve needs --model and --base-model (or --stub / --stub-tables)")
            backend = HFBackend(args.model, args.base_model, device=args.device)
    except ValueError as exc:
        return refuse(str(exc))
    except Exception as exc:
        return _fail(f"backend startup failed: {type(exc).__name__}: {exc}", code=3)
    return serve(backend)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="model-adapter", description=__doc__)
    mode = ap.add_mutually_exclusive_group(required=True)
    mode.add_argument("--embed", action="store_true", help="embed NDJSON {id, text} from stdin into a DGEM file")
    mode.add_argument("--serve", action="store_true", help="serve instruct/base logits over stdio")
    mode.add_argument("--truncate-incipit", action="store_true", help="subword-truncate NDJSON {text} from stdin")
    ap.add_argument("--model", help=f"embedding or instruct model id (embed default: {DEFAULT_EMBEDDING_MODEL})")
    ap.add_argument("--base-model", help="base model id for --serve")
    ap.add_argument("--encoding", default="o200k_base", help="token encoding for incipits ('simple' needs no deps)")
    ap.add_argument("--out", help="output DGEM path for --embed")
    ap.add_argument("--n", type=int, default=20, help="incipit token count")
    ap.add_argument("--dim", type=int, default=64, help="stub embedding dimension")
    ap.add_argument("--stub", action="store_true", help="deterministic no-ML backend")
    ap.add_argument("--stub-tables", help="JSON lookup tables for --serve")
    ap.add_argument("--device", default="cpu")
    ap.add_argument("--batch-size", type=int, default=16)
    ap.add_argument("--trust-remote-code", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.embed:
        return _cmd_embed(args)
    if args.truncate_incipit:
        return _cmd_truncate(args)
    return _cmd_serve(args)


if __name__ == "__main__":
    sys.exit(main())
