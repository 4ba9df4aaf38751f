"""Command-line interface: ingest, gen, embed, eval, ttest, report."""

from __future__ import annotations

import argparse
import json
import shlex
import subprocess
import sys
from pathlib import Path

from .features import hash_embeddings, read_embeddings, write_embeddings
from .harness.config import SEED_ENV_VAR, experiment_config_from_file
from .harness.evaluate import evaluate
from .harness.ingest import (
    ingest_dataset_file,
    read_dataset,
    read_samples,
    reference_sample_sets,
    reference_samples_records,
    write_dataset,
    write_samples,
)
from .harness.experiment import run_experiment
from .harness.report import render_markdown, write_csv_tables
from .metrics import MauveLiteConfig, paired_ttest_one_tailed


def _cmd_ingest(args) -> int:
    from .harness.ingest import DEFAULT_COMMENTARY_PATTERNS

    patterns = list(DEFAULT_COMMENTARY_PATTERNS) + (args.commentary_pattern or [])
    prompts = ingest_dataset_file(
        args.input, min_responses=args.min_responses, keep=args.keep, commentary_patterns=patterns
    )
    write_dataset(prompts, args.out)
    print(f"ingested {len(prompts)} prompts -> {args.out}")
    if args.samples_out:
        sets = reference_sample_sets(prompts, incipit_tokens=args.incipit_tokens)
        write_samples(reference_samples_records(sets), args.samples_out)
        print(f"wrote reference samples -> {args.samples_out}")
    return 0


def _cmd_gen(args) -> int:
    cfg = experiment_config_from_file(args.config)
    if args.pre_truncation_mix:
        import dataclasses

        cfg = dataclasses.replace(cfg, decode=dataclasses.replace(cfg.decode, pre_truncation_mix=True))
    prompts = reference_sample_sets(read_dataset(args.dataset), incipit_tokens=cfg.incipit_tokens)
    if args.max_prompts:
        prompts = prompts[: args.max_prompts]
    manifest = run_experiment(cfg, prompts, args.out)
    ok = len(manifest["prompt_ids"])
    print(f"config {cfg.label} ({manifest['config_hash']}): {ok} prompts generated -> {Path(args.out) / cfg.label}")
    if manifest["failures"]:
        print(f"failures: {len(manifest['failures'])} (see manifest.json)", file=sys.stderr)
        return 1
    return 0


def _cmd_embed(args) -> int:
    records = []
    for group in args.samples:
        for path in group:
            records.extend(read_samples(path))
    ids = [r["id"] for r in records]
    texts = [r["text"] for r in records]
    if args.backend == "hash":
        emb = hash_embeddings(texts, ids, dim=args.dim)
        write_embeddings(emb, args.out)
    elif args.backend == "adapter":
        if not args.adapter_cmd:
            print("--backend adapter requires --adapter-cmd", file=sys.stderr)
            return 2
        payload = "".join(json.dumps({"id": i, "text": t}, ensure_ascii=False) + "\n" for i, t in zip(ids, texts))
        cmd = shlex.split(args.adapter_cmd) + ["--embed", "--out", str(args.out)]
        proc = subprocess.run(cmd, input=payload, text=True)
        if proc.returncode != 0:
            print(f"adapter embed failed with exit code {proc.returncode}", file=sys.stderr)
            return proc.returncode
    else:
        print(f"unknown backend {args.backend}", file=sys.stderr)
        return 2
    emb = read_embeddings(args.out)
    print(f"embedded {emb.n} texts at dim {emb.d} -> {args.out}")
    return 0


def _parse_kv(pairs, what):
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise SystemExit(f"--{what} expects NAME=PATH, got {item!r}")
        name, path = item.split("=", 1)
        out[name] = path
    return out


def _cmd_eval(args) -> int:
    runs = _parse_kv(args.run, "run")
    embeds = _parse_kv(args.embed, "embed")
    pairs = []
    for p in args.pair or []:
        if ":" not in p:
            raise SystemExit(f"--pair expects GREATER:LESSER, got {p!r}")
        g, l = p.split(":", 1)
        pairs.append((g, l))
    report = evaluate(
        run_dirs=list(runs.values()),
        reference=args.reference,
        embeddings=embeds or None,
        pairs=pairs,
        k=args.k,
        mauve_cfg=MauveLiteConfig(seed=args.mauve_seed),
        pr_mode=args.pr_mode,
    )
    report.save(args.out)
    print(f"wrote {len(report.per_prompt)} per-prompt and {len(report.across)} across-prompt records -> {args.out}")
    for n in report.notices:
        print(f"notice: {n}", file=sys.stderr)
    return 0


def _load_eval_records(path):
    with open(path, "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def _cmd_ttest(args) -> int:
    g_label, l_label = args.pair.split(":", 1)
    records = _load_eval_records(args.eval)
    series = {}
    for rec in records:
        if rec.get("scope") == "per_prompt" and rec.get("metric") == args.metric:
            series.setdefault(rec["label"], {})[rec["prompt_id"]] = rec["value"]
    if g_label not in series or l_label not in series:
        print(f"metric {args.metric} missing for one of {g_label!r}, {l_label!r}", file=sys.stderr)
        return 2
    shared = sorted(set(series[g_label]) & set(series[l_label]))
    res = paired_ttest_one_tailed(
        [series[g_label][p] for p in shared], [series[l_label][p] for p in shared]
    )
    print(
        json.dumps(
            {
                "metric": args.metric,
                "greater": g_label,
                "lesser": l_label,
                "n_prompts": len(shared),
                "t": res.t,
                "df": res.df,
                "p_value": res.p_value,
                "mean_diff": res.mean_diff,
            },
            sort_keys=True,
        )
    )
    return 0


def _cmd_report(args) -> int:
    records = _load_eval_records(args.eval)
    from .harness.evaluate import MetricRecord, RunReport

    report = RunReport()
    for rec in records:
        if rec.get("type") == "notice":
            report.notices.append(rec["message"])
        elif rec.get("type") == "provenance":
            report.provenance = {k: v for k, v in rec.items() if k != "type"}
        elif rec.get("scope") == "per_prompt":
            report.per_prompt.append(
                MetricRecord(rec["metric"], "per_prompt", rec["label"], rec["value"], rec.get("prompt_id"), rec.get("params", {}))
            )
        elif rec.get("scope") == "across_prompts":
            report.across.append(
                MetricRecord(rec["metric"], "across_prompts", rec["label"], rec["value"], params=rec.get("params", {}))
            )
        elif rec.get("scope") == "comparison":
            params = rec.get("params", {})
            report.ttests.append({**params, "metric": rec["metric"].removeprefix("ttest:"), "p_value": rec["value"]})
    md = render_markdown(report)
    Path(args.out_md).write_text(md, encoding="utf-8")
    print(f"wrote {args.out_md}")
    if args.out_csv_dir:
        paths = write_csv_tables(report, args.out_csv_dir)
        print(f"wrote CSV tables: {', '.join(str(p) for p in paths.values())}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="divergauge",
        description="diversity-gap measurement and conformative decoding harness "
        f"(env {SEED_ENV_VAR} overrides the global seed)",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="filter a raw writing-prompt NDJSON dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-responses", type=int, default=50)
    p.add_argument("--keep", type=int, default=50)
    p.add_argument("--commentary-pattern", action="append", help="extra leading-commentary regex prefix")
    p.add_argument("--samples-out", help="also write reference samples NDJSON")
    p.add_argument("--incipit-tokens", type=int, default=20)
    p.set_defaults(fn=_cmd_ingest)

    p = sub.add_parser("gen", help="run an experiment configuration")
    p.add_argument("--config", required=True, help="TOML-style experiment config")
    p.add_argument("--dataset", required=True, help="ingested dataset NDJSON")
    p.add_argument("--out", required=True, help="output run directory root")
    p.add_argument("--max-prompts", type=int, default=0)
    p.add_argument("--pre-truncation-mix", action="store_true",
                   help="ablation: mix with the base model before truncating")
    p.set_defaults(fn=_cmd_gen)

    p = sub.add_parser("embed", help="embed sample files into a DGEM file")
    p.add_argument("--samples", action="append", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--backend", choices=("hash", "adapter"), default="hash")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--adapter-cmd", help="adapter command line for --backend adapter")
    p.set_defaults(fn=_cmd_embed)

    p = sub.add_parser("eval", help="compute metrics for runs against a reference")
    p.add_argument("--run", action="append", required=True, help="LABEL=RUN_DIR (label is informational; the manifest's label wins)")
    p.add_argument("--reference", required=True, help="reference samples NDJSON")
    p.add_argument("--embed", action="append", help="NAME=DGEM_PATH (run labels and 'reference')")
    p.add_argument("--pair", action="append", help="GREATER:LESSER t-test comparison")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--pr-mode", choices=("pooled", "per_prompt_mean"), default="pooled")
    p.add_argument("--mauve-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("ttest", help="paired one-tailed t-test from an eval report")
    p.add_argument("--eval", required=True)
    p.add_argument("--metric", required=True)
    p.add_argument("--pair", required=True, help="GREATER:LESSER")
    p.set_defaults(fn=_cmd_ttest)

    p = sub.add_parser("report", help="render Markdown + CSV from an eval report")
    p.add_argument("--eval", required=True)
    p.add_argument("--out-md", required=True)
    p.add_argument("--out-csv-dir")
    p.set_defaults(fn=_cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
