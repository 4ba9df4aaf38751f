#!/usr/bin/env python3
"""Reproduce the per-prompt / across-prompt evaluation design at desk scale.

Three runs on the bundled surrogate pair share one set of incipits:

  base  the unsharpened n-gram LM with plain nucleus sampling
  A     the sharpened ("instruct") LM with plain nucleus sampling
  B     the sharpened LM conformatively mixed with the base LM (gamma)

Per-prompt Vendi scores and truncated entropy quantify the diversity gap
(base vs A) and its partial recovery (B vs A); pooled precision/recall and
mauve_lite compare each run against the base model's outputs. Everything is
seeded; rerunning with the same arguments reproduces the report bit for bit.
"""

import argparse
import json
import sys
from pathlib import Path

from divergauge.decoding import DecodeConfig
from divergauge.features import hash_embeddings, write_embeddings
from divergauge.fixture import load_bundled_dataset
from divergauge.harness.evaluate import evaluate
from divergauge.harness.experiment import ExperimentConfig, ProviderSpec, run_experiment
from divergauge.harness.ingest import (
    ingest_dataset,
    read_samples,
    reference_sample_sets,
    write_samples,
)
from divergauge.harness.report import render_markdown, write_csv_tables


def make_config(label, tau, use_base, gamma, args):
    return ExperimentConfig(
        label=label,
        decode=DecodeConfig(
            truncation="nucleus", p=args.p, gamma=gamma, temperature=1.0, max_tokens=args.max_tokens
        ),
        provider=ProviderSpec(kind="toylm", corpus="bundled", sharpen_tau=tau, use_base=use_base),
        samples_per_prompt=args.samples,
        incipit_tokens=20,
        global_seed=args.seed,
    )


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="out/desk_experiment", help="output directory")
    ap.add_argument("--prompts", type=int, default=10)
    ap.add_argument("--samples", type=int, default=50, help="samples per prompt")
    ap.add_argument("--seed", type=int, default=20240903)
    ap.add_argument("--gamma", type=float, default=0.5)
    ap.add_argument("--tau", type=float, default=0.6, help="sharpening temperature for the instruct surrogate")
    ap.add_argument("--p", type=float, default=0.95, help="nucleus mass")
    ap.add_argument("--max-tokens", type=int, default=120)
    ap.add_argument("--embed-dim", type=int, default=64)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    lines = [json.dumps(rec) for rec in load_bundled_dataset()]
    sets = reference_sample_sets(ingest_dataset(lines), incipit_tokens=20)[: args.prompts]
    print(f"{len(sets)} prompts x {args.samples} samples per configuration")

    configs = [
        make_config("base", tau=None, use_base=False, gamma=1.0, args=args),
        make_config("A", tau=args.tau, use_base=False, gamma=1.0, args=args),
        make_config("B", tau=args.tau, use_base=True, gamma=args.gamma, args=args),
    ]
    for cfg in configs:
        manifest = run_experiment(cfg, sets, out)
        status = "ok" if not manifest["failures"] else f"{len(manifest['failures'])} failures"
        print(f"  generated {cfg.label} ({manifest['config_hash']}): {status}")

    texts = {}
    for cfg in configs:
        recs = []
        for ss in sets:
            recs.extend(read_samples(out / cfg.label / f"{ss.prompt_id}.ndjson"))
        texts[cfg.label] = recs

    ref_path = out / "base_reference.ndjson"
    write_samples(texts["base"], ref_path)

    embeddings = {}
    for label, recs in texts.items():
        emb = hash_embeddings([r["text"] for r in recs], [r["id"] for r in recs], dim=args.embed_dim)
        write_embeddings(emb, out / f"{label}.dgem")
        embeddings[label] = emb
    embeddings["reference"] = embeddings["base"]

    report = evaluate(
        [out / "base", out / "A", out / "B"],
        ref_path,
        embeddings=embeddings,
        pairs=[("base", "A"), ("B", "A")],
        include_reference_per_prompt=False,
    )
    report.save(out / "eval.ndjson")
    (out / "report.md").write_text(render_markdown(report), encoding="utf-8")
    write_csv_tables(report, out / "csv")

    print(f"\nwrote {out / 'report.md'}")
    for t in report.ttests:
        verdict = "significant" if t["p_value"] < 0.05 else "not significant"
        print(
            f"  {t['metric']:9s} {t['greater']:>4s} > {t['lesser']}: "
            f"t={t['t']:7.3f} p={t['p_value']:.2e} ({verdict})"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
