#!/usr/bin/env python3
"""Regenerate the bundled fixture data files under src/divergauge/data/.

The outputs are committed, so running this is only needed when the grammar
in divergauge.fixture changes. Seeds are fixed; the files are deterministic
for a given numpy version.
"""

import argparse
import json
from pathlib import Path

from divergauge.features import tokenize
from divergauge.fixture import CORPUS_RESOURCE, DATASET_RESOURCE, synth_corpus, synth_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default=Path(__file__).resolve().parents[1] / "src" / "divergauge" / "data")
    ap.add_argument("--docs", type=int, default=3200)
    ap.add_argument("--prompts", type=int, default=12)
    ap.add_argument("--responses", type=int, default=55)
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    corpus = synth_corpus(n_docs=args.docs)
    n_tokens = sum(len(tokenize(d)) for d in corpus)
    (out / CORPUS_RESOURCE).write_text("\n".join(corpus) + "\n", encoding="utf-8")
    print(f"wrote {out / CORPUS_RESOURCE}: {len(corpus)} docs, {n_tokens} tokens")

    records = synth_dataset(n_prompts=args.prompts, n_responses=args.responses)
    with open(out / DATASET_RESOURCE, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")
    print(f"wrote {out / DATASET_RESOURCE}: {len(records)} prompts x {args.responses} responses")


if __name__ == "__main__":
    main()
