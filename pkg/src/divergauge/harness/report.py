"""Report rendering: Markdown summary plus CSV tables.

Per-prompt metrics are summarized as median with the 25th/75th percentile
band; raw per-prompt values go to CSV so any other interval can be
recomputed.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Dict, List

import numpy as np

from .evaluate import RunReport


def _band(values: List[float]) -> str:
    v = np.asarray(values)
    return f"{np.median(v):.3f} [{np.percentile(v, 25):.3f}, {np.percentile(v, 75):.3f}]"


def render_markdown(report: RunReport) -> str:
    lines = ["# divergauge evaluation report", ""]
    labels = sorted({r.label for r in report.per_prompt})
    metrics = sorted({r.metric for r in report.per_prompt})
    if labels:
        lines += ["## Per-prompt metrics (median [p25, p75])", ""]
        lines.append("| metric | " + " | ".join(labels) + " |")
        lines.append("|---" * (len(labels) + 1) + "|")
        for metric in metrics:
            row = [metric]
            for label in labels:
                vals = [r.value for r in report.per_prompt if r.label == label and r.metric == metric]
                row.append(_band(vals) if vals else "-")
            lines.append("| " + " | ".join(row) + " |")
        lines.append("")
    if report.across:
        lines += ["## Across-prompt metrics", ""]
        lines.append("| metric | label | value |")
        lines.append("|---|---|---|")
        for r in sorted(report.across, key=lambda r: (r.metric, r.label)):
            lines.append(f"| {r.metric} | {r.label} | {r.value:.4f} |")
        lines.append("")
    if report.ttests:
        lines += ["## Paired one-tailed t-tests (H1: greater > lesser)", ""]
        lines.append("| metric | comparison | t | df | p | mean diff |")
        lines.append("|---|---|---|---|---|---|")
        for t in report.ttests:
            lines.append(
                f"| {t['metric']} | {t['greater']} > {t['lesser']} | {t['t']:.3f} | {t['df']} "
                f"| {t['p_value']:.2e} | {t['mean_diff']:.3f} |"
            )
        lines.append("")
    if report.notices:
        lines += ["## Notices", ""] + [f"- {n}" for n in report.notices] + [""]
    return "\n".join(lines)


def write_csv_tables(report: RunReport, out_dir) -> Dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}

    paths["per_prompt"] = out_dir / "per_prompt.csv"
    with open(paths["per_prompt"], "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["label", "prompt_id", "metric", "value"])
        for r in report.per_prompt:
            w.writerow([r.label, r.prompt_id, r.metric, repr(r.value)])

    paths["across"] = out_dir / "across_prompts.csv"
    with open(paths["across"], "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["label", "metric", "value"])
        for r in report.across:
            w.writerow([r.label, r.metric, repr(r.value)])

    paths["ttests"] = out_dir / "ttests.csv"
    with open(paths["ttests"], "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["metric", "greater", "lesser", "t", "df", "p_value", "mean_diff", "n_prompts"])
        for t in report.ttests:
            w.writerow([t["metric"], t["greater"], t["lesser"], t["t"], t["df"], t["p_value"], t["mean_diff"], t["n_prompts"]])
    return paths
