"""Incipit extraction and prompt construction.

The completion template is fixed verbatim; the instruction variant swaps
the story lead-in for a "Write a story" instruction and keeps the incipit.
Incipit truncation is whitespace-token based by default ("core-simple");
subword-accurate truncation is delegated to an adapter command when one is
configured.
"""

from __future__ import annotations

import json
import subprocess
from typing import List, Optional, Sequence, Tuple

COMPLETION_LEAD_IN = "The story is as follows: "
INSTRUCTION_LEAD_IN = "Write a story"


def make_incipit(text: str, n_tokens: int = 20, mode: str = "core-simple", adapter_cmd: Optional[Sequence[str]] = None) -> str:
    """First n_tokens tokens of a reference text, re-joined with single spaces.

    core-simple splits on whitespace and preserves the tokens verbatim
    (case and punctuation intact); adapter-delegated mode asks the adapter
    subprocess to count subword tokens instead.
    """
    if not text.strip():
        raise ValueError("cannot build an incipit from an empty text")
    if mode == "core-simple":
        return " ".join(text.split()[:n_tokens])
    if mode == "adapter-delegated":
        if not adapter_cmd:
            raise ValueError("adapter-delegated incipits need an adapter command")
        return adapter_truncate_incipits([text], n_tokens, adapter_cmd)[0][0]
    raise ValueError(f"unknown incipit mode {mode!r}")


def adapter_truncate_incipits(
    texts: Sequence[str], n_tokens: int, adapter_cmd: Sequence[str]
) -> List[Tuple[str, int]]:
    """Run the adapter's --truncate-incipit protocol over a batch of texts.

    One NDJSON {"text": ...} line per input on stdin; one
    {"incipit": ..., "token_count": ...} line per output.
    """
    payload = "".join(json.dumps({"text": t}, ensure_ascii=False) + "\n" for t in texts)
    proc = subprocess.run(
        list(adapter_cmd) + ["--truncate-incipit", "--n", str(n_tokens)],
        input=payload,
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        raise RuntimeError(f"adapter incipit truncation failed: {proc.stderr.strip()}")
    out = []
    for line in proc.stdout.splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        out.append((rec["incipit"], int(rec["token_count"])))
    if len(out) != len(texts):
        raise RuntimeError(f"adapter returned {len(out)} incipits for {len(texts)} texts")
    return out


def build_prompt(writing_prompt: str, incipit: str, style: str = "completion") -> str:
    """Render the generation prompt for a writing prompt and an incipit."""
    if not writing_prompt:
        raise ValueError("writing prompt must be non-empty")
    if style == "completion":
        return f"Writing prompt: {writing_prompt}\n\n{COMPLETION_LEAD_IN}{incipit}"
    if style == "instruction":
        head = f"Writing prompt: {writing_prompt}\n\n{INSTRUCTION_LEAD_IN}"
        return f"{head} {incipit}" if incipit else head
    raise ValueError(f"unknown prompt style {style!r}")
