"""Logit serving over the NDJSON stdio protocol.

Startup: emit {"type": "hello", "vocab_size": V, "stop_tokens": [...]}, or
{"type": "bye", "reason": ...} and exit nonzero when the instruct/base
vocabularies disagree. Then answer {"type": "logits", "model": ...,
"context": [...]} requests in order, one response per request, all values
finite float32. Serving is stateless: every request carries its full
context. Per-request failures produce an error frame and serving
continues; {"type": "bye"} ends the loop.
"""

from __future__ import annotations

import json
import sys
from typing import List, Sequence

STUB_VOCAB = 16
STUB_STOP_TOKENS = (0,)


class StubBackend:
    """Deterministic arithmetic logits; no ML dependencies.

    logits[0] = len(context), logits[1] = sum(context) mod 97, and the rest
    mix position and the last context token, shifted +0.5 for the instruct
    model and -0.5 for the base model. Fixed context => fixed response,
    and a reader can recompute every value, which makes ordering checks
    exact.
    """

    vocab_size = STUB_VOCAB
    stop_tokens = list(STUB_STOP_TOKENS)

    def logits(self, model: str, context: Sequence[int]) -> List[float]:
        offset = 0.5 if model == "instruct" else -0.5
        last = context[-1] if context else 0
        out = [0.0] * self.vocab_size
        out[0] = float(len(context))
        out[1] = float(sum(context) % 97)
        for t in range(2, self.vocab_size):
            out[t] = float((t * 31 + len(context) * 7 + last) % 13) + offset
        return out


class TableBackend:
    """Fixed lookup tables from a JSON file.

    Schema: {"vocab_size": V, "stop_tokens": [...], "models": {name:
    {"default": [V floats], "contexts": {"1,2,3": [V floats], ...}}}}.
    Context keys are comma-joined token ids; unmatched contexts fall back
    to the model's default row.
    """

    def __init__(self, path):
        with open(path, "r", encoding="utf-8") as f:
            spec = json.load(f)
        self.vocab_size = int(spec["vocab_size"])
        self.stop_tokens = [int(t) for t in spec.get("stop_tokens", [])]
        self._models = spec["models"]
        for name, table in self._models.items():
            rows = [table["default"]] + list(table.get("contexts", {}).values())
            for row in rows:
                if len(row) != self.vocab_size:
                    raise ValueError(f"model {name!r}: table row length {len(row)} != vocab {self.vocab_size}")

    def logits(self, model: str, context: Sequence[int]) -> List[float]:
        table = self._models[model]
        key = ",".join(str(int(t)) for t in context)
        row = table.get("contexts", {}).get(key, table["default"])
        return [float(v) for v in row]


class HFBackend:
    """Full-context logits from a causal LM pair via transformers."""

    def __init__(self, instruct_id: str, base_id: str, device: str = "cpu"):
        import torch
        from transformers import AutoModelForCausalLM, AutoTokenizer

        self._torch = torch
        self._device = device
        self._tok = AutoTokenizer.from_pretrained(instruct_id)
        tok_base = AutoTokenizer.from_pretrained(base_id)
        if self._tok.get_vocab() != tok_base.get_vocab():
            raise ValueError(f"vocab mismatch between {instruct_id} and {base_id}")
        self._models = {
            "instruct": AutoModelForCausalLM.from_pretrained(instruct_id).to(device).eval(),
            "base": AutoModelForCausalLM.from_pretrained(base_id).to(device).eval(),
        }
        self.vocab_size = self._models["instruct"].config.vocab_size
        stop = [self._tok.eos_token_id] if self._tok.eos_token_id is not None else []
        self.stop_tokens = stop

    def logits(self, model: str, context: Sequence[int]) -> List[float]:
        torch = self._torch
        ids = torch.tensor([list(context)], dtype=torch.long, device=self._device)
        with torch.no_grad():
            out = self._models[model](input_ids=ids).logits[0, -1, :]
        return out.float().cpu().numpy().astype("float32").tolist()


def serve(backend, stdin=None, stdout=None) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout

    def emit(frame: dict) -> None:
        stdout.write(json.dumps(frame) + "\n")
        stdout.flush()

    emit({"type": "hello", "vocab_size": backend.vocab_size, "stop_tokens": backend.stop_tokens})
    for line in stdin:
        if not line.strip():
            continue
        try:
            req = json.loads(line)
        except json.JSONDecodeError:
            emit({"type": "error", "message": f"malformed request line: {line.strip()[:80]!r}"})
            continue
        rtype = req.get("type")
        if rtype == "bye":
            return 0
        if rtype != "logits":
            emit({"type": "error", "message": f"unknown request type {rtype!r}"})
            continue
        model = req.get("model")
        context = req.get("context")
        if model not in ("instruct", "base") or not isinstance(context, list):
            emit({"type": "error", "message": "logits request needs model in {instruct, base} and a context list"})
            continue
        try:
            values = backend.logits(model, [int(t) for t in context])
        except Exception as exc:
            emit({"type": "error", "message": f"{type(exc).__name__}: {exc}"})
            continue
        emit({"type": "logits", "values": values})
    return 0


def refuse(reason: str, stdout=None) -> int:
    stdout = stdout if stdout is not None else sys.stdout
    stdout.write(json.dumps({"type": "bye", "reason": reason}) + "\n")
    stdout.flush()
    return 3
