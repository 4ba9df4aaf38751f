"""Base-model-guided sampling for instruct models.

The decoder truncates the instruct model's next-token distribution (nucleus
or top-k), optionally mixes the surviving logits with the base model's
logits under a weight gamma, renormalizes over the surviving tokens, and
samples. Mixing on raw logits or on normalized log-probs is equivalent:
the normalizers only add a token-independent constant that the final
softmax removes.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass
from typing import List, Optional, Protocol, Sequence

import numpy as np

NUCLEUS_SLACK = 1e-9


class ProtocolError(RuntimeError):
    """A live logits provider violated the stdio wire protocol."""


@dataclass
class LogProbVector:
    """Length-V vector of logits or log-probabilities over a shared vocabulary."""

    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
        if np.any(np.isnan(v)) or np.any(v == np.inf):
            raise ValueError("log-prob values must be finite or -inf")
        if self.normalized:
            hi = v.max()
            if not np.isfinite(hi):
                raise ValueError("normalized vector has no finite entry")
            log_z = hi + np.log(np.exp(v - hi).sum())
            err = abs(np.expm1(log_z)) if log_z < 1.0 else np.inf
            if err > 1e-6:
                raise ValueError(f"normalized vector has exp-sum off by {err!r}")
        self.values = v

    @property
    def vocab_size(self) -> int:
        return len(self.values)

    def probabilities(self) -> np.ndarray:
        """Softmax of the values; exact for already-normalized log-probs."""
        v = self.values
        hi = v.max()
        if not np.isfinite(hi):
            raise ValueError("distribution has no finite entry")
        p = np.exp(v - hi)
        return p / p.sum()


@dataclass(frozen=True)
class ValidSet:
    """Token ids retained by truncation, with the probability mass they cover."""

    ids: np.ndarray
    mass: float

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=int)
        if ids.size == 0:
            raise ValueError("truncation must retain at least one token")
        if np.any(np.diff(ids) <= 0):
            raise ValueError("retained token ids must be unique and ascending")
        if not (0.0 < self.mass <= 1.0):
            raise ValueError(f"retained mass must be in (0, 1], got {self.mass!r}")
        object.__setattr__(self, "ids", ids)

    def __len__(self) -> int:
        return int(self.ids.size)


@dataclass(frozen=True)
class DecodeConfig:
    truncation: str = "nucleus"  # "nucleus" | "top_k"
    p: float = 0.95
    k: int = 40
    gamma: float = 0.5
    temperature: float = 1.0
    max_tokens: int = 500
    seed: int = 0
    stop_tokens: frozenset = frozenset()
    pre_truncation_mix: bool = False  # ablation flag; mixes before truncating

    def __post_init__(self):
        if self.truncation not in ("nucleus", "top_k"):
            raise ValueError(f"unknown truncation {self.truncation!r}")
        if not (0.0 < self.p <= 1.0):
            raise ValueError(f"nucleus p must be in (0, 1], got {self.p}")
        if self.k < 1:
            raise ValueError(f"top-k k must be >= 1, got {self.k}")
        if not (0.0 <= self.gamma <= 1.0):
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.temperature <= 0.0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if self.max_tokens < 0:
            raise ValueError(f"max_tokens must be >= 0, got {self.max_tokens}")
        object.__setattr__(self, "stop_tokens", frozenset(int(t) for t in self.stop_tokens))


class DistributionProvider(Protocol):
    """Anything that yields next-token log-probs over a fixed vocabulary."""

    @property
    def vocab_size(self) -> int: ...

    def next_logprobs(self, context: Sequence[int]) -> LogProbVector: ...


def _ranked_token_order(probs: np.ndarray) -> np.ndarray:
    # descending probability, ties broken by lower token id
    return np.lexsort((np.arange(len(probs)), -probs))


def truncate_nucleus(dist: LogProbVector, p: float) -> ValidSet:
    """Smallest probability-ranked prefix whose cumulative mass reaches p."""
    if not (0.0 < p <= 1.0):
        raise ValueError(f"nucleus p must be in (0, 1], got {p}")
    probs = dist.probabilities()
    order = _ranked_token_order(probs)
    cum = np.cumsum(probs[order])
    cut = int(np.searchsorted(cum, p - NUCLEUS_SLACK, side="left"))
    cut = min(cut, len(cum) - 1)
    keep = np.sort(order[: cut + 1])
    return ValidSet(ids=keep, mass=min(float(cum[cut]), 1.0))


def truncate_topk(dist: LogProbVector, k: int) -> ValidSet:
    """The k highest-probability tokens, ties broken by lower token id."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    probs = dist.probabilities()
    order = _ranked_token_order(probs)
    keep = np.sort(order[: min(k, len(probs))])
    mass = float(probs[keep].sum())
    return ValidSet(ids=keep, mass=min(mass, 1.0))


def _log_normalize_over_valid(scores: np.ndarray, valid: ValidSet, vocab_size: int) -> LogProbVector:
    # scores are unnormalized log-weights for valid.ids only; everything else -inf
    hi = scores.max()
    if not np.isfinite(hi):
        raise ValueError("no valid token has finite score after masking")
    log_z = hi + np.log(np.exp(scores - hi).sum())
    out = np.full(vocab_size, -np.inf)
    out[valid.ids] = scores - log_z
    return LogProbVector(values=out, normalized=True)


def conformative_mix(
    instruct: LogProbVector,
    base: LogProbVector,
    valid: ValidSet,
    gamma: float,
) -> LogProbVector:
    """Gamma-weighted mix of instruct and base scores over the retained tokens.

    Tokens outside the valid set get probability exactly 0 (-inf score); the
    result is renormalized over the valid set. Raw logits and normalized
    log-probs give identical results because their normalizers shift every
    retained token by the same constant.
    """
    if instruct.vocab_size != base.vocab_size:
        raise ValueError(
            f"vocab mismatch: instruct has {instruct.vocab_size}, base has {base.vocab_size}"
        )
    if not (0.0 <= gamma <= 1.0):
        raise ValueError(f"gamma must be in [0, 1], got {gamma}")
    if valid.ids.max() >= instruct.vocab_size:
        raise ValueError("valid set references token ids outside the vocabulary")
    ai = instruct.values[valid.ids]
    bi = base.values[valid.ids]
    if gamma == 1.0:
        scores = ai
    elif gamma == 0.0:
        scores = bi
    else:
        scores = gamma * ai + (1.0 - gamma) * bi
    return _log_normalize_over_valid(scores, valid, instruct.vocab_size)


def restrict_to_valid(dist: LogProbVector, valid: ValidSet) -> LogProbVector:
    """Renormalize a single distribution over the retained tokens (no mixing)."""
    return _log_normalize_over_valid(dist.values[valid.ids], valid, dist.vocab_size)


def sample_token(dist: LogProbVector, rng: np.random.Generator) -> int:
    """Inverse-CDF draw over token ids in ascending order; deterministic per rng state."""
    if not dist.normalized:
        raise ValueError("sample_token requires a normalized distribution")
    probs = np.exp(dist.values)
    cum = np.cumsum(probs)
    u = rng.random()
    idx = int(np.searchsorted(cum, u, side="right"))
    if idx >= len(probs) or probs[idx] == 0.0:
        idx = int(np.flatnonzero(probs > 0.0)[-1])
    return idx


@dataclass(frozen=True)
class StepLog:
    step: int
    token_id: int
    valid_size: int
    valid_mass: float
    logprob: float


@dataclass(frozen=True)
class GenerationResult:
    tokens: List[int]
    steps: List[StepLog]
    stop_reason: str  # "stop_token" | "max_tokens"


def _truncate(cfg: DecodeConfig, dist: LogProbVector) -> ValidSet:
    if cfg.truncation == "nucleus":
        return truncate_nucleus(dist, cfg.p)
    return truncate_topk(dist, cfg.k)


def generate_sequence(
    instruct: DistributionProvider,
    base: Optional[DistributionProvider],
    cfg: DecodeConfig,
    prompt_tokens: Sequence[int],
    rng: Optional[np.random.Generator] = None,
) -> GenerationResult:
    """Autoregressive sampling loop; returns the generated continuation only.

    Per step: temperature on the instruct logits, truncation per cfg, mixing
    with the base model when one is attached (else plain renormalization over
    the retained set), then one inverse-CDF draw. With no base attached the
    run is bit-identical to a gamma=1 run with a base attached, because both
    paths renormalize the same retained instruct scores.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    vocab_size = instruct.vocab_size
    if base is not None and base.vocab_size != vocab_size:
        raise ValueError(
            f"instruct/base vocab mismatch: {vocab_size} vs {base.vocab_size}"
        )

    context = list(int(t) for t in prompt_tokens)
    tokens: List[int] = []
    steps: List[StepLog] = []
    stop_reason = "max_tokens"
    for step in range(cfg.max_tokens):
        lp_i = instruct.next_logprobs(context)
        if lp_i.vocab_size != vocab_size:
            raise ProtocolError(
                f"instruct provider vocab drifted to {lp_i.vocab_size} at step {step}"
            )
        vals_i = lp_i.values if cfg.temperature == 1.0 else lp_i.values / cfg.temperature
        scaled_i = LogProbVector(values=vals_i)

        if base is not None and cfg.pre_truncation_mix:
            lp_b = base.next_logprobs(context)
            if lp_b.vocab_size != vocab_size:
                raise ProtocolError(f"base provider vocab drifted to {lp_b.vocab_size} at step {step}")
            vals_b = lp_b.values if cfg.temperature == 1.0 else lp_b.values / cfg.temperature
            mixed = LogProbVector(values=cfg.gamma * vals_i + (1.0 - cfg.gamma) * vals_b)
            valid = _truncate(cfg, mixed)
            dist = restrict_to_valid(mixed, valid)
        else:
            valid = _truncate(cfg, scaled_i)
            if base is not None:
                lp_b = base.next_logprobs(context)
                if lp_b.vocab_size != vocab_size:
                    raise ProtocolError(f"base provider vocab drifted to {lp_b.vocab_size} at step {step}")
                vals_b = lp_b.values if cfg.temperature == 1.0 else lp_b.values / cfg.temperature
                dist = conformative_mix(scaled_i, LogProbVector(values=vals_b), valid, cfg.gamma)
            else:
                dist = restrict_to_valid(scaled_i, valid)

        token = sample_token(dist, rng)
        steps.append(
            StepLog(
                step=step,
                token_id=token,
                valid_size=len(valid),
                valid_mass=valid.mass,
                logprob=float(dist.values[token]),
            )
        )
        tokens.append(token)
        context.append(token)
        if token in cfg.stop_tokens:
            stop_reason = "stop_token"
            break
    return GenerationResult(tokens=tokens, steps=steps, stop_reason=stop_reason)


class _StdioModelProvider:
    """One side (instruct or base) of a live stdio adapter process."""

    def __init__(self, pair: "StdioProviderPair", model: str):
        self._pair = pair
        self._model = model

    @property
    def vocab_size(self) -> int:
        return self._pair.vocab_size

    def next_logprobs(self, context: Sequence[int]) -> LogProbVector:
        return self._pair.request_logits(self._model, context)


class StdioProviderPair:
    """Client for the NDJSON-over-stdio logits protocol.

    Spawns the adapter command, consumes its hello frame (vocab size and
    stop tokens), and serves per-context logit requests for the "instruct"
    and "base" models. Malformed frames raise ProtocolError.
    """

    def __init__(self, command: Sequence[str]):
        self._proc = subprocess.Popen(
            list(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        hello = self._read_frame()
        if hello.get("type") == "bye":
            raise ProtocolError(f"adapter refused at handshake: {hello.get('reason', 'no reason given')}")
        if hello.get("type") != "hello":
            raise ProtocolError(f"expected hello frame, got {hello!r}")
        try:
            self.vocab_size = int(hello["vocab_size"])
            self.stop_tokens = frozenset(int(t) for t in hello.get("stop_tokens", []))
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed hello frame {hello!r}") from exc
        self.instruct = _StdioModelProvider(self, "instruct")
        self.base = _StdioModelProvider(self, "base")

    def _read_frame(self) -> dict:
        line = self._proc.stdout.readline()
        if not line:
            raise ProtocolError("adapter closed the stream unexpectedly")
        try:
            frame = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"malformed protocol line: {line!r}") from exc
        if not isinstance(frame, dict):
            raise ProtocolError(f"protocol frame must be an object, got {frame!r}")
        return frame

    def request_logits(self, model: str, context: Sequence[int]) -> LogProbVector:
        req = {"type": "logits", "model": model, "context": [int(t) for t in context]}
        self._proc.stdin.write(json.dumps(req) + "\n")
        self._proc.stdin.flush()
        frame = self._read_frame()
        if frame.get("type") == "error":
            raise ProtocolError(f"adapter error: {frame.get('message', 'unspecified')}")
        if frame.get("type") != "logits":
            raise ProtocolError(f"expected logits frame, got {frame!r}")
        values = np.asarray(frame.get("values", []), dtype=float)
        if values.shape != (self.vocab_size,):
            raise ProtocolError(
                f"logits frame has {values.shape} values, expected ({self.vocab_size},)"
            )
        if not np.all(np.isfinite(values)):
            raise ProtocolError("logits frame contains non-finite values")
        return LogProbVector(values=values)

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.write(json.dumps({"type": "bye"}) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, ValueError):
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()

    def __enter__(self) -> "StdioProviderPair":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
