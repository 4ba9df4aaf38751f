"""Desk-scale surrogate language-model pair.

An additive-smoothed n-gram model with stupid backoff plays the "base"
model; a temperature-sharpened copy (every conditional raised to 1/tau and
renormalized, tau < 1) plays the "instruct" model with its characteristic
loss of output diversity. Both share one vocabulary by construction, which
is what the conformative decoder requires.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .decoding import LogProbVector
from .features import tokenize

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

LM_FORMAT = "divergauge-ngram-lm"
LM_VERSION = 1


@dataclass(frozen=True)
class SharpenSpec:
    """How to turn a base LM into its lower-entropy "instruct" counterpart."""

    method: str  # "temperature" | "subset"
    tau: Optional[float] = None
    fraction: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.method == "temperature":
            if self.tau is None or not (0.0 < self.tau < 1.0):
                raise ValueError(f"temperature sharpening needs tau in (0, 1), got {self.tau}")
        elif self.method == "subset":
            if self.fraction is None or not (0.0 < self.fraction < 1.0):
                raise ValueError(f"subset retraining needs fraction in (0, 1), got {self.fraction}")
        else:
            raise ValueError(f"unknown sharpening method {self.method!r}")


@dataclass
class NGramLM:
    """Word-level n-gram model: exact counts, additive smoothing, stupid backoff.

    counts[j] maps a (j-1)-token context (token-id tuple) to a Counter of
    next-token ids, for j = 1..order. The begin marker is context-only and
    never predicted: its probability is exactly 0 and smoothing runs over
    the remaining (predictable) vocabulary.
    """

    order: int
    vocab: List[str]
    counts: Dict[int, Dict[Tuple[int, ...], Counter]]
    alpha: float = 0.01
    backoff: float = 0.4
    sharpen_tau: Optional[float] = None
    corpus: Optional[List[List[str]]] = None  # retained for subset retraining only

    def __post_init__(self):
        self.token_ids = {tok: i for i, tok in enumerate(self.vocab)}
        self.bos_id = self.token_ids[BOS]
        self.eos_id = self.token_ids[EOS]
        self.unk_id = self.token_ids[UNK]
        self._context_totals = {
            j: {ctx: sum(c.values()) for ctx, c in table.items()} for j, table in self.counts.items()
        }

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def encode(self, text: str) -> List[int]:
        """Tokenize and map to ids, with out-of-vocabulary words mapped to UNK."""
        return [self.token_ids.get(tok, self.unk_id) for tok in tokenize(text)]

    def decode(self, ids: Sequence[int]) -> str:
        toks = [self.vocab[i] for i in ids if self.vocab[i] not in (BOS, EOS)]
        return " ".join(toks)

    def context_ids(self, text: str) -> List[int]:
        """Encode a prompt with the begin-of-sequence padding used in training."""
        return [self.bos_id] * (self.order - 1) + self.encode(text)

    def _raw_scores(self, context: Tuple[int, ...]) -> np.ndarray:
        # stupid backoff: the deepest seen context wins, shorter contexts are
        # scaled by the backoff factor once per dropped order
        for j in range(self.order, 0, -1):
            ctx = context[len(context) - (j - 1):] if j > 1 else ()
            table = self.counts.get(j)
            if table is None:
                continue
            counter = table.get(ctx)
            if counter is None:
                continue
            total = self._context_totals[j][ctx]
            n_pred = self.vocab_size - 1  # everything except the begin marker
            vec = np.full(self.vocab_size, self.alpha)
            vec[self.bos_id] = 0.0
            for tok, cnt in counter.items():
                vec[tok] += cnt
            vec /= total + self.alpha * n_pred
            return vec * (self.backoff ** (self.order - j))
        raise RuntimeError("unigram table missing; model was not trained")

    def distribution(self, context: Sequence[int]) -> np.ndarray:
        """Normalized next-token probabilities for a context of token ids."""
        for t in context:
            if not (0 <= int(t) < self.vocab_size):
                raise ValueError(f"unknown token id {t} (vocab size {self.vocab_size})")
        p = self._raw_scores(tuple(int(t) for t in context))
        if self.sharpen_tau is not None:
            nz = p > 0.0
            q = np.zeros_like(p)
            q[nz] = p[nz] ** (1.0 / self.sharpen_tau)
            p = q
        return p / p.sum()

    def next_logprobs(self, context: Sequence[int]) -> LogProbVector:
        p = self.distribution(context)
        with np.errstate(divide="ignore"):
            logp = np.log(p)
        return LogProbVector(values=logp, normalized=True)


def _build_vocab(sequences: Sequence[Sequence[str]]) -> List[str]:
    vocab = [BOS, EOS, UNK]
    seen = set(vocab)
    for seq in sequences:
        for tok in seq:
            if tok not in seen:
                seen.add(tok)
                vocab.append(tok)
    return vocab


def _count_tables(
    sequences: Sequence[Sequence[str]], order: int, token_ids: Dict[str, int]
) -> Dict[int, Dict[Tuple[int, ...], Counter]]:
    counts: Dict[int, Dict[Tuple[int, ...], Counter]] = {j: {} for j in range(1, order + 1)}
    bos = token_ids[BOS]
    eos = token_ids[EOS]
    unk = token_ids[UNK]
    for seq in sequences:
        padded = [bos] * (order - 1) + [token_ids.get(t, unk) for t in seq] + [eos]
        for i in range(order - 1, len(padded)):
            target = padded[i]
            for j in range(1, order + 1):
                ctx = tuple(padded[i - (j - 1) : i])
                table = counts[j]
                counter = table.get(ctx)
                if counter is None:
                    counter = table[ctx] = Counter()
                counter[target] += 1
    return counts


def train_ngram_lm(
    corpus: Sequence[Sequence[str]],
    order: int,
    alpha: float = 0.01,
    backoff: float = 0.4,
    vocab: Optional[List[str]] = None,
    keep_corpus: bool = True,
) -> NGramLM:
    """Train from tokenized sequences. Counts are exact; smoothing is additive.

    Passing an explicit vocab pins the id space (used by subset retraining so
    the sharpened model stays vocabulary-compatible with its parent).
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    sequences = [list(seq) for seq in corpus if len(seq) > 0]
    if not sequences:
        raise ValueError("empty corpus: no non-empty token sequences")
    if vocab is None:
        vocab = _build_vocab(sequences)
    token_ids = {tok: i for i, tok in enumerate(vocab)}
    counts = _count_tables(sequences, order, token_ids)
    return NGramLM(
        order=order,
        vocab=list(vocab),
        counts=counts,
        alpha=alpha,
        backoff=backoff,
        corpus=sequences if keep_corpus else None,
    )


def sharpen_lm(lm: NGramLM, spec: SharpenSpec) -> NGramLM:
    """Produce the lower-diversity "instruct" surrogate of a base LM.

    Temperature sharpening raises every conditional to 1/tau and renormalizes
    (entropy never increases); subset retraining re-counts on a seeded
    fraction of the training corpus over the same vocabulary.
    """
    if spec.method == "temperature":
        tau = spec.tau if lm.sharpen_tau is None else spec.tau * lm.sharpen_tau
        return replace(lm, sharpen_tau=tau)
    if lm.corpus is None:
        raise ValueError("subset retraining needs the training corpus (train with keep_corpus=True)")
    rng = np.random.default_rng(spec.seed)
    n = len(lm.corpus)
    size = max(1, int(round(spec.fraction * n)))
    chosen = np.sort(rng.choice(n, size=size, replace=False))
    subset = [lm.corpus[int(i)] for i in chosen]
    return train_ngram_lm(
        subset, lm.order, alpha=lm.alpha, backoff=lm.backoff, vocab=lm.vocab, keep_corpus=True
    )


def next_logprobs(lm: NGramLM, context: Sequence[int]) -> LogProbVector:
    return lm.next_logprobs(context)


def save_lm(lm: NGramLM, path) -> None:
    """NDJSON serialization: a header line, then one record per context."""
    with open(path, "w", encoding="utf-8") as f:
        header = {
            "format": LM_FORMAT,
            "version": LM_VERSION,
            "order": lm.order,
            "alpha": lm.alpha,
            "backoff": lm.backoff,
            "sharpen_tau": lm.sharpen_tau,
            "vocab": lm.vocab,
        }
        f.write(json.dumps(header, ensure_ascii=False) + "\n")
        for j in sorted(lm.counts):
            for ctx in sorted(lm.counts[j]):
                rec = {
                    "order": j,
                    "context": list(ctx),
                    "counts": {str(t): c for t, c in sorted(lm.counts[j][ctx].items())},
                }
                f.write(json.dumps(rec, ensure_ascii=False) + "\n")


def load_lm(path) -> NGramLM:
    with open(path, "r", encoding="utf-8") as f:
        header = json.loads(f.readline())
        if header.get("format") != LM_FORMAT or header.get("version") != LM_VERSION:
            raise ValueError(f"not a {LM_FORMAT} v{LM_VERSION} file: {path}")
        counts: Dict[int, Dict[Tuple[int, ...], Counter]] = {
            j: {} for j in range(1, header["order"] + 1)
        }
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            ctx = tuple(int(t) for t in rec["context"])
            counts[rec["order"]][ctx] = Counter({int(t): int(c) for t, c in rec["counts"].items()})
    return NGramLM(
        order=header["order"],
        vocab=list(header["vocab"]),
        counts=counts,
        alpha=header["alpha"],
        backoff=header["backoff"],
        sharpen_tau=header["sharpen_tau"],
    )


class ToyLMProvider:
    """DistributionProvider over an NGramLM with per-context memoization.

    The model only conditions on the last (order-1) tokens, so log-prob
    vectors are cached by that suffix; the model is immutable, which makes
    the cache sound.
    """

    def __init__(self, lm: NGramLM, cache_size: int = 200_000):
        self.lm = lm
        self._cache: Dict[Tuple[int, ...], LogProbVector] = {}
        self._cache_size = cache_size

    @property
    def vocab_size(self) -> int:
        return self.lm.vocab_size

    @property
    def stop_tokens(self) -> frozenset:
        return frozenset({self.lm.eos_id})

    def next_logprobs(self, context: Sequence[int]) -> LogProbVector:
        tail = tuple(int(t) for t in context[max(0, len(context) - (self.lm.order - 1)):])
        hit = self._cache.get(tail)
        if hit is None:
            hit = self.lm.next_logprobs(tail)
            if len(self._cache) < self._cache_size:
                self._cache[tail] = hit
        return hit

    def encode_prompt(self, text: str) -> List[int]:
        return self.lm.context_ids(text)

    def decode(self, ids: Sequence[int]) -> str:
        return self.lm.decode(ids)
