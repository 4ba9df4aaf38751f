"""Text feature extraction: n-gram count profiles, embeddings, and similarity kernels.

Lexical features are sparse n-gram counts over a deterministic
lowercase/whitespace tokenization; semantic features are dense embedding
rows consumed from DGEM files produced externally (or by the built-in
deterministic bag-of-words random projection used for CI runs). Both feed
cosine similarity kernels with unit diagonal, the input shape the
eigenvalue-entropy diversity score expects.
"""

from __future__ import annotations

import struct
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .numerics import SymMatrix, _check_finite

DEFAULT_NGRAM_ORDERS = (1, 2, 3, 4)

DGEM_MAGIC = b"DGEM"
DGEM_VERSION = 1


class DgemFormatError(ValueError):
    """Raised when an embedding file does not conform to the DGEM layout."""


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> List[str]:
    """Lowercase, split on Unicode whitespace, strip edge punctuation, drop empties."""
    out = []
    for raw in text.lower().split():
        start, end = 0, len(raw)
        while start < end and _is_punct(raw[start]):
            start += 1
        while end > start and _is_punct(raw[end - 1]):
            end -= 1
        if end > start:
            out.append(raw[start:end])
    return out


@dataclass(frozen=True)
class NGramProfile:
    """Sparse contiguous n-gram counts for each configured order."""

    counts: Dict[int, Counter]
    token_count: int
    orders: Tuple[int, ...]


def ngram_profile(tokens: Sequence[str], n_set: Iterable[int] = DEFAULT_NGRAM_ORDERS) -> NGramProfile:
    orders = tuple(sorted(set(int(n) for n in n_set)))
    if any(n < 1 for n in orders):
        raise ValueError(f"n-gram orders must be positive, got {orders}")
    counts: Dict[int, Counter] = {}
    for n in orders:
        c: Counter = Counter()
        for i in range(len(tokens) - n + 1):
            c[tuple(tokens[i : i + n])] += 1
        counts[n] = c
    return NGramProfile(counts=counts, token_count=len(tokens), orders=orders)


@dataclass(frozen=True)
class SimilarityMatrix:
    """Symmetric kernel with unit diagonal and entries in [-1, 1]."""

    matrix: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"similarity matrix must be square, got shape {a.shape}")
        _check_finite(a, "SimilarityMatrix")
        if not np.array_equal(a, a.T):
            raise ValueError("similarity matrix must be exactly symmetric")
        if not np.array_equal(np.diag(a), np.ones(a.shape[0])):
            raise ValueError("similarity matrix diagonal must be exactly 1")
        if a.min() < -1.0 or a.max() > 1.0:
            raise ValueError("similarity entries must lie in [-1, 1]")
        object.__setattr__(self, "matrix", a)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def as_sym(self) -> SymMatrix:
        return SymMatrix(self.matrix)


def _finalize_kernel(k: np.ndarray) -> SimilarityMatrix:
    k = np.clip(k, -1.0, 1.0)
    k = np.triu(k, 1)
    k = k + k.T
    np.fill_diagonal(k, 1.0)
    return SimilarityMatrix(k)


def _sparse_cosine(a: Counter, b: Counter, norm_a: float, norm_b: float) -> float:
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    if len(a) > len(b):
        a, b = b, a
    dot = sum(cnt * b[g] for g, cnt in a.items() if g in b)
    return dot / (norm_a * norm_b)


def ngram_kernel(profiles: Sequence[NGramProfile]) -> SimilarityMatrix:
    """Mean over n-gram orders of the cosine similarity between count vectors.

    When both count maps for some order are empty, that order contributes 1
    on the diagonal and 0 off it (an empty text is similar only to itself).
    """
    if len(profiles) == 0:
        raise ValueError("need at least one profile")
    orders = profiles[0].orders
    for p in profiles:
        if p.orders != orders:
            raise ValueError(f"profiles disagree on n-gram orders: {p.orders} vs {orders}")

    m = len(profiles)
    norms = {n: [float(np.sqrt(sum(c * c for c in p.counts[n].values()))) for p in profiles] for n in orders}
    k = np.eye(m)
    for i in range(m):
        for j in range(i + 1, m):
            acc = 0.0
            for n in orders:
                a, b = profiles[i].counts[n], profiles[j].counts[n]
                if not a and not b:
                    continue  # off-diagonal contribution is 0 for a shared-empty order
                acc += _sparse_cosine(a, b, norms[n][i], norms[n][j])
            k[i, j] = acc / len(orders)
    return _finalize_kernel(k)


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Dense n x d embedding rows with sample ids aligned to rows."""

    ids: Tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError(f"embedding values must be 2-D, got shape {v.shape}")
        _check_finite(v, "EmbeddingMatrix")
        ids = tuple(str(i) for i in self.ids)
        if len(ids) != v.shape[0]:
            raise ValueError(f"{len(ids)} ids for {v.shape[0]} embedding rows")
        if len(set(ids)) != len(ids):
            raise ValueError("embedding ids must be unique")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def select(self, ids: Sequence[str]) -> "EmbeddingMatrix":
        index = {s: i for i, s in enumerate(self.ids)}
        missing = [s for s in ids if s not in index]
        if missing:
            raise KeyError(f"embedding rows missing for ids: {missing[:5]}{'...' if len(missing) > 5 else ''}")
        rows = np.array([index[s] for s in ids], dtype=int)
        return EmbeddingMatrix(ids=tuple(ids), values=self.values[rows])


def embedding_kernel(e: EmbeddingMatrix) -> SimilarityMatrix:
    """Cosine similarity of embedding row pairs; rejects zero-norm rows."""
    norms = np.sqrt(np.sum(e.values**2, axis=1))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValueError(f"zero-norm embedding row for id {e.ids[int(zero[0])]!r} (row {int(zero[0])})")
    unit = e.values / norms[:, None]
    return _finalize_kernel(unit @ unit.T)


def write_embeddings(e: EmbeddingMatrix, path) -> None:
    """Write the DGEM binary layout (little-endian, float32 rows, id trailer)."""
    values32 = np.ascontiguousarray(e.values, dtype="<f4")
    _check_finite(values32, "embedding payload")
    with open(path, "wb") as f:
        f.write(DGEM_MAGIC)
        f.write(struct.pack("<III", DGEM_VERSION, e.n, e.d))
        f.write(values32.tobytes())
        for sid in e.ids:
            raw = sid.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)


def read_embeddings(path) -> EmbeddingMatrix:
    """Read a DGEM file; offsets in error messages refer to byte positions."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != DGEM_MAGIC:
        raise DgemFormatError(
            f"bad magic {blob[:4]!r} at offset 0, expected {DGEM_MAGIC!r}"
        )
    if len(blob) < 16:
        raise DgemFormatError(f"truncated header: file is {len(blob)} bytes, need 16")
    version, n, d = struct.unpack_from("<III", blob, 4)
    if version != DGEM_VERSION:
        raise DgemFormatError(f"unsupported DGEM version {version} at offset 4")
    payload_end = 16 + 4 * n * d
    if payload_end > len(blob):
        raise DgemFormatError(
            f"truncated payload: header claims {n}x{d} float32 values ending at offset "
            f"{payload_end}, file is {len(blob)} bytes"
        )
    flat = np.frombuffer(blob, dtype="<f4", count=n * d, offset=16)
    bad = np.flatnonzero(~np.isfinite(flat))
    if bad.size:
        off = 16 + 4 * int(bad[0])
        raise DgemFormatError(f"non-finite value {flat[bad[0]]!r} at offset {off}")
    values = flat.astype(float).reshape(n, d) if n * d else np.zeros((n, d))

    ids = []
    pos = payload_end
    for i in range(n):
        if pos + 4 > len(blob):
            raise DgemFormatError(f"truncated id table: length prefix {i} at offset {pos} runs past EOF")
        (length,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        if pos + length > len(blob):
            raise DgemFormatError(f"truncated id table: id {i} of {length} bytes at offset {pos} runs past EOF")
        ids.append(blob[pos : pos + length].decode("utf-8"))
        pos += length
    return EmbeddingMatrix(ids=tuple(ids), values=values)


def _token_vector(token: str, dim: int, salt: str) -> np.ndarray:
    import hashlib

    digest = hashlib.blake2b(f"{salt}|{token}".encode("utf-8"), digest_size=8).digest()
    seed = int.from_bytes(digest, "little")
    return np.random.default_rng(seed).standard_normal(dim)


def hash_embeddings(
    texts: Sequence[str],
    ids: Sequence[str],
    dim: int = 64,
    salt: str = "divergauge-hash-v1",
) -> EmbeddingMatrix:
    """Deterministic bag-of-words random projection.

    Each token maps to a fixed pseudo-random Gaussian direction keyed by its
    hash; a text embeds as the mean of its token directions. This is a
    non-neural stand-in for an external embedding model: texts sharing
    vocabulary land close together, and the map is stable across runs and
    machines.
    """
    if len(texts) != len(ids):
        raise ValueError(f"{len(texts)} texts for {len(ids)} ids")
    cache: Dict[str, np.ndarray] = {}
    rows = np.empty((len(texts), dim))
    for r, text in enumerate(texts):
        toks = tokenize(text)
        if not toks:
            rows[r] = _token_vector("", dim, salt)
            continue
        acc = np.zeros(dim)
        for t in toks:
            vec = cache.get(t)
            if vec is None:
                vec = cache[t] = _token_vector(t, dim, salt)
            acc += vec
        rows[r] = acc / len(toks)
    return EmbeddingMatrix(ids=tuple(ids), values=rows)
