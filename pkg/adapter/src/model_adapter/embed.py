"""Embedding backends: a neural sentence-embedding model or a deterministic stub.

The stub maps each whitespace token to a fixed pseudo-random direction
keyed by its hash and averages them; it exists so the embedding pipeline
and the DGEM format are testable without model downloads.
"""

from __future__ import annotations

import hashlib
from typing import Sequence

import numpy as np


def stub_embed(texts: Sequence[str], dim: int = 64) -> np.ndarray:
    rows = np.empty((len(texts), dim), dtype=np.float32)
    cache = {}
    for i, text in enumerate(texts):
        tokens = text.lower().split() or ["<empty>"]
        acc = np.zeros(dim, dtype=np.float64)
        for tok in tokens:
            vec = cache.get(tok)
            if vec is None:
                seed = int.from_bytes(
                    hashlib.blake2b(f"adapter-stub|{tok}".encode("utf-8"), digest_size=8).digest(),
                    "little",
                )
                vec = cache[tok] = np.random.default_rng(seed).standard_normal(dim)
            acc += vec
        rows[i] = (acc / len(tokens)).astype(np.float32)
    return rows


def model_embed(
    texts: Sequence[str],
    model_id: str,
    device: str = "cpu",
    batch_size: int = 16,
    trust_remote_code: bool = False,
) -> np.ndarray:
    from sentence_transformers import SentenceTransformer

    model = SentenceTransformer(model_id, device=device, trust_remote_code=trust_remote_code)
    rows = model.encode(
        list(texts),
        batch_size=batch_size,
        convert_to_numpy=True,
        normalize_embeddings=False,
        show_progress_bar=False,
    )
    return np.asarray(rows, dtype=np.float32)
