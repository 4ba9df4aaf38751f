"""Quality/diversity metrics: Vendi Score, Truncated Entropy, Improved
Precision/Recall, a simplified quantized-KL divergence-frontier score
(mauve_lite), and the one-tailed paired t-test used to compare
configurations.

Per-prompt metrics (Vendi, Truncated Entropy) act on one prompt's sample
set; Precision/Recall and mauve_lite need pooled samples to be meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np
from scipy.special import betainc

from .features import EmbeddingMatrix, SimilarityMatrix
from .numerics import PointSet, SymMatrix, covariance_spectrum, kmeans, knn_radii, sym_eigendecompose

TE_EIG_FLOOR = 1e-10


@dataclass(frozen=True)
class MetricValue:
    name: str
    value: float
    n_samples: int
    params: Dict[str, object] = field(default_factory=dict)
    degenerate: bool = False

    def __post_init__(self):
        if not self.degenerate and not math.isfinite(self.value):
            raise ValueError(f"metric {self.name} produced non-finite value {self.value!r}")


@dataclass(frozen=True)
class PRResult:
    precision: float
    recall: float
    k: int

    def __post_init__(self):
        if not (0.0 <= self.precision <= 1.0 and 0.0 <= self.recall <= 1.0):
            raise ValueError(f"precision/recall out of [0, 1]: {self.precision}, {self.recall}")


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p_value: float
    mean_diff: float
    degenerate: bool = False

    def __post_init__(self):
        if not (0.0 <= self.p_value <= 1.0):
            raise ValueError(f"p-value out of [0, 1]: {self.p_value}")


def vendi_score(k: SimilarityMatrix) -> MetricValue:
    """Exponential Shannon entropy of the eigenvalues of K/N.

    The effective number of distinct samples: 1 when all items are
    identical, N when the kernel is the identity.
    """
    n = k.dim
    scaled = k.matrix / n
    vals = sym_eigendecompose(SymMatrix(scaled), want_vectors=False).eigenvalues
    tol = 1e-9 * float(np.abs(scaled).max())
    if vals.min() < -tol:
        raise ValueError(
            f"kernel is not PSD within tolerance: eigenvalue {vals.min()!r} < {-tol!r}"
        )
    before = float(vals.sum())
    vals = np.clip(vals, 0.0, None)
    after = float(vals.sum())
    if abs(after - before) > 1e-10:
        vals = vals / after
    pos = vals[vals > 0.0]
    entropy = float(-(pos * np.log(pos)).sum())
    return MetricValue(name="vendi_score", value=float(np.exp(entropy)), n_samples=n)


def truncated_entropy(e: EmbeddingMatrix, eig_floor: float = TE_EIG_FLOOR) -> MetricValue:
    """Differential-entropy-style diversity over the N largest covariance eigenvalues.

    Eigenvalues are floored at eig_floor before the log, so collapsed sets
    stay comparable; the value can be negative.
    """
    n = e.n
    if n < 2:
        raise ValueError(f"truncated entropy needs at least 2 rows, got {n}")
    vals = covariance_spectrum(e.values).eigenvalues
    vals = np.clip(vals, eig_floor, None)
    te = 0.5 * n * math.log(2.0 * math.pi * math.e) + 0.5 * float(np.log(vals).sum())
    return MetricValue(
        name="truncated_entropy",
        value=te,
        n_samples=n,
        params={"eig_floor": eig_floor},
    )


def _covered_fraction(queries: np.ndarray, support: np.ndarray, radii: np.ndarray) -> float:
    hits = 0
    for q in queries:
        dist = np.sqrt(np.sum((support - q) ** 2, axis=-1))
        if bool(np.any(dist <= radii)):
            hits += 1
    return hits / len(queries)


def improved_precision_recall(gen: EmbeddingMatrix, ref: EmbeddingMatrix, k: int = 3) -> PRResult:
    """Manifold overlap via k-NN hyperspheres around each point.

    Precision: fraction of generated points inside some reference point's
    k-NN hypersphere (radius measured within the reference set). Recall is
    the same with the roles swapped. The boundary counts as inside.
    """
    if gen.n <= k or ref.n <= k:
        raise ValueError(f"both sets must have more than k={k} points, got {gen.n} and {ref.n}")
    ref_radii = knn_radii(PointSet(ref.values), k)
    gen_radii = knn_radii(PointSet(gen.values), k)
    precision = _covered_fraction(gen.values, ref.values, ref_radii)
    recall = _covered_fraction(ref.values, gen.values, gen_radii)
    return PRResult(precision=precision, recall=recall, k=k)


@dataclass(frozen=True)
class MauveLiteConfig:
    cluster_divisor: int = 10
    min_clusters: int = 2
    clusters: Optional[int] = None  # explicit override of the size rule
    num_mixture_weights: int = 25
    scaling_c: float = 5.0
    smoothing: float = 1e-8
    seed: int = 0


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0.0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def divergence_frontier_area(p: np.ndarray, q: np.ndarray, cfg: MauveLiteConfig = MauveLiteConfig()) -> float:
    """Area under the scaled-KL divergence frontier between two histograms.

    For mixture weights w on a uniform grid in (0, 1), each frontier point is
    (exp(-c*KL(Q||R_w)), exp(-c*KL(P||R_w))) with R_w = w*P + (1-w)*Q; the
    area is the trapezoid rule over points sorted by first coordinate with
    endpoints (0, 1) and (1, 0) appended.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    m = cfg.num_mixture_weights
    weights = np.arange(1, m + 1) / (m + 1)
    pts = [(0.0, 1.0), (1.0, 0.0)]
    for w in weights:
        r = w * p + (1.0 - w) * q
        pts.append((math.exp(-cfg.scaling_c * _kl(q, r)), math.exp(-cfg.scaling_c * _kl(p, r))))
    # ties in the first coordinate keep the higher y first so the polyline
    # tracks the upper envelope (e.g. the KL=0 pile-up at x=1)
    pts.sort(key=lambda xy: (xy[0], -xy[1]))
    xs = np.array([x for x, _ in pts])
    ys = np.array([y for _, y in pts])
    return float(np.sum((xs[1:] - xs[:-1]) * (ys[1:] + ys[:-1]) / 2.0))


def mauve_lite(gen: EmbeddingMatrix, ref: EmbeddingMatrix, cfg: MauveLiteConfig = MauveLiteConfig()) -> MetricValue:
    """Divergence-frontier comparison of two embedding sets in a quantized space.

    Quantizes the union with seeded k-means, smooths the per-cluster
    histograms, and reports the frontier area in (0, 1]: 1 when the
    distributions coincide, near 0 when their supports are disjoint.
    """
    n_gen, n_ref = gen.n, ref.n
    union = np.vstack([gen.values, ref.values])
    clusters = cfg.clusters if cfg.clusters is not None else max(cfg.min_clusters, (n_gen + n_ref) // cfg.cluster_divisor)
    params = {"clusters": clusters, "c": cfg.scaling_c, "grid": cfg.num_mixture_weights, "seed": cfg.seed}
    if np.all(union == union[0]):
        return MetricValue(
            name="mauve_lite", value=1.0, n_samples=n_gen + n_ref, params=params, degenerate=True
        )
    if n_gen + n_ref < 2 * clusters:
        raise ValueError(f"need at least {2 * clusters} combined points for {clusters} clusters, got {n_gen + n_ref}")
    # quantize in a canonical row order so the score does not depend on
    # which argument came first (the frontier itself is symmetric)
    order = np.lexsort(union.T[::-1])
    inverse = np.empty(len(order), dtype=int)
    inverse[order] = np.arange(len(order))
    sorted_assign, _, _ = kmeans(PointSet(union[order]), clusters, seed=cfg.seed)
    assign = sorted_assign[inverse]
    p = np.bincount(assign[:n_gen], minlength=clusters).astype(float) + cfg.smoothing
    q = np.bincount(assign[n_gen:], minlength=clusters).astype(float) + cfg.smoothing
    p /= p.sum()
    q /= q.sum()
    area = divergence_frontier_area(p, q, cfg)
    return MetricValue(name="mauve_lite", value=area, n_samples=n_gen + n_ref, params=params)


def _student_t_upper_tail(t: float, df: int) -> float:
    # P(T >= t) for Student-t via the regularized incomplete beta function.
    x = df / (df + t * t)
    half = 0.5 * float(betainc(df / 2.0, 0.5, x))
    return half if t >= 0 else 1.0 - half


def paired_ttest_one_tailed(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """One-tailed paired t-test with alternative mean(a) > mean(b).

    Differences use the sample standard deviation (divisor n-1); the p-value
    is the Student-t upper tail with df = n-1. Zero-variance nonzero-mean
    differences are flagged degenerate with p = 0 (or 1 for a negative mean).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"paired samples must be equal-length 1-D, got {a.shape} and {b.shape}")
    n = len(a)
    if n < 2:
        raise ValueError(f"need at least 2 pairs, got {n}")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    df = n - 1
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(t=0.0, df=df, p_value=0.5, mean_diff=0.0)
        return TTestResult(
            t=math.inf if mean > 0 else -math.inf,
            df=df,
            p_value=0.0 if mean > 0 else 1.0,
            mean_diff=mean,
            degenerate=True,
        )
    t = mean / (sd / math.sqrt(n))
    return TTestResult(t=t, df=df, p_value=_student_t_upper_tail(t, df), mean_diff=mean)
