"""Dense symmetric linear algebra, nearest-neighbour geometry, and clustering.

Everything here is exact/deterministic numpy: a cyclic Jacobi eigensolver for
symmetric matrices, covariance spectra via the Gram trick, brute-force k-NN
radii, and a seeded k-means++ with restarts. Sizes in this project are small
(per-prompt sets of 50, pooled sets of a few thousand), so O(n^2)/O(n^3)
methods are deliberate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

JACOBI_SWEEP_CAP = 100
JACOBI_REL_TOL = 1e-12


def _check_finite(a: np.ndarray, what: str) -> None:
    bad = ~np.isfinite(a)
    if bad.any():
        i = np.argwhere(bad)[0]
        raise ValueError(
            f"{what} contains non-finite value {a[tuple(i)]!r} at index {tuple(int(v) for v in i)}"
        )


@dataclass(frozen=True)
class SymMatrix:
    """A dense real symmetric matrix, validated to be exactly symmetric as stored."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        object.__setattr__(self, "entries", a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        _check_finite(a, "SymMatrix")
        if not np.array_equal(a, a.T):
            i, j = np.argwhere(a != a.T)[0]
            raise ValueError(
                f"matrix is not symmetric: entries[{i}][{j}]={a[i, j]!r} != entries[{j}][{i}]={a[j, i]!r}"
            )

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted descending, with optional eigenvectors (columns aligned)."""

    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = None

    def __post_init__(self):
        vals = np.asarray(self.eigenvalues, dtype=float)
        object.__setattr__(self, "eigenvalues", vals)
        if np.any(np.diff(vals) > 0):
            raise ValueError("eigenvalues must be sorted non-increasing")


@dataclass(frozen=True)
class PointSet:
    """n points in d dimensions, all coordinates finite."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 2:
            raise ValueError(f"expected an (n, d) coordinate array, got shape {c.shape}")
        if c.shape[0] < 1:
            raise ValueError("PointSet needs at least one point")
        _check_finite(c, "PointSet")
        object.__setattr__(self, "coords", c)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def d(self) -> int:
        return self.coords.shape[1]


def _jacobi_rotate(a: np.ndarray, v: Optional[np.ndarray], p: int, q: int) -> None:
    # One symmetric Schur rotation zeroing a[p, q] (Golub & Van Loan 8.4).
    apq = a[p, q]
    diff = a[q, q] - a[p, p]
    if abs(diff) > 1e150 * abs(apq):
        # tau*tau would overflow; use the asymptotic small rotation
        t = apq / diff
    else:
        tau = diff / (2.0 * apq)
        if tau >= 0:
            t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
        else:
            t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = t * c

    row_p = a[p, :].copy()
    row_q = a[q, :].copy()
    a[p, :] = c * row_p - s * row_q
    a[q, :] = s * row_p + c * row_q
    col_p = a[:, p].copy()
    col_q = a[:, q].copy()
    a[:, p] = c * col_p - s * col_q
    a[:, q] = s * col_p + c * col_q
    a[p, q] = 0.0
    a[q, p] = 0.0

    if v is not None:
        vp = v[:, p].copy()
        vq = v[:, q].copy()
        v[:, p] = c * vp - s * vq
        v[:, q] = s * vp + c * vq


def sym_eigendecompose(m: SymMatrix, want_vectors: bool = True) -> Spectrum:
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.

    Converges when the off-diagonal Frobenius norm drops below
    JACOBI_REL_TOL times the total Frobenius norm, capped at
    JACOBI_SWEEP_CAP sweeps. Eigenvalues come back sorted descending;
    eigenvector columns are aligned with them.
    """
    n = m.dim
    a = m.entries.copy()
    v = np.eye(n) if want_vectors else None

    fro = float(np.linalg.norm(a))
    if fro > 0.0 and n > 1:
        threshold = JACOBI_REL_TOL * fro
        for _sweep in range(JACOBI_SWEEP_CAP):
            off = float(np.sqrt(max(np.sum(np.square(a)) - np.sum(np.square(np.diag(a))), 0.0)))
            if off < threshold:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    if a[p, q] != 0.0:
                        _jacobi_rotate(a, v, p, q)

    vals = np.diag(a).copy()
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = v[:, order] if v is not None else None
    return Spectrum(eigenvalues=vals, eigenvectors=vecs)


def covariance_spectrum(x: np.ndarray) -> Spectrum:
    """The N largest eigenvalues of the empirical covariance of the rows of x.

    Rows are centered by their mean; the covariance uses divisor N-1. When
    D > N the spectrum is computed from the N x N Gram matrix of centered
    rows divided by N-1, which shares its nonzero eigenvalues with the full
    D x D covariance. When D < N the covariance has only D eigenvalues and
    the result is zero-padded to length N (the remaining eigenvalues of the
    rank-deficient problem).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"expected an (n, d) matrix, got shape {x.shape}")
    n, d = x.shape
    if n < 2:
        raise ValueError(f"covariance needs at least 2 rows, got {n}")
    _check_finite(x, "embedding matrix")

    centered = x - x.mean(axis=0, keepdims=True)
    if d > n:
        gram = centered @ centered.T / (n - 1)
        gram = (gram + gram.T) / 2.0
        vals = sym_eigendecompose(SymMatrix(gram), want_vectors=False).eigenvalues
    else:
        cov = centered.T @ centered / (n - 1)
        cov = (cov + cov.T) / 2.0
        vals = sym_eigendecompose(SymMatrix(cov), want_vectors=False).eigenvalues
        if d < n:
            vals = np.concatenate([vals, np.zeros(n - d)])
    return Spectrum(eigenvalues=vals)


def _distances_from(points: np.ndarray, i: int) -> np.ndarray:
    # Row-wise Euclidean distances, computed the same way a per-pair loop would.
    return np.sqrt(np.sum((points - points[i]) ** 2, axis=-1))


def knn_radii(p: PointSet, k: int) -> np.ndarray:
    """Distance from each point to its k-th nearest neighbour (self excluded).

    Exact O(n^2) computation; ties at equal distance are counted smaller
    index first (stable sort), which never changes the radius itself.
    """
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    n = p.n
    if k >= n:
        raise ValueError(f"k={k} must be smaller than the number of points n={n}")
    coords = p.coords
    radii = np.empty(n)
    for i in range(n):
        dist = _distances_from(coords, i)
        dist[i] = np.inf
        order = np.argsort(dist, kind="stable")
        radii[i] = dist[order[k - 1]]
    return radii


def _kmeans_pp_init(coords: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = coords.shape[0]
    centers = np.empty((k, coords.shape[1]))
    centers[0] = coords[rng.integers(n)]
    closest_sq = np.sum((coords - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = closest_sq.sum()
        if total <= 0.0:
            # all remaining mass collapsed onto existing centers
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest_sq / total))
        centers[j] = coords[idx]
        closest_sq = np.minimum(closest_sq, np.sum((coords - centers[j]) ** 2, axis=1))
    return centers


def _lloyd(coords: np.ndarray, centers: np.ndarray, max_iter: int) -> Tuple[np.ndarray, np.ndarray, float]:
    n = coords.shape[0]
    k = centers.shape[0]
    assign = np.full(n, -1)
    for _ in range(max_iter):
        d2 = (
            np.sum(coords**2, axis=1)[:, None]
            - 2.0 * coords @ centers.T
            + np.sum(centers**2, axis=1)[None, :]
        )
        new_assign = np.argmin(d2, axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(k):
            members = coords[assign == j]
            if len(members) > 0:
                centers[j] = members.mean(axis=0)
            else:
                # reseed an empty cluster to the point farthest from its centroid
                dist_own = np.sum((coords - centers[assign]) ** 2, axis=1)
                far = int(np.argmax(dist_own))
                centers[j] = coords[far]
                assign[far] = j
    inertia = float(np.sum((coords - centers[assign]) ** 2))
    return assign, centers, inertia


def kmeans(
    p: PointSet,
    clusters: int,
    seed: int,
    n_restarts: int = 3,
    max_iter: int = 50,
) -> Tuple[np.ndarray, np.ndarray, float]:
    """Seeded k-means (k-means++ init, Lloyd iterations, best of n_restarts).

    Deterministic for a fixed seed. Returns (assignments, centroids, inertia).
    """
    if clusters < 1:
        raise ValueError(f"clusters must be positive, got {clusters}")
    if clusters > p.n:
        raise ValueError(f"clusters={clusters} exceeds number of points n={p.n}")
    rng = np.random.default_rng(seed)
    coords = p.coords
    best = None
    for _ in range(n_restarts):
        centers = _kmeans_pp_init(coords, clusters, rng)
        assign, centers, inertia = _lloyd(coords, centers.copy(), max_iter)
        if best is None or inertia < best[2]:
            best = (assign, centers, inertia)
    return best
