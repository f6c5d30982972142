"""Classical distance-based clustering baselines: DTW and Fourier distance.

Both distances feed a PAM-style k-medoids over the precomputed pairwise
matrix.  The DTW local cost is squared Euclidean over the m-dimensional
step vectors; the Fourier distance transforms each observation dimension
independently (full complex spectrum, no padding) and takes the L2 norm of
the coefficient difference.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cluster import Assignment
from .core import Trajectory

__all__ = [
    "DistanceMatrix",
    "dtw_distance",
    "fft_distance",
    "kmedoids",
    "distance_matrix",
    "baseline_cluster",
]


@dataclass(eq=False)
class DistanceMatrix:
    """Symmetric pairwise distances with a zero diagonal."""

    values: np.ndarray
    ids: list[int]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        n = self.values.shape[0]
        if self.values.shape != (n, n):
            raise ValueError(f"distance matrix must be square, got {self.values.shape}")
        if len(self.ids) != n:
            raise ValueError(f"{len(self.ids)} ids for a {n}x{n} matrix")
        if not np.allclose(self.values, self.values.T, atol=1e-12, rtol=0.0):
            raise ValueError("distance matrix is not symmetric")
        if self.values.min() < 0:
            raise ValueError("distance matrix has negative entries")
        if np.abs(np.diag(self.values)).max(initial=0.0) > 0:
            raise ValueError("distance matrix diagonal must be zero")

    def save_csv(self, path: str | Path) -> None:
        lines = [",".join(str(i) for i in self.ids)]
        for row in self.values:
            lines.append(",".join(repr(float(v)) for v in row))
        Path(path).write_text("\n".join(lines) + "\n")


def dtw_distance(a: Trajectory, b: Trajectory, band: int | None = None) -> float:
    """Dynamic time warping distance.

    Square root of the minimum accumulated squared-Euclidean step cost over
    monotone warping paths (steps down, right, diagonal).  An optional
    Sakoe-Chiba band restricts the path to |i - j| <= band, which must be
    at least |T_a - T_b| for a path to exist.
    """
    if a.obs_dim != b.obs_dim:
        raise ValueError(f"dimension mismatch: {a.obs_dim} vs {b.obs_dim}")
    ta, tb = a.horizon, b.horizon
    if band is not None:
        if band < abs(ta - tb):
            raise ValueError(
                f"band {band} infeasible for lengths {ta} and {tb} "
                f"(needs >= {abs(ta - tb)})"
            )

    diff = a.values[:, None, :] - b.values[None, :, :]
    cost = np.sum(diff * diff, axis=2)
    if band is not None:
        ii, jj = np.indices((ta, tb))
        cost = np.where(np.abs(ii - jj) <= band, cost, np.inf)

    # DP over anti-diagonals: every cell on diagonal s depends only on
    # diagonals s-1 and s-2, so each diagonal updates in one vector step.
    acc = np.full((ta, tb), np.inf)
    acc[0, 0] = cost[0, 0]
    for s in range(1, ta + tb - 1):
        lo = max(0, s - tb + 1)
        hi = min(ta - 1, s)
        i = np.arange(lo, hi + 1)
        j = s - i
        i_up = np.maximum(i - 1, 0)
        j_left = np.maximum(j - 1, 0)
        up = np.where(i >= 1, acc[i_up, j], np.inf)
        left = np.where(j >= 1, acc[i, j_left], np.inf)
        diag = np.where((i >= 1) & (j >= 1), acc[i_up, j_left], np.inf)
        acc[i, j] = cost[i, j] + np.minimum(np.minimum(up, left), diag)
    return float(np.sqrt(acc[ta - 1, tb - 1]))


def _dft_pow2(x: np.ndarray) -> np.ndarray:
    # Iterative radix-2 Cooley-Tukey; len(x) must be a power of two.
    n = len(x)
    out = np.array(x, dtype=np.complex128)
    # bit-reversal permutation
    j = 0
    for i in range(1, n):
        bit = n >> 1
        while j & bit:
            j ^= bit
            bit >>= 1
        j |= bit
        if i < j:
            out[i], out[j] = out[j], out[i]
    size = 2
    while size <= n:
        step = cmath.exp(-2j * cmath.pi / size)
        half = size // 2
        twiddles = step ** np.arange(half)
        for start in range(0, n, size):
            # copy: the first write below would otherwise clobber the view
            lo = out[start:start + half].copy()
            hi = out[start + half:start + size] * twiddles
            out[start:start + half] = lo + hi
            out[start + half:start + size] = lo - hi
        size *= 2
    return out


def _dft_direct(x: np.ndarray) -> np.ndarray:
    n = len(x)
    k = np.arange(n)
    w = np.exp(-2j * np.pi * np.outer(k, k) / n)
    return w @ x.astype(np.complex128)


def dft(x: np.ndarray) -> np.ndarray:
    """Unnormalized discrete Fourier transform of a 1-D sequence.

    Radix-2 when the length is a power of two, direct O(T^2) otherwise;
    no padding, so the spectrum always has exactly T bins.
    """
    x = np.asarray(x)
    n = len(x)
    if n < 1:
        raise ValueError("empty sequence")
    if n & (n - 1) == 0:
        return _dft_pow2(x)
    return _dft_direct(x)


def _spectrum(traj: Trajectory) -> np.ndarray:
    # Per-dimension spectra concatenated into one complex vector.
    return np.concatenate([dft(traj.values[:, d]) for d in range(traj.obs_dim)])


def fft_distance(a: Trajectory, b: Trajectory) -> float:
    """L2 norm of the difference between the full complex DFT spectra.

    Requires equal lengths (padding would alter the coefficients).  By
    Parseval this equals sqrt(T) times the Frobenius distance of the raw
    series; the coefficient-space form is kept as the contract.
    """
    if a.horizon != b.horizon:
        raise ValueError(f"length mismatch: {a.horizon} vs {b.horizon}")
    if a.obs_dim != b.obs_dim:
        raise ValueError(f"dimension mismatch: {a.obs_dim} vs {b.obs_dim}")
    d = _spectrum(a) - _spectrum(b)
    return float(np.sqrt(np.sum(d.real ** 2 + d.imag ** 2)))


def kmedoids(dist: DistanceMatrix, k: int, rng: np.random.Generator,
             max_iters: int = 300) -> Assignment:
    """PAM-style alternation on a precomputed distance matrix.

    Starts from k distinct random medoids, then alternates nearest-medoid
    assignment (ties to the lowest cluster index) with medoid updates (the
    member minimizing the intra-cluster distance sum, ties to the lowest
    index).  Stops when the medoid set is stable or after max_iters; the
    total cost never increases.
    """
    n = dist.values.shape[0]
    if n < k:
        raise ValueError(f"need at least k={k} items, got {n}")
    d = dist.values
    medoids = rng.choice(n, size=k, replace=False)
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(max_iters):
        labels = np.argmin(d[:, medoids], axis=1)
        new_medoids = medoids.copy()
        for c in range(k):
            members = np.flatnonzero(labels == c)
            if members.size == 0:
                continue
            costs = d[np.ix_(members, members)].sum(axis=1)
            new_medoids[c] = members[np.argmin(costs)]
        if np.array_equal(new_medoids, medoids):
            break
        medoids = new_medoids
    labels = np.argmin(d[:, medoids], axis=1)
    return Assignment(labels, k)


def distance_matrix(dataset: list[Trajectory], method: str,
                    band: int | None = None) -> DistanceMatrix:
    """Pairwise distances under the chosen method ('dtw' or 'fft')."""
    n = len(dataset)
    values = np.zeros((n, n))
    if method == "fft":
        spectra = [_spectrum(x) for x in dataset]
        for i in range(n):
            for j in range(i + 1, n):
                diff = spectra[i] - spectra[j]
                values[i, j] = values[j, i] = float(
                    np.sqrt(np.sum(diff.real ** 2 + diff.imag ** 2))
                )
    elif method == "dtw":
        for i in range(n):
            for j in range(i + 1, n):
                values[i, j] = values[j, i] = dtw_distance(dataset[i], dataset[j], band)
    else:
        raise ValueError(f"unknown baseline method {method!r} (use 'dtw' or 'fft')")
    return DistanceMatrix(values, [x.id for x in dataset])


def baseline_cluster(dataset: list[Trajectory], k: int, method: str,
                     rng: np.random.Generator, band: int | None = None) -> Assignment:
    """Cluster by k-medoids over the selected pairwise distance."""
    dist = distance_matrix(dataset, method, band=band)
    return kmedoids(dist, k, rng)
