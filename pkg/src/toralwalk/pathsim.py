"""Monte Carlo paths, local times and self-intersection counts.

Paths are drawn from a Philox generator keyed by ``(seed, path_index)`` so
that any single path can be regenerated without replaying the others.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .rwalk import Classification, StepDistribution, analyze

__all__ = [
    "WalkPath",
    "LocalTimeField",
    "make_rng",
    "sample_path",
    "local_times",
    "self_intersections",
    "empirical_kernel_fourier",
    "kernel_identity_check",
    "sup_local_time_diagnostic",
]


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for a (seed, stream) pair."""
    mask = (1 << 64) - 1
    return np.random.Generator(np.random.Philox(key=[int(seed) & mask, int(stream) & mask]))


def _step_sampler(nu: StepDistribution):
    """Exact inverse-CDF table: integer thresholds over a common denominator."""
    den = math.lcm(*(w.denominator for w in nu.weights))
    if den > 2**62:
        raise ValueError("weight denominators too large for exact sampling")
    cum = np.cumsum([w.numerator * (den // w.denominator) for w in nu.weights])
    return den, np.asarray(cum, dtype=np.int64)


@dataclass(frozen=True)
class WalkPath:
    """Positions Z_0 = 0, ..., Z_{n-1} and the step indices X_0, ..., X_{n-2}."""

    seed: int
    path_index: int
    positions: np.ndarray
    step_index: np.ndarray
    walk: StepDistribution

    @property
    def n(self) -> int:
        return len(self.positions)


def sample_path(nu: StepDistribution, n: int, seed: int, path_index: int = 0) -> WalkPath:
    """Sample the first n positions of the walk started at the origin."""
    if n < 1:
        raise ValueError("n must be at least 1")
    den, cum = _step_sampler(nu)
    u = make_rng(seed, path_index).integers(0, den, size=n - 1, dtype=np.int64)
    idx = np.searchsorted(cum, u, side="right")
    steps = nu.steps_array
    pos = np.zeros((n, nu.dim), dtype=np.int64)
    np.cumsum(steps[idx], axis=0, out=pos[1:])
    return WalkPath(int(seed), int(path_index), pos, idx, nu)


class LocalTimeField:
    """Sparse local times R_n(l) = #{k < n : Z_k = l}."""

    def __init__(self, sites: np.ndarray, counts: np.ndarray):
        self.sites = np.asarray(sites, dtype=np.int64)
        self.counts = np.asarray(counts, dtype=np.int64)
        self._lo = self.sites.min(axis=0)
        self._hi = self.sites.max(axis=0)

    @property
    def dim(self) -> int:
        return self.sites.shape[1]

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def V(self) -> int:
        return int(np.sum(self.counts * self.counts))

    @property
    def sup(self) -> int:
        return int(self.counts.max())

    def _encode(self, x: np.ndarray, pad: np.ndarray) -> np.ndarray:
        lo = self._lo - pad
        ext = self._hi - self._lo + 2 * pad + 1
        key = np.zeros(len(x), dtype=np.int64)
        for i in range(self.dim):
            key = key * int(ext[i]) + (x[:, i] - lo[i])
        return key

    def overlap(self, p: Sequence[int]) -> int:
        """V_{n,p} = sum_l R(l) R(l + p)."""
        p = np.asarray(p, dtype=np.int64)
        pad = np.abs(p)
        keys = self._encode(self.sites, pad)
        order = np.argsort(keys)
        skeys, scounts = keys[order], self.counts[order]
        shifted = self._encode(self.sites + p, pad)
        pos = np.searchsorted(skeys, shifted)
        pos = np.minimum(pos, len(skeys) - 1)
        hit = skeys[pos] == shifted
        return int(np.sum(self.counts[hit] * scounts[pos[hit]]))

    def all_overlaps(self) -> tuple[np.ndarray, np.ndarray]:
        """Every realised p with its V_{n,p}; quadratic in the number of sites."""
        diff = (self.sites[None, :, :] - self.sites[:, None, :]).reshape(-1, self.dim)
        w = (self.counts[:, None] * self.counts[None, :]).ravel()
        ps, inv = np.unique(diff, axis=0, return_inverse=True)
        return ps, np.bincount(inv.ravel(), weights=w).astype(np.int64)


def local_times(path: WalkPath | np.ndarray) -> LocalTimeField:
    pos = path.positions if isinstance(path, WalkPath) else np.asarray(path)
    sites, counts = np.unique(pos, axis=0, return_counts=True)
    return LocalTimeField(sites, counts)


@dataclass(frozen=True)
class SelfIntersections:
    n: int
    V: int
    sup: int
    overlaps: dict


def self_intersections(field: LocalTimeField, p_list: Iterable[Sequence[int]] = ()) -> SelfIntersections:
    """V_n, the maximal local time and V_{n,p} for each requested p."""
    ov = {tuple(int(x) for x in p): field.overlap(p) for p in p_list}
    return SelfIntersections(field.n, field.V, field.sup, ov)


def empirical_kernel_fourier(field: LocalTimeField, p_list: Iterable[Sequence[int]]) -> dict:
    """V_{n,p} / V_n, the empirical Fourier coefficients of the kernel."""
    V = field.V
    return {tuple(int(x) for x in p): field.overlap(p) / V for p in p_list}


@dataclass(frozen=True)
class KernelIdentity:
    t: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def max_error(self) -> float:
        return float(np.max(np.abs(self.lhs - self.rhs)))


def kernel_identity_check(path: WalkPath, t_list) -> KernelIdentity:
    """Compare |sum_k e(<Z_k, t>)|^2 with sum_p V_{n,p} e(<p, t>)."""
    t = np.atleast_2d(np.asarray(t_list, dtype=float))
    pos = path.positions.astype(float)
    lhs = np.abs(np.exp(2j * np.pi * (pos @ t.T)).sum(axis=0)) ** 2
    ps, vs = local_times(path).all_overlaps()
    rhs = (vs[:, None] * np.exp(2j * np.pi * (ps.astype(float) @ t.T))).sum(axis=0)
    return KernelIdentity(t, lhs, rhs.real)


def sup_local_time_diagnostic(
    nu: StepDistribution, n_grid: Sequence[int], seeds: Sequence[int], eps: float = 0.1
) -> list[dict]:
    """max_l R_n(l) divided by n^(1/2+eps) (recurrent, d=1) or n^eps otherwise.

    Each seed gives one path; the prefixes of that path supply the n values.
    """
    cls = analyze(nu).classification
    expo = 0.5 + eps if cls is Classification.RECURRENT_D1 else eps
    rows = []
    n_max = max(n_grid)
    for s in seeds:
        path = sample_path(nu, n_max, s)
        for n in sorted(n_grid):
            f = local_times(path.positions[:n])
            rows.append({"seed": int(s), "n": int(n), "sup": f.sup, "ratio": f.sup / n**expo})
    return rows
