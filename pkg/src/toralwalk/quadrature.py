"""Midpoint quadrature on the torus with Richardson extrapolation.

Integrands receive exact grid coordinates: an integer array ``num`` of shape
(m, d) and a common denominator ``M``; the point is ``num / M``.  Passing
integers lets callers reduce phases like <l, t> modulo 1 without rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = ["QuadResult", "midpoint_grid", "midpoint_sum", "torus_integrate"]

Integrand = Callable[[np.ndarray, int], np.ndarray]


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    levels: tuple[int, ...]
    raw: tuple[float, ...] = field(default=())


def midpoint_grid(N: int, d: int, start: int = 0, stop: int | None = None):
    """Numerators of the midpoint grid (2m+1)/(2N), slab of the first axis."""
    stop = N if stop is None else stop
    axes = [2 * np.arange(start, stop, dtype=np.int64) + 1]
    axes += [2 * np.arange(N, dtype=np.int64) + 1] * (d - 1)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1), 2 * N


def midpoint_sum(func: Integrand, N: int, d: int, chunk: int = 1 << 21) -> float:
    """Midpoint rule with N points per axis (N^d points in total)."""
    rows = max(1, chunk // max(1, N ** (d - 1)))
    total = 0.0
    for s in range(0, N, rows):
        num, M = midpoint_grid(N, d, s, min(N, s + rows))
        total += float(np.sum(func(num, M)))
    return total / N**d


def torus_integrate(
    func: Integrand,
    d: int,
    *,
    tol: float = 1e-6,
    n0: int = 8,
    max_points: int = 1 << 24,
    exponents: Sequence[int] = (2, 4),
) -> QuadResult:
    """Integrate over [0,1)^d, doubling the grid and extrapolating.

    ``exponents`` are the orders of the leading error terms in the mesh width;
    each level of the Richardson table eliminates one of them.  Stops once two
    successive extrapolated values agree to ``tol`` or the next grid would
    exceed ``max_points``.
    """
    levels, raw, table = [], [], []
    N = n0
    best, err = None, np.inf
    while N**d <= max_points:
        levels.append(N)
        raw.append(midpoint_sum(func, N, d))
        row = [raw[-1]]
        if table:
            prev = table[-1]
            for j in range(min(len(prev), len(exponents))):
                f = 2.0 ** exponents[j]
                row.append(row[j] + (row[j] - prev[j]) / (f - 1))
        table.append(row)
        if len(table) >= 2:
            if abs(raw[-1] - raw[-2]) < tol:
                # already converged without extrapolation (smooth periodic integrand)
                best, err = raw[-1], abs(raw[-1] - raw[-2])
                break
            k = min(len(table[-1]), len(table[-2])) - 1
            best = table[-1][-1]
            err = abs(table[-1][k] - table[-2][k])
            if err < tol:
                break
        N *= 2
    if best is None:
        best = raw[-1]
    return QuadResult(float(best), float(err), tuple(levels), tuple(raw))
