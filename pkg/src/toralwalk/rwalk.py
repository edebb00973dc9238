"""Lattice random walks with finitely supported steps.

Covers the algebraic invariants of a walk (generated lattices, covariance,
annulators), its exact and Fourier-side distributions, the local limit
theorem, Green sums, expected self-intersections and the limiting kernel
measure that governs quenched variances.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from . import intmat
from . import zlattice as zl
from .quadrature import QuadResult, torus_integrate

__all__ = [
    "StepDistribution",
    "Classification",
    "WalkAnalysis",
    "KernelMeasure",
    "NotReduced",
    "DegenerateWalk",
    "NotTransient",
    "Singularity",
    "BoxTooLarge",
    "analyze",
    "psi",
    "exact_distribution",
    "DenseDistribution",
    "grid_return_probs",
    "GridReturnProbs",
    "grid_distribution",
    "grid_point_probs",
    "llt_main_term",
    "step_progression",
    "w_density",
    "c_w",
    "K_constant",
    "green_sum",
    "GreenSum",
    "expected_self_intersections",
    "SelfIntersectionMean",
    "limit_kernel",
    "gamma1_measure",
    "barycenter_symmetrize",
    "simple_walk",
]


class NotReduced(ValueError):
    """The steps do not generate a full-rank lattice."""


class DegenerateWalk(ValueError):
    """Operation undefined for a walk with a single step."""


class NotTransient(ValueError):
    """Operation requires a transient walk."""


class Singularity(ValueError):
    """Evaluation point lies in the group where the characteristic function is 1."""


class BoxTooLarge(ValueError):
    """Exact convolution would exceed the configured number of cells."""


def _frac(x) -> Fraction:
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**12)
    return Fraction(x)


@dataclass(frozen=True)
class StepDistribution:
    """Distinct integer steps with positive rational weights summing to one."""

    steps: tuple[tuple[int, ...], ...]
    weights: tuple[Fraction, ...]

    def __post_init__(self):
        steps = tuple(tuple(int(x) for x in s) for s in self.steps)
        weights = tuple(_frac(w) for w in self.weights)
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "weights", weights)
        if not steps:
            raise ValueError("empty support")
        if len(steps) != len(weights):
            raise ValueError("steps and weights differ in length")
        if len({len(s) for s in steps}) != 1:
            raise ValueError("steps have different dimensions")
        if len(set(steps)) != len(steps):
            raise ValueError("steps must be distinct")
        if any(w <= 0 for w in weights):
            raise ValueError("weights must be positive")
        if sum(weights) != 1:
            raise ValueError(f"weights sum to {sum(weights)}, not 1")

    @property
    def dim(self) -> int:
        return len(self.steps[0])

    @property
    def steps_array(self) -> np.ndarray:
        return np.array(self.steps, dtype=np.int64)

    @property
    def probs(self) -> np.ndarray:
        return np.array([float(w) for w in self.weights])

    @classmethod
    def from_dict(cls, cfg: Mapping) -> "StepDistribution":
        steps = [tuple(s) for s in cfg["steps"]]
        weights = cfg.get("weights")
        if weights is None:
            weights = [Fraction(1, len(steps))] * len(steps)
        nu = cls(tuple(steps), tuple(_frac(w) for w in weights))
        if "dim" in cfg and int(cfg["dim"]) != nu.dim:
            raise ValueError("dim does not match the steps")
        return nu

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "steps": [list(s) for s in self.steps],
            "weights": [str(w) for w in self.weights],
        }


def simple_walk(d: int) -> StepDistribution:
    """Nearest-neighbour walk on Z^d."""
    steps = []
    for i in range(d):
        for s in (1, -1):
            e = [0] * d
            e[i] = s
            steps.append(tuple(e))
    return StepDistribution(tuple(steps), tuple([Fraction(1, 2 * d)] * (2 * d)))


class Classification(str, enum.Enum):
    RECURRENT_D1 = "RecurrentD1"
    RECURRENT_D2 = "RecurrentD2"
    TRANSIENT = "Transient"
    DETERMINISTIC = "Deterministic"


@dataclass(frozen=True)
class WalkAnalysis:
    """Algebraic invariants of a reduced walk.

    ``L`` is generated by the steps and ``D`` by their differences (None for a
    single step).  ``Gamma`` is the annulator of L, where the characteristic
    function equals one; ``Gamma1`` holds the finite part of the annulator of
    D, where it has modulus one.  When D has rank d-1 that annulator also
    contains the circle spanned by ``circle_direction``.
    """

    walk: StepDistribution
    L: zl.IntLattice
    D: zl.IntLattice | None
    d: int
    d0: int
    mean: tuple[Fraction, ...]
    Lambda: tuple[tuple[Fraction, ...], ...]
    D_basis: tuple[tuple[int, ...], ...]
    Lambda0: tuple[tuple[Fraction, ...], ...]
    a0: int
    index_L: int
    quotient_order: int | float
    Gamma: zl.AnnulatorGroup
    Gamma1: zl.AnnulatorGroup
    circle_direction: tuple[int, ...] | None
    ell1: tuple[int, ...]
    classification: Classification
    moment2_finite: bool = True

    @property
    def centered(self) -> bool:
        return all(m == 0 for m in self.mean)

    @property
    def llt_constant(self) -> float:
        """Point mass of the local Gaussian on the coset D + n*ell1, times (2 pi n)^(d0/2)."""
        if self.d0 == 0:
            return 1.0
        det = float(_det_frac(self.Lambda0))
        return 1.0 / math.sqrt(det)

    @property
    def det_Lambda(self) -> Fraction:
        return _det_frac(self.Lambda)


def _det_frac(M) -> Fraction:
    return intmat.det(M)


def _solve_frac(M, b) -> list[Fraction]:
    n = len(M)
    A = [list(map(Fraction, r)) + [Fraction(x)] for r, x in zip(M, b)]
    for c in range(n):
        piv = next(r for r in range(c, n) if A[r][c] != 0)
        A[c], A[piv] = A[piv], A[c]
        for r in range(n):
            if r != c and A[r][c] != 0:
                f = A[r][c] / A[c][c]
                A[r] = [a - f * x for a, x in zip(A[r], A[c])]
    return [A[i][n] / A[i][i] for i in range(n)]


def analyze(nu: StepDistribution) -> WalkAnalysis:
    """Compute the lattices, moments and annulator groups of a walk."""
    d = nu.dim
    try:
        L = zl.lattice_from_generators(nu.steps)
    except zl.ZeroLattice:
        raise NotReduced("every step is zero") from None
    if not L.is_full_rank:
        raise NotReduced(
            f"steps span a rank-{L.rank} lattice in Z^{d}; reduce the support first"
        )
    ell1 = min(nu.steps)
    mean = tuple(sum(w * s[i] for s, w in zip(nu.steps, nu.weights)) for i in range(d))
    Lambda = tuple(
        tuple(
            sum(w * (s[i] - mean[i]) * (s[j] - mean[j]) for s, w in zip(nu.steps, nu.weights))
            for j in range(d)
        )
        for i in range(d)
    )
    diffs = [tuple(a - b for a, b in zip(s, ell1)) for s in nu.steps if s != ell1]
    Gamma = zl.annulator(L)
    index_L = int(zl.lattice_index(L))
    if not diffs:
        # a single step; d must be one after reduction
        return WalkAnalysis(
            nu, L, None, d, 0, mean, Lambda, (), (), 1, index_L, zl.INFINITE,
            Gamma, zl.AnnulatorGroup(((Fraction(0),) * d,)), (1,) * d if d == 1 else None,
            ell1, Classification.DETERMINISTIC,
        )
    D = zl.lattice_from_generators(diffs)
    d0 = D.rank
    D_basis = D.basis
    # covariance in the coordinates of the D basis: Lambda = B M B^T
    B = [list(v) for v in D_basis]  # rows are basis vectors
    M = _cov_in_basis(Lambda, B)
    circle = None
    if d0 == d:
        a0 = int(zl.lattice_index(D))
        Gamma1 = zl.annulator(D)
    else:
        red = zl.reduce_support(D_basis)
        sub = zl.lattice_from_generators(red.reduced)
        a0 = int(zl.lattice_index(sub))
        ann = zl.annulator(sub)
        # characters transform by C^T: t = C^T s with s = (a, free)
        CT = [[red.C[j][i] for j in range(d)] for i in range(d)]
        pts = set()
        for a in ann.points:
            s = list(a) + [Fraction(0)]
            pts.add(tuple(sum(CT[i][j] * s[j] for j in range(d)) % 1 for i in range(d)))
        Gamma1 = zl.AnnulatorGroup(tuple(sorted(pts)))
        circle = tuple(CT[i][d - 1] for i in range(d))
    quotient = zl.quotient_cyclic_order(L, D, ell1)
    centered = all(m == 0 for m in mean)
    if centered and d == 1:
        cls = Classification.RECURRENT_D1
    elif centered and d == 2:
        cls = Classification.RECURRENT_D2
    else:
        cls = Classification.TRANSIENT
    return WalkAnalysis(
        nu, L, D, d, d0, mean, Lambda, D_basis, M, a0, index_L, quotient,
        Gamma, Gamma1, circle, ell1, cls,
    )


def _cov_in_basis(Lambda, B_rows) -> tuple[tuple[Fraction, ...], ...]:
    """Covariance M of the coordinates a when x = sum a_i b_i and Cov(x) = Lambda.

    Uses the Gram system: (B B^T) M (B B^T) = B Lambda B^T, valid because the
    covariance is supported on the span of the basis.
    """
    r = len(B_rows)
    d = len(B_rows[0])
    G = [[sum(Fraction(B_rows[i][k] * B_rows[j][k]) for k in range(d)) for j in range(r)] for i in range(r)]
    BLB = [
        [sum(B_rows[i][k] * Lambda[k][l] * B_rows[j][l] for k in range(d) for l in range(d)) for j in range(r)]
        for i in range(r)
    ]
    # M = G^{-1} BLB G^{-1}
    cols = [_solve_frac(G, [BLB[i][j] for i in range(r)]) for j in range(r)]
    X = [[cols[j][i] for j in range(r)] for i in range(r)]  # G^{-1} BLB
    rows = [_solve_frac(G, X[i]) for i in range(r)]  # (G^{-1} X^T)^T = X G^{-1}
    return tuple(tuple(r_) for r_ in rows)


def psi(nu: StepDistribution, t) -> np.ndarray:
    """Characteristic function E exp(2 pi i <X, t>) at points t (..., d)."""
    t = np.asarray(t, dtype=float)
    phase = t @ nu.steps_array.T.astype(float)
    return np.exp(2j * np.pi * phase) @ nu.probs


def _grid_one_minus_psi(nu: StepDistribution, num: np.ndarray, M: int):
    """Return (1 - Psi) and an exact 'Psi == 1' mask at points num / M.

    Phases are reduced modulo M in integer arithmetic, so points of the
    annulator give exactly zero.
    """
    steps = nu.steps_array
    p = nu.probs
    re = np.zeros(len(num))
    im = np.zeros(len(num))
    one = np.ones(len(num), dtype=bool)
    for j in range(len(steps)):
        r = (num @ steps[j]) % M
        one &= r == 0
        theta = 2 * np.pi * r / M
        re += p[j] * 2 * np.sin(theta / 2) ** 2
        im -= p[j] * np.sin(theta)
    return re + 1j * im, one


class DenseDistribution(Mapping):
    """Probabilities on a box of Z^d stored densely; maps points to floats."""

    def __init__(self, array: np.ndarray, origin: Sequence[int]):
        self.array = array
        self.origin = tuple(int(o) for o in origin)

    def _idx(self, k):
        idx = tuple(int(a) - o for a, o in zip(k, self.origin))
        if any(i < 0 or i >= s for i, s in zip(idx, self.array.shape)):
            return None
        return idx

    def __getitem__(self, k):
        idx = self._idx(k)
        if idx is None or self.array[idx] == 0:
            raise KeyError(k)
        return float(self.array[idx])

    def get(self, k, default=0.0):
        idx = self._idx(k)
        return default if idx is None else float(self.array[idx])

    def __iter__(self):
        for idx in zip(*np.nonzero(self.array)):
            yield tuple(int(i) + o for i, o in zip(idx, self.origin))

    def __len__(self):
        return int(np.count_nonzero(self.array))

    def sup(self) -> float:
        return float(self.array.max())

    def l2_squared(self) -> float:
        return float(np.sum(self.array**2))


def _dense_steps(nu: StepDistribution, n: int, max_cells: float, callback=None) -> DenseDistribution:
    steps = nu.steps_array
    probs = nu.probs
    lo = steps.min(axis=0)
    span = steps.max(axis=0) - lo
    cells = float(np.prod(n * span + 1))
    if cells > max_cells:
        raise BoxTooLarge(f"box of {cells:.3g} cells exceeds limit {max_cells:.3g}")
    arr = np.ones((1,) * nu.dim)
    origin = np.zeros(nu.dim, dtype=np.int64)
    if callback is not None:
        callback(0, DenseDistribution(arr, origin))
    for k in range(1, n + 1):
        new = np.zeros(tuple(np.array(arr.shape) + span))
        for s, p in zip(steps, probs):
            off = s - lo
            sl = tuple(slice(o, o + m) for o, m in zip(off, arr.shape))
            new[sl] += p * arr
        arr = new
        origin = origin + lo
        if callback is not None:
            callback(k, DenseDistribution(arr, origin))
    return DenseDistribution(arr, origin)


def _rational_steps(nu: StepDistribution, n: int, callback=None) -> dict:
    dist = {(0,) * nu.dim: Fraction(1)}
    if callback is not None:
        callback(0, dist)
    for k in range(1, n + 1):
        new: dict = {}
        for x, px in dist.items():
            for s, w in zip(nu.steps, nu.weights):
                y = tuple(a + b for a, b in zip(x, s))
                new[y] = new.get(y, 0) + px * w
        dist = new
        if callback is not None:
            callback(k, dist)
    return dist


def exact_distribution(
    nu: StepDistribution, n: int, *, rational: bool | None = None, max_cells: float = 5e7
):
    """Law of Z_n by direct convolution.

    With ``rational=True`` returns a dict of exact Fractions; otherwise a
    :class:`DenseDistribution` of floats.  The default uses rationals for
    n <= 40.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if rational is None:
        rational = n <= 40
    if rational:
        return _rational_steps(nu, n)
    return _dense_steps(nu, n, max_cells)


# ---------------------------------------------------------------------------
# Fourier-side computations on a finite grid


def _axis_moments(nu: StepDistribution) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis step variance and maximal deviation from the mean."""
    steps = nu.steps_array.astype(float)
    p = nu.probs
    mean = p @ steps
    var = p @ (steps - mean) ** 2
    dev = np.abs(steps - mean).max(axis=0)
    return var, dev


def _tail_distances(nu: StepDistribution, n: int, tol: float) -> np.ndarray:
    """Per-axis distance beyond which Bernstein's inequality bounds the tail by tol/d."""
    var, b = _axis_moments(nu)
    L = math.log(2 * nu.dim / tol)
    n = max(n, 1)
    c = 2 * L * b / 3
    return (c + np.sqrt(c * c + 8 * L * n * var)) / 2


def _tail_bound(nu: StepDistribution, n: int, dist: np.ndarray) -> float:
    """Bernstein bound on P(|Z_n - n*mean|_i >= dist_i for some i)."""
    var, b = _axis_moments(nu)
    total = 0.0
    for v, bi, t in zip(var, b, dist):
        if bi == 0:
            continue
        if t <= 0:
            return 1.0
        total += 2 * math.exp(-t * t / (2 * (n * v + bi * t / 3)))
    return min(1.0, total)


def _wrap_over_times(nu: StepDistribution, Ns, p, n: int) -> float:
    """Largest aliasing bound over times 1..n for target p on grid Ns."""
    mean = np.array([float(m) for m in analyze_mean(nu)])
    p = np.asarray(p, dtype=float)
    ks = np.unique(np.geomspace(1, max(n, 1), 60).astype(int))
    return max(_tail_bound(nu, int(k), np.array(Ns) - np.abs(p - k * mean)) for k in ks)


def _default_grid(nu: StepDistribution, n: int, p: Sequence[int], tol: float) -> tuple[int, ...]:
    mean = np.array([float(m) for m in analyze_mean(nu)])
    p = np.asarray(p, dtype=float)
    t = _tail_distances(nu, n, tol)
    # aliases of p sit at distance N from p; keep them tol-improbable
    N = np.ceil(t + np.abs(p - n * mean) * (n > 0)) + 1
    # also cover smaller times, where the walk sits near the origin
    N = np.maximum(N, np.ceil(t + np.abs(p)) + 1)
    return tuple(int(x) for x in N)


def analyze_mean(nu: StepDistribution) -> tuple[Fraction, ...]:
    return tuple(sum(w * s[i] for s, w in zip(nu.steps, nu.weights)) for i in range(nu.dim))


def _grid_points(Ns: Sequence[int], start: int, stop: int):
    """Integer numerators (with common denominator) of the grid m_i / N_i."""
    Ms = int(np.lcm.reduce(np.array(Ns, dtype=np.int64)))
    axes = [np.arange(start, stop, dtype=np.int64) * (Ms // Ns[0])]
    axes += [np.arange(N, dtype=np.int64) * (Ms // N) for N in Ns[1:]]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1), Ms


def _grid_apply(nu, Ns, func, chunk=1 << 20):
    """Sum func(one_minus_psi, is_one, num, M) over the grid, chunked."""
    inner = int(np.prod(Ns[1:])) if len(Ns) > 1 else 1
    rows = max(1, chunk // inner)
    total = None
    for s in range(0, Ns[0], rows):
        num, M = _grid_points(Ns, s, min(Ns[0], s + rows))
        if M > (1 << 62) // max(1, int(np.abs(nu.steps_array).max()) * nu.dim):
            raise OverflowError("grid denominator too large for exact phases")
        u, one = _grid_one_minus_psi(nu, num, M)
        val = func(u, one, num, M)
        total = val if total is None else total + val
    return total / float(np.prod(Ns))


def _cos_phase(p, num, M):
    if p is None or not any(p):
        return np.ones(len(num))
    r = (num @ np.asarray(p, dtype=np.int64)) % M
    return np.cos(2 * np.pi * r / M)


@dataclass(frozen=True)
class GridReturnProbs:
    probs: np.ndarray
    wrap_error: float
    grid: tuple[int, ...]


def grid_return_probs(
    nu: StepDistribution,
    n_max: int,
    p: Sequence[int] | None = None,
    *,
    grid: Sequence[int] | None = None,
    wrap_tol: float = 1e-12,
) -> GridReturnProbs:
    """P(Z_k = p) for k = 0..n_max by Fourier inversion on a finite grid.

    The grid defaults to a size for which a Bernstein bound keeps the mass of
    aliased points below ``wrap_tol``; ``wrap_error`` reports that bound.
    """
    d = nu.dim
    p = tuple(p) if p is not None else (0,) * d
    Ns = tuple(grid) if grid is not None else _default_grid(nu, n_max, p, wrap_tol)
    if len(Ns) == 1 and d > 1:
        Ns = Ns * d

    def run(u, one, num, M):
        z = 1 - u
        r = (num @ np.asarray(p, dtype=np.int64)) % M
        cur = np.exp(-2j * np.pi * r / M)
        out = np.empty(n_max + 1)
        for k in range(n_max + 1):
            out[k] = cur.real.sum()
            cur = cur * z
        return out

    probs = _grid_apply(nu, Ns, run, chunk=1 << 18)
    mean = np.array([float(m) for m in analyze_mean(nu)])
    wrap = max(
        _tail_bound(nu, k, np.array(Ns) - np.abs(np.array(p) - k * mean)) if k else 0.0
        for k in range(n_max + 1)
    )
    return GridReturnProbs(probs, wrap, Ns)


def grid_distribution(nu: StepDistribution, n: int, *, grid: Sequence[int] | None = None,
                      wrap_tol: float = 1e-12) -> DenseDistribution:
    """Law of Z_n via FFT of Psi^n on a grid centred at the mean position."""
    d = nu.dim
    mean = np.array([float(m) for m in analyze_mean(nu)])
    if grid is None:
        t = _tail_distances(nu, n, wrap_tol)
        grid = tuple(int(2 * math.ceil(x) + 1) for x in t)
    Ns = tuple(grid)
    axes = [np.fft.fftfreq(N) for N in Ns]
    mesh = np.meshgrid(*axes, indexing="ij")
    t = np.stack(mesh, axis=-1)
    vals = psi(nu, t) ** n
    arr = np.fft.fftn(vals).real / np.prod(Ns)  # P(Z_n = k mod N) at index k mod N
    center = np.round(n * mean).astype(np.int64)
    origin = center - np.array(Ns) // 2
    idx = [np.mod(np.arange(N) + o, N) for N, o in zip(Ns, origin)]
    arr = arr[np.ix_(*idx)]
    arr[np.abs(arr) < 1e-300] = 0.0
    return DenseDistribution(np.clip(arr, 0.0, None), origin)


def _series_or_closed(u, one, n, closed, series):
    """Evaluate a power series in z = 1 - u stably near z = 1."""
    out = np.empty(len(u), dtype=complex)
    small = (np.abs(u) * n < 1e-2) | one
    out[small] = series(u[small])
    big = ~small
    out[big] = closed(u[big])
    return out


def _comb(n, k):
    return float(math.comb(int(n), int(k)))


def _green_geometric(u, one, K):
    """sum_{k=1}^K z^k with z = 1 - u."""

    def closed(v):
        z = 1 - v
        return z * (1 - z**K) / v

    def series(v):
        s = np.full(len(v), float(K), dtype=complex)
        for j in range(1, 9):
            s += (-v) ** j * _comb(K + 1, j + 1)
        return s

    return _series_or_closed(u, one, K, closed, series)


def _weighted_geometric(u, one, n):
    """sum_{k=1}^{n-1} (n - k) z^k with z = 1 - u."""

    def closed(v):
        z = 1 - v
        return z / v * ((n - 1) - z * (1 - z ** (n - 1)) / v)

    def series(v):
        s = np.full(len(v), _comb(n + 1, 2) - n, dtype=complex)
        for j in range(1, 9):
            s += (-v) ** j * _comb(n + 1, j + 2)
        return s

    return _series_or_closed(u, one, n, closed, series)


# ---------------------------------------------------------------------------
# Local limit theorem


def step_progression(analysis: WalkAnalysis, k: Sequence[int]) -> tuple[int, int] | None:
    """Times n with k in D + n*ell1, as (first, period); period 0 means a single time.

    Returns None when no such n >= 0 exists.
    """
    k = tuple(int(x) for x in k)
    if not zl.contains(analysis.L, k):
        return None
    ell1 = analysis.ell1
    if analysis.D is None:
        # deterministic walk in dimension one: k = n * ell1
        n, r = divmod(k[0], ell1[0])
        return (n, 0) if r == 0 and n >= 0 else None
    q = analysis.quotient_order
    D = analysis.D
    if q is zl.INFINITE or q == math.inf:
        u = analysis.circle_direction
        den = sum(a * b for a, b in zip(u, ell1))
        num = sum(a * b for a, b in zip(u, k))
        if den == 0 or num % den:
            return None
        n = num // den
        if n < 0 or not zl.contains(D, [a - n * b for a, b in zip(k, ell1)]):
            return None
        return (n, 0)
    for n in range(int(q)):
        if zl.contains(D, [a - n * b for a, b in zip(k, ell1)]):
            return (n, int(q))
    return None


def _in_progression(prog, n) -> bool:
    if prog is None:
        return False
    first, period = prog
    if period == 0:
        return n == first
    return n >= first and (n - first) % period == 0


def llt_main_term(analysis: WalkAnalysis, n: int, k: Sequence[int]) -> float:
    """Gaussian approximation of P(Z_n = k); zero off the coset D + n*ell1."""
    if analysis.D is None:
        raise DegenerateWalk("a single-step walk has no local limit")
    if n <= 0:
        raise ValueError("n must be positive")
    k = tuple(int(x) for x in k)
    if not zl.contains(analysis.D, [a - n * b for a, b in zip(k, analysis.ell1)]):
        return 0.0
    return _llt_density(analysis, n, np.array(k, dtype=float))


def _llt_density(analysis: WalkAnalysis, n, k) -> np.ndarray:
    """Gaussian factor without the coset indicator; vectorised in n."""
    d0 = analysis.d0
    n = np.asarray(n, dtype=float)
    mean = np.array([float(m) for m in analysis.mean])
    B = np.array(analysis.D_basis, dtype=float)  # d0 x d, rows basis vectors
    M = np.array([[float(x) for x in r] for r in analysis.Lambda0])
    # coordinates a of k - n*mean in the D basis (least squares is exact on the span)
    diff = np.asarray(k, dtype=float)[None, :] - n.reshape(-1, 1) * mean[None, :]
    a = np.linalg.lstsq(B.T, diff.T, rcond=None)[0].T
    q = np.einsum("ij,jk,ik->i", a, np.linalg.inv(M), a)
    val = analysis.llt_constant * (2 * np.pi * n.ravel()) ** (-d0 / 2) * np.exp(-q / (2 * n.ravel()))
    return val.reshape(n.shape)


# ---------------------------------------------------------------------------
# Renewal quantities for transient walks


def _require_transient(analysis: WalkAnalysis):
    if analysis.classification in (Classification.RECURRENT_D1, Classification.RECURRENT_D2):
        raise NotTransient(f"walk is {analysis.classification.value}")


def _w_from_u(u):
    a = u.real
    mod2 = a * a + u.imag * u.imag
    return (2 * a - mod2) / mod2


def w_density(nu: StepDistribution, t) -> np.ndarray:
    """w(t) = (1 - |Psi|^2) / |1 - Psi|^2, the Fourier series of the Green sums."""
    t = np.atleast_2d(np.asarray(t, dtype=float))
    phase = t @ nu.steps_array.T.astype(float)
    p = nu.probs
    theta = 2 * np.pi * phase
    u = (2 * np.sin(theta / 2) ** 2) @ p - 1j * (np.sin(theta) @ p)
    if np.any(np.abs(u) < 1e-15):
        raise Singularity("w is singular where Psi = 1")
    return _w_from_u(u)


def _w_exact(nu):
    def f(num, M):
        u, one = _grid_one_minus_psi(nu, num, M)
        if one.any():
            raise Singularity("quadrature node on the annulator")
        return _w_from_u(u)

    return f


def _quad_exponents(analysis: WalkAnalysis) -> tuple[int, ...]:
    d = analysis.d
    if analysis.centered:
        exps = sorted({d - 2, 2, d - 1, d, 4} - {0, -1})
    else:
        exps = sorted({2, d, d + 1, 4})
    return tuple(exps[:3])


def c_w(nu: StepDistribution, *, tol: float = 1e-6, max_points: int = 1 << 24) -> QuadResult:
    """Integral of w over the torus, by extrapolated midpoint quadrature."""
    an = analyze(nu)
    _require_transient(an)
    if an.classification is Classification.DETERMINISTIC:
        return QuadResult(0.0, 0.0, ())
    n0 = 16 if an.d <= 3 else 8
    return torus_integrate(_w_exact(nu), an.d, tol=tol, n0=n0, max_points=max_points,
                           exponents=_quad_exponents(an))


def K_constant(nu: StepDistribution) -> Fraction:
    """Atomic mass of the renewal measure: |Gamma| / |mean| in dimension one, else 0."""
    an = analyze(nu)
    _require_transient(an)
    if an.d > 1:
        return Fraction(0)
    return Fraction(an.Gamma.order) / abs(an.mean[0])


@dataclass(frozen=True)
class GreenSum:
    value: float
    truncated: float
    tail: float
    wrap_error: float
    method: str


def green_sum(
    nu: StepDistribution,
    p: Sequence[int],
    n_trunc: int,
    *,
    method: str = "auto",
    tail: bool = True,
) -> GreenSum:
    """I(p) = 1{p=0} + sum_{k>=1} [P(Z_k = p) + P(Z_k = -p)].

    The sum is computed exactly up to ``n_trunc`` and the remainder is
    estimated from the local limit theorem (omitted when ``tail`` is False).
    """
    an = analyze(nu)
    _require_transient(an)
    p = tuple(int(x) for x in p)
    negp = tuple(-x for x in p)
    if method == "auto":
        method = "convolution" if nu.dim == 1 else "grid"
    wrap = 0.0
    if method == "convolution":
        acc = [0.0]

        def collect(k, dist):
            if k >= 1:
                acc[0] += dist.get(p, 0.0) + dist.get(negp, 0.0)

        _dense_steps(nu, n_trunc, 5e8, collect)
        trunc = acc[0]
    elif method == "grid":
        Ns = _default_grid(nu, n_trunc, p, 1e-13)
        trunc = float(_grid_apply(
            nu, Ns, lambda u, one, num, M: np.sum((2 * _cos_phase(p, num, M) * _green_geometric(u, one, n_trunc)).real)
        ))
        wrap = n_trunc * _wrap_over_times(nu, Ns, p, n_trunc)
    else:
        raise ValueError(f"unknown method {method!r}")
    head = 1.0 if not any(p) else 0.0
    t = _llt_tail(an, p, n_trunc) + _llt_tail(an, negp, n_trunc) if (tail and an.D is not None) else 0.0
    return GreenSum(head + trunc + t, head + trunc, t, wrap, method)


def _llt_tail(an: WalkAnalysis, p, K: int, horizon: int = 200) -> float:
    """Sum over k > K of the local limit approximation of P(Z_k = p)."""
    prog = step_progression(an, p)
    if prog is None:
        return 0.0
    first, period = prog
    if period == 0:
        return float(_llt_density(an, first, p)) if first > K else 0.0
    start = K + 1 + ((first - (K + 1)) % period)
    stop = horizon * K
    ks = np.arange(start, stop + 1, period)
    s = float(np.sum(_llt_density(an, ks, p)))
    if an.centered and an.d0 > 2:
        # remainder beyond the horizon: sum of c k^{-d/2} over the progression
        c = an.llt_constant * (2 * np.pi) ** (-an.d0 / 2)
        s += c / period * stop ** (1 - an.d0 / 2) / (an.d0 / 2 - 1)
    return s


# ---------------------------------------------------------------------------
# Self-intersections


@dataclass(frozen=True)
class SelfIntersectionMean:
    value: float | Fraction
    method: str
    wrap_error: float
    normalized: float | None


def expected_self_intersections(
    nu: StepDistribution,
    n: int,
    p: Sequence[int] | None = None,
    *,
    method: str = "auto",
    normalize: bool = True,
) -> SelfIntersectionMean:
    """E V_{n,p} = n 1{p=0} + sum_{k=1}^{n-1} (n-k) [P(Z_k=p) + P(Z_k=-p)].

    ``normalized`` divides by the growth rate: C n log n for planar recurrent
    walks and C n otherwise (None for one-dimensional recurrent walks).
    """
    an = analyze(nu)
    d = nu.dim
    p = tuple(int(x) for x in p) if p is not None else (0,) * d
    negp = tuple(-x for x in p)
    head = n if not any(p) else 0
    if method == "auto":
        steps = nu.steps_array
        cells = float(np.prod(n * (steps.max(0) - steps.min(0)) + 1))
        method = "exact" if n <= 30 else ("convolution" if cells * n <= 2e9 else "grid")
    wrap = 0.0
    if method == "exact":
        acc = [Fraction(0)]

        def collect(k, dist):
            if 1 <= k <= n - 1:
                acc[0] += (n - k) * (dist.get(p, 0) + dist.get(negp, 0))

        _rational_steps(nu, max(n - 1, 0), collect)
        value = head + acc[0]
    elif method == "convolution":
        acc = [0.0]

        def collect(k, dist):
            if 1 <= k <= n - 1:
                acc[0] += (n - k) * (dist.get(p, 0.0) + dist.get(negp, 0.0))

        _dense_steps(nu, max(n - 1, 0), 5e9, collect)
        value = head + acc[0]
    elif method == "grid":
        Ns = _default_grid(nu, n, p, 1e-13)
        s = _grid_apply(
            nu, Ns, lambda u, one, num, M: np.sum((2 * _cos_phase(p, num, M) * _weighted_geometric(u, one, n)).real)
        )
        value = head + float(s)
        wrap = n * n * _wrap_over_times(nu, Ns, p, n)
    else:
        raise ValueError(f"unknown method {method!r}")
    norm = None
    C = _growth_constant(an) if normalize else None
    if C is not None:
        scale = C * n * math.log(n) if an.classification is Classification.RECURRENT_D2 else C * n
        norm = float(value) / scale if scale > 0 else None
    return SelfIntersectionMean(value, method, wrap, norm)


def _growth_constant(an: WalkAnalysis, cw: float | None = None) -> float | None:
    cls = an.classification
    if cls is Classification.RECURRENT_D1:
        return None
    if cls is Classification.RECURRENT_D2:
        return an.index_L / (math.pi * math.sqrt(float(an.det_Lambda)))
    if cls is Classification.DETERMINISTIC:
        return float(an.Gamma.order) / abs(float(an.mean[0]))
    if cw is None:
        cw = c_w(an.walk).value
    K = float(K_constant(an.walk)) if an.d == 1 else 0.0
    return cw + K


# ---------------------------------------------------------------------------
# Limit kernel measures


@dataclass(frozen=True)
class KernelMeasure:
    """A probability measure on T^d made of atoms, a density and circle arcs.

    ``density`` takes exact grid coordinates ``(num, M)`` and is already
    normalised.  ``circles`` is a list of (offset, direction, weight): the
    uniform measure on the closed curve offset + s*direction, s in [0, 1).
    ``C`` is the growth constant of the self-intersections (None when it is
    path dependent).
    """

    d: int
    atoms: tuple[tuple[tuple[Fraction, ...], float], ...]
    density: Callable[[np.ndarray, int], np.ndarray] | None = None
    density_exponents: tuple[int, ...] = (2, 4)
    circles: tuple[tuple[tuple[Fraction, ...], tuple[int, ...], float], ...] = ()
    C: float | None = None
    c_w: float | None = None
    K: float | None = None
    classification: str = ""
    path_dependent: bool = False
    quad: QuadResult | None = field(default=None, compare=False)

    def integrate(self, g: Callable[[np.ndarray], np.ndarray], *, tol: float = 1e-6,
                  max_points: int = 1 << 24, circle_points: int = 4096) -> float:
        """Integral of g, where g maps float points (m, d) to real values."""
        total = 0.0
        if self.atoms:
            pts = np.array([[float(x) for x in a] for a, _ in self.atoms])
            w = np.array([wt for _, wt in self.atoms])
            total += float(np.dot(w, np.real(g(pts))))
        for off, direction, wt in self.circles:
            s = (np.arange(circle_points) + 0.5) / circle_points
            pts = np.array([float(x) for x in off])[None, :] + s[:, None] * np.array(direction, dtype=float)[None, :]
            total += wt * float(np.mean(np.real(g(pts % 1.0))))
        if self.density is not None:
            dens = self.density

            def f(num, M):
                return dens(num, M) * np.real(g(num / M))

            res = torus_integrate(f, self.d, tol=tol, n0=16 if self.d <= 3 else 8,
                                  max_points=max_points, exponents=self.density_exponents)
            total += res.value
        return total

    def fourier(self, p: Sequence[int], **kw) -> float:
        """Real Fourier coefficient: integral of cos(2 pi <p, t>)."""
        pv = np.asarray(p, dtype=float)
        return self.integrate(lambda t: np.cos(2 * np.pi * (t @ pv)), **kw)

    def total_mass(self, **kw) -> float:
        return self.integrate(lambda t: np.ones(len(t)), **kw)


def _uniform_atoms(group: zl.AnnulatorGroup, mass: float = 1.0):
    w = mass / group.order
    return tuple((pt, w) for pt in group.points)


def limit_kernel(analysis: WalkAnalysis, *, tol: float = 1e-6, max_points: int = 1 << 24) -> KernelMeasure:
    """Limit of V_{n,p} / V_n as a measure on the torus.

    Recurrent and deterministic walks give the uniform measure on Gamma.
    Transient walks give w / C with C = c_w in dimension >= 2; in dimension
    one atoms of total mass K / C sit on Gamma, with C = c_w + K.
    """
    nu = analysis.walk
    cls = analysis.classification
    d = analysis.d
    if cls in (Classification.RECURRENT_D1, Classification.RECURRENT_D2, Classification.DETERMINISTIC):
        return KernelMeasure(
            d, _uniform_atoms(analysis.Gamma), C=_growth_constant(analysis),
            classification=cls.value, path_dependent=cls is Classification.RECURRENT_D1,
            K=float(_growth_constant(analysis)) if cls is Classification.DETERMINISTIC else None,
            c_w=0.0 if cls is Classification.DETERMINISTIC else None,
        )
    quad = c_w(nu, tol=tol, max_points=max_points)
    cw = quad.value
    K = float(K_constant(nu)) if d == 1 else 0.0
    C = cw + K
    wfun = _w_exact(nu)

    def density(num, M):
        return wfun(num, M) / C

    atoms = _uniform_atoms(analysis.Gamma, K / C) if K else ()
    return KernelMeasure(d, atoms, density, _quad_exponents(analysis), C=C, c_w=cw, K=K,
                         classification=cls.value, quad=quad)


def gamma1_measure(analysis: WalkAnalysis) -> KernelMeasure:
    """Haar probability measure on the annulator of D (where |Psi| = 1)."""
    if analysis.circle_direction is None:
        return KernelMeasure(analysis.d, _uniform_atoms(analysis.Gamma1), classification="gamma1")
    w = 1.0 / analysis.Gamma1.order
    circles = tuple((pt, analysis.circle_direction, w) for pt in analysis.Gamma1.points)
    return KernelMeasure(analysis.d, (), circles=circles, classification="gamma1")


def barycenter_symmetrize(nu: StepDistribution) -> StepDistribution:
    """Law of X - X' for independent copies X, X' of the step."""
    acc: dict = {}
    for s, w in zip(nu.steps, nu.weights):
        for s2, w2 in zip(nu.steps, nu.weights):
            k = tuple(a - b for a, b in zip(s, s2))
            acc[k] = acc.get(k, 0) + w * w2
    keys = sorted(acc)
    return StepDistribution(tuple(keys), tuple(acc[k] for k in keys))


def grid_point_probs(nu: StepDistribution, n: int, targets: Sequence[Sequence[int]], *,
                     wrap_tol: float = 1e-12) -> tuple[np.ndarray, float]:
    """P(Z_n = k) for several k at one time n, by Fourier inversion of Psi^n."""
    targets = np.array([tuple(int(x) for x in t) for t in targets], dtype=np.int64).reshape(-1, nu.dim)
    mean = np.array([float(m) for m in analyze_mean(nu)])
    far = np.abs(targets - n * mean[None, :]).max(axis=0)
    t = _tail_distances(nu, n, wrap_tol)
    Ns = tuple(int(math.ceil(a + b)) + 1 for a, b in zip(t, far))

    def run(u, one, num, M):
        zn = (1 - u) ** n
        out = np.empty(len(targets))
        for i, k in enumerate(targets):
            r = (num @ k) % M
            out[i] = np.sum((zn * np.exp(-2j * np.pi * r / M)).real)
        return out

    probs = _grid_apply(nu, Ns, run)
    wrap = _tail_bound(nu, n, np.array(Ns) - far)
    return probs, wrap
