"""Ergodic sums along orbits of a toral action, computed exactly.

Points are rational with a prime denominator q: x = y / q with y in
(Z/q)^rho.  Integer matrices act on y modulo q without rounding, so an orbit
A^{Z_k} x is followed exactly for arbitrarily many steps.  Only the final
evaluation f(x) uses floating point.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import sympy

from . import intmat
from .pathsim import WalkPath, LocalTimeField, make_rng
from .rwalk import StepDistribution, barycenter_symmetrize, DenseDistribution, _dense_steps, \
    _tail_bound, _tail_distances
from .toralact import SpectralDensity, ToralAction, TrigPoly, spectral_density

__all__ = [
    "BadModulus",
    "EndomorphismNegativePower",
    "PointSet",
    "ModMatrix",
    "sample_points",
    "all_points",
    "quenched_sums",
    "quenched_sums_local_time",
    "rotated_rectangle_sums",
    "barycenter_norm_sq",
    "symmetrized_return_probs",
    "modular_power",
]

POINT_STREAM = (1 << 63) + 7


class BadModulus(ValueError):
    """The modulus is not a suitable prime for the action."""


class EndomorphismNegativePower(ValueError):
    """A non-invertible generator would need a negative power."""


@dataclass(frozen=True)
class PointSet:
    q: int
    y: np.ndarray  # (count, rho) int64 in [0, q)

    @property
    def count(self) -> int:
        return len(self.y)

    @property
    def x(self) -> np.ndarray:
        return self.y / self.q


def _check_modulus(q: int, action: ToralAction | None):
    if q < 3 or q >= (1 << 31) or not sympy.isprime(q):
        raise BadModulus(f"q = {q} must be a prime below 2^31")
    if action is not None:
        for dt in action.dets:
            if dt % q == 0:
                raise BadModulus(f"q = {q} divides a determinant")
            if q <= 2 * abs(dt):
                raise BadModulus(f"q = {q} is not larger than twice |det| = {abs(dt)}")


def sample_points(q: int, count: int, seed: int, rho: int, action: ToralAction | None = None) -> PointSet:
    """Uniform points of (Z/q)^rho, i.e. x = y/q, from the seed's point stream."""
    _check_modulus(q, action)
    rng = make_rng(seed, POINT_STREAM)
    return PointSet(q, rng.integers(0, q, size=(count, rho), dtype=np.int64))


def all_points(q: int, rho: int) -> PointSet:
    """Every point of (Z/q)^rho (q^rho of them)."""
    _check_modulus(q, None)
    grid = np.array(list(itertools.product(range(q), repeat=rho)), dtype=np.int64)
    return PointSet(q, grid)


class ModMatrix:
    """Integer matrix acting on points modulo q without rounding or overflow.

    When every partial sum stays below 2^53 the product is formed in float64,
    where it is exact.  Reduction subtracts q * floor(z / q); rounding in the
    quotient can leave a representative in (-q, 2q), which is still exactly
    congruent, so results are canonicalised only on request.  Otherwise the
    reduced matrix is split into 16-bit halves and int64 arithmetic is used.
    """

    def __init__(self, M, q: int):
        self.q = q
        M = [[int(x) for x in r] for r in M]
        rho = len(M)
        big = max(abs(x) for r in M for x in r)
        self.Mint = M
        if big * 2 * q * rho < (1 << 53):
            self.mode = "float"
            self.Mf = np.array(M, dtype=float)
        else:
            self.mode = "split"
            red = np.array([[x % q for x in r] for r in M], dtype=np.int64)
            self.hi, self.lo = np.divmod(red, 1 << 16)

    def apply_cols(self, yT: np.ndarray) -> np.ndarray:
        """Act on points stored as columns (rho, count) of floats; loose representatives."""
        z = self.Mf @ yT
        return z - self.q * np.floor(z * (1.0 / self.q))

    def apply(self, y: np.ndarray) -> np.ndarray:
        """Act on points stored as rows (count, rho); returns int64 in [0, q)."""
        q = self.q
        y = np.asarray(y)
        if self.mode == "float":
            z = self.apply_cols(np.asarray(y, dtype=float).T).T
            return np.mod(np.rint(z).astype(np.int64), q)
        y = np.mod(y.astype(np.int64), q)
        lo = (y @ self.lo.T) % q
        hi = (y @ self.hi.T) % q
        return (hi * (1 << 16) % q + lo) % q


class _ColumnEvaluator:
    """Evaluate a trigonometric polynomial at exact points stored as columns."""

    def __init__(self, f: TrigPoly, q: int):
        self.q = q
        self.real = f.is_real
        items = sorted(f.coeffs.items())
        if self.real:
            half, seen = [], set()
            for k, c in items:
                if k in seen:
                    continue
                neg = tuple(-x for x in k)
                seen.update((k, neg))
                half.append((k, c if neg == k else 2 * c))
            items = half
        self.K = np.array([k for k, _ in items], dtype=float).reshape(-1, f.rho)
        self.c = np.array([c for _, c in items], dtype=complex)
        self.ok = float(np.abs(self.K).sum(axis=1).max(initial=0)) * 2 * q < 2.0**53
        self.has_imag = bool(np.any(self.c.imag != 0))

    def __call__(self, yT: np.ndarray) -> np.ndarray:
        r = self.K @ yT
        theta = (2 * np.pi / self.q) * (r - self.q * np.floor(r * (1.0 / self.q)))
        if self.real:
            out = self.c.real @ np.cos(theta)
            if self.has_imag:
                out -= self.c.imag @ np.sin(theta)
            return out
        return self.c @ np.exp(1j * theta)


def modular_power(action: ToralAction, n: Sequence[int], q: int) -> tuple:
    """A^n reduced mod q, using exact integer inverses for automorphisms."""
    out = intmat.identity(action.rho)
    for A, Ai, e in zip(action.generators, action.inverses, n):
        e = int(e)
        if e < 0 and action.kind != "automorphism":
            raise EndomorphismNegativePower(f"negative power {e} of an endomorphism")
        base = A if e >= 0 else Ai
        e = abs(e)
        base = tuple(tuple(int(x) % q for x in r) for r in base)
        while e:
            if e & 1:
                out = tuple(tuple(x % q for x in r) for r in intmat.matmul(out, base))
            base = tuple(tuple(x % q for x in r) for r in intmat.matmul(base, base))
            e >>= 1
    return out


def _step_matrices(action: ToralAction, nu: StepDistribution, q: int) -> list[ModMatrix]:
    mats = []
    for s in nu.steps:
        if action.kind != "automorphism" and any(x < 0 for x in s):
            raise EndomorphismNegativePower(f"step {s} has a negative entry")
        P = action.power(s)
        mats.append(ModMatrix(P, q))
    return mats


def _eval(f: TrigPoly, y: np.ndarray, q: int, real: bool) -> np.ndarray:
    return f.eval_modular(y, q, real)


def quenched_sums(action: ToralAction, f: TrigPoly, path: WalkPath, points: PointSet) -> np.ndarray:
    """S_n(omega, x) = sum_{k<n} f(A^{Z_k} x) at every point, updated step by step."""
    if path.walk.dim != action.d:
        raise ValueError("walk dimension differs from the number of generators")
    q = points.q
    mats = _step_matrices(action, path.walk, q)
    real = f.is_real
    ev = _ColumnEvaluator(f, q)
    if ev.ok and all(m.mode == "float" for m in mats):
        yT = points.y.T.astype(float)
        S = ev(yT)
        for j in path.step_index:
            yT = mats[j].apply_cols(yT)
            S = S + ev(yT)
        return S
    y = points.y.copy()
    S = _eval(f, y, q, real)
    for j in path.step_index:
        y = mats[j].apply(y)
        S = S + _eval(f, y, q, real)
    return S


def quenched_sums_local_time(action: ToralAction, f: TrigPoly, field: LocalTimeField,
                             points: PointSet) -> np.ndarray:
    """Same sums regrouped by sites: sum_l R_n(l) f(A^l x)."""
    q = points.q
    real = f.is_real
    S = 0
    for site, r in zip(field.sites, field.counts):
        y = ModMatrix(modular_power(action, site, q), q).apply(points.y)
        S = S + int(r) * _eval(f, y, q, real)
    return S


def rotated_rectangle_sums(action: ToralAction, f: TrigPoly, N: Sequence[int], theta: Sequence[float],
                           points: PointSet) -> np.ndarray:
    """sum over l in prod [0, N_i) of e(<l, theta>) f(A^l x), complex valued."""
    q = points.q
    d = action.d
    N = [int(x) for x in N]
    if len(N) != d or len(theta) != d:
        raise ValueError("rectangle and theta must have one entry per generator")
    gens = [ModMatrix(A, q) for A in action.generators]
    theta = np.asarray(theta, dtype=float)
    acc = np.zeros(points.count, dtype=complex)

    def walk(axis: int, y: np.ndarray, phase: float):
        nonlocal acc
        for l in range(N[axis]):
            if axis == d - 1:
                acc += np.exp(2j * np.pi * phase) * f.eval_modular(y, q)
            else:
                walk(axis + 1, y, phase)
            phase += theta[axis]
            if l < N[axis] - 1:
                y = gens[axis].apply(y)

    walk(0, points.y.copy(), 0.0)
    return acc


def symmetrized_return_probs(nu: StepDistribution, n: int, targets: Sequence[Sequence[int]], *,
                             method: str = "auto", wrap_tol: float = 1e-13) -> tuple[np.ndarray, float]:
    """P(Z~_n = l) for the symmetrised walk, at each target l.

    ``grid`` integrates |Psi|^{2n} cos(2 pi <l,t>) over a finite grid;
    ``convolution`` convolves the symmetrised steps directly.
    Returns the probabilities and a bound on the aliasing error.
    """
    sym = barycenter_symmetrize(nu)
    targets = np.array([tuple(int(x) for x in t) for t in targets], dtype=np.int64).reshape(-1, nu.dim)
    if method == "auto":
        method = "convolution" if n <= 25 else "grid"
    if method == "convolution":
        dist = _dense_steps(sym, n, 5e8)
        return np.array([dist.get(tuple(t), 0.0) for t in targets]), 0.0
    if method != "grid":
        raise ValueError(f"unknown method {method!r}")
    reach = np.abs(targets).max(axis=0) if len(targets) else np.zeros(nu.dim)
    Ns = tuple(int(math.ceil(t + r)) + 1 for t, r in zip(_tail_distances(sym, n, wrap_tol), reach))
    steps = nu.steps_array
    probs = nu.probs
    M = int(np.lcm.reduce(np.array(Ns, dtype=np.int64)))
    inner = int(np.prod(Ns[1:])) if len(Ns) > 1 else 1
    rows = max(1, (1 << 20) // inner)
    out = np.zeros(len(targets))
    for s in range(0, Ns[0], rows):
        axes = [np.arange(s, min(Ns[0], s + rows), dtype=np.int64) * (M // Ns[0])]
        axes += [np.arange(Nk, dtype=np.int64) * (M // Nk) for Nk in Ns[1:]]
        num = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
        z = np.zeros(len(num), dtype=complex)
        for j in range(len(steps)):
            z += probs[j] * np.exp(2j * np.pi * ((num @ steps[j]) % M) / M)
        mod2n = np.abs(z) ** (2 * n)
        for i, t in enumerate(targets):
            out[i] += np.sum(mod2n * np.cos(2 * np.pi * ((num @ t) % M) / M))
    out /= float(np.prod(Ns))
    wrap = _tail_bound(sym, n, np.array(Ns) - reach)
    return out, wrap


@dataclass(frozen=True)
class BarycenterNorm:
    n: int
    value: float
    support: int
    wrap_error: float


def barycenter_norm_sq(action: ToralAction, f: TrigPoly, nu: StepDistribution, n: int, *,
                       sd: SpectralDensity | None = None, bound: int = 12, method: str = "auto") -> BarycenterNorm:
    """||P^n f||_2^2 = sum_l P(Z~_n = l) phi_f^(l) for the barycenter operator P."""
    if sd is None:
        sd = spectral_density(action, f, bound)
    coeffs = {k: v for k, v in sd.fourier_support().items() if abs(v) > 0}
    keys = list(coeffs)
    probs, wrap = symmetrized_return_probs(nu, n, keys, method=method)
    val = sum(p * coeffs[k].real for p, k in zip(probs, keys))
    return BarycenterNorm(n, float(val), len(keys), wrap)
