"""Joint cumulants through set partitions, and summation conditions.

Cumulants of order r are sums over the Bell(r) partitions of {1..r}, so the
exact routines refuse orders above 8 (4140 partitions).  Inputs may be
Fractions, in which case every result is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "ArityGuard",
    "set_partitions",
    "bell_number",
    "joint_cumulant",
    "moments_from_cumulants",
    "cumulants_from_moments",
    "moments_from_cumulants_univariate",
    "weighted_sum_cumulant",
    "weighted_sum_cumulant_bruteforce",
    "empirical_cumulants",
    "Profile",
    "SummationReport",
    "summation_condition_check",
    "folner_profile",
    "barycenter_profile",
    "walk_profile",
]

MAX_ORDER = 8


class ArityGuard(ValueError):
    """Requested order exceeds the supported maximum."""


def _guard(r: int):
    if r > MAX_ORDER:
        raise ArityGuard(f"order {r} exceeds {MAX_ORDER}")
    if r < 1:
        raise ValueError("order must be positive")


def set_partitions(items: Sequence) -> Iterable[list[tuple]]:
    """All partitions of ``items`` into non-empty blocks."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [(first,)] + part
        for i, block in enumerate(part):
            yield part[:i] + [(first,) + block] + part[i + 1:]


def bell_number(r: int) -> int:
    """Bell numbers from the Bell triangle (independent of set_partitions)."""
    row = [1]
    for _ in range(r):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[0]


def _lookup(fn, block):
    return fn(tuple(block)) if callable(fn) else fn[tuple(block)]


def joint_cumulant(moments, indices: Sequence):
    """kappa(X_{i_1}, ..., X_{i_r}) from joint moments.

    ``moments`` is a callable or mapping taking a tuple of indices (a block)
    to E[prod X_i].  Uses sum over partitions pi of
    (-1)^{|pi|-1} (|pi|-1)! prod_B E[prod_{i in B} X_i].
    """
    r = len(indices)
    _guard(r)
    pos = list(range(r))
    total = 0
    for part in set_partitions(pos):
        k = len(part)
        term = (-1) ** (k - 1) * math.factorial(k - 1)
        for block in part:
            term = term * _lookup(moments, tuple(indices[i] for i in block))
        total = total + term
    return total


def moments_from_cumulants(cumulants, indices: Sequence):
    """E[prod X_i] = sum over partitions of prod_B kappa(B)."""
    r = len(indices)
    _guard(r)
    total = 0
    for part in set_partitions(list(range(r))):
        term = 1
        for block in part:
            term = term * _lookup(cumulants, tuple(indices[i] for i in block))
        total = total + term
    return total


def cumulants_from_moments(m: Sequence) -> list:
    """Univariate cumulants kappa_1..kappa_r from raw moments m_1..m_r."""
    r = len(m)
    _guard(r)
    kappa = []
    for n in range(1, r + 1):
        k = m[n - 1] - sum(math.comb(n - 1, j - 1) * kappa[j - 1] * m[n - j - 1] for j in range(1, n))
        kappa.append(k)
    return kappa


def moments_from_cumulants_univariate(kappa: Sequence) -> list:
    r = len(kappa)
    _guard(r)
    m = []
    for n in range(1, r + 1):
        m.append(kappa[n - 1] + sum(math.comb(n - 1, j - 1) * kappa[j - 1] * m[n - j - 1] for j in range(1, n)))
    return m


def weighted_sum_cumulant(weights: Mapping, kappa: Callable, displacements: Iterable[Sequence]):
    """r-th cumulant of sum_l R(l) X_l for a stationary field X, regrouped.

    With stationarity kappa(X_{l_1}, ..., X_{l_r}) depends only on the
    displacements p_i = l_i - l_1, so the cumulant equals
    sum_l R(l) sum_p R(l + p_2) ... R(l + p_r) kappa(p_2, ..., p_r),
    where p runs over ``displacements``, the support of kappa.
    """
    R = {tuple(k): v for k, v in weights.items()}
    disp = [tuple(tuple(x) for x in p) for p in displacements]
    total = 0
    for l, w in R.items():
        for p in disp:
            term = w
            for pi in p:
                term = term * R.get(tuple(a + b for a, b in zip(l, pi)), 0)
                if term == 0:
                    break
            if term:
                total = total + term * kappa(p)
    return total


def weighted_sum_cumulant_bruteforce(weights: Mapping, kappa_full: Callable, r: int):
    """Same cumulant by summing over all r-tuples of sites."""
    _guard(r)
    items = list(weights.items())
    total = 0
    for combo in np.ndindex(*(len(items),) * r):
        sites = [items[i][0] for i in combo]
        term = 1
        for i in combo:
            term = term * items[i][1]
        total = total + term * kappa_full(tuple(tuple(s) for s in sites))
    return total


@dataclass(frozen=True)
class EmpiricalCumulants:
    kappa: tuple[float, ...]
    normalized: tuple[float, ...]


def empirical_cumulants(samples, r_max: int = 4) -> EmpiricalCumulants:
    """Plug-in cumulants kappa_1..kappa_rmax and c_r = kappa_r / kappa_2^{r/2}."""
    _guard(r_max)
    x = np.asarray(samples, dtype=float).ravel()
    m = [float(np.mean(x**k)) for k in range(1, r_max + 1)]
    kappa = cumulants_from_moments(m)
    k2 = kappa[1] if r_max >= 2 else float("nan")
    norm = tuple(kappa[r - 1] / k2 ** (r / 2) if k2 > 0 else float("nan") for r in range(1, r_max + 1))
    return EmpiricalCumulants(tuple(kappa), norm)


# ---------------------------------------------------------------------------
# Summation condition


@dataclass(frozen=True)
class Profile:
    """Summary of a weight family R_n: sup, total and sum of squares."""

    n: int
    sup: float
    total: float
    l2sq: float
    label: str = ""

    def ratio(self, r: int) -> float:
        return self.sup ** (r - 1) * self.total / self.l2sq ** (r / 2)


@dataclass(frozen=True)
class SummationReport:
    ns: tuple[int, ...]
    ratios: dict
    decreasing: dict

    @property
    def passed(self) -> bool:
        return all(self.decreasing.values())


def summation_condition_check(profiles: Sequence[Profile], orders: Sequence[int] = (3, 4)) -> SummationReport:
    """Ratios sup^{r-1} * total / l2^r along n, with a strict-decrease verdict."""
    profiles = sorted(profiles, key=lambda p: p.n)
    ratios = {r: tuple(p.ratio(r) for p in profiles) for r in orders}
    dec = {r: all(b < a for a, b in zip(v, v[1:])) for r, v in ratios.items()}
    return SummationReport(tuple(p.n for p in profiles), ratios, dec)


def folner_profile(n: int, d: int = 2) -> Profile:
    """Indicator of a cube with about n points."""
    side = max(1, round(n ** (1 / d)))
    size = side**d
    return Profile(n, 1.0, float(size), float(size), "folner")


def barycenter_profile(nu, n: int, radius: int = 3) -> Profile:
    """R(l) = P(Z_n = l); sup searched near the mean position."""
    from .ergsum import symmetrized_return_probs
    from .rwalk import NotReduced, analyze, grid_point_probs
    from .zlattice import contains

    l2, _ = symmetrized_return_probs(nu, n, [(0,) * nu.dim], method="grid")
    center = [round(float(sum(w * s[i] for s, w in zip(nu.steps, nu.weights))) * n) for i in range(nu.dim)]
    offs = np.array(list(np.ndindex(*(2 * radius + 1,) * nu.dim))) - radius
    targets = [tuple(int(c + o) for c, o in zip(center, off)) for off in offs]
    try:
        an = analyze(nu)
    except NotReduced:
        an = None
    if an is not None and an.D is not None:
        # Z_n lives on the coset D + n*ell1
        on = [t for t in targets if contains(an.D, [a - n * b for a, b in zip(t, an.ell1)])]
        targets = on or targets
    probs, _ = grid_point_probs(nu, n, targets)
    return Profile(n, float(probs.max()), 1.0, float(l2[0]), "barycenter")


def walk_profile(nu, n: int, seed: int) -> Profile:
    """Local times of one sampled path of length n."""
    from .pathsim import local_times, sample_path

    f = local_times(sample_path(nu, n, seed))
    return Profile(n, float(f.sup), float(f.n), float(f.V), "walk")
