import itertools
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from toralwalk import cumulant as cu

BELL = [1, 1, 2, 5, 15, 52, 203, 877, 4140]


@pytest.mark.parametrize("r", range(0, 8))
def test_partition_count_is_bell(r):
    parts = list(cu.set_partitions(range(r)))
    assert len(parts) == BELL[r] == cu.bell_number(r)
    # every partition covers each element exactly once
    for p in parts:
        assert sorted(x for b in p for x in b) == list(range(r))


def test_arity_guard():
    with pytest.raises(cu.ArityGuard):
        cu.joint_cumulant(lambda b: 1, list(range(9)))
    with pytest.raises(cu.ArityGuard):
        cu.cumulants_from_moments([1] * 9)


fractions = st.fractions(min_value=-5, max_value=5, max_denominator=12)


@given(st.lists(fractions, min_size=1, max_size=6))
def test_univariate_round_trip_exact(kappa):
    m = cu.moments_from_cumulants_univariate(kappa)
    assert cu.cumulants_from_moments(m) == kappa


def test_poisson_cumulants():
    # all cumulants of Poisson(lam) equal lam; moments are Touchard polynomials
    lam = Fraction(3, 7)
    m = cu.moments_from_cumulants_univariate([lam] * 6)
    touchard = [sum(_stirling2(n, k) * lam**k for k in range(n + 1)) for n in range(1, 7)]
    assert m == touchard


def _stirling2(n, k):
    return sum((-1) ** (k - j) * math.comb(k, j) * j**n for j in range(k + 1)) // math.factorial(k)


@given(st.dictionaries(st.integers(0, 2), fractions, min_size=3, max_size=3),
       st.lists(st.integers(0, 2), min_size=1, max_size=6))
def test_multivariate_round_trip_exact(base, idx):
    """Joint moments built from arbitrary cumulants give those cumulants back."""
    rng = random.Random(hash(tuple(idx)))
    cache = {}

    def kappa(block):
        key = tuple(sorted(block))
        if key not in cache:
            cache[key] = Fraction(rng.randint(-4, 4), rng.randint(1, 5)) if len(key) > 1 else base[key[0]]
        return cache[key]

    def moment(block):
        return cu.moments_from_cumulants(kappa, block)

    assert cu.joint_cumulant(moment, idx) == kappa(tuple(idx))


@pytest.mark.parametrize("r", [3, 4, 5, 6])
def test_gaussian_higher_cumulants_vanish(r):
    """Isserlis moments of a Gaussian vector have zero cumulants beyond order 2."""
    rng = np.random.default_rng(r)
    A = rng.normal(size=(4, 4))
    cov = A @ A.T
    sd = np.sqrt(np.diag(cov))
    cov = cov / np.outer(sd, sd)  # unit variances keep the moments of order one

    def moment(block):
        if len(block) % 2:
            return 0.0
        total = 0.0
        for p in cu.set_partitions(list(range(len(block)))):
            if all(len(b) == 2 for b in p):
                total += math.prod(cov[block[a], block[b]] for a, b in p)
        return total

    for idx in itertools.islice(itertools.product(range(4), repeat=r), 0, None, 37):
        assert abs(cu.joint_cumulant(moment, idx)) < 1e-12


def test_second_cumulant_is_covariance():
    m = {(0,): 2.0, (1,): -1.0, (0, 1): 5.0, (1, 0): 5.0}
    assert cu.joint_cumulant(m, (0, 1)) == pytest.approx(5.0 + 2.0)


@pytest.mark.parametrize("r", [2, 3, 4])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_regrouped_weighted_cumulant(r, seed):
    """Stationary field with finite-range cumulants: regrouped sum equals the r-fold sum."""
    rng = np.random.default_rng(seed)
    sites = [(i, j) for i in range(3) for j in range(2)]
    R = {s: float(rng.normal()) for s in sites}
    rng_k = 1
    table = {}

    def kappa(disp):
        # depends only on displacements; vanishes beyond range 1
        if any(max(abs(a) for a in p) > rng_k for p in disp):
            return 0.0
        key = tuple(sorted(disp))
        if key not in table:
            table[key] = float(rng.normal())
        return table[key]

    def kappa_full(points):
        base = points[0]
        return kappa(tuple(tuple(a - b for a, b in zip(q, base)) for q in points[1:]))

    box = [(a, b) for a in range(-1, 2) for b in range(-1, 2)]
    disp = list(itertools.product(box, repeat=r - 1))
    brute = cu.weighted_sum_cumulant_bruteforce(R, kappa_full, r)
    reg = cu.weighted_sum_cumulant(R, kappa, disp)
    assert abs(reg - brute) < 1e-12 * max(1.0, abs(brute))


def test_empirical_cumulants_of_exponential():
    x = np.random.default_rng(0).exponential(size=400_000)
    c = cu.empirical_cumulants(x, 4)
    # Exp(1): kappa_r = (r-1)!
    assert c.kappa[1] == pytest.approx(1.0, rel=0.02)
    assert c.normalized[2] == pytest.approx(2.0, rel=0.05)
    assert c.normalized[3] == pytest.approx(6.0, rel=0.15)


def test_profile_ratio():
    p = cu.Profile(10, sup=2.0, total=10.0, l2sq=25.0)
    assert p.ratio(3) == pytest.approx(4 * 10 / 125)


def test_folner_ratios_decrease():
    rep = cu.summation_condition_check([cu.folner_profile(n) for n in (10**3, 10**4, 10**5)])
    assert rep.passed
    assert rep.ratios[3][0] == pytest.approx(1 / math.sqrt(1024), rel=1e-12)
