import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from toralwalk import intmat
from toralwalk.quadrature import midpoint_sum, torus_integrate


def test_trig_poly_exact_on_grid():
    f = lambda num, M: 1 + np.cos(2 * np.pi * num[:, 0] / M) * np.cos(2 * np.pi * num[:, 1] / M)
    assert midpoint_sum(f, 8, 2) == pytest.approx(1.0, abs=1e-14)


def test_log_singularity_with_extrapolation():
    # integral of -log|2 sin(pi t)| over [0,1) is 0
    f = lambda num, M: -np.log(np.abs(2 * np.sin(np.pi * num[:, 0] / M)))
    res = torus_integrate(f, 1, tol=1e-8, exponents=(1, 2, 3))
    assert abs(res.value) < 1e-6


def test_smooth_integrand_early_exit():
    f = lambda num, M: 1.0 / (2 + np.cos(2 * np.pi * num[:, 0] / M))
    res = torus_integrate(f, 1, tol=1e-12)
    assert res.value == pytest.approx(1 / math.sqrt(3), abs=1e-12)


@given(st.lists(st.lists(st.integers(-5, 5), min_size=3, max_size=3), min_size=3, max_size=3))
def test_intmat_inverse(rows):
    if intmat.det(rows) == 0:
        return
    inv = intmat.inverse(rows)
    prod = intmat.matmul(rows, inv)
    assert prod == intmat.identity(3)


def test_intmat_power():
    A = ((2, 1), (1, 1))
    Ai = intmat.inverse(A)
    assert intmat.matpow(A, -3, Ai) == intmat.inverse(intmat.matpow(A, 3))
    assert intmat.det(A) == Fraction(1)
