"""Exact arithmetic on sublattices of Z^d.

Lattices are represented by a canonical basis in row Hermite normal form:
basis vectors are the rows of an echelon matrix whose pivots are positive
and whose entries above each pivot lie in ``[0, pivot)``.  All arithmetic
uses Python integers, so results are exact for any entry size.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from sympy import Matrix, ZZ
from sympy.matrices.normalforms import smith_normal_decomp

__all__ = [
    "INFINITE",
    "ZeroLattice",
    "NotASublattice",
    "RankDeficient",
    "NotCyclic",
    "IntLattice",
    "AnnulatorGroup",
    "SupportReduction",
    "row_hnf",
    "lattice_from_generators",
    "lattice_index",
    "contains",
    "coordinates",
    "quotient_cyclic_order",
    "annulator",
    "reduce_support",
    "unimodular_inverse",
]

INFINITE = math.inf


class ZeroLattice(ValueError):
    """All generators are zero, so they span the trivial lattice."""


class NotASublattice(ValueError):
    """The putative sublattice is not contained in the ambient lattice."""


class RankDeficient(ValueError):
    """A full-rank lattice was required."""


class NotCyclic(ValueError):
    """The quotient group has more than one nontrivial invariant factor."""


def _as_int_vector(v: Iterable) -> tuple[int, ...]:
    out = []
    for x in v:
        xi = int(x)
        if xi != x:
            raise ValueError(f"non-integer entry {x!r}")
        out.append(xi)
    return tuple(out)


def row_hnf(rows: Sequence[Sequence[int]]) -> tuple[list[list[int]], list[list[int]]]:
    """Row Hermite normal form with transform.

    Returns ``(H, U)`` with ``U @ rows == H``, ``U`` unimodular and ``H`` in
    row echelon form: positive pivots, entries above each pivot reduced into
    ``[0, pivot)`` and zero rows at the bottom.
    """
    H = [list(_as_int_vector(r)) for r in rows]
    m = len(H)
    ncols = len(H[0]) if m else 0
    U = [[int(i == j) for j in range(m)] for i in range(m)]

    def swap(i, j):
        H[i], H[j] = H[j], H[i]
        U[i], U[j] = U[j], U[i]

    def axpy(dst, src, q):
        # row_dst -= q * row_src
        if q:
            H[dst] = [a - q * b for a, b in zip(H[dst], H[src])]
            U[dst] = [a - q * b for a, b in zip(U[dst], U[src])]

    r = 0
    for c in range(ncols):
        if r == m:
            break
        while True:
            nz = [i for i in range(r, m) if H[i][c] != 0]
            if not nz:
                break
            piv = min(nz, key=lambda i: abs(H[i][c]))
            swap(r, piv)
            done = True
            for i in range(r + 1, m):
                if H[i][c]:
                    axpy(i, r, H[i][c] // H[r][c])
                    if H[i][c]:
                        done = False
            if done:
                break
        if all(H[i][c] == 0 for i in range(r, m)):
            continue
        if H[r][c] < 0:
            H[r] = [-a for a in H[r]]
            U[r] = [-a for a in U[r]]
        for i in range(r):
            axpy(i, r, H[i][c] // H[r][c])
        r += 1
    return H, U


@dataclass(frozen=True)
class IntLattice:
    """A sublattice of Z^d given by its canonical Hermite basis.

    ``basis`` holds the ``rank`` basis vectors (rows of the echelon form) and
    ``pivots`` the column of the leading entry of each.
    """

    ambient_dim: int
    basis: tuple[tuple[int, ...], ...]
    pivots: tuple[int, ...]

    @property
    def rank(self) -> int:
        return len(self.basis)

    @property
    def is_full_rank(self) -> bool:
        return self.rank == self.ambient_dim

    def matrix(self) -> np.ndarray:
        """The d x r basis matrix (basis vectors as columns), dtype object."""
        return np.array(self.basis, dtype=object).T

    def __contains__(self, v) -> bool:
        return contains(self, v)

    @property
    def reduction(self) -> "SupportReduction":
        """Unimodular change of variables putting the span onto the first axes."""
        return reduce_support(self.basis)


@dataclass(frozen=True)
class AnnulatorGroup:
    """Finite subgroup of the torus, points given exactly as fractions in [0, 1)."""

    points: tuple[tuple[Fraction, ...], ...]

    @property
    def order(self) -> int:
        return len(self.points)

    def as_array(self) -> np.ndarray:
        return np.array([[float(x) for x in p] for p in self.points], dtype=float)


@dataclass(frozen=True)
class SupportReduction:
    """Result of :func:`reduce_support`.

    ``C`` is unimodular and maps the rational span of the input onto the first
    ``rank`` coordinate axes; ``reduced`` are the images truncated to ``rank``
    coordinates.
    """

    C: tuple[tuple[int, ...], ...]
    C_inv: tuple[tuple[int, ...], ...]
    rank: int
    reduced: tuple[tuple[int, ...], ...]

    def lift(self, w: Sequence[int]) -> tuple[int, ...]:
        """Map a reduced vector back to the original coordinates."""
        full = list(w) + [0] * (len(self.C) - len(w))
        return tuple(sum(c * x for c, x in zip(row, full)) for row in self.C_inv)

    def apply(self, v: Sequence[int]) -> tuple[int, ...]:
        return tuple(sum(c * x for c, x in zip(row, v)) for row in self.C)


def lattice_from_generators(gens: Iterable[Sequence[int]]) -> IntLattice:
    """Lattice generated by integer vectors, in canonical Hermite form."""
    rows = [_as_int_vector(g) for g in gens]
    if not rows:
        raise ZeroLattice("no generators")
    d = len(rows[0])
    if any(len(r) != d for r in rows):
        raise ValueError("generators have different lengths")
    H, _ = row_hnf(rows)
    basis, pivots = [], []
    for row in H:
        nz = [j for j, x in enumerate(row) if x]
        if nz:
            basis.append(tuple(row))
            pivots.append(nz[0])
    if not basis:
        raise ZeroLattice("all generators are zero")
    return IntLattice(d, tuple(basis), tuple(pivots))


def lattice_index(L: IntLattice) -> int | float:
    """Index [Z^d : L], or ``INFINITE`` when L is not of full rank."""
    if not L.is_full_rank:
        return INFINITE
    return math.prod(L.basis[i][c] for i, c in enumerate(L.pivots))


def coordinates(L: IntLattice, v: Sequence[int]) -> tuple[int, ...] | None:
    """Integer coordinates of ``v`` in the Hermite basis, or None if v is not in L."""
    v = list(_as_int_vector(v))
    if len(v) != L.ambient_dim:
        raise ValueError("dimension mismatch")
    coef = []
    piv_of = {c: i for i, c in enumerate(L.pivots)}
    for j in range(L.ambient_dim):
        if j in piv_of:
            i = piv_of[j]
            p = L.basis[i][j]
            if v[j] % p:
                return None
            q = v[j] // p
            coef.append(q)
            if q:
                v = [a - q * b for a, b in zip(v, L.basis[i])]
        elif v[j]:
            return None
    return tuple(coef)


def contains(L: IntLattice, v: Sequence[int]) -> bool:
    return coordinates(L, v) is not None


def _det_int(M: list[list[int]]) -> int:
    """Integer determinant by fraction-free (Bareiss) elimination."""
    A = [row[:] for row in M]
    n = len(A)
    sign, prev = 1, 1
    for k in range(n - 1):
        if A[k][k] == 0:
            sw = next((i for i in range(k + 1, n) if A[i][k]), None)
            if sw is None:
                return 0
            A[k], A[sw] = A[sw], A[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) // prev
        prev = A[k][k]
    return sign * A[-1][-1] if n else 1


def _invariant_factors(rows: list[list[int]]) -> list[int]:
    """Invariant factors of a square integer matrix from its determinantal divisors.

    The k-th divisor is the gcd of all k x k minors; consecutive ratios give the
    Smith diagonal.  Cheaper than a full Smith decomposition for small sizes.
    """
    n = len(rows)
    divisors = [1]
    for k in range(1, n + 1):
        g = 0
        for ri in itertools.combinations(range(n), k):
            for ci in itertools.combinations(range(n), k):
                g = math.gcd(g, _det_int([[rows[i][j] for j in ci] for i in ri]))
                if g == 1:
                    break
            if g == 1:
                break
        divisors.append(g)
    return [divisors[k] // divisors[k - 1] if divisors[k - 1] else 0 for k in range(1, n + 1)]


def quotient_cyclic_order(
    L: IntLattice, D: IntLattice, generator: Sequence[int] | None = None
) -> int | float:
    """Order of L/D, checking that the quotient is cyclic.

    When ``generator`` is given, it must generate the quotient.  Returns
    ``INFINITE`` when D has smaller rank than L.
    """
    if D.ambient_dim != L.ambient_dim:
        raise ValueError("dimension mismatch")
    coords = []
    for b in D.basis:
        c = coordinates(L, b)
        if c is None:
            raise NotASublattice(f"{b} is not in L")
        coords.append(list(c))
    if D.rank < L.rank:
        return INFINITE
    factors = _invariant_factors(coords)
    if sum(f > 1 for f in factors) > 1:
        raise NotCyclic(f"invariant factors {factors}")
    order = math.prod(factors)
    if generator is not None:
        if coordinates(L, generator) is None:
            raise NotASublattice(f"{tuple(generator)} is not in L")
        g = _as_int_vector(generator)
        k = next(k for k in range(1, order + 1) if contains(D, [k * x for x in g]))
        if k != order:
            raise NotCyclic(f"{g} has order {k} in a quotient of order {order}")
    return order


def annulator(L: IntLattice) -> AnnulatorGroup:
    """The finite group {t in T^d : <l, t> in Z for all l in L}.

    Computed from a Smith decomposition of the basis, so the number of points
    equals the index of L.
    """
    if not L.is_full_rank:
        raise RankDeficient("annulator of a rank-deficient lattice is not finite")
    smf, _, t = smith_normal_decomp(Matrix(L.basis), domain=ZZ)
    d = L.ambient_dim
    diag = [abs(int(smf[i, i])) for i in range(d)]
    tm = [[int(t[i, j]) for j in range(d)] for i in range(d)]
    pts = set()
    for ks in itertools.product(*(range(n) for n in diag)):
        y = [Fraction(k, n) for k, n in zip(ks, diag)]
        p = tuple((sum(tm[i][j] * y[j] for j in range(d))) % 1 for i in range(d))
        pts.add(p)
    return AnnulatorGroup(tuple(sorted(pts)))


def unimodular_inverse(C: Sequence[Sequence[int]]) -> tuple[tuple[int, ...], ...]:
    inv = Matrix(C).inv()
    return tuple(tuple(int(inv[i, j]) for j in range(inv.shape[1])) for i in range(inv.shape[0]))


def reduce_support(vectors: Iterable[Sequence[int]]) -> SupportReduction:
    """Find unimodular C sending the span of ``vectors`` onto the first r axes."""
    vecs = [_as_int_vector(v) for v in vectors]
    if not vecs:
        raise ZeroLattice("no vectors")
    d = len(vecs[0])
    # columns are the vectors; row operations give C @ M = echelon
    M = [[v[i] for v in vecs] for i in range(d)]
    H, U = row_hnf(M)
    rank = sum(any(x for x in row) for row in H)
    reduced = tuple(tuple(H[i][j] for i in range(rank)) for j in range(len(vecs)))
    C = tuple(tuple(r) for r in U)
    return SupportReduction(C, unimodular_inverse(C), rank, reduced)
