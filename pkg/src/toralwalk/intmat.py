"""Small exact matrix helpers over Z and Q (tuples of ints or Fractions)."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

Mat = tuple[tuple, ...]

__all__ = ["as_matrix", "identity", "matmul", "matvec", "transpose", "det", "inverse",
           "matpow", "is_integral", "to_int"]


def as_matrix(rows: Sequence[Sequence]) -> Mat:
    m = tuple(tuple(r) for r in rows)
    if not m or any(len(r) != len(m) for r in m):
        raise ValueError("expected a non-empty square matrix")
    return m


def identity(n: int) -> Mat:
    return tuple(tuple(int(i == j) for j in range(n)) for i in range(n))


def matmul(A: Mat, B: Mat) -> Mat:
    Bt = tuple(zip(*B))
    return tuple(tuple(sum(a * b for a, b in zip(row, col)) for col in Bt) for row in A)


def matvec(A: Mat, v: Sequence) -> tuple:
    return tuple(sum(a * x for a, x in zip(row, v)) for row in A)


def transpose(A: Mat) -> Mat:
    return tuple(tuple(c) for c in zip(*A))


def det(A: Mat) -> Fraction:
    M = [list(map(Fraction, r)) for r in A]
    n = len(M)
    out = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if M[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
            out = -out
        out *= M[c][c]
        for r in range(c + 1, n):
            f = M[r][c] / M[c][c]
            if f:
                M[r] = [a - f * b for a, b in zip(M[r], M[c])]
    return out


def inverse(A: Mat) -> Mat:
    """Exact inverse; entries are ints when they happen to be integral."""
    n = len(A)
    M = [list(map(Fraction, r)) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(A)]
    for c in range(n):
        piv = next((r for r in range(c, n) if M[r][c] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        M[c], M[piv] = M[piv], M[c]
        p = M[c][c]
        M[c] = [x / p for x in M[c]]
        for r in range(n):
            if r != c and M[r][c] != 0:
                f = M[r][c]
                M[r] = [a - f * b for a, b in zip(M[r], M[c])]
    return to_int(tuple(tuple(r[n:]) for r in M), strict=False)


def is_integral(A) -> bool:
    if isinstance(A, tuple) and A and isinstance(A[0], tuple):
        return all(Fraction(x).denominator == 1 for r in A for x in r)
    return all(Fraction(x).denominator == 1 for x in A)


def to_int(A: Mat, strict: bool = True) -> Mat:
    if is_integral(A):
        return tuple(tuple(int(x) for x in r) for r in A)
    if strict:
        raise ValueError("matrix is not integral")
    return A


def matpow(A: Mat, e: int, A_inv: Mat | None = None) -> Mat:
    if e < 0:
        A = A_inv if A_inv is not None else inverse(A)
        e = -e
    out = identity(len(A))
    base = A
    while e:
        if e & 1:
            out = matmul(out, base)
        base = matmul(base, base)
        e >>= 1
    return out
