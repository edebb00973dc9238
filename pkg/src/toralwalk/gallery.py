"""Worked examples of commuting toral maps, with walks where relevant."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from . import intmat
from .rwalk import StepDistribution
from .toralact import ToralAction, TrigPoly, action_from_generators

__all__ = ["GalleryEntry", "example_gallery", "GALLERY_NAMES"]

UNITS_A = (
    ((-3, -3, 1), (10, 9, -3), (-30, -26, 9)),
    ((11, 1, -1), (-10, -1, 1), (10, 2, -1)),
)
UNITS_B = (
    ((-59, -245, 85), (170, 706, -245), (-490, -2035, 706)),
    ((161, 4, -18), (-36, -1, 4), (8, 0, -1)),
)
# companion matrix of x^4 + 5x^3 + 7x^2 + 5x + 1, and A + I
T4_A = ((0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1), (-1, -5, -7, -5))


@dataclass(frozen=True)
class GalleryEntry:
    name: str
    action: ToralAction
    walk: StepDistribution | None = None
    function: TrigPoly | None = None
    matrices: dict = field(default_factory=dict)
    description: str = ""


def _t3_units(gens, name, desc):
    return GalleryEntry(name, action_from_generators(gens), function=TrigPoly.cos((1, 0, 0)),
                        description=desc)


def _t3_rw() -> GalleryEntry:
    A1, A2 = UNITS_A
    A1i, A2i = intmat.inverse(A1), intmat.inverse(A2)
    B1 = intmat.matmul(intmat.matmul(A1, A1), A2)
    B2 = intmat.matmul(A1, intmat.matpow(A2i, 2))
    B3 = intmat.matmul(intmat.matpow(A1i, 3), A2)
    walk = StepDistribution(((2, 1), (1, -2), (-3, 1)), (Fraction(1, 3),) * 3)
    return GalleryEntry(
        "t3-rw",
        action_from_generators(UNITS_A),
        walk=walk,
        function=TrigPoly.cos((1, 0, 0)),
        matrices={"B1": B1, "B2": B2, "B3": B3},
        description="centred planar walk on the unit group of a cubic field, steps A1^2 A2, A1 A2^-2, A1^-3 A2",
    )


def _t4_simple() -> GalleryEntry:
    B = tuple(tuple(a + int(i == j) for j, a in enumerate(row)) for i, row in enumerate(T4_A))
    return GalleryEntry(
        "t4-simple",
        action_from_generators((T4_A, B)),
        function=TrigPoly.cos((1, 0, 0, 0)),
        matrices={"A": T4_A, "B": B},
        description="companion matrix A of x^4+5x^3+7x^2+5x+1 and A+I on T^4",
    )


def _t1_multiplicative() -> GalleryEntry:
    # x -> 2x, 3x, 5x on the circle; walk steps are exponent vectors of 2, 3, 5, 6, 15
    act = action_from_generators((((2,),), ((3,),), ((5,),)), kind="endomorphism")
    walk = StepDistribution(
        ((1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0), (0, 1, 1)),
        (Fraction(1, 8), Fraction(2, 8), Fraction(1, 8), Fraction(3, 8), Fraction(1, 8)),
    )
    return GalleryEntry("t1-multiplicative", act, walk=walk, function=TrigPoly.cos((1,)),
                        description="multiplications by 2, 3 and 5 on the circle")


def _t3_pair() -> GalleryEntry:
    walk = StepDistribution(((1, 0), (0, 1)), (Fraction(1, 2), Fraction(1, 2)))
    return GalleryEntry("t3-pair", action_from_generators(UNITS_A), walk=walk,
                        function=TrigPoly.cos((1, 0, 0)),
                        description="average of two commuting automorphisms")


def _t3_line() -> GalleryEntry:
    A1 = UNITS_A[0]
    walk = StepDistribution(((1,), (-1,)), (Fraction(3, 4), Fraction(1, 4)))
    f = TrigPoly(3, {(1, 0, 0): 0.5, (-1, 0, 0): 0.5})
    g = intmat.transpose(A1)
    k = tuple(int(x) for x in intmat.matvec(g, (1, 0, 0)))
    co = dict(f.coeffs)
    co[k] = 0.5
    co[tuple(-x for x in k)] = 0.5
    return GalleryEntry("t3-line", action_from_generators((A1,)), walk=walk, function=TrigPoly(3, co),
                        description="one automorphism driven by a drifting walk on Z")


_BUILDERS = {
    "t3-units-a": lambda: _t3_units(UNITS_A, "t3-units-a", "two commuting units of a cubic field"),
    "t3-units-b": lambda: _t3_units(UNITS_B, "t3-units-b", "two commuting units of another cubic field"),
    "t4-simple": _t4_simple,
    "t3-rw": _t3_rw,
    "t1-multiplicative": _t1_multiplicative,
    "t3-pair": _t3_pair,
    "t3-line": _t3_line,
}

GALLERY_NAMES = tuple(_BUILDERS)


def example_gallery(name: str) -> GalleryEntry:
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise KeyError(f"unknown example {name!r}; choose from {', '.join(GALLERY_NAMES)}") from None
