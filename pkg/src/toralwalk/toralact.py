"""Commuting integer matrices acting on the torus, and spectral densities.

A Z^d action is given by commuting matrices A_1, ..., A_d in M(rho, Z).  It
acts on points by x -> A^n x and on characters by the transposes:
f(A^n x) has Fourier coefficients carried by (A^n)^T k.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
import sympy

from . import intmat
from .intmat import Mat

__all__ = [
    "NonCommuting",
    "Singular",
    "NotUnimodular",
    "AmbiguousOrbit",
    "ToralAction",
    "TrigPoly",
    "ErgodicityCertificate",
    "Orbit",
    "SpectralDensity",
    "Obstruction",
    "action_from_generators",
    "check_total_ergodicity",
    "dual_apply",
    "orbit_decompose",
    "spectral_density",
    "spectral_density_eval",
    "spectral_fourier",
    "spectral_fourier_direct",
    "variance_against",
    "coboundary_obstruction",
]


class NonCommuting(ValueError):
    """Two generators do not commute."""


class Singular(ValueError):
    """A generator has zero determinant."""


class NotUnimodular(ValueError):
    """An automorphism generator has determinant other than +-1."""


class AmbiguousOrbit(ValueError):
    """A character is reached from the representative by two different offsets."""


@dataclass(frozen=True)
class ToralAction:
    rho: int
    generators: tuple[Mat, ...]
    kind: str = "automorphism"
    inverses: tuple[Mat, ...] = field(default=(), compare=False, repr=False)

    @property
    def d(self) -> int:
        return len(self.generators)

    @property
    def dets(self) -> tuple[int, ...]:
        return tuple(int(intmat.det(A)) for A in self.generators)

    def power(self, n: Sequence[int]) -> Mat:
        """A^n = prod_i A_i^{n_i}; rational when an endomorphism is inverted."""
        out = intmat.identity(self.rho)
        for A, Ai, e in zip(self.generators, self.inverses, n):
            if e:
                out = intmat.matmul(out, intmat.matpow(A, int(e), Ai))
        return out

    @classmethod
    def from_dict(cls, cfg: Mapping) -> "ToralAction":
        act = action_from_generators(cfg["generators"], cfg.get("kind", "automorphism"))
        if "rho" in cfg and int(cfg["rho"]) != act.rho:
            raise ValueError("rho does not match the generators")
        return act

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "kind": self.kind,
            "generators": [[list(r) for r in A] for A in self.generators],
        }


def action_from_generators(generators: Iterable, kind: str = "automorphism") -> ToralAction:
    """Validate generators and build the action.

    Raises Singular for a zero determinant, NotUnimodular for an automorphism
    generator with |det| != 1 and NonCommuting (with the offending pair).
    """
    if kind not in ("automorphism", "endomorphism"):
        raise ValueError(f"unknown kind {kind!r}")
    gens = tuple(intmat.as_matrix([[int(x) for x in r] for r in A]) for A in generators)
    if not gens:
        raise ValueError("no generators")
    rho = len(gens[0])
    if any(len(A) != rho for A in gens):
        raise ValueError("generators have different sizes")
    for i, A in enumerate(gens):
        dt = intmat.det(A)
        if dt == 0:
            raise Singular(f"generator {i} is singular")
        if kind == "automorphism" and abs(dt) != 1:
            raise NotUnimodular(f"generator {i} has determinant {dt}")
    for i, j in itertools.combinations(range(len(gens)), 2):
        if intmat.matmul(gens[i], gens[j]) != intmat.matmul(gens[j], gens[i]):
            raise NonCommuting(f"generators {i} and {j} do not commute")
    invs = tuple(intmat.inverse(A) for A in gens)
    return ToralAction(rho, gens, kind, invs)


# ---------------------------------------------------------------------------
# Total ergodicity


@dataclass(frozen=True)
class ErgodicityCertificate:
    passed: bool
    method: str
    bound: int | None
    witness: tuple[int, ...] | None = None
    root_order: int | None = None
    detail: str = ""


def _cyclotomic_orders(rho: int) -> list[int]:
    return [m for m in range(1, 2 * rho * rho + 3) if sympy.totient(m) <= rho]


def _has_root_of_unity(M: Mat, orders: Sequence[int]) -> int | None:
    x = sympy.Symbol("x")
    cp = sympy.Matrix([[sympy.Rational(Fraction(v).numerator, Fraction(v).denominator) for v in r] for r in M]).charpoly(x).as_expr()
    P = sympy.Poly(cp, x, domain="QQ")
    for m in orders:
        if P.rem(sympy.Poly(sympy.cyclotomic_poly(m, x), x, domain="QQ")).is_zero:
            return m
    return None


def _log_independent(dets: Sequence[int]) -> bool:
    if any(abs(q) <= 1 for q in dets):
        return False
    primes = sorted({p for q in dets for p in sympy.factorint(abs(q))})
    rows = [[sympy.factorint(abs(q)).get(p, 0) for p in primes] for q in dets]
    return sympy.Matrix(rows).rank() == len(dets)


def check_total_ergodicity(action: ToralAction, search_bound: int = 6) -> ErgodicityCertificate:
    """Certify that A^n has no root-of-unity eigenvalue for n != 0.

    An unconditional certificate is returned when some generator has an
    irreducible characteristic polynomial and the |det A_i| are multiplicatively
    independent (or rho = 1 with independent |det|).  Otherwise the
    characteristic polynomials of A^n for 0 < |n|_inf <= search_bound are
    tested for cyclotomic factors; a pass is then only up to that bound.
    """
    x = sympy.Symbol("x")
    if _log_independent(action.dets):
        for A in action.generators:
            cp = sympy.Poly(sympy.Matrix(A).charpoly(x).as_expr(), x)
            if cp.is_irreducible:
                return ErgodicityCertificate(True, "log-independent-determinants", None,
                                             detail="irreducible generator with independent |det|")
    orders = _cyclotomic_orders(action.rho)
    d = action.d
    for n in itertools.product(range(-search_bound, search_bound + 1), repeat=d):
        nz = [v for v in n if v]
        if not nz or nz[0] < 0:
            continue  # n and -n have the same property
        m = _has_root_of_unity(action.power(n), orders)
        if m is not None:
            return ErgodicityCertificate(False, "cyclotomic-search", search_bound, tuple(n), m,
                                         detail=f"A^{tuple(n)} has a primitive {m}-th root of unity as eigenvalue")
    return ErgodicityCertificate(True, "cyclotomic-search", search_bound,
                                 detail=f"no cyclotomic factor for 0 < |n| <= {search_bound}")


# ---------------------------------------------------------------------------
# Dual action and orbits


def _dual_gens(action: ToralAction):
    fwd = tuple(intmat.transpose(A) for A in action.generators)
    bwd = tuple(intmat.transpose(A) for A in action.inverses)
    return fwd, bwd


def dual_apply(action: ToralAction, n: Sequence[int], k: Sequence[int]) -> tuple[int, ...] | None:
    """(A^n)^T k, or None when the result is not an integer vector."""
    fwd, bwd = _dual_gens(action)
    v = tuple(int(x) for x in k)
    for i, e in enumerate(n):
        M = fwd[i] if e >= 0 else bwd[i]
        for _ in range(abs(int(e))):
            v = intmat.matvec(M, v)
    if not intmat.is_integral(v):
        return None
    return tuple(int(x) for x in v)


def _box_images(action: ToralAction, k: tuple[int, ...], bound: int) -> dict:
    """All (A^n)^T k for |n|_inf <= bound, keyed by n."""
    fwd, bwd = _dual_gens(action)
    cur = {(): k}
    for i in range(action.d):
        nxt = {}
        for n, v in cur.items():
            nxt[n + (0,)] = v
            w = v
            for e in range(1, bound + 1):
                w = intmat.matvec(fwd[i], w)
                nxt[n + (e,)] = w
            w = v
            for e in range(1, bound + 1):
                w = intmat.matvec(bwd[i], w)
                nxt[n + (-e,)] = w
        cur = nxt
    return cur


@dataclass(frozen=True)
class Orbit:
    """Characters of one dual orbit met by a finite set, with their offsets.

    ``members`` maps each character chi to the n with chi = (A^n)^T rep.
    """

    rep: tuple[int, ...]
    members: dict

    def __len__(self):
        return len(self.members)


def orbit_decompose(action: ToralAction, charset: Iterable[Sequence[int]], bound: int = 12) -> list[Orbit]:
    """Partition characters into dual orbits, searching offsets with |n|_inf <= bound.

    Raises AmbiguousOrbit if some character is reached by two different
    offsets, which happens exactly when the action has a nontrivial
    stabiliser (and so is not totally ergodic).
    """
    chars = sorted({tuple(int(x) for x in k) for k in charset})
    if any(not any(k) for k in chars):
        raise ValueError("the trivial character has no orbit structure; remove the constant term")
    S = set(chars)
    assign: dict = {}  # char -> (root, offset relative to root)
    for k in chars:
        if k in assign:
            continue
        found = {}
        for n, v in _box_images(action, k, bound).items():
            if intmat.is_integral(v):
                v = tuple(int(x) for x in v)
                if v in S:
                    if v in found and found[v] != n:
                        raise AmbiguousOrbit(f"{v} = A^{found[v]} {k} = A^{n} {k}")
                    found[v] = n
        linked = [m for m in found if m in assign]
        if linked:
            m0 = linked[0]
            root, o = assign[m0]
            base = tuple(a - b for a, b in zip(o, found[m0]))  # k = A^base root
        else:
            root, base = k, (0,) * action.d
        for m, n in found.items():
            off = tuple(a + b for a, b in zip(base, n))
            if m in assign:
                if assign[m][0] != root or assign[m][1] != off:
                    raise AmbiguousOrbit(f"{m} reached with offsets {assign[m][1]} and {off}")
            else:
                assign[m] = (root, off)
    groups: dict = {}
    for m, (root, off) in assign.items():
        groups.setdefault(root, {})[m] = off
    orbits = []
    for members in groups.values():
        rep = min(members)
        o_rep = members[rep]
        orbits.append(Orbit(rep, {m: tuple(a - b for a, b in zip(o, o_rep)) for m, o in sorted(members.items())}))
    return sorted(orbits, key=lambda o: o.rep)


# ---------------------------------------------------------------------------
# Trigonometric polynomials


@dataclass(frozen=True)
class TrigPoly:
    """f(x) = sum_k c_k exp(2 pi i <k, x>) with finitely many nonzero c_k."""

    rho: int
    coeffs: dict

    def __post_init__(self):
        clean = {}
        for k, c in self.coeffs.items():
            k = tuple(int(x) for x in k)
            if len(k) != self.rho:
                raise ValueError(f"character {k} has wrong length")
            c = complex(c)
            if c != 0:
                clean[k] = clean.get(k, 0) + c
        object.__setattr__(self, "coeffs", clean)

    @classmethod
    def cos(cls, k: Sequence[int], amplitude: float = 1.0) -> "TrigPoly":
        k = tuple(k)
        neg = tuple(-x for x in k)
        return cls(len(k), {k: amplitude / 2, neg: amplitude / 2})

    @classmethod
    def from_dict(cls, cfg: Mapping, rho: int | None = None) -> "TrigPoly":
        terms = cfg["coeffs"]
        if not terms:
            raise ValueError("no coefficients")
        r = len(terms[0]["k"]) if rho is None else rho
        co: dict = {}
        for t in terms:
            k = tuple(t["k"])
            co[k] = co.get(k, 0) + complex(float(t.get("re", 0.0)), float(t.get("im", 0.0)))
        return cls(r, co)

    def to_dict(self) -> dict:
        return {"coeffs": [{"k": list(k), "re": c.real, "im": c.imag} for k, c in sorted(self.coeffs.items())]}

    @classmethod
    def random_real(cls, rho: int, n_terms: int, rng: np.random.Generator, max_k: int = 3) -> "TrigPoly":
        co: dict = {}
        while len(co) < 2 * n_terms:
            k = tuple(int(x) for x in rng.integers(-max_k, max_k + 1, size=rho))
            if not any(k) or k in co:
                continue
            c = complex(rng.normal(), rng.normal())
            co[k] = c
            co[tuple(-x for x in k)] = c.conjugate()
        return cls(rho, co)

    @property
    def support(self) -> list[tuple[int, ...]]:
        return sorted(self.coeffs)

    @property
    def is_real(self) -> bool:
        return all(abs(self.coeffs.get(tuple(-x for x in k), 0) - c.conjugate()) < 1e-14
                   for k, c in self.coeffs.items())

    @property
    def norm_c(self) -> float:
        return float(sum(abs(c) for c in self.coeffs.values()))

    @property
    def norm2_sq(self) -> float:
        return float(sum(abs(c) ** 2 for c in self.coeffs.values()))

    def mean(self) -> complex:
        return self.coeffs.get((0,) * self.rho, 0j)

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros(len(x), dtype=complex)
        for k, c in self.coeffs.items():
            out += c * np.exp(2j * np.pi * (x @ np.asarray(k, dtype=float)))
        return out

    def eval_modular(self, y: np.ndarray, q: int, real: bool | None = None) -> np.ndarray:
        """f(y / q) for integer points y in [0, q)^rho, phases reduced exactly mod q.

        Returns real values when f is real (or ``real=True``).
        """
        real = self.is_real if real is None else real
        items = sorted(self.coeffs.items())
        if real:
            # pair k with -k and keep one of each
            half, seen = [], set()
            for k, c in items:
                if k in seen:
                    continue
                neg = tuple(-x for x in k)
                seen.update((k, neg))
                half.append((k, c if neg == k else 2 * c, neg == k))
            items = [(k, c) for k, c, _ in half]
        K = np.array([k for k, _ in items], dtype=np.int64).reshape(-1, self.rho)
        c = np.array([c for _, c in items], dtype=complex)
        kmax = int(np.abs(K).sum(axis=1).max(initial=0))
        y = np.mod(np.asarray(y, dtype=np.int64), q)
        if kmax < (1 << 31):
            r = (y.astype(np.int64) @ K.T) % q
        else:
            r = np.stack([_dot_mod(y.astype(np.int64), k, q) for k in K], axis=1)
        theta = (2 * np.pi / q) * r
        if real:
            return np.cos(theta) @ c.real - np.sin(theta) @ c.imag
        return np.exp(1j * theta) @ c


def _dot_mod(y: np.ndarray, k: Sequence[int], q: int) -> np.ndarray:
    r = np.zeros(len(y), dtype=np.int64)
    for i, ki in enumerate(k):
        ki = int(ki) % q
        if ki:
            if ki < (1 << 31):
                r = (r + (y[:, i] * ki) % q) % q
            else:
                hi, lo = divmod(ki, 1 << 16)
                r = (r + ((y[:, i] * hi) % q * (1 << 16)) % q + (y[:, i] * lo) % q) % q
    return r


# ---------------------------------------------------------------------------
# Spectral densities


@dataclass(frozen=True)
class SpectralDensity:
    """phi_f(t) = sum over orbits j of |sum_n c_f((A^n)^T rep_j) e(<n, t>)|^2."""

    d: int
    orbits: tuple[tuple[tuple[tuple[int, ...], complex], ...], ...]
    mean_square: float = 0.0

    def amplitudes(self, t) -> np.ndarray:
        t = np.atleast_2d(np.asarray(t, dtype=float))
        out = np.zeros((len(self.orbits), len(t)), dtype=complex)
        for j, orb in enumerate(self.orbits):
            for n, c in orb:
                out[j] += c * np.exp(2j * np.pi * (t @ np.asarray(n, dtype=float)))
        return out

    def __call__(self, t) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes(t)) ** 2, axis=0)

    def fourier(self, n: Sequence[int]) -> complex:
        n = tuple(int(x) for x in n)
        total = 0j
        for orb in self.orbits:
            lookup = dict(orb)
            for o, c in orb:
                o2 = tuple(a - b for a, b in zip(o, n))
                if o2 in lookup:
                    total += c * lookup[o2].conjugate()
        return total

    def fourier_support(self) -> dict:
        """All n with a possibly nonzero coefficient, mapped to the coefficient."""
        out: dict = {}
        for orb in self.orbits:
            for (o, c), (o2, c2) in itertools.product(orb, orb):
                n = tuple(a - b for a, b in zip(o, o2))
                out[n] = out.get(n, 0j) + c * c2.conjugate()
        return out

    @property
    def sup_bound(self) -> float:
        return float(sum(sum(abs(c) for _, c in orb) ** 2 for orb in self.orbits))


def spectral_density(action: ToralAction, f: TrigPoly, bound: int = 12) -> SpectralDensity:
    """Spectral density of f (its constant term is ignored)."""
    if f.rho != action.rho:
        raise ValueError("dimension mismatch between f and the action")
    support = [k for k in f.support if any(k)]
    orbits = orbit_decompose(action, support, bound)
    data = tuple(tuple((off, f.coeffs[m]) for m, off in orb.members.items()) for orb in orbits)
    return SpectralDensity(action.d, data, f.norm2_sq - abs(f.mean()) ** 2)


def spectral_density_eval(sd: SpectralDensity, t) -> np.ndarray:
    return sd(t)


def spectral_fourier(sd: SpectralDensity, n: Sequence[int]) -> complex:
    return sd.fourier(n)


def spectral_fourier_direct(action: ToralAction, f: TrigPoly, n: Sequence[int]) -> complex:
    """sum_chi c_f((A^n)^T chi) conj(c_f(chi)), straight from the dual action."""
    total = 0j
    for chi, c in f.coeffs.items():
        if not any(chi):
            continue
        img = dual_apply(action, n, chi)
        if img is not None and img in f.coeffs:
            total += f.coeffs[img] * c.conjugate()
    return total


def variance_against(kernel, sd: SpectralDensity, **kw) -> float:
    """Integral of phi_f against a kernel measure."""
    return float(kernel.integrate(lambda t: sd(t), **kw))


@dataclass(frozen=True)
class Obstruction:
    phi_at_zero: float
    is_mixed_coboundary: bool


def coboundary_obstruction(action: ToralAction, f: TrigPoly, bound: int = 12, tol: float = 1e-10) -> Obstruction:
    """phi_f(0); it vanishes exactly when f is a mixed coboundary."""
    sd = spectral_density(action, f, bound)
    v = float(sd(np.zeros((1, action.d)))[0])
    return Obstruction(v, abs(v) < tol)
