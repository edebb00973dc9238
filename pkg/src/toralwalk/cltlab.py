"""Monte Carlo experiments for quenched, rotated and barycenter limit theorems.

Each ``run_*`` function takes an :class:`ExperimentConfig`, draws its paths
and points from the configured seeds and returns an :class:`ExperimentReport`
with per-seed statistics, an overall verdict and tables for CSV output.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy import stats

from .cumulant import empirical_cumulants
from .ergsum import barycenter_norm_sq, quenched_sums, rotated_rectangle_sums, sample_points
from .gallery import example_gallery
from .pathsim import local_times, make_rng, sample_path
from .rwalk import (
    Classification,
    StepDistribution,
    analyze,
    gamma1_measure,
    limit_kernel,
)
from .toralact import ToralAction, TrigPoly, spectral_density, variance_against

__all__ = [
    "CaseMismatch",
    "ExperimentConfig",
    "ExperimentReport",
    "GofResult",
    "normal_gof",
    "case_of",
    "run_quenched",
    "run_rotated",
    "run_barycenter",
    "run_experiment",
    "MERSENNE_31",
]

MERSENNE_31 = 2**31 - 1

CASES = {
    Classification.RECURRENT_D1: "I.a",
    Classification.RECURRENT_D2: "I.b",
    Classification.TRANSIENT: "II",
    Classification.DETERMINISTIC: "II",
}


class CaseMismatch(ValueError):
    """The configured case disagrees with the walk's classification."""


@dataclass
class ExperimentConfig:
    kind: str = "quenched"
    walk: dict | None = None
    action: dict | None = None
    function: dict | None = None
    gallery: str | None = None
    n: int = 20000
    points: int = 5000
    q: int = MERSENNE_31
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    case: str | None = None
    rect: list | None = None
    theta: list | None = None
    n_grid: list | None = None
    bound: int = 12
    var_tol: float = 0.15
    ks_alpha: float = 0.01
    min_pass_fraction: float = 0.6
    slope_tol: float = 0.05
    plateau_tol: float = 0.10

    @classmethod
    def from_dict(cls, cfg: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(cfg) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**cfg)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)

    def resolve(self) -> tuple[StepDistribution | None, ToralAction, TrigPoly]:
        """Walk, action and function, filling gaps from the named gallery entry."""
        entry = example_gallery(self.gallery) if self.gallery else None
        walk = StepDistribution.from_dict(self.walk) if self.walk else (entry.walk if entry else None)
        if self.action:
            action = ToralAction.from_dict(self.action)
        elif entry:
            action = entry.action
        else:
            raise ValueError("config needs an action or a gallery name")
        if self.function:
            f = TrigPoly.from_dict(self.function, action.rho)
        elif entry and entry.function is not None:
            f = entry.function
        else:
            raise ValueError("config needs a function or a gallery name")
        if walk is not None and walk.dim != action.d:
            raise ValueError(f"walk lives in Z^{walk.dim} but the action has {action.d} generators")
        return walk, action, f


@dataclass
class GofResult:
    count: int
    variance: float
    target_variance: float
    variance_ratio: float
    ks_stat: float
    p_value: float
    c3: float
    c4: float


def normal_gof(samples, target_variance: float) -> GofResult:
    """Compare samples with N(0, target_variance): variance ratio, KS test, c3 and c4."""
    x = np.asarray(samples, dtype=float).ravel()
    var = float(np.mean(x**2))
    if target_variance <= 0:
        # degenerate target: the law must be the point mass at zero
        spread = float(np.max(np.abs(x), initial=0.0))
        at_zero = spread <= 1e-12
        return GofResult(len(x), var, 0.0, 1.0 if at_zero else math.inf, 0.0 if at_zero else 1.0,
                         1.0 if at_zero else 0.0, math.nan, math.nan)
    ks = stats.kstest(x, "norm", args=(0.0, math.sqrt(target_variance)))
    cum = empirical_cumulants(x, 4)
    return GofResult(len(x), var, float(target_variance), var / target_variance, float(ks.statistic),
                     float(ks.pvalue), float(cum.normalized[2]), float(cum.normalized[3]))


@dataclass
class ExperimentReport:
    kind: str
    config: dict
    passed: bool
    summary: dict
    per_seed: list = field(default_factory=list)
    hist: list = field(default_factory=list)
    series: list = field(default_factory=list)
    elapsed: float = 0.0

    def to_dict(self) -> dict:
        return {"kind": self.kind, "passed": self.passed, "summary": self.summary,
                "per_seed": self.per_seed, "config": self.config, "elapsed": self.elapsed}

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(_jsonable(self.to_dict()), indent=2))
        _write_csv(out / "hist.csv", self.hist)
        _write_csv(out / "series.csv", self.series)


def _jsonable(x: Any):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def _write_csv(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def _histogram(seed: int, z: np.ndarray, variance: float, bins: int = 40) -> list[dict]:
    sd = math.sqrt(variance) if variance > 0 else 1.0
    edges = np.linspace(-4 * sd, 4 * sd, bins + 1)
    counts, _ = np.histogram(z, bins=edges)
    expect = len(z) * np.diff(stats.norm.cdf(edges, scale=sd))
    return [{"seed": seed, "left": float(a), "right": float(b), "count": int(c), "expected": float(e)}
            for a, b, c, e in zip(edges[:-1], edges[1:], counts, expect)]


def case_of(classification: Classification) -> str:
    return CASES[classification]


def run_quenched(cfg: ExperimentConfig) -> ExperimentReport:
    """Quenched CLT for sum_{k<n} f(A^{Z_k} x), one walk path per seed."""
    t0 = time.time()
    nu, action, f = cfg.resolve()
    if nu is None:
        raise ValueError("quenched experiments need a walk")
    an = analyze(nu)
    case = case_of(an.classification)
    if cfg.case and cfg.case != case:
        raise CaseMismatch(f"walk is {an.classification.value} (case {case}), config says {cfg.case}")
    kernel = limit_kernel(an)
    sd = spectral_density(action, f, cfg.bound)
    target = variance_against(kernel, sd)
    coeffs = {k: v.real for k, v in sd.fourier_support().items()}
    n = cfg.n
    mean_f = f.mean().real
    per_seed, hist, series = [], [], []
    for seed in cfg.seeds:
        path = sample_path(nu, n, seed)
        fld = local_times(path)
        pts = sample_points(cfg.q, cfg.points, seed, action.rho, action)
        S = quenched_sums(action, f, path, pts) - n * mean_f
        if case == "I.a":
            norm = float(fld.V)
        elif case == "I.b":
            norm = kernel.C * n * math.log(n)
        else:
            norm = kernel.C * n
        z = np.real(S) / math.sqrt(norm)
        g = normal_gof(z, target)
        spectral = sum(fld.overlap(p) * c for p, c in coeffs.items()) / norm
        ok = abs(g.variance_ratio - 1) <= cfg.var_tol and g.p_value > cfg.ks_alpha
        per_seed.append({"seed": seed, "V_n": fld.V, "sup_local_time": fld.sup, "normalizer": norm,
                         "path_variance_ratio": spectral / target, **asdict(g), "passed": ok})
        hist += _histogram(seed, z, target)
        series.append({"seed": seed, "n": n, "V_n": fld.V, "Phi_n": fld.sup,
                       "variance_ratio": g.variance_ratio, "ks_p": g.p_value})
    npass = sum(r["passed"] for r in per_seed)
    passed = npass >= cfg.min_pass_fraction * len(per_seed)
    summary = {"case": case, "classification": an.classification.value, "C": kernel.C,
               "target_variance": target, "seeds_passed": npass, "seeds": len(per_seed)}
    return ExperimentReport("quenched", cfg.to_dict(), passed, summary, per_seed, hist, series, time.time() - t0)


def run_rotated(cfg: ExperimentConfig) -> ExperimentReport:
    """Rotated sums over a rectangle of Z^d, normalised by sqrt(|D|)."""
    t0 = time.time()
    _, action, f = cfg.resolve()
    rect = cfg.rect or [40] * action.d
    size = int(np.prod(rect))
    sd = spectral_density(action, f, cfg.bound)
    per_seed, hist, series = [], [], []
    for seed in cfg.seeds:
        theta = np.asarray(cfg.theta if cfg.theta is not None else make_rng(seed, 99).random(action.d))
        phi = float(sd(theta[None, :])[0])
        pts = sample_points(cfg.q, cfg.points, seed, action.rho, action)
        S = rotated_rectangle_sums(action, f, rect, theta, pts) / math.sqrt(size)
        S = S - S.mean() if f.mean() else S
        real_case = bool(np.all(np.isclose((2 * theta) % 1, 0) | np.isclose((2 * theta) % 1, 1)))
        target_re = phi if real_case else phi / 2
        g = normal_gof(S.real, target_re)
        msq = float(np.mean(np.abs(S) ** 2))
        if phi > 1e-12:
            ratio = msq / phi
            ok = abs(ratio - 1) <= cfg.var_tol and g.p_value > cfg.ks_alpha
        else:
            # degenerate limit: only require the normalised sums to be small
            ratio = math.inf if msq > 0 else 1.0
            ok = msq <= cfg.var_tol * sd.mean_square
        per_seed.append({"seed": seed, "theta": theta.tolist(), "phi_theta": phi, "variance_ratio": ratio,
                         "ks_stat": g.ks_stat, "p_value": g.p_value, "c3": g.c3, "c4": g.c4, "passed": ok})
        hist += _histogram(seed, S.real, target_re)
        series.append({"seed": seed, "size": size, "phi_theta": phi, "mean_abs_sq": msq})
    npass = sum(r["passed"] for r in per_seed)
    passed = npass >= cfg.min_pass_fraction * len(per_seed)
    summary = {"rect": rect, "seeds_passed": npass, "seeds": len(per_seed)}
    return ExperimentReport("rotated", cfg.to_dict(), passed, summary, per_seed, hist, series, time.time() - t0)


def run_barycenter(cfg: ExperimentConfig) -> ExperimentReport:
    """Decay of ||P^n f||_2 for the barycenter operator P f = E f(A^X .)."""
    t0 = time.time()
    nu, action, f = cfg.resolve()
    if nu is None:
        raise ValueError("barycenter experiments need a walk")
    an = analyze(nu)
    d0 = an.d0
    sd = spectral_density(action, f, cfg.bound)
    coeffs = sd.fourier_support()
    from .zlattice import contains

    sigma2 = float(sum(c.real for p, c in coeffs.items() if an.D is not None and contains(an.D, p)))
    sigma2_quad = float(gamma1_measure(an).integrate(lambda t: sd(t)))
    ns = sorted(cfg.n_grid or [100, 150, 200, 300, 400])
    norms = [barycenter_norm_sq(action, f, nu, n, sd=sd).value for n in ns]
    logn = np.log(ns)
    slope = float(np.polyfit(logn, 0.5 * np.log(norms), 1)[0])
    expected = -d0 / 4
    pred_const = (4 * math.pi) ** (-d0 / 2) * an.llt_constant * sigma2
    scaled = [n ** (d0 / 2) * v for n, v in zip(ns, norms)]
    plateau_ratio = scaled[-1] / pred_const if pred_const > 0 else float("nan")
    slope_ok = abs(slope - expected) <= cfg.slope_tol
    plateau_ok = pred_const > 0 and abs(plateau_ratio - 1) <= cfg.plateau_tol
    series = [{"n": n, "norm_sq": v, "scaled": s} for n, v, s in zip(ns, norms, scaled)]
    summary = {"d0": d0, "slope": slope, "expected_slope": expected, "sigma_P_sq": sigma2,
               "sigma_P_sq_quadrature": sigma2_quad, "plateau_prediction": pred_const,
               "plateau_ratio": plateau_ratio, "slope_ok": slope_ok, "plateau_ok": plateau_ok}
    return ExperimentReport("barycenter", cfg.to_dict(), slope_ok and plateau_ok, summary, [], [], series,
                            time.time() - t0)


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    runners = {"quenched": run_quenched, "rotated": run_rotated, "barycenter": run_barycenter}
    try:
        return runners[cfg.kind](cfg)
    except KeyError:
        raise ValueError(f"unknown experiment kind {cfg.kind!r}") from None
