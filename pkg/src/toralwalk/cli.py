"""Command line entry point.

Exit status is 0 when an experiment passes, 2 when it runs but fails its
statistical checks and 1 on errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import cltlab, cumulant, gallery, pathsim, rwalk, toralact

__all__ = ["main", "build_parser"]


def _load_json(path: str | None) -> dict:
    if path is None:
        raise SystemExit("--config is required")
    return json.loads(Path(path).read_text())


def _walk_from(cfg: dict) -> rwalk.StepDistribution:
    if "walk" in cfg:
        cfg = cfg["walk"]
    elif "gallery" in cfg:
        return gallery.example_gallery(cfg["gallery"]).walk
    return rwalk.StepDistribution.from_dict(cfg)


def _frac(x):
    return str(x) if isinstance(x, Fraction) else x


def _emit(out: str | None, report: dict, series: list | None = None, hist: list | None = None) -> None:
    text = json.dumps(cltlab._jsonable(report), indent=2)
    if out is None:
        print(text)
        return
    od = Path(out)
    od.mkdir(parents=True, exist_ok=True)
    (od / "report.json").write_text(text)
    if series is not None:
        cltlab._write_csv(od / "series.csv", series)
    if hist is not None:
        cltlab._write_csv(od / "hist.csv", hist)
    print(f"wrote {od / 'report.json'}")


def _parse_vectors(text: str | None) -> list[tuple[int, ...]]:
    if not text:
        return []
    return [tuple(int(x) for x in part.split(",")) for part in text.split(";") if part.strip()]


def cmd_analyze_walk(args) -> int:
    an = rwalk.analyze(_walk_from(_load_json(args.config)))
    rep = {
        "dim": an.d,
        "d0": an.d0,
        "classification": an.classification.value,
        "L_basis": an.L.basis,
        "L_index": an.index_L,
        "D_basis": an.D_basis,
        "a0": an.a0,
        "quotient_order": an.quotient_order if math.isfinite(an.quotient_order) else "infinite",
        "mean": [_frac(m) for m in an.mean],
        "Lambda": [[_frac(x) for x in r] for r in an.Lambda],
        "det_Lambda": _frac(an.det_Lambda),
        "Gamma": [[_frac(x) for x in p] for p in an.Gamma.points],
        "Gamma1": [[_frac(x) for x in p] for p in an.Gamma1.points],
        "circle_direction": an.circle_direction,
        "ell1": an.ell1,
    }
    _emit(args.out, rep)
    return 0


def cmd_analyze_action(args) -> int:
    cfg = _load_json(args.config)
    if "gallery" in cfg:
        entry = gallery.example_gallery(cfg["gallery"])
        act, f = entry.action, entry.function
    else:
        act = toralact.ToralAction.from_dict(cfg.get("action", cfg))
        f = toralact.TrigPoly.from_dict(cfg["function"], act.rho) if "function" in cfg else None
    cert = toralact.check_total_ergodicity(act, args.bound)
    rep = {"rho": act.rho, "d": act.d, "kind": act.kind, "dets": act.dets,
           "ergodicity": cert.__dict__}
    if f is not None:
        orbits = toralact.orbit_decompose(act, [k for k in f.support if any(k)])
        rep["orbits"] = [{"rep": o.rep, "members": [[list(m), list(off)] for m, off in o.members.items()]}
                         for o in orbits]
        rep["phi_at_zero"] = toralact.coboundary_obstruction(act, f).phi_at_zero
    _emit(args.out, rep)
    return 0


def cmd_llt(args) -> int:
    nu = _walk_from(_load_json(args.config))
    an = rwalk.analyze(nu)
    n = args.n or 200
    dist = rwalk.exact_distribution(nu, n, rational=False)
    rows = []
    for k in dist:
        main = rwalk.llt_main_term(an, n, k)
        if main > 0:
            rows.append({"n": n, "k": list(k), "exact": dist[k], "llt": main, "ratio": dist[k] / main})
    rows.sort(key=lambda r: -r["llt"])
    central = [r["ratio"] for r in rows if r["llt"] > 0.5 * rows[0]["llt"]]
    rep = {"n": n, "points": len(rows), "central_ratio_min": min(central), "central_ratio_max": max(central)}
    _emit(args.out, rep, series=[{**r, "k": ";".join(map(str, r["k"]))} for r in rows])
    return 0


def cmd_selfint(args) -> int:
    nu = _walk_from(_load_json(args.config))
    n = args.n or 10000
    ps = _parse_vectors(args.p) or [tuple([0] * nu.dim)]
    rows = []
    for s in args.seeds or [0]:
        fld = pathsim.local_times(pathsim.sample_path(nu, n, s))
        row = {"seed": s, "n": n, "V_n": fld.V, "Phi_n": fld.sup}
        for p in ps:
            row["V_n," + ",".join(map(str, p))] = fld.overlap(p)
        rows.append(row)
    ev = rwalk.expected_self_intersections(nu, n)
    rep = {"n": n, "expected_V_n": float(ev.value), "normalized_mean": ev.normalized, "rows": rows}
    _emit(args.out, rep, series=rows)
    return 0


def cmd_kernel(args) -> int:
    nu = _walk_from(_load_json(args.config))
    an = rwalk.analyze(nu)
    k = rwalk.limit_kernel(an)
    ps = _parse_vectors(args.p) or [tuple([0] * nu.dim)]
    rep = {"classification": k.classification, "C": k.C, "c_w": k.c_w, "K": k.K,
           "path_dependent": k.path_dependent, "atoms": len(k.atoms),
           "fourier": {",".join(map(str, p)): k.fourier(p) for p in ps}}
    _emit(args.out, rep)
    return 0


def _experiment(kind: str, args) -> int:
    cfg = cltlab.ExperimentConfig.from_dict({**_load_json(args.config), "kind": kind})
    if args.seeds:
        cfg.seeds = list(args.seeds)
    if args.n:
        if kind == "barycenter":
            cfg.n_grid = [args.n]
        else:
            cfg.n = args.n
    rep = cltlab.run_experiment(cfg)
    if args.out:
        rep.write(args.out)
        print(f"wrote {Path(args.out) / 'report.json'}")
    else:
        print(json.dumps(cltlab._jsonable(rep.to_dict()), indent=2))
    return 0 if rep.passed else 2


def cmd_cumulants(args) -> int:
    nu = _walk_from(_load_json(args.config))
    ns = args.ns or [1000, 10000, 100000]
    seeds = args.seeds or list(range(20))
    fol = cumulant.summation_condition_check([cumulant.folner_profile(n, nu.dim) for n in ns])
    bar = cumulant.summation_condition_check([cumulant.barycenter_profile(nu, n) for n in ns])
    walk_ratios = {r: [] for r in (3, 4)}
    for n in ns:
        profs = [cumulant.walk_profile(nu, n, s) for s in seeds]
        for r in walk_ratios:
            walk_ratios[r].append(float(np.median([p.ratio(r) for p in profs])))
    walk_dec = {r: all(b < a for a, b in zip(v, v[1:])) for r, v in walk_ratios.items()}
    rep = {"ns": ns,
           "folner": {"ratios": fol.ratios, "decreasing": fol.decreasing},
           "barycenter": {"ratios": bar.ratios, "decreasing": bar.decreasing},
           "walk_median": {"ratios": walk_ratios, "decreasing": walk_dec}}
    _emit(args.out, rep)
    ok = fol.passed and bar.passed and all(walk_dec.values())
    return 0 if ok else 2


def cmd_gallery(args) -> int:
    if not args.name:
        for name in gallery.GALLERY_NAMES:
            print(f"{name}: {gallery.example_gallery(name).description}")
        return 0
    e = gallery.example_gallery(args.name)
    rep = {"name": e.name, "description": e.description, "action": e.action.to_dict(),
           "walk": e.walk.to_dict() if e.walk else None,
           "function": e.function.to_dict() if e.function else None,
           "matrices": {k: [list(r) for r in v] for k, v in e.matrices.items()}}
    _emit(args.out, rep)
    return 0


COMMANDS = {
    "analyze-walk": (cmd_analyze_walk, "lattices, covariance and annulators of a walk"),
    "analyze-action": (cmd_analyze_action, "ergodicity certificate and orbits of an action"),
    "llt": (cmd_llt, "exact law of Z_n against the local limit main term"),
    "selfint": (cmd_selfint, "self-intersection counts of sampled paths"),
    "kernel": (cmd_kernel, "limit kernel measure and its constant"),
    "quenched": (lambda a: _experiment("quenched", a), "quenched CLT experiment"),
    "rotated": (lambda a: _experiment("rotated", a), "rotated rectangle sums experiment"),
    "barycenter": (lambda a: _experiment("barycenter", a), "barycenter decay experiment"),
    "cumulants": (cmd_cumulants, "summation-condition ratios for three weight profiles"),
    "gallery": (cmd_gallery, "list or show built-in examples"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="toralwalk", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", help="output directory (report.json, hist.csv, series.csv)")
        p.add_argument("--seeds", type=int, nargs="+", help="seeds overriding the configuration")
        p.add_argument("--n", type=int, help="number of steps")
        if name in ("selfint", "kernel"):
            p.add_argument("--p", help="displacements such as '1,3;0,0'")
        if name == "analyze-action":
            p.add_argument("--bound", type=int, default=6, help="search bound for the ergodicity check")
        if name == "cumulants":
            p.add_argument("--ns", type=int, nargs="+", help="path lengths")
        if name == "gallery":
            p.add_argument("name", nargs="?", help="example name")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    fn = COMMANDS[args.command][0]
    try:
        return fn(args)
    except (ValueError, KeyError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
