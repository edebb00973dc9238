import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from toralwalk import cltlab
from toralwalk.rwalk import Classification, NotReduced, StepDistribution, analyze
from toralwalk.toralact import TrigPoly, coboundary_obstruction

UNITS_A1 = [[-3, -3, 1], [10, 9, -3], [-30, -26, 9]]


def test_gof_quantile_grid():
    x = stats.norm.ppf((np.arange(10_000) + 0.5) / 10_000, scale=2.0)
    g = cltlab.normal_gof(x, 4.0)
    assert g.ks_stat < 1e-3 and g.p_value > 0.99
    assert g.variance_ratio == pytest.approx(1.0, abs=1e-3)


def test_gof_rejects_uniform():
    x = np.random.default_rng(0).uniform(-1, 1, 10_000)
    assert cltlab.normal_gof(x, 1.0).p_value < 1e-6


def test_gof_degenerate():
    assert cltlab.normal_gof(np.zeros(50), 0.0).p_value == 1.0
    assert cltlab.normal_gof(np.ones(50), 0.0).p_value == 0.0


def test_config_round_trip(tmp_path):
    cfg = cltlab.ExperimentConfig(gallery="t3-rw", n=100, seeds=[1])
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert cltlab.ExperimentConfig.from_json(p) == cfg
    with pytest.raises(ValueError):
        cltlab.ExperimentConfig.from_dict({"bogus": 1})


@given(st.lists(st.tuples(st.integers(-2, 2), st.integers(-2, 2)), min_size=1, max_size=4, unique=True))
def test_case_dispatch_matches_classification(steps):
    nu = StepDistribution(tuple(steps), tuple(Fraction(1, len(steps)) for _ in steps))
    try:
        an = analyze(nu)
    except NotReduced:
        return
    expected = {Classification.RECURRENT_D1: "I.a", Classification.RECURRENT_D2: "I.b"}.get(an.classification, "II")
    assert cltlab.case_of(an.classification) == expected


def test_case_mismatch():
    cfg = cltlab.ExperimentConfig(gallery="t3-rw", case="II", n=100, points=10, seeds=[0])
    with pytest.raises(cltlab.CaseMismatch):
        cltlab.run_quenched(cfg)


def test_walk_action_dimension_mismatch():
    cfg = cltlab.ExperimentConfig(gallery="t3-line", walk={"dim": 2, "steps": [[1, 0], [0, 1]],
                                                            "weights": ["1/2", "1/2"]}, seeds=[0])
    with pytest.raises(ValueError):
        cfg.resolve()


def test_quenched_recurrent_line():
    cfg = cltlab.ExperimentConfig(
        walk={"dim": 1, "steps": [[1], [-1]], "weights": ["1/2", "1/2"]},
        action={"rho": 3, "kind": "automorphism", "generators": [UNITS_A1]},
        function={"coeffs": [{"k": [1, 0, 0], "re": 0.5, "im": 0.0}, {"k": [-1, 0, 0], "re": 0.5, "im": 0.0}]},
        n=3000, points=2000, seeds=[0, 1, 2])
    rep = cltlab.run_quenched(cfg)
    assert rep.summary["case"] == "I.a"
    assert rep.summary["target_variance"] == pytest.approx(0.5)
    assert rep.passed


def test_quenched_deterministic_walk():
    """A single step reduces to sums along one orbit line, normalised by n."""
    cfg = cltlab.ExperimentConfig(
        walk={"dim": 1, "steps": [[1]], "weights": ["1"]},
        action={"rho": 3, "kind": "automorphism", "generators": [UNITS_A1]},
        function={"coeffs": [{"k": [1, 0, 0], "re": 0.5, "im": 0.0}, {"k": [-1, 0, 0], "re": 0.5, "im": 0.0}]},
        n=2000, points=2000, seeds=[0, 1])
    rep = cltlab.run_quenched(cfg)
    assert rep.summary["case"] == "II" and rep.summary["C"] == pytest.approx(1.0)
    assert rep.summary["target_variance"] == pytest.approx(0.5)
    assert rep.passed


def test_report_files(tmp_path):
    cfg = cltlab.ExperimentConfig(gallery="t3-rw", n=500, points=200, seeds=[0])
    rep = cltlab.run_experiment(cfg)
    rep.write(tmp_path)
    data = json.loads((tmp_path / "report.json").read_text())
    assert data["kind"] == "quenched" and len(data["per_seed"]) == 1
    header = (tmp_path / "hist.csv").read_text().splitlines()[0]
    assert header == "seed,left,right,count,expected"
    assert (tmp_path / "series.csv").exists()


def test_rotated_theta_zero_and_random():
    for theta in ([0.0, 0.0], None):
        cfg = cltlab.ExperimentConfig(kind="rotated", gallery="t3-units-a", rect=[30, 30], points=1500,
                                      seeds=[0, 1], theta=theta)
        rep = cltlab.run_rotated(cfg)
        assert rep.passed, rep.per_seed


def test_rotated_coboundary_degenerates():
    k = (1, 0, 0)
    kA = tuple(int(x) for x in np.array(UNITS_A1).T @ np.array(k))
    f = {"coeffs": [{"k": list(k), "re": 0.5, "im": 0.0}, {"k": [-x for x in k], "re": 0.5, "im": 0.0},
                    {"k": list(kA), "re": -0.5, "im": 0.0}, {"k": [-x for x in kA], "re": -0.5, "im": 0.0}]}
    cfg = cltlab.ExperimentConfig(kind="rotated", gallery="t3-units-a", function=f, rect=[20, 20],
                                  points=500, seeds=[0], theta=[0.0, 0.0])
    _, action, fp = cfg.resolve()
    assert coboundary_obstruction(action, fp).is_mixed_coboundary
    # variance per unit volume shrinks like the boundary over the volume
    small = cltlab.run_rotated(cfg)
    cfg.rect = [80, 80]
    big = cltlab.run_rotated(cfg)
    v_small = small.series[0]["mean_abs_sq"]
    v_big = big.series[0]["mean_abs_sq"]
    assert v_big < 0.5 * v_small


def test_barycenter_decay_t1():
    cfg = cltlab.ExperimentConfig(kind="barycenter", gallery="t1-multiplicative")
    rep = cltlab.run_barycenter(cfg)
    assert rep.summary["d0"] == 3
    assert rep.summary["slope"] == pytest.approx(-0.75, abs=0.05)


def test_barycenter_plateau_stability():
    cfg = cltlab.ExperimentConfig(kind="barycenter", gallery="t3-pair", n_grid=[200, 400])
    rep = cltlab.run_barycenter(cfg)
    a, b = (r["scaled"] for r in rep.series)
    assert abs(b / a - 1) < 0.10
    assert rep.summary["sigma_P_sq"] == pytest.approx(rep.summary["sigma_P_sq_quadrature"], rel=1e-3)


def test_unknown_kind():
    with pytest.raises(ValueError):
        cltlab.run_experiment(cltlab.ExperimentConfig(kind="other"))
