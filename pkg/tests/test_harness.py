from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from longrange.dynamics import Trajectory
from longrange.harness import (
    DecayReport,
    ExperimentConfig,
    FitError,
    SchemaError,
    fit_power_law,
    load_config,
    read_report,
    read_trajectory_csv,
    save_config,
    weighted_norm,
    weighted_norm_tail,
    write_report,
    write_trajectory_csv,
)


def make_traj(times, values):
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    return Trajectory(times, np.ones_like(times), values,
                      residual_l2={"profile": values}, residual_linf={"profile": values / 2})


def test_fit_exact_power_law():
    t = np.geomspace(1, 1e3, 20)
    slope, intercept, r2 = fit_power_law(t, 3.0 * t ** -0.7)
    assert slope == pytest.approx(-0.7, abs=1e-12)
    assert intercept == pytest.approx(math.log(3.0), abs=1e-12)
    assert r2 == pytest.approx(1.0)


def test_fit_with_noise():
    rng = np.random.default_rng(7)
    t = np.geomspace(10, 1e4, 40)
    y = t ** -0.5 * np.exp(0.05 * rng.normal(size=t.size))
    slope, _, r2 = fit_power_law(t, y)
    assert slope == pytest.approx(-0.5, abs=0.02)
    assert 0.95 < r2 < 1.0


def test_fit_rejects_bad_input():
    with pytest.raises(FitError):
        fit_power_law([1, 2, 3], [1, 2, 3])
    with pytest.raises(FitError):
        fit_power_law(np.arange(1, 7), np.array([1, 2, 0, 4, 5, 6.0]))


def test_weighted_norm_q2_against_closed_form():
    # ||f(s)|| = 1/s with lambda = 0: the integral of s^-2 over [tau, t1] is 1/tau - 1/t1
    t = np.geomspace(10, 100, 4000)
    traj = make_traj(t, 1 / t)
    val = weighted_norm(traj, 2, 2, 0.0, 20.0, 100.0, strict=False)
    assert val == pytest.approx(math.sqrt(1 / 20 - 1 / 100), rel=1e-6)
    with pytest.raises(ValueError, match="admissible"):
        weighted_norm(traj, 2, 2, 0.0, 20.0, 100.0)


def test_weighted_norm_admissible_pair_and_sup():
    t = np.geomspace(10, 100, 2000)
    traj = make_traj(t, t ** -1.0)
    lam = 0.1
    s = np.geomspace(20, 100, 200001)
    ref = trapezoid(np.sqrt(1 + s * s) ** -lam * (s ** -1.0 / 2) ** 4, s) ** 0.25
    assert weighted_norm(traj, 4, math.inf, lam, 20.0, 100.0) == pytest.approx(ref, rel=1e-5)
    sup = weighted_norm(traj, math.inf, 2, lam, 20.0, 100.0)
    # tau falls between samples, so the value there is linearly interpolated
    assert sup == pytest.approx((1 + 400) ** (-lam / 2) / 20, rel=1e-6)


def test_weighted_norm_window_checks():
    traj = make_traj(np.geomspace(10, 100, 50), np.ones(50))
    with pytest.raises(ValueError):
        weighted_norm(traj, 4, math.inf, 0.1, 5.0, 100.0)
    with pytest.raises(ValueError):
        weighted_norm(traj, 4, math.inf, 0.1, 20.0, 200.0)
    with pytest.raises(ValueError):
        weighted_norm(traj, 4, 3, 0.1, 20.0, 100.0)


@given(st.floats(min_value=10.0, max_value=80.0), st.floats(min_value=0.1, max_value=10.0))
def test_weighted_norm_monotone_and_homogeneous(tau, c):
    t = np.geomspace(10, 100, 200)
    traj = make_traj(t, t ** -0.8)
    base = weighted_norm(traj, 4, math.inf, 0.1, tau, 100.0)
    later = weighted_norm(traj, 4, math.inf, 0.1, min(tau * 1.1, 99.0), 100.0)
    assert later <= base
    scaled = weighted_norm(make_traj(t, c * t ** -0.8), 4, math.inf, 0.1, tau, 100.0)
    assert scaled == pytest.approx(c * base, rel=1e-12)


def test_weighted_norm_tail():
    t = np.geomspace(10, 100, 50)
    fast = make_traj(t, t ** -1.0)
    tail = weighted_norm_tail(fast, 4, math.inf, 0.0, 100.0)
    # recorded L^inf norms are s^-1 / 2
    assert tail == pytest.approx(100.0 ** -3 / 3 / 16, rel=1e-9)
    slow = make_traj(t, t ** -0.2)
    assert weighted_norm_tail(slow, 4, math.inf, 0.0, 100.0) == math.inf


def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig(t1=80.0, symbol={"name": "two-term"}, grid={"n": 1024})
    path = save_config(cfg, tmp_path / "c.json")
    assert load_config(path) == cfg


def test_config_schema_errors(tmp_path):
    full = ExperimentConfig().to_dict()
    missing = {k: v for k, v in full.items() if k != "b"}
    with pytest.raises(SchemaError) as info:
        ExperimentConfig.from_dict(missing)
    assert info.value.problems == ["b: required field missing"]
    with pytest.raises(SchemaError, match="bogus: unknown field"):
        ExperimentConfig.from_dict({**full, "bogus": 1})
    with pytest.raises(SchemaError, match="symbol.name"):
        ExperimentConfig.from_dict({**full, "symbol": {"name": "cubic"}})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(SchemaError, match="JSON"):
        load_config(bad)


def test_config_potential_consistency():
    cfg = ExperimentConfig(potential={"kind": "inverse_square", "sigma1": 0.2})
    with pytest.raises(SchemaError, match="sigma1"):
        cfg.potential_spec()
    with pytest.raises(SchemaError):
        ExperimentConfig(potential={"kind": "zero"}).potential_spec()
    assert ExperimentConfig().potential_spec().sigma1 == pytest.approx(0.09)


def test_resolve_default_grid():
    cfg = ExperimentConfig().resolve()
    assert cfg.grid.n == 16384
    assert cfg.grid.length == pytest.approx(2.5 * 120 * 4.25)
    assert cfg.pp.g1 == pytest.approx(1.0)
    two = ExperimentConfig(symbol={"name": "two-term"}).resolve()
    assert two.pp.g1 == 0.0


def test_report_schema(tmp_path):
    rep = DecayReport("main", -0.8, 0.1, 0.99, -0.36, 0.15, 0.46, 0.1, [1.0, 2.0], [0.5, 0.25],
                      norms={"30": {"value": 1.0, "scaled": 2.0, "tail": math.inf}})
    path = write_report(rep, tmp_path / "r.json")
    data = read_report(path)
    for key in ("label", "slope", "threshold", "margin", "b", "lam", "times", "residual", "norms", "pass"):
        assert key in data
    assert data["pass"] is True
    assert data["norms"]["30"]["tail"] == "inf"
    assert DecayReport.from_dict(data).slope == -0.8
    json.dumps(data)


def test_report_verdicts():
    assert not DecayReport("m", -0.1, 0, 1, -0.36, 0.15, 0.46, 0.1).passed
    assert DecayReport("m", None, None, None, -0.36, 0.15, 0.46, 0.1, residual=[0.0, 0.0]).passed
    assert not DecayReport("m", None, None, None, None, 0.15, None, 0.1).passed


def test_trajectory_csv_round_trip(tmp_path):
    traj = make_traj(np.geomspace(1, 10, 7), np.geomspace(1, 1e-3, 7))
    path = write_trajectory_csv(traj, tmp_path / "t.csv")
    data = read_trajectory_csv(path)
    np.testing.assert_array_equal(data["t"], traj.times)
    np.testing.assert_array_equal(data["residual_l2"], traj.residual_l2["profile"])
