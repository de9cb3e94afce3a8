from __future__ import annotations

import csv
import math

import numpy as np
import pytest

from longrange.fieldops import ComplexField, SpectralGrid, gaussian_propagate, mdfm_gaussian, relative_l2
from longrange.profile import (
    FinalData,
    ProfileParams,
    frequency_grid_for,
    phase_rate,
    remainder_norm,
    remainder_R_apply,
    u_p_field,
    w_hat,
    write_profile_csv,
)

DATA = FinalData.gaussian_packet(0.1, xi0=0.25, a=1.0)
PP = ProfileParams(1.0, 1.2, 20 / 9)
FGRID = SpectralGrid(1, 512, 40.0)


def test_final_data_basics():
    assert DATA.amplitude_sup == pytest.approx(0.1)
    assert DATA.norm() == pytest.approx(0.1 * math.pi ** 0.25)
    assert DATA.support_radius() == pytest.approx(4.25)
    assert DATA.sobolev_status() == "analytic"
    with pytest.raises(ValueError):
        FinalData()
    sampled = FinalData(sampled=DATA.on(FGRID))
    assert sampled.sobolev_status() == "unchecked"
    pts = np.array([0.1, -0.7, 2.3])
    np.testing.assert_allclose(sampled.values(pts), DATA.values(pts), atol=1e-12)


def test_w_hat_examples():
    base = DATA.on(FGRID).values
    np.testing.assert_allclose(w_hat(DATA, PP, 1.0, FGRID).values, base)
    w = w_hat(DATA, PP, 100.0, FGRID).values
    np.testing.assert_allclose(np.abs(w), np.abs(base), atol=1e-16)
    k = int(np.argmax(np.abs(base)))
    expected = -PP.g1 * abs(base[k]) ** PP.p_c * math.log(100.0) / PP.c_plus
    assert np.angle(w[k] / base[k]) == pytest.approx(expected, rel=1e-12)
    np.testing.assert_allclose(w_hat(DATA, PP.without_log(), 100.0, FGRID).values, base)
    with pytest.raises(ValueError):
        w_hat(DATA, PP, 0.5, FGRID)


def test_phase_grows_linearly_in_log_t():
    base = DATA.on(FGRID).values
    k = int(np.argmax(np.abs(base)))
    ts = np.geomspace(2, 1e6, 9)
    phases = np.unwrap([np.angle(w_hat(DATA, PP, t, FGRID).values[k] / base[k]) for t in ts])
    slope, _ = np.polyfit(np.log(ts), phases, 1)
    assert slope == pytest.approx(float(phase_rate(PP, base[k])), rel=1e-10)


def test_profile_params_validation():
    with pytest.raises(ValueError):
        ProfileParams(1.0, 0.0, 2.0)


def test_u_p_norm_matches_data(pair_inv):
    t = 30.0
    grid = SpectralGrid(1, 16384, 1275.0)
    u = u_p_field(pair_inv, DATA, PP, t, grid)
    assert u.norm() == pytest.approx(DATA.norm(), rel=1e-10)
    with pytest.raises(ValueError):
        u_p_field(pair_inv, DATA, PP, 0.5, grid)


def test_zero_potential_scalings_agree(pair_zero):
    grid = SpectralGrid(1, 4096, 400.0)
    a = u_p_field(pair_zero, DATA, PP, 40.0, grid, scaling="zeta2")
    b = u_p_field(pair_zero, DATA, PP, 40.0, grid, scaling="t")
    assert relative_l2(a, b) < 1e-12


def test_inverse_square_scalings_differ(pair_inv):
    grid = SpectralGrid(1, 4096, 400.0)
    a = u_p_field(pair_inv, DATA, PP, 40.0, grid, scaling="zeta2")
    b = u_p_field(pair_inv, DATA, PP, 40.0, grid, scaling="t")
    assert relative_l2(a, b) > 1e-2


def test_linear_flow_splits_into_profile_and_remainder(pair_inv):
    # U0(t,0) F^-1 u_hat = u_p(t) + R(t) u_hat, with the left side from the Gaussian oracle
    t = 20.0
    pp = PP.without_log()
    grid = SpectralGrid(1, 4096, 400.0)
    fgrid = frequency_grid_for(grid, pair_inv, t)
    exact = mdfm_gaussian(pair_inv, t, gaussian_propagate([("Finv",)], DATA.gaussian)).on(grid)
    up = u_p_field(pair_inv, DATA, pp, t, grid)
    rem = remainder_R_apply(pair_inv, t, DATA.on(fgrid))
    assert rem.grid.length == pytest.approx(grid.length)
    total = up + ComplexField(grid, rem.values)
    assert relative_l2(total, exact) < 1e-10


def test_free_asymptotics(pair_zero):
    # sigma = 0: the remainder vanishes like 1/t, so U(t) F^-1 u_hat approaches u_p(t)
    f = DATA.on(FGRID)
    ts = [10.0, 100.0, 1000.0]
    norms = [remainder_norm(pair_zero, t, f) for t in ts]
    assert norms[1] / norms[0] == pytest.approx(0.1, rel=0.02)
    assert norms[2] / norms[1] == pytest.approx(0.1, rel=0.02)


def test_remainder_bounded_and_decaying(pair_inv):
    f = DATA.on(FGRID)
    ts = np.geomspace(2, 9e4, 12)
    norms = np.array([remainder_norm(pair_inv, t, f) for t in ts])
    assert np.all(norms <= 2 * f.norm() + 1e-15)
    assert np.all(np.diff(norms) < 0)
    slope = np.polyfit(np.log(ts[6:]), np.log(norms[6:]), 1)[0]
    assert slope == pytest.approx(2 * 0.1 - 1, abs=0.02)
    with pytest.raises(ValueError):
        remainder_norm(pair_inv, 0.5, f)


def test_profile_csv(tmp_path):
    path = tmp_path / "u.csv"
    f = DATA.on(SpectralGrid(1, 8, 4.0))
    write_profile_csv(f, path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["x", "re", "im", "abs"]
    assert len(rows) == 9
    assert float(rows[5][0]) == 0.0
    assert complex(float(rows[5][1]), float(rows[5][2])) == f.values[4]
