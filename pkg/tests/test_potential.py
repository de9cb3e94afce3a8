from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from longrange.potential import (
    FitError,
    IntegrationError,
    PotentialError,
    PotentialSpec,
    closed_form_lambda,
    eval_sigma,
    fit_asymptotics,
    integrate_fundamental,
    validate_A1,
    write_zeta_csv,
)


def exact_pair_inverse_square(spec, t):
    """Closed-form fundamental solutions for the matched extension.

    Below r0 sigma = -kappa^2, so zeta1 = cosh, zeta2 = sinh / kappa.  Beyond
    r0 the equation is of Euler type with solutions t^lam and t^(1-lam).
    """
    lam, k, r0 = spec.lam, spec.kappa, spec.r0
    t = np.asarray(t, dtype=float)

    def euler(z, zp):
        # z = A r^lam + B r^(1-lam) with r = t / r0 matched at r0
        m = np.array([[1.0, 1.0], [lam / r0, (1 - lam) / r0]])
        a, b = np.linalg.solve(m, [z, zp])
        r = t / r0
        return a * r ** lam + b * r ** (1 - lam), (a * lam * r ** (lam - 1) + b * (1 - lam) * r ** (-lam)) / r0

    z1, z1p = euler(math.cosh(k * r0), k * math.sinh(k * r0))
    z2, z2p = euler(math.sinh(k * r0) / k, math.cosh(k * r0))
    return z1, z1p, z2, z2p


def test_eval_sigma_examples():
    spec = PotentialSpec.inverse_square(0.09, 1.0)
    assert eval_sigma(spec, 3.0) == pytest.approx(0.01, abs=1e-15)
    assert eval_sigma(PotentialSpec.zero(), 5.0) == 0.0
    capped = PotentialSpec.inverse_square(0.09, 1.0, extension="cap")
    assert eval_sigma(capped, 0.5) == pytest.approx(0.09, abs=1e-15)


def test_matched_extension_value_below_r0():
    spec = PotentialSpec.inverse_square(0.09, 1.0)
    k = spec.kappa
    assert k * math.tanh(k) == pytest.approx(0.1, rel=1e-14)
    assert eval_sigma(spec, 0.5) == pytest.approx(-k * k, rel=1e-15)


def test_eval_sigma_rejects_negative_time():
    with pytest.raises(PotentialError):
        eval_sigma(PotentialSpec.zero(), -1.0)


@pytest.mark.parametrize("kwargs", [dict(sigma1=0.25), dict(sigma1=-0.01), dict(sigma1=0.09, r0=0.0)])
def test_spec_invariants(kwargs):
    with pytest.raises(PotentialError):
        PotentialSpec.inverse_square(**kwargs)


def test_zero_potential_is_exact(pair_zero):
    assert pair_zero.zeta1[0] == 1 and pair_zero.zeta1p[0] == 0
    assert pair_zero.zeta2[0] == 0 and pair_zero.zeta2p[0] == 1
    assert np.max(np.abs(pair_zero.zeta1 - 1.0)) == 0.0
    assert np.max(np.abs(pair_zero.zeta2 - pair_zero.times) / pair_zero.times.clip(1.0)) < 1e-15


def test_integration_matches_closed_form(pair_inv):
    ts = np.array([0.3, 1.0, 2.5, 17.0, 950.0, 4.2e4])
    exact = exact_pair_inverse_square(pair_inv.spec, ts[ts >= 1.0])
    got = np.array([pair_inv.at(t) for t in ts[ts >= 1.0]]).T
    # zeta1 is subdominant: integration error feeds the t^(1-lam) mode and
    # its relative size grows like t^(1-2 lam)
    for e, g in zip(exact, got):
        np.testing.assert_allclose(g, e, rtol=1e-7, atol=1e-11)
    k = pair_inv.spec.kappa
    z = pair_inv.at(0.3)
    assert z[0] == pytest.approx(math.cosh(0.3 * k), rel=1e-12)
    assert z[2] == pytest.approx(math.sinh(0.3 * k) / k, rel=1e-12)


def test_matched_zeta1_is_pure_power(pair_inv):
    m = pair_inv.times >= 1.0
    ratio = pair_inv.zeta1[m] / pair_inv.times[m] ** 0.1
    assert np.ptp(ratio) / ratio.max() < 1e-6


def test_wronskian(pair_inv, pair_zero):
    assert np.max(np.abs(pair_inv.wronskian_defect())) < 1e-9
    assert np.max(np.abs(pair_zero.wronskian_defect())) < 1e-12


def test_wronskian_converges_at_least_fourth_order():
    spec = PotentialSpec.inverse_square(0.09, 1.0)
    coarse = np.max(np.abs(integrate_fundamental(spec, 1e3, 0.32).wronskian_defect()))
    fine = np.max(np.abs(integrate_fundamental(spec, 1e3, 0.16).wronskian_defect()))
    # RK4 on a trace-free linear system: the determinant error is O(h^5) per unit time
    assert 14.0 < coarse / fine < 40.0


@pytest.mark.parametrize("sigma1", [0.04, 0.09, 0.16])
def test_exponent_recovery(sigma1):
    pair = integrate_fundamental(PotentialSpec.inverse_square(sigma1, 1.0), 1e5, 0.01)
    consts = fit_asymptotics(pair)
    assert consts.lambda_hat == pytest.approx(closed_form_lambda(sigma1), abs=1e-3)
    assert consts.lambda_hat + consts.zeta2_exponent == pytest.approx(1.0, abs=2e-3)
    assert consts.c_plus ** (1 - consts.lambda_hat) == pytest.approx(abs(consts.c2), rel=1e-10)


def test_fit_zero_potential(pair_zero):
    consts = fit_asymptotics(pair_zero)
    assert consts.lambda_hat == pytest.approx(0.0, abs=1e-12)
    assert consts.c1 == pytest.approx(1.0) and consts.c2 == pytest.approx(1.0)
    assert consts.c_plus == pytest.approx(1.0)


def test_fit_window_validation(pair_inv):
    with pytest.raises(FitError):
        fit_asymptotics(pair_inv, window=(0.5, 10.0))


def test_validate_A1(pair_inv, pair_zero):
    assert validate_A1(pair_zero).passed
    rep = validate_A1(pair_inv)
    assert rep.passed
    assert rep.conditions["zeta2_positive"] and rep.conditions["tail_limits_converge"]
    assert rep.residuals["t3_sigma_prime_last"] == pytest.approx(-0.18)


def test_constant_sigma_fails_A1():
    pair = integrate_fundamental(PotentialSpec.constant(0.09), 200.0, 0.01)
    rep = validate_A1(pair)
    assert not rep.passed
    assert rep.residuals["zeta2_sign_changes"] > 0


def test_cap_extension_breaks_zeta1():
    pair = integrate_fundamental(PotentialSpec.inverse_square(0.09, 1.0, extension="cap"), 1e5, 0.01)
    assert pair.zeta1.min() < 0
    assert not validate_A1(pair).passed


def test_integrate_rejects_bad_args():
    with pytest.raises(PotentialError):
        integrate_fundamental(PotentialSpec.zero(), 0.5, 0.01)
    with pytest.raises(PotentialError):
        integrate_fundamental(PotentialSpec.zero(), 5.0, 0.0)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_integration_error_on_overflow():
    with pytest.raises(IntegrationError):
        integrate_fundamental(PotentialSpec.constant(-1e4), 10.0, 0.01)


def test_zeta_csv(tmp_path, pair_inv):
    small = integrate_fundamental(pair_inv.spec, 20.0, 0.1)
    path = write_zeta_csv(small, tmp_path / "zeta.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "t,zeta1,zeta1p,zeta2,zeta2p,wronskian_defect"
    assert len(lines) == small.times.size + 1


@given(st.floats(min_value=0.0, max_value=0.2499))
def test_closed_form_lambda_solves_indicial_equation(sigma1):
    lam = closed_form_lambda(sigma1)
    assert 0.0 <= lam < 0.5
    assert lam * (1 - lam) == pytest.approx(sigma1, abs=1e-12)


@given(st.floats(min_value=0.01, max_value=0.2), st.floats(min_value=0.5, max_value=3.0))
def test_wronskian_property(sigma1, r0):
    pair = integrate_fundamental(PotentialSpec.inverse_square(sigma1, r0), 200.0, 0.02)
    assert np.max(np.abs(pair.wronskian_defect())) < 1e-9
    assert pair.zeta2[pair.times > r0].min() > 0
