from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from longrange.nonlinearity import a_d
from longrange.params import (
    AdmissibilityError,
    eps1_conditions,
    is_admissible_pair,
    lambda_max,
    parameter_windows,
)


def test_reference_windows():
    w = parameter_windows(1, 0.1, 0.1, delta=0.95)
    assert w.lambda_max == pytest.approx(4 - math.sqrt(15), abs=1e-12)
    assert w.delta_window[0] == pytest.approx(0.86875, abs=1e-12)
    assert w.delta_window[1] == pytest.approx(1.0, abs=1e-12)
    assert w.b_window_prop == pytest.approx((0.4475, 0.48), abs=1e-12)
    assert w.b_window_theorem == pytest.approx((0.2, 0.48), abs=1e-12)
    assert w.delta_prime == 1.0 and w.pair == (4.0, math.inf)


def test_lambda_zero_windows():
    w = parameter_windows(1, 0.0, 0.3)
    assert w.p_c == 2.0
    assert w.delta_window == pytest.approx((0.5, 1.0))
    assert w.b_window_theorem == pytest.approx((0.0, w.delta / 2))
    assert w.b_window_prop[0] == pytest.approx(0.25)


def test_rejects_large_lambda():
    with pytest.raises(AdmissibilityError, match="lambda"):
        parameter_windows(2, 0.25, 0.1)


def test_rejects_delta_outside_window():
    with pytest.raises(AdmissibilityError, match="delta"):
        parameter_windows(1, 0.1, 0.1, delta=0.8)


def test_lambda_max_values():
    assert lambda_max(2) == 0.2
    assert lambda_max(3) == pytest.approx((13 - 2 * math.sqrt(37)) / 21)


def test_admissible_pairs():
    assert is_admissible_pair(4, math.inf, 1)
    e = 0.05
    assert is_admissible_pair(2 / (1 - 2 * e), 1 / e, 2)
    assert is_admissible_pair(2 / (1 - 2 * e), 6 / (1 + 4 * e), 3)
    assert not is_admissible_pair(2, 2, 1)


def test_check_b():
    w = parameter_windows(1, 0.1, 0.1, delta=0.95)
    w.check_b(0.46)
    with pytest.raises(AdmissibilityError):
        w.check_b(0.3)
    w.check_b(0.3, level="theorem")


def test_d2_lambda_zero_reports_infeasible_eps1():
    w = parameter_windows(2, 0.0, 0.1)
    assert not w.eps1_feasible and w.eps1 is None


def test_a_d_strictly_increasing():
    for d in (1, 2, 3):
        lams = np.linspace(0, lambda_max(d) * 0.999, 200)
        vals = [a_d(d, x) for x in lams]
        assert np.all(np.diff(vals) > 0)


@given(st.sampled_from([1, 2, 3]), st.floats(min_value=0.001, max_value=0.999),
       st.floats(min_value=0.01, max_value=1.0), st.floats(min_value=0.01, max_value=0.99))
def test_window_consistency(d, frac, eta, dfrac):
    lam = frac * lambda_max(d)
    try:
        w0 = parameter_windows(d, lam, eta)
    except AdmissibilityError:
        return
    lo, hi = w0.delta_window
    w = parameter_windows(d, lam, eta, delta=lo + dfrac * (hi - lo))
    assert w.b_window_prop[0] >= w.b_window_theorem[0] - 1e-12
    assert w.b_window_prop[0] < w.b_window_prop[1]
    if d > 1 and w.eps1_feasible:
        m2, m3 = eps1_conditions(d, lam, w.delta, w.eps1)
        assert m2 > 0 and m3 > 0
        assert is_admissible_pair(*w.pair, d)
