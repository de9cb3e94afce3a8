"""Admissibility windows for the exponents (lambda, delta, delta', b, eps1, q, r)."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from scipy.optimize import brentq

from .nonlinearity import a_d, critical_exponent

__all__ = [
    "AdmissibilityError",
    "ParamWindows",
    "lambda_max",
    "delta_window",
    "parameter_windows",
    "is_admissible_pair",
    "strichartz_pair",
    "eps1_conditions",
    "INTERIOR_SHRINK",
]

INTERIOR_SHRINK = 1e-9
EPS1_CAP = 0.25


class AdmissibilityError(ValueError):
    """A parameter falls outside the window it must lie in."""


def lambda_max(d: int) -> float:
    return {1: 4.0 - math.sqrt(15.0), 2: 0.2, 3: (13.0 - 2.0 * math.sqrt(37.0)) / 21.0}[d]


def delta_window(d: int, lam: float, eta: float) -> tuple[float, float]:
    a = a_d(d, lam)
    if d == 1:
        lo = (1 + 4 * lam - lam ** 2) / (2 * (1 - 2 * lam))
        hi = min(1.0, 0.5 + 2 * a + 2 * eta)
    else:
        lo = d * (lam + 1) / (2 * (1 - 2 * lam))
        hi = min(2.0, 1.0 + critical_exponent(d, lam), d / 2 + 2 * a + 2 * eta)
    return lo, hi


def eps1_conditions(d: int, lam: float, delta: float, eps1: float) -> tuple[float, float]:
    """Margins of the two smallness conditions on eps1; both must be positive.

    The first is ``delta - d(lam+1)/(2(1-2lam)) - d(1-lam) lam eps1 / (1-2lam)``.
    The second compares ``lam + 1 + 2(1-lam) lam eps1`` with
    ``2(1-lam) / (d + (1-2d) lam - d(1-lam) eps1)`` and is -inf once that
    denominator is no longer positive.
    """
    m2 = delta - d * (lam + 1) / (2 * (1 - 2 * lam)) - d * (1 - lam) * lam * eps1 / (1 - 2 * lam)
    den = d + (1 - 2 * d) * lam - d * (1 - lam) * eps1
    m3 = (lam + 1 + 2 * (1 - lam) * lam * eps1 - 2 * (1 - lam) / den) if den > 0 else -math.inf
    return m2, m3


def _eps1_search(d: int, lam: float, delta: float) -> tuple[bool, float | None, float]:
    """Feasible interval (0, e_hi) for eps1 and its midpoint witness."""
    hi = EPS1_CAP
    if lam > 0:
        e2 = (delta - d * (lam + 1) / (2 * (1 - 2 * lam))) * (1 - 2 * lam) / (d * (1 - lam) * lam)
        hi = min(hi, e2)
    if hi <= 0:
        return False, None, 0.0
    pole = (d + (1 - 2 * d) * lam) / (d * (1 - lam))
    hi = min(hi, pole * (1 - 1e-12))

    def m3(e):
        return eps1_conditions(d, lam, delta, e)[1]

    if not m3(0.0) > 0:
        return False, None, 0.0
    if m3(hi) <= 0:
        # m3 is concave on (0, pole), so its positive set is an interval starting at 0
        hi = brentq(m3, 0.0, hi, xtol=1e-15)
    witness = hi / 2
    return True, witness, hi


def strichartz_pair(d: int, eps1: float | None = None) -> tuple[float, float]:
    if d == 1:
        return 4.0, math.inf
    if eps1 is None:
        raise ValueError(f"d={d} needs eps1")
    q = 2.0 / (1.0 - 2.0 * eps1)
    r = 1.0 / eps1 if d == 2 else 6.0 / (1.0 + 4.0 * eps1)
    return q, r


def is_admissible_pair(q: float, r: float, d: int, tol: float = 1e-12) -> bool:
    inv_r = 0.0 if math.isinf(r) else 1.0 / r
    inv_q = 0.0 if math.isinf(q) else 1.0 / q
    return abs(inv_q + d * inv_r / 2 - d / 4) <= tol and q > 2 + tol and r >= 2 - tol


@dataclass(frozen=True)
class ParamWindows:
    d: int
    lam: float
    eta: float
    lambda_max: float
    a_d: float
    p_c: float
    delta: float
    delta_window: tuple[float, float]
    delta_prime: float
    b_window_theorem: tuple[float, float]
    b_window_prop: tuple[float, float]
    eps1_feasible: bool
    eps1: float | None
    pair: tuple[float, float]

    def b_default(self) -> float:
        lo, hi = self.b_window_prop
        return 0.5 * (lo + hi)

    def check_b(self, b: float, level: str = "prop") -> None:
        lo, hi = self.b_window_prop if level == "prop" else self.b_window_theorem
        if not lo < b < hi:
            raise AdmissibilityError(f"b={b} outside the {level}-level window ({lo:.10g}, {hi:.10g})")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["pair"] = [self.pair[0], "inf" if math.isinf(self.pair[1]) else self.pair[1]]
        return out


def parameter_windows(d: int, lam: float, eta: float, delta: float | None = None) -> ParamWindows:
    """All windows for (d, lambda, eta); delta defaults to the midpoint of its window."""
    if d not in (1, 2, 3):
        raise AdmissibilityError(f"d must be 1, 2 or 3, got {d}")
    if not eta > 0:
        raise AdmissibilityError(f"eta must be positive, got {eta}")
    lmax = lambda_max(d)
    if not 0 <= lam < lmax:
        raise AdmissibilityError(f"lambda={lam} violates the bound lambda < {lmax:.10g} for d={d}")
    dlo, dhi = delta_window(d, lam, eta)
    if not dlo < dhi:
        raise AdmissibilityError(f"empty delta window ({dlo:.10g}, {dhi:.10g})")
    if delta is None:
        delta = 0.5 * (dlo + dhi)
    elif not dlo < delta < dhi:
        raise AdmissibilityError(f"delta={delta} outside ({dlo:.10g}, {dhi:.10g})")
    b_hi = lam + delta * (1 - 2 * lam) / 2
    if d == 1:
        feasible, eps1 = True, None
        b_lo = (1 + 8 * lam - lam ** 2) / 4
    else:
        feasible, eps1, _ = _eps1_search(d, lam, delta)
        e = eps1 if eps1 is not None else 0.0
        b_lo = d * (lam + 1) / 4 + lam + d * (1 - lam) * lam * e / 2
    if not b_lo < b_hi:
        raise AdmissibilityError(f"empty b window ({b_lo:.10g}, {b_hi:.10g})")
    pair = strichartz_pair(d, eps1) if (d == 1 or eps1 is not None) else (math.nan, math.nan)
    return ParamWindows(
        d=d, lam=lam, eta=eta, lambda_max=lmax, a_d=a_d(d, lam), p_c=critical_exponent(d, lam),
        delta=delta, delta_window=(dlo, dhi), delta_prime=1.0 if d == 1 else delta,
        b_window_theorem=(2 * lam, b_hi), b_window_prop=(b_lo, b_hi),
        eps1_feasible=feasible, eps1=eps1, pair=pair,
    )
