"""Time-decaying harmonic coefficient sigma(t) and the fundamental solutions.

The pair (zeta1, zeta2) solves ``zeta'' + sigma(t) zeta = 0`` with
``zeta1(0)=1, zeta1'(0)=0`` and ``zeta2(0)=0, zeta2'(0)=1``.  Every linear
operator in the package (the chirp/dilation factorization of the propagator,
the asymptotic profile, the remainder operator) is built from this pair.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "PotentialError",
    "IntegrationError",
    "FitError",
    "PotentialSpec",
    "FundamentalPair",
    "AsymptoticConstants",
    "ValidationReport",
    "closed_form_lambda",
    "eval_sigma",
    "integrate_fundamental",
    "fit_asymptotics",
    "validate_A1",
    "write_zeta_csv",
]

KINDS = ("zero", "inverse_square", "custom")
EXTENSIONS = ("matched", "cap")


class PotentialError(ValueError):
    """Invalid potential parameters or evaluation outside the domain."""


class IntegrationError(RuntimeError):
    """The fundamental-solution integration produced non-finite values."""


class FitError(RuntimeError):
    """Tail ratios did not converge over the requested window."""


def closed_form_lambda(sigma1: float) -> float:
    """Growth exponent of the subdominant solution of y'' + sigma1 t^-2 y = 0."""
    if not 0.0 <= sigma1 < 0.25:
        raise PotentialError(f"sigma1 must lie in [0, 1/4), got {sigma1}")
    return (1.0 - math.sqrt(1.0 - 4.0 * sigma1)) / 2.0


@dataclass(frozen=True)
class PotentialSpec:
    """Model for sigma(t).

    ``kind="inverse_square"`` is ``sigma1 / t**2`` on ``[r0, inf)``.  Below r0
    the coefficient is only constrained by the initial conditions; two
    extensions are offered:

    ``"matched"`` (default)
        constant ``-kappa**2`` with ``kappa tanh(kappa r0) = lambda / r0``, so
        that zeta1 arrives at r0 exactly on the subdominant branch ``t**lambda``.
    ``"cap"``
        constant ``sigma1 / r0**2``.  Keeps sigma continuous but puts a
        ``t**(1-lambda)`` component into zeta1 (it changes sign near t = 8 for
        sigma1 = 0.09), which breaks the asymptotics required of zeta1.

    ``kind="custom"`` interpolates ``samples = (times, values)`` linearly with
    constant extrapolation.
    """

    kind: str = "zero"
    sigma1: float = 0.0
    r0: float = 1.0
    sigma0_expected: float | None = None
    extension: str = "matched"
    samples: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PotentialError(f"unknown potential kind {self.kind!r}; expected one of {KINDS}")
        if not self.r0 > 0:
            raise PotentialError(f"r0 must be positive, got {self.r0}")
        if self.extension not in EXTENSIONS:
            raise PotentialError(f"unknown extension {self.extension!r}")
        if self.kind == "inverse_square" and not 0.0 <= self.sigma1 < 0.25:
            raise PotentialError(f"inverse_square requires 0 <= sigma1 < 1/4, got {self.sigma1}")
        if self.kind == "custom":
            if self.samples is None:
                raise PotentialError("custom potential needs samples=(times, values)")
            ts, vs = (np.asarray(a, dtype=float) for a in self.samples)
            if ts.ndim != 1 or ts.shape != vs.shape or ts.size < 2 or np.any(np.diff(ts) <= 0):
                raise PotentialError("custom samples must be two equal-length 1-d arrays with ascending times")
            object.__setattr__(self, "samples", (ts, vs))

    @classmethod
    def zero(cls) -> PotentialSpec:
        return cls(kind="zero", sigma0_expected=0.0)

    @classmethod
    def inverse_square(cls, sigma1: float, r0: float = 1.0, extension: str = "matched") -> PotentialSpec:
        return cls(kind="inverse_square", sigma1=sigma1, r0=r0,
                   sigma0_expected=-2.0 * sigma1, extension=extension)

    @classmethod
    def constant(cls, value: float, r0: float = 1.0) -> PotentialSpec:
        return cls(kind="custom", r0=r0, samples=(np.array([0.0, 1.0]), np.array([value, value])))

    @property
    def lam(self) -> float | None:
        """Closed-form exponent when the model has one, else None."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "inverse_square":
            return closed_form_lambda(self.sigma1)
        return None

    @cached_property
    def kappa(self) -> float:
        """Rate of the matched extension below r0 (0 when lambda = 0)."""
        lam = self.lam or 0.0
        if lam == 0.0:
            return 0.0
        y = brentq(lambda y: y * math.tanh(y) - lam, 0.0, lam + 2.0, xtol=1e-16, rtol=1e-15)
        return y / self.r0

    def sigma_inner(self, t: float) -> float:
        """sigma on [0, r0]."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "custom":
            return float(np.interp(t, *self.samples))
        if self.extension == "cap":
            return self.sigma1 / self.r0 ** 2
        return -self.kappa ** 2

    def sigma_outer(self, t: float) -> float:
        """sigma on [r0, inf)."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "custom":
            return float(np.interp(t, *self.samples))
        return self.sigma1 / (t * t)


def eval_sigma(spec: PotentialSpec, t):
    """sigma(t) for scalar or array ``t >= 0``."""
    ts = np.asarray(t, dtype=float)
    if np.any(ts < 0) or not np.all(np.isfinite(ts)):
        raise PotentialError("sigma(t) is defined for finite t >= 0 only")
    if spec.kind == "zero":
        out = np.zeros_like(ts)
    elif spec.kind == "custom":
        out = np.interp(ts, *spec.samples)
    else:
        inner = spec.sigma_inner(0.0)
        out = np.where(ts < spec.r0, inner, spec.sigma1 / np.maximum(ts, spec.r0) ** 2)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FundamentalPair:
    times: np.ndarray
    zeta1: np.ndarray
    zeta1p: np.ndarray
    zeta2: np.ndarray
    zeta2p: np.ndarray
    spec: PotentialSpec

    @property
    def t_max(self) -> float:
        return float(self.times[-1])

    def sigma(self) -> np.ndarray:
        return eval_sigma(self.spec, self.times)

    @property
    def zeta1pp(self) -> np.ndarray:
        return -self.sigma() * self.zeta1

    @property
    def zeta2pp(self) -> np.ndarray:
        return -self.sigma() * self.zeta2

    def wronskian_defect(self) -> np.ndarray:
        return self.zeta1 * self.zeta2p - self.zeta1p * self.zeta2 - 1.0

    def at(self, s: float) -> tuple[float, float, float, float]:
        """(zeta1, zeta1', zeta2, zeta2') at an arbitrary time.

        One RK4 step from the nearest node below ``s``, so the accuracy is
        that of the integration itself.
        """
        if not 0.0 <= s <= self.t_max:
            raise PotentialError(f"s={s} outside the sampled range [0, {self.t_max}]")
        k = int(np.searchsorted(self.times, s, side="right")) - 1
        k = min(max(k, 0), len(self.times) - 1)
        t0 = float(self.times[k])
        y = (float(self.zeta1[k]), float(self.zeta1p[k]), float(self.zeta2[k]), float(self.zeta2p[k]))
        h = s - t0
        if h == 0.0:
            return y
        sig = self.spec.sigma_inner if t0 < self.spec.r0 else self.spec.sigma_outer
        return _rk4_step(sig, t0, h, y)


def _rk4_step(sig, t: float, h: float, y):
    z1, p1, z2, p2 = y
    s0 = sig(t)
    sm = sig(t + 0.5 * h)
    s1 = sig(t + h)
    # stage derivatives of (z, p) with z' = p, p' = -sigma z, for both solutions
    a1, b1 = p1, -s0 * z1
    c1, d1 = p2, -s0 * z2
    a2, b2 = p1 + 0.5 * h * b1, -sm * (z1 + 0.5 * h * a1)
    c2, d2 = p2 + 0.5 * h * d1, -sm * (z2 + 0.5 * h * c1)
    a3, b3 = p1 + 0.5 * h * b2, -sm * (z1 + 0.5 * h * a2)
    c3, d3 = p2 + 0.5 * h * d2, -sm * (z2 + 0.5 * h * c2)
    a4, b4 = p1 + h * b3, -s1 * (z1 + h * a3)
    c4, d4 = p2 + h * d3, -s1 * (z2 + h * c3)
    w = h / 6.0
    return (
        z1 + w * (a1 + 2 * a2 + 2 * a3 + a4),
        p1 + w * (b1 + 2 * b2 + 2 * b3 + b4),
        z2 + w * (c1 + 2 * c2 + 2 * c3 + c4),
        p2 + w * (d1 + 2 * d2 + 2 * d3 + d4),
    )


def time_grid(r0: float, t_max: float, dt: float, min_per_decade: int = 64) -> np.ndarray:
    """Uniform nodes on [0, 10 r0] (r0 is a node), geometric nodes beyond.

    The geometric ratio is ``1 + dt / (10 r0)`` so the step is continuous at
    10 r0 and every step shrinks with dt; it is capped to keep at least
    ``min_per_decade`` nodes per decade.
    """
    n_in = max(1, math.ceil(r0 / dt))
    h = r0 / n_in
    t_uni = min(t_max, 10.0 * r0)
    n_uni = max(1, round((t_uni - r0) / h))
    parts = [np.linspace(0.0, r0, n_in + 1)]
    if t_uni > r0:
        parts.append(np.linspace(r0, t_uni, n_uni + 1)[1:])
    if t_max > t_uni:
        eps = min(dt / (10.0 * r0), 10.0 ** (1.0 / min_per_decade) - 1.0)
        n_log = math.ceil(math.log(t_max / t_uni) / math.log1p(eps))
        parts.append(np.geomspace(t_uni, t_max, n_log + 1)[1:])
    return np.concatenate(parts)


def integrate_fundamental(spec: PotentialSpec, t_max: float, dt: float) -> FundamentalPair:
    """Classical RK4 for both fundamental solutions on a graded time grid."""
    if not t_max > spec.r0:
        raise PotentialError(f"t_max={t_max} must exceed r0={spec.r0}")
    if not dt > 0:
        raise PotentialError("dt must be positive")
    times = time_grid(spec.r0, t_max, dt)
    out = np.empty((times.size, 4))
    y = (1.0, 0.0, 0.0, 1.0)
    out[0] = y
    r0 = spec.r0
    inner, outer = spec.sigma_inner, spec.sigma_outer
    for k in range(times.size - 1):
        t = times[k]
        # r0 is a node, so no step straddles the (possible) jump of sigma there
        y = _rk4_step(inner if t < r0 else outer, t, times[k + 1] - t, y)
        out[k + 1] = y
    if not np.all(np.isfinite(out)):
        bad = int(np.argmin(np.all(np.isfinite(out), axis=1)))
        raise IntegrationError(f"non-finite fundamental solution at t={times[bad]:.6g}")
    return FundamentalPair(times, out[:, 0].copy(), out[:, 1].copy(), out[:, 2].copy(), out[:, 3].copy(), spec)


@dataclass(frozen=True)
class AsymptoticConstants:
    lambda_hat: float
    c1: float
    c2: float
    c3: float | None
    c_plus: float
    fit_window: tuple[float, float]
    fit_r2: float
    zeta2_exponent: float

    def __post_init__(self):
        if self.c1 == 0 or self.c2 == 0:
            raise FitError("asymptotic constants c1, c2 must be nonzero")


def _window_mask(times, window):
    lo, hi = window
    return (times >= lo) & (times <= hi)


def _spread(values: np.ndarray) -> float:
    scale = np.max(np.abs(values))
    if scale == 0.0:
        return 0.0
    return float((values.max() - values.min()) / scale)


def default_window(pair: FundamentalPair) -> tuple[float, float]:
    hi = pair.t_max
    return (max(hi / 100.0, 10.0 * pair.spec.r0), hi)


def fit_asymptotics(pair: FundamentalPair, window: tuple[float, float] | None = None,
                    rtol: float = 1e-2) -> AsymptoticConstants:
    """Growth exponent and limiting constants from the tail of the pair.

    lambda_hat is the least-squares slope of log zeta1 against log t; c1 and
    c2 are the tail ratios zeta1/t^lambda and zeta2/t^(1-lambda) at the
    window end, accepted only when their relative spread across the window
    stays below ``rtol``.
    """
    window = window or default_window(pair)
    lo, hi = window
    if lo <= pair.spec.r0 or hi > pair.t_max * (1 + 1e-12) or lo >= hi:
        raise FitError(f"fit window {window} must satisfy r0 < t_lo < t_hi <= t_max")
    m = _window_mask(pair.times, window)
    if m.sum() < 5:
        raise FitError("fewer than 5 nodes in the fit window")
    t, z1, z2 = pair.times[m], pair.zeta1[m], pair.zeta2[m]
    if np.any(z1 <= 0) or np.any(z2 <= 0):
        raise FitError("zeta1 or zeta2 is not positive over the fit window")
    lt = np.log(t)
    coef, res, *_ = np.polyfit(lt, np.log(z1), 1, full=True)
    lam = float(coef[0])
    ly = np.log(z1)
    ss = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(res[0]) / ss if (res.size and ss > 0) else 1.0
    exp2 = float(np.polyfit(lt, np.log(z2), 1)[0])

    r1 = z1 / t ** lam
    r2_ = z2 / t ** (1.0 - lam)
    if _spread(r1) > rtol or _spread(r2_) > rtol:
        raise FitError(f"tail ratios did not converge (spread {_spread(r1):.3g}, {_spread(r2_):.3g})")
    c1, c2 = float(r1[-1]), float(r2_[-1])
    third = (z2 - c2 * t ** (1.0 - lam)) / t ** lam
    tail = third[t >= np.sqrt(lo * hi)]
    c3 = float(abs(tail[-1])) if _spread(np.abs(tail)) < rtol else None
    return AsymptoticConstants(
        lambda_hat=lam, c1=c1, c2=c2, c3=c3,
        c_plus=abs(c2) ** (1.0 / (1.0 - lam)),
        fit_window=(float(lo), float(hi)), fit_r2=r2, zeta2_exponent=exp2,
    )


@dataclass
class ValidationReport:
    passed: bool
    conditions: dict[str, bool]
    residuals: dict[str, float]
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "conditions": dict(self.conditions),
                "residuals": dict(self.residuals), "notes": list(self.notes)}


def _t3_sigma_prime(spec: PotentialSpec, t: np.ndarray) -> np.ndarray:
    if spec.kind == "zero":
        return np.zeros_like(t)
    if spec.kind == "inverse_square":
        return t ** 3 * (-2.0 * spec.sigma1 / t ** 3)
    h = 1e-4 * t
    return t ** 3 * (eval_sigma(spec, t + h) - eval_sigma(spec, t - h)) / (2 * h)


def validate_A1(pair: FundamentalPair, consts: AsymptoticConstants | None = None,
                tol: float = 1e-2) -> ValidationReport:
    """Check the decay assumption on sigma against a sampled pair.

    Conditions: (i) ``|zeta_j^(k)| / t^(exponent - k)`` converges on the
    last decade for k = 0, 1, 2 (k = 2 through ``zeta'' = -sigma zeta``), with
    a nonzero limit for k = 0; (ii) zeta2 stays positive beyond r0;
    (iii) ``t^3 sigma'(t)`` settles (informational, never gates).
    """
    conditions: dict[str, bool] = {}
    residuals: dict[str, float] = {}
    notes: list[str] = []
    r0 = pair.spec.r0
    beyond = pair.times > r0

    z2 = pair.zeta2[beyond]
    crossings = int(np.count_nonzero(np.diff(np.sign(z2)) != 0))
    residuals["min_zeta2_beyond_r0"] = float(z2.min())
    residuals["zeta2_sign_changes"] = float(crossings)
    conditions["zeta2_positive"] = bool(z2.min() > 0 and crossings == 0)
    z1 = pair.zeta1[beyond]
    residuals["min_zeta1_beyond_r0"] = float(z1.min())
    if z1.min() < 0:
        notes.append("zeta1 becomes negative beyond r0")

    if consts is None:
        try:
            consts = fit_asymptotics(pair, rtol=tol)
        except FitError as exc:
            notes.append(f"asymptotic fit failed: {exc}")
    conditions["fit_converged"] = consts is not None

    if consts is not None:
        lam = consts.lambda_hat
        lo = max(consts.fit_window[1] / 10.0, consts.fit_window[0])
        m = _window_mask(pair.times, (lo, consts.fit_window[1]))
        t = pair.times[m]
        series = {
            ("zeta1", 0): (pair.zeta1[m], lam),
            ("zeta1", 1): (pair.zeta1p[m], lam - 1.0),
            ("zeta1", 2): (pair.zeta1pp[m], lam - 2.0),
            ("zeta2", 0): (pair.zeta2[m], 1.0 - lam),
            ("zeta2", 1): (pair.zeta2p[m], -lam),
            ("zeta2", 2): (pair.zeta2pp[m], -1.0 - lam),
        }
        ok = True
        for (name, k), (vals, expo) in series.items():
            ratio = np.abs(vals) / t ** expo
            scale = max(1.0, float(np.max(np.abs(vals))))
            vanishing = float(np.max(np.abs(vals))) <= 1e-12 * scale
            spread = 0.0 if vanishing else _spread(ratio)
            residuals[f"{name}_k{k}_spread"] = spread
            residuals[f"{name}_k{k}_limit"] = float(ratio[-1])
            good = spread < tol and (k > 0 or not vanishing)
            ok &= good
        conditions["tail_limits_converge"] = bool(ok)
    else:
        conditions["tail_limits_converge"] = False

    tail_t = pair.times[pair.times >= pair.t_max / 10.0]
    t3 = _t3_sigma_prime(pair.spec, tail_t)
    residuals["t3_sigma_prime_last"] = float(t3[-1])
    residuals["t3_sigma_prime_spread"] = float(np.ptp(t3))
    if pair.spec.sigma0_expected is not None:
        residuals["t3_sigma_prime_vs_expected"] = float(abs(t3[-1] - pair.spec.sigma0_expected))
    notes.append("t^3 sigma'(t) check is informational")

    gate = ("zeta2_positive", "fit_converged", "tail_limits_converge")
    passed = all(conditions[k] for k in gate)
    return ValidationReport(passed, conditions, residuals, notes)


def write_zeta_csv(pair: FundamentalPair, path) -> Path:
    path = Path(path)
    defect = pair.wronskian_defect()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "zeta1", "zeta1p", "zeta2", "zeta2p", "wronskian_defect"])
        for row in zip(pair.times, pair.zeta1, pair.zeta1p, pair.zeta2, pair.zeta2p, defect):
            w.writerow([repr(float(v)) for v in row])
    return path
