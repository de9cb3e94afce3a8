"""Homogeneous nonlinearities F(u) = |u|^(1+p_c) g(arg u) and their Fourier modes.

A 2 pi-periodic symbol ``g`` determines ``F`` completely.  Expanding
``g(theta) = sum_n g_n e^(i n theta)`` splits ``F`` into the gauge-invariant
part (n = 1), a constant-phase part (n = 0) and the rest, which oscillates in
time along the linear flow and is therefore non-resonant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "QuadratureError",
    "DegenerateFitError",
    "NonlinearityParams",
    "PeriodicSymbol",
    "CoefficientTable",
    "A2Report",
    "critical_exponent",
    "a_d",
    "evaluate_F",
    "fourier_coefficients",
    "resonant_split",
    "check_A2",
    "decay_exponent_fit",
    "make_symbol",
    "SYMBOLS",
]

TAIL_MARGIN = 0.2
NOISE_FLOOR = 1e-13
DEFAULT_N = 2048


class QuadratureError(RuntimeError):
    """M-doubling did not settle before the cap."""


class DegenerateFitError(ValueError):
    """Too few usable coefficients for a decay fit."""


def critical_exponent(d: int, lam: float) -> float:
    return 2.0 / (d * (1.0 - lam))


def a_d(d: int, lam: float) -> float:
    """Weight exponent entering the summability condition on g_n."""
    if d == 1:
        return (6 * lam - lam ** 2) / (4 * (1 - 2 * lam))
    if d in (2, 3):
        return 3 * d * lam / (4 * (1 - 2 * lam))
    raise ValueError(f"d must be 1, 2 or 3, got {d}")


@dataclass(frozen=True)
class NonlinearityParams:
    d: int
    lam: float
    eta: float = 0.1
    p_c: float = field(init=False)

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"d must be 1, 2 or 3, got {self.d}")
        if not 0.0 <= self.lam < 0.5:
            raise ValueError(f"lambda must lie in [0, 1/2), got {self.lam}")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        object.__setattr__(self, "p_c", critical_exponent(self.d, self.lam))


@dataclass(frozen=True)
class PeriodicSymbol:
    evaluator: Callable[[np.ndarray], np.ndarray]
    label: str = "custom"

    def __call__(self, theta):
        return np.asarray(self.evaluator(np.asarray(theta, dtype=float)), dtype=complex)

    def check_periodic(self, n_points: int = 64, tol: float = 1e-12, seed: int = 0) -> bool:
        theta = np.random.default_rng(seed).uniform(-np.pi, np.pi, n_points)
        return bool(np.max(np.abs(self(theta + 2 * np.pi) - self(theta))) <= tol)

    def is_real(self, n_points: int = 257) -> bool:
        theta = np.linspace(-np.pi, np.pi, n_points)
        return bool(np.max(np.abs(self(theta).imag)) == 0.0)


def _spow(x, p):
    return np.abs(x) ** p * x


def gauge_symbol(mu: float = 1.0) -> PeriodicSymbol:
    return PeriodicSymbol(lambda th: mu * np.exp(1j * th), f"gauge(mu={mu})")


def re_power_symbol(p: float) -> PeriodicSymbol:
    """|cos|^p cos, the symbol of |Re u|^p Re u."""
    return PeriodicSymbol(lambda th: _spow(np.cos(th), p) + 0j, f"re-power(p={p:.6g})")


def two_term_symbol(p: float) -> PeriodicSymbol:
    """|cos|^p cos - i |sin|^p sin, whose gauge coefficient cancels."""
    return PeriodicSymbol(lambda th: _spow(np.cos(th), p) - 1j * _spow(np.sin(th), p),
                          f"two-term(p={p:.6g})")


SYMBOLS = ("gauge", "re-power", "two-term")


def make_symbol(name: str, params: NonlinearityParams, mu: float = 1.0) -> PeriodicSymbol:
    if name == "gauge":
        return gauge_symbol(mu)
    if name == "re-power":
        return re_power_symbol(params.p_c)
    if name == "two-term":
        return two_term_symbol(params.p_c)
    raise ValueError(f"unknown symbol {name!r}; choose from {SYMBOLS}")


def evaluate_F(g: PeriodicSymbol, params: NonlinearityParams, z):
    """|z|^(1+p_c) g(arg z), zero at the origin.  Vectorized over z."""
    z = np.asarray(z, dtype=complex)
    r = np.abs(z)
    out = np.where(r > 0, r ** (1.0 + params.p_c) * g(np.angle(z)), 0.0)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class CoefficientTable:
    n_max: int
    coeffs: np.ndarray
    quadrature_points: int
    label: str = ""
    converged: bool = True

    @property
    def n(self) -> np.ndarray:
        return np.arange(-self.n_max, self.n_max + 1)

    def __getitem__(self, n: int) -> complex:
        if abs(n) > self.n_max:
            return 0j
        return complex(self.coeffs[n + self.n_max])

    def reconstruct(self, theta, n_trunc: int | None = None) -> np.ndarray:
        k = n_trunc if n_trunc is not None else self.n_max
        ns = np.arange(-k, k + 1)
        c = self.coeffs[ns + self.n_max]
        return np.exp(1j * np.outer(np.atleast_1d(theta), ns)) @ c

    def rows(self):
        for n, c in zip(self.n, self.coeffs):
            yield int(n), c.real, c.imag, abs(c)


def _dft_table(g: PeriodicSymbol, n_max: int, m: int) -> np.ndarray:
    theta = 2 * np.pi * np.arange(m) / m
    c = np.fft.fft(g(theta)) / m
    ns = np.arange(-n_max, n_max + 1)
    return c[ns % m]


def fourier_coefficients(g: PeriodicSymbol, N: int = DEFAULT_N, M: int | None = None,
                         tol: float = 1e-12, max_points: int = 1 << 22) -> CoefficientTable:
    """Trapezoid-rule coefficients g_n, |n| <= N, doubling M until stable to ``tol``."""
    if N < 1:
        raise ValueError("N must be positive")
    m = M if M is not None else 1 << max(2, math.ceil(math.log2(4 * N)))
    if m < 4 * N or m & (m - 1):
        raise ValueError(f"M must be a power of two >= 4N, got M={m}, N={N}")
    prev = _dft_table(g, N, m)
    while True:
        m *= 2
        if m > max_points:
            raise QuadratureError(f"coefficients of {g.label} unsettled at M={m // 2}")
        cur = _dft_table(g, N, m)
        if np.max(np.abs(cur - prev)) <= tol:
            return CoefficientTable(N, cur, m, g.label)
        prev = cur


def resonant_split(table: CoefficientTable, params: NonlinearityParams, u):
    """(G, Nn, G0): gauge part, truncated non-resonant sum and the n = 0 part."""
    u = np.asarray(u, dtype=complex)
    r = np.abs(u)
    amp = r ** (1.0 + params.p_c)
    phase = np.where(r > 0, u / np.where(r > 0, r, 1.0), 0.0)
    g0, g1 = table[0], table[1]
    mask = (table.n != 0) & (table.n != 1)
    ns, cs = table.n[mask], table.coeffs[mask]
    theta = np.angle(u)
    series = np.exp(1j * np.multiply.outer(theta, ns)) @ cs
    G = g1 * amp * phase
    Nn = np.where(r > 0, amp * series, 0.0)
    G0 = g0 * amp
    out = (G, Nn, G0)
    return tuple(np.asarray(x)[()] for x in out)


def _usable(table: CoefficientTable, n_min: int = 4):
    n = table.n
    a = np.abs(table.coeffs)
    floor = NOISE_FLOOR * max(a.max(), 1e-300)
    keep = (np.abs(n) >= n_min) & (n % 2 != 0) & (a > floor)
    return np.abs(n[keep]).astype(float), a[keep]


def decay_exponent_fit(table: CoefficientTable, min_points: int = 8) -> float:
    """Least-squares slope of log|g_n| against log|n| over odd |n| >= 4."""
    n, a = _usable(table)
    if n.size < min_points:
        raise DegenerateFitError(f"only {n.size} usable coefficients (need {min_points})")
    slope, _ = np.polyfit(np.log(n), np.log(a), 1)
    return float(slope)


@dataclass
class A2Report:
    a_d: float
    weight: float
    g0: complex
    g1: complex
    partial_sum: float
    decay_exponent: float | None
    tail_bound: float
    weighted_sum: float
    g0_vanishes: bool
    g1_real: bool
    finite: bool
    max_eta: float
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.g0_vanishes and self.g1_real and self.finite

    def to_dict(self) -> dict:
        return {
            "passed": self.passed, "a_d": self.a_d, "weight": self.weight,
            "g0": [self.g0.real, self.g0.imag], "g1": [self.g1.real, self.g1.imag],
            "partial_sum": self.partial_sum, "decay_exponent": self.decay_exponent,
            "tail_bound": self.tail_bound, "weighted_sum": self.weighted_sum,
            "g0_vanishes": self.g0_vanishes, "g1_real": self.g1_real, "finite": self.finite,
            "max_eta": self.max_eta, "notes": list(self.notes),
        }


def check_A2(table: CoefficientTable, params: NonlinearityParams, tol: float = 1e-8) -> A2Report:
    a = a_d(params.d, params.lam)
    w = 1.0 + a + params.eta
    n = np.abs(table.n).astype(float)
    mag = np.abs(table.coeffs)
    partial = float(np.sum(n ** w * mag))
    notes = []
    try:
        s = decay_exponent_fit(table)
    except DegenerateFitError as exc:
        s = None
        notes.append(f"no decay fit ({exc}); tail treated as empty")
    if s is None:
        tail, finite, max_eta = 0.0, True, math.inf
    else:
        e = s + TAIL_MARGIN
        nn, aa = _usable(table)
        const = float(np.max(aa * nn ** (-e)))
        max_eta = -2.0 - a - e
        if w + e < -1.0:
            big = float(table.n_max)
            tail = 2.0 * const * big ** (w + e + 1.0) / (-(w + e + 1.0))
            finite = True
        else:
            tail, finite = math.inf, False
            notes.append(f"weight {w:.4g} overwhelms decay {s:.4g} (margin {TAIL_MARGIN})")
    g0, g1 = table[0], table[1]
    return A2Report(a, w, g0, g1, partial, s, tail, partial + tail,
                    abs(g0) < tol, abs(g1.imag) < tol, finite, max_eta, notes)
