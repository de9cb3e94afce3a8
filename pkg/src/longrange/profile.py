"""Corrected final-state profile and the asymptotic solution built from it.

The final datum is given on the frequency side as ``u_plus_hat``.  The
profile rotates it pointwise by a logarithmic phase,

    w_hat(t) = u_plus_hat * exp(-i g1 |u_plus_hat|^p_c log t / c_plus),

and the asymptotic solution is ``u_p(t) = M1(t) D(zeta2(t)) w_hat(t)`` with
``M1(t)`` the chirp ``exp(i zeta2'(t) |x|^2 / (2 zeta2(t)))``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .fieldops import (
    ComplexField,
    ComplexGaussian,
    SpectralGrid,
    _interp_apply,
    chirp_by,
    unitary_fft,
)
from .potential import FundamentalPair

__all__ = [
    "FinalData",
    "ProfileParams",
    "phase_rate",
    "w_hat",
    "u_p_field",
    "remainder_R_apply",
    "remainder_norm",
    "frequency_grid_for",
    "write_profile_csv",
]


@dataclass(frozen=True)
class FinalData:
    """The frequency-side final datum, either an analytic Gaussian or samples."""

    gaussian: ComplexGaussian | None = None
    sampled: ComplexField | None = None

    def __post_init__(self):
        if (self.gaussian is None) == (self.sampled is None):
            raise ValueError("give exactly one of gaussian or sampled")

    @classmethod
    def gaussian_packet(cls, amplitude_sup: float, xi0: float = 0.25, a: float = 1.0, d: int = 1) -> FinalData:
        """``amplitude_sup * exp(-a |xi - xi0|^2 / 2)``, centred at xi0 on every axis."""
        return cls(gaussian=ComplexGaussian(amplitude_sup, (xi0,) * d, (0.0,) * d, a))

    @property
    def d(self) -> int:
        return self.gaussian.d if self.gaussian is not None else self.sampled.grid.d

    @property
    def amplitude_sup(self) -> float:
        if self.gaussian is not None:
            return self.gaussian.sup()
        return float(np.max(np.abs(self.sampled.values)))

    @property
    def is_zero(self) -> bool:
        return self.amplitude_sup == 0.0

    def norm(self) -> float:
        return self.gaussian.norm() if self.gaussian is not None else self.sampled.norm()

    def support_radius(self, n_widths: float = 4.0) -> float:
        """Radius in frequency containing the datum up to ``n_widths`` widths."""
        if self.gaussian is not None:
            g = self.gaussian
            return float(np.max(np.abs(g.center))) + n_widths / math.sqrt(g.a.real)
        return self.sampled.grid.length / 2.0

    def sobolev_status(self) -> str:
        """Membership of the datum in the weighted spaces the theory asks for."""
        return "analytic" if self.gaussian is not None else "unchecked"

    def values(self, *coords) -> np.ndarray:
        """u_plus_hat at arbitrary coordinates (broadcast arrays)."""
        if self.gaussian is not None:
            return np.asarray(self.gaussian(*coords), dtype=complex)
        src = self.sampled
        if src.grid.d != 1:
            raise NotImplementedError("sampled data at off-grid points is supported for d=1")
        pts = np.asarray(coords[0], dtype=float).ravel()
        inside = np.abs(pts) <= src.grid.length / 2
        out = np.zeros(pts.shape, dtype=complex)
        if inside.any():
            out[inside] = _interp_apply(src.values, src.grid, pts[inside])
        return out.reshape(np.shape(coords[0]))

    def on(self, grid: SpectralGrid) -> ComplexField:
        vals = self.values(*grid.coords())
        return ComplexField(grid, np.broadcast_to(vals, grid.shape))


@dataclass(frozen=True)
class ProfileParams:
    g1: float
    c_plus: float
    p_c: float

    def __post_init__(self):
        if not self.c_plus > 0:
            raise ValueError(f"c_plus must be positive, got {self.c_plus}")
        if not self.p_c > 0:
            raise ValueError(f"p_c must be positive, got {self.p_c}")

    def without_log(self) -> ProfileParams:
        return ProfileParams(0.0, self.c_plus, self.p_c)


def phase_rate(pp: ProfileParams, amplitude) -> np.ndarray:
    """Coefficient of log t in the profile's phase at the given |u_plus_hat|."""
    return -pp.g1 * np.abs(amplitude) ** pp.p_c / pp.c_plus


def _rotate(values: np.ndarray, pp: ProfileParams, t: float) -> np.ndarray:
    if pp.g1 == 0.0 or t == 1.0:
        return values
    return values * np.exp(1j * phase_rate(pp, values) * math.log(t))


def w_hat(data: FinalData, pp: ProfileParams, t: float, grid: SpectralGrid | None = None) -> ComplexField:
    """The phase-corrected profile on a frequency grid."""
    if t < 1:
        raise ValueError(f"w_hat needs t >= 1, got {t}")
    if grid is None:
        if data.sampled is None:
            raise ValueError("Gaussian data needs an explicit grid")
        grid = data.sampled.grid
    base = data.on(grid)
    return base.with_values(_rotate(base.values, pp, t))


def u_p_field(pair: FundamentalPair, data: FinalData, pp: ProfileParams, t: float, grid: SpectralGrid,
              scaling: str = "zeta2", log_phase: bool = True, check: bool = True) -> ComplexField:
    """The asymptotic solution at time t on a position grid.

    ``scaling="zeta2"`` evaluates ``M1(t) D(zeta2(t)) w_hat(t)``.
    ``scaling="t"`` dilates by t instead of zeta2(t) in the prefactor and the
    argument of u_plus_hat; the two agree when sigma vanishes.
    ``log_phase=False`` drops the logarithmic correction.
    """
    if not t > pair.spec.r0:
        raise ValueError(f"u_p needs t > r0 = {pair.spec.r0}")
    _, _, z2, z2p = pair.at(t)
    scale = {"zeta2": z2, "t": t}.get(scaling)
    if scale is None:
        raise ValueError(f"scaling must be 'zeta2' or 't', got {scaling!r}")
    beta = z2p / (2.0 * z2)
    coords = grid.coords()
    amp = np.broadcast_to(data.values(*[c / scale for c in coords]), grid.shape)
    vals = _rotate(amp, pp if log_phase else pp.without_log(), t) * (1j * scale) ** (-grid.d / 2)
    field = ComplexField(grid, vals)
    return chirp_by(field, beta, check=check)


def frequency_grid_for(grid: SpectralGrid, pair: FundamentalPair, t: float) -> SpectralGrid:
    """The frequency grid that D(zeta2(t)) maps exactly onto ``grid``."""
    z2 = pair.at(t)[2]
    return grid.scaled(1.0 / z2)


def _bracket(pair: FundamentalPair, t: float, f: ComplexField) -> ComplexField:
    """(F M2(t) F^-1 - 1) f on the frequency grid of ``f``."""
    z1, _, z2, _ = pair.at(t)
    inner = unitary_fft(f, "inverse")
    inner = chirp_by(inner, z1 / (2.0 * z2))
    back = unitary_fft(inner, "forward")
    back = ComplexField(f.grid, back.values)
    return back - f


def remainder_R_apply(pair: FundamentalPair, t: float, f: ComplexField, check: bool = True) -> ComplexField:
    """R(t) f = M1(t) D(zeta2(t)) (F M2(t) F^-1 - 1) f.

    The dilation is exact: the result lives on ``f.grid`` stretched by zeta2(t).
    """
    if not t > pair.spec.r0:
        raise ValueError(f"R(t) needs t > r0 = {pair.spec.r0}")
    _, _, z2, z2p = pair.at(t)
    h = _bracket(pair, t, f)
    out = ComplexField(f.grid.scaled(z2), h.values * (1j * z2) ** (-f.grid.d / 2))
    return chirp_by(out, z2p / (2.0 * z2), check=check)


def remainder_norm(pair: FundamentalPair, t: float, f: ComplexField) -> float:
    """||R(t) f||_2, skipping the unitary outer factors."""
    if not t > pair.spec.r0:
        raise ValueError(f"R(t) needs t > r0 = {pair.spec.r0}")
    return _bracket(pair, t, f).norm()


def write_profile_csv(field: ComplexField, path) -> None:
    """Snapshot columns x, re, im, abs (d = 1; d = 2 adds a y column)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if field.grid.d == 1:
            w.writerow(["x", "re", "im", "abs"])
            for x, v in zip(field.grid.x, field.values):
                w.writerow([f"{x:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}", f"{abs(v):.17g}"])
        else:
            w.writerow(["x", "y", "re", "im", "abs"])
            xs = field.grid.x
            for i, x in enumerate(xs):
                for j, y in enumerate(xs):
                    v = field.values[i, j]
                    w.writerow([f"{x:.17g}", f"{y:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}", f"{abs(v):.17g}"])

