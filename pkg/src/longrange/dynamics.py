"""Split-step integration of i u_t = (-Delta/2 + sigma(t)|x|^2/2) u + F(u).

One Strang step of size dt is

    K(dt/2) V(dt/2) N(dt) V(dt/2) K(dt/2)

with K the free flow as a Fourier multiplier, V the potential phase with
sigma sampled at the step midpoint and N the pointwise flow of
u' = -i F(u) advanced by one classical RK4 step.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .fieldops import ComplexField, SpectralGrid, chirp_by, unitary_fft
from .harness import DecayReport, FitError, fit_power_law, weighted_norm, weighted_norm_tail
from .nonlinearity import (
    CoefficientTable,
    NonlinearityParams,
    PeriodicSymbol,
    evaluate_F,
)
from .params import ParamWindows
from .potential import FundamentalPair, eval_sigma
from .profile import FinalData, ProfileParams, frequency_grid_for, u_p_field, w_hat

__all__ = [
    "EvolutionAbort",
    "SolverConfig",
    "Trajectory",
    "log_times",
    "split_step_evolve",
    "seed_state",
    "final_state_experiment",
    "ablation_no_log",
    "paired_experiment",
    "MAX_DT",
    "SLOPE_MARGIN",
]

MAX_DT = 0.05
SLOPE_MARGIN = 0.15


class EvolutionAbort(RuntimeError):
    """The state stopped being finite; ``last_good_time`` is the last clean sample."""

    def __init__(self, message: str, last_good_time: float, partial: Trajectory | None = None):
        super().__init__(message)
        self.last_good_time = last_good_time
        self.partial = partial


def log_times(t0: float, t1: float, n: int) -> np.ndarray:
    return np.geomspace(t0, t1, n)


@dataclass
class SolverConfig:
    grid: SpectralGrid
    pair: FundamentalPair
    t0: float
    t1: float
    dt: float
    symbol: PeriodicSymbol | None = None
    nl: NonlinearityParams | None = None
    table: CoefficientTable | None = None
    data: FinalData | None = None
    pp: ProfileParams | None = None
    record_times: np.ndarray | None = None
    snapshot_times: tuple = ()
    seed: str = "linear"
    scaling: str = "zeta2"
    b: float | None = None
    windows: ParamWindows | None = None
    eps0: float = 0.5
    tau_samples: tuple = (30.0, 50.0, 80.0)
    scheme: str = "strang"
    enforce_dt: bool = True

    def __post_init__(self):
        r0 = self.pair.spec.r0
        if not r0 < self.t0 < self.t1:
            raise ValueError(f"need r0 < t0 < t1, got r0={r0}, t0={self.t0}, t1={self.t1}")
        if self.t1 > self.pair.t_max:
            raise ValueError(f"fundamental pair only reaches t={self.pair.t_max}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.enforce_dt and self.dt > MAX_DT:
            raise ValueError(f"dt={self.dt} exceeds {MAX_DT}")
        if self.scheme != "strang":
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.seed not in ("linear", "profile"):
            raise ValueError(f"seed must be 'linear' or 'profile', got {self.seed!r}")
        if (self.symbol is None) != (self.nl is None):
            raise ValueError("symbol and nonlinearity parameters go together")
        if self.record_times is None:
            self.record_times = log_times(self.t0, self.t1, 40)

    @property
    def n_steps(self) -> int:
        return max(1, int(round((self.t1 - self.t0) / self.dt)))

    @property
    def step(self) -> float:
        return (self.t1 - self.t0) / self.n_steps

    @property
    def nonlinear(self) -> bool:
        return self.symbol is not None


@dataclass
class Trajectory:
    times: np.ndarray
    mass: np.ndarray
    linf: np.ndarray
    residual_l2: dict = field(default_factory=dict)
    residual_linf: dict = field(default_factory=dict)
    snapshots: dict = field(default_factory=dict)
    final: ComplexField | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must ascend")

    def residual_norms(self, r: float, name: str = "profile") -> np.ndarray:
        if r == 2:
            return self.residual_l2[name]
        if math.isinf(r):
            return self.residual_linf[name]
        raise ValueError(f"only r in {{2, inf}} are recorded, got {r}")

    def is_finite(self) -> bool:
        arrays = [self.mass, self.linf, *self.residual_l2.values(), *self.residual_linf.values()]
        return all(np.all(np.isfinite(a)) for a in arrays)

    def rows(self, name: str = "profile"):
        res = self.residual_l2.get(name, np.full(self.times.shape, np.nan))
        for row in zip(self.times, res, self.mass, self.linf):
            yield tuple(float(v) for v in row)


def _rk4_pointwise(u: np.ndarray, h: float, rhs: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    k1 = rhs(u)
    k2 = rhs(u + 0.5 * h * k1)
    k3 = rhs(u + 0.5 * h * k2)
    k4 = rhs(u + h * k3)
    return u + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


class _Stepper:
    def __init__(self, cfg: SolverConfig, h: float):
        g = cfg.grid
        self.cfg = cfg
        self.h = h
        self.axes = tuple(range(g.d))
        self.kin = np.exp(-0.25j * h * g.xi2())
        self.half_r2 = 0.5 * g.r2()
        if cfg.nonlinear:
            sym, nl = cfg.symbol, cfg.nl
            self.rhs = lambda v: -1j * evaluate_F(sym, nl, v)
        else:
            self.rhs = None

    def kinetic(self, u):
        return np.fft.ifftn(np.fft.fftn(u, axes=self.axes) * self.kin, axes=self.axes)

    def __call__(self, u: np.ndarray, t: float) -> np.ndarray:
        h = self.h
        sig = float(eval_sigma(self.cfg.pair.spec, t + 0.5 * h))
        u = self.kinetic(u)
        if sig != 0.0:
            pot = np.exp(-0.5j * h * sig * self.half_r2)
            u = u * pot
        if self.rhs is not None:
            u = _rk4_pointwise(u, h, self.rhs)
        if sig != 0.0:
            u = u * pot
        return self.kinetic(u)


def _norms(v: np.ndarray, cell: float) -> tuple[float, float]:
    a = np.abs(v)
    return float(math.sqrt(np.sum(a * a) * cell)), float(a.max()) if a.size else 0.0


def split_step_evolve(cfg: SolverConfig, u0: ComplexField,
                      references: dict[str, Callable[[float], ComplexField]] | None = None,
                      backward: bool = False) -> Trajectory:
    """Evolve u0 from t0 to t1 (or t1 to t0 if ``backward``) and sample at record times.

    ``references`` maps names to callables t -> field; the L2 and L^inf
    distances to each are recorded at every sample.
    """
    if u0.grid != cfg.grid:
        raise ValueError("initial field is not on the solver grid")
    n, h = cfg.n_steps, cfg.step
    t_start = cfg.t1 if backward else cfg.t0
    sgn = -1.0 if backward else 1.0
    stepper = _Stepper(cfg, sgn * h)
    rec = np.unique(np.clip(np.round((np.asarray(cfg.record_times) - cfg.t0) / h).astype(int), 0, n))
    if backward:
        rec = np.unique(n - rec)
    snaps = {int(round((s - cfg.t0) / h)) if not backward else n - int(round((s - cfg.t0) / h))
             for s in cfg.snapshot_times}
    references = references or {}
    cell = cfg.grid.cell

    times, mass, linf = [], [], []
    res2 = {k: [] for k in references}
    resi = {k: [] for k in references}
    snapshots = {}
    u = u0.values.copy()
    last_good = t_start

    def sample(k: int):
        t = t_start + sgn * k * h
        m, li = _norms(u, cell)
        times.append(t)
        mass.append(m)
        linf.append(li)
        for name, ref in references.items():
            diff = u - ref(t).values
            a, b = _norms(diff, cell)
            res2[name].append(a)
            resi[name].append(b)

    def partial():
        order = np.argsort(times)
        return Trajectory(np.array(times)[order], np.array(mass)[order], np.array(linf)[order],
                          {k: np.array(v)[order] for k, v in res2.items()},
                          {k: np.array(v)[order] for k, v in resi.items()}, snapshots)

    rec_set = set(rec.tolist())
    for k in range(n + 1):
        if k in rec_set:
            sample(k)
        if k in snaps:
            snapshots[t_start + sgn * k * h] = ComplexField(cfg.grid, u.copy())
        if k == n:
            break
        u = stepper(u, t_start + sgn * k * h)
        # a finite mass also rules out entries whose square overflows
        if not math.isfinite(_norms(u, cell)[0]):
            raise EvolutionAbort(f"non-finite state after t={last_good:.6g}", last_good, partial())
        last_good = t_start + sgn * (k + 1) * h

    traj = partial()
    traj.final = ComplexField(cfg.grid, u)
    return traj


# --------------------------------------------------------------------------
# final-state experiments


def seed_state(cfg: SolverConfig) -> ComplexField:
    """State at t0.

    ``seed="profile"`` starts exactly on u_p(t0).  ``seed="linear"`` starts on
    the linear evolution of the profile, U0(t0, 0) F^-1 w_hat(t0), which
    equals u_p(t0) + R(t0) w_hat(t0); both pieces are evaluated on the
    frequency grid that D(zeta2(t0)) maps onto the solver grid, so no
    interpolation is involved.
    """
    if cfg.data is None or cfg.data.is_zero:
        return ComplexField(cfg.grid, np.zeros(cfg.grid.shape, dtype=complex))
    if cfg.seed == "profile":
        return u_p_field(cfg.pair, cfg.data, cfg.pp, cfg.t0, cfg.grid, cfg.scaling)
    if cfg.scaling != "zeta2":
        raise ValueError("linear seeding is defined for the zeta2 scaling only")
    pair, t0 = cfg.pair, cfg.t0
    z1, _, z2, z2p = pair.at(t0)
    fgrid = frequency_grid_for(cfg.grid, pair, t0)
    w = w_hat(cfg.data, cfg.pp, t0, fgrid)
    inner = chirp_by(unitary_fft(w, "inverse"), z1 / (2.0 * z2))
    back = unitary_fft(inner, "forward").values
    seeded = ComplexField(cfg.grid, back * (1j * z2) ** (-cfg.grid.d / 2))
    return chirp_by(seeded, z2p / (2.0 * z2))


def _references(cfg: SolverConfig, log_phase: bool = True) -> Callable[[float], ComplexField]:
    if cfg.data is None or cfg.data.is_zero:
        zero = ComplexField(cfg.grid, np.zeros(cfg.grid.shape, dtype=complex))
        return lambda t: zero
    return lambda t: u_p_field(cfg.pair, cfg.data, cfg.pp, t, cfg.grid, cfg.scaling, log_phase=log_phase)


def _admissibility(cfg: SolverConfig) -> None:
    if cfg.data is not None and cfg.data.amplitude_sup >= cfg.eps0:
        raise ValueError(f"||u_plus_hat||_inf = {cfg.data.amplitude_sup} is not below eps0 = {cfg.eps0}")
    if cfg.windows is not None and cfg.b is not None:
        cfg.windows.check_b(cfg.b)


def _report(cfg: SolverConfig, traj: Trajectory, name: str, runtime: float, label: str) -> DecayReport:
    lam = cfg.windows.lam if cfg.windows is not None else (cfg.nl.lam if cfg.nl else 0.0)
    b = cfg.b if cfg.b is not None else (cfg.windows.b_default() if cfg.windows else None)
    threshold = -(b - lam) if b is not None else None
    res = traj.residual_l2[name]
    notes = []
    if np.all(res == 0.0):
        slope = intercept = r2 = None
        notes.append("residual vanishes identically")
    else:
        pos = res > 0
        if not pos.all():
            notes.append(f"fit skips {int((~pos).sum())} zero residual sample(s)")
        try:
            slope, intercept, r2 = fit_power_law(traj.times[pos], res[pos])
        except FitError as exc:
            slope = intercept = r2 = None
            notes.append(str(exc))
    norms = {}
    if cfg.windows is not None and b is not None:
        q, r = cfg.windows.pair
        for tau in cfg.tau_samples:
            if traj.times[0] <= tau < traj.times[-1] and not math.isnan(q):
                val = weighted_norm(traj, q, r, lam, tau, traj.times[-1], name=name, d=cfg.grid.d)
                tail = weighted_norm_tail(traj, q, r, lam, traj.times[-1], name=name)
                norms[f"{tau:g}"] = {"value": val, "scaled": tau ** (b - 2 * lam) * val, "tail": tail}
    return DecayReport(
        label=label, slope=slope, intercept=intercept, r2=r2, threshold=threshold, margin=SLOPE_MARGIN,
        b=b, lam=lam, times=traj.times.tolist(), residual=res.tolist(), norms=norms,
        runtime_s=runtime, config=_echo(cfg), notes=notes,
    )


def _echo(cfg: SolverConfig) -> dict:
    spec = cfg.pair.spec
    return {
        "grid": {"d": cfg.grid.d, "n": cfg.grid.n, "length": cfg.grid.length},
        "potential": {"kind": spec.kind, "sigma1": spec.sigma1, "r0": spec.r0},
        "symbol": cfg.symbol.label if cfg.symbol else None,
        "t0": cfg.t0, "t1": cfg.t1, "dt": cfg.step, "seed": cfg.seed, "scaling": cfg.scaling,
        "b": cfg.b, "eps0": cfg.eps0,
        "amplitude_sup": cfg.data.amplitude_sup if cfg.data else 0.0,
        "g1": cfg.pp.g1 if cfg.pp else 0.0, "c_plus": cfg.pp.c_plus if cfg.pp else None,
    }


def paired_experiment(cfg: SolverConfig) -> tuple[DecayReport, DecayReport, Trajectory]:
    """One evolution measured against both the corrected and the log-free profile."""
    _admissibility(cfg)
    start = time.perf_counter()
    u0 = seed_state(cfg)
    refs = {"profile": _references(cfg, True), "no_log": _references(cfg, False)}
    traj = split_step_evolve(cfg, u0, refs)
    runtime = time.perf_counter() - start
    return (_report(cfg, traj, "profile", runtime, "main"),
            _report(cfg, traj, "no_log", runtime, "ablation_no_log"), traj)


def final_state_experiment(cfg: SolverConfig) -> DecayReport:
    _admissibility(cfg)
    start = time.perf_counter()
    traj = split_step_evolve(cfg, seed_state(cfg), {"profile": _references(cfg, True)})
    return _report(cfg, traj, "profile", time.perf_counter() - start, "main")


def ablation_no_log(cfg: SolverConfig) -> DecayReport:
    """The same run with residuals taken against the profile without its log phase."""
    _admissibility(cfg)
    start = time.perf_counter()
    traj = split_step_evolve(cfg, seed_state(cfg), {"no_log": _references(cfg, False)})
    rep = _report(cfg, traj, "no_log", time.perf_counter() - start, "ablation_no_log")
    return rep


def with_overrides(cfg: SolverConfig, **changes) -> SolverConfig:
    return replace(cfg, **changes)
