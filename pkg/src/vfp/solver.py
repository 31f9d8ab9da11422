"""Time integration: direct nonlinear runs, Picard iteration, continuation."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field, replace
from functools import lru_cache

import numpy as np

from . import kernels
from .grid import DistField, FieldError, PhaseGrid
from .kinetics import (CoefficientSet, collision_step, raw_coefficients,
                       regularized_coefficients, transport_step)
from .moments import (compute_moments, entropy, entropy_dissipation, third_moment,
                      weighted_norm)
from .regularize import RegParams, build_mollifier, regularize_initial, regularized_fields


class SolverAbort(RuntimeError):
    """Raised when a step produces NaN/Inf or negative values.

    ``state`` holds the last valid field and ``time`` its time.
    """

    def __init__(self, msg, state=None, time=None):
        super().__init__(msg)
        self.state = state
        self.time = time


class PicardDivergence(RuntimeError):
    def __init__(self, msg, residuals, state=None):
        super().__init__(msg)
        self.residuals = list(residuals)
        self.state = state


@dataclass(frozen=True)
class PicardConfig:
    n_max: int = 12
    tol: float = 1e-8
    q: float | None = None  # None: max(6, N + 5), fixed once the grid is known
    store_stride: int = 1

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("picard.n_max must be >= 1")
        if not self.tol > 0:
            raise ValueError("picard.tol must be positive")
        if self.store_stride < 1:
            raise ValueError("picard.store_stride must be >= 1")


@dataclass(frozen=True)
class SolverConfig:
    grid: PhaseGrid
    t_end: float
    dt: float | None = None
    reg: RegParams | None = None
    picard: PicardConfig = PicardConfig()
    cadence: int = 1
    snapshot_times: tuple = ()

    def __post_init__(self):
        if self.t_end < 0 or not math.isfinite(self.t_end):
            raise ValueError(f"t_end must be a finite nonnegative number, got {self.t_end}")
        if self.dt is None:
            object.__setattr__(self, "dt", default_dt(self.grid))
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.cadence < 1:
            raise ValueError("cadence must be >= 1")
        if self.picard.q is None:
            object.__setattr__(self, "picard", replace(self.picard, q=max(6.0, self.grid.dim + 5.0)))
        if not self.picard.q > self.grid.dim + 4:
            raise ValueError(f"picard.q must exceed N + 4 = {self.grid.dim + 4}")

    def schedule(self):
        """Number of steps and the step size that lands exactly on ``t_end``."""
        if self.t_end == 0:
            return 0, self.dt
        n = max(1, int(math.ceil(self.t_end / self.dt - 1e-9)))
        return n, self.t_end / n


def default_dt(grid: PhaseGrid) -> float:
    return 0.5 * grid.dx / grid.vmax


@lru_cache(maxsize=32)
def _kernel(grid, eps):
    return build_mollifier(grid, eps)


def coefficients_for(field: DistField, reg: RegParams | None):
    """Collision coefficients of ``field``; also returns moments and reg fields."""
    m = compute_moments(field)
    if reg is None:
        return raw_coefficients(m), m, None
    rf = regularized_fields(m, _kernel(field.grid, reg.eps), reg)
    return regularized_coefficients(rf), m, rf


def _checked(values_field_fn, state, time):
    try:
        return values_field_fn()
    except FieldError as exc:
        raise SolverAbort(f"invalid state at t={time:.6g}: {exc}", state=state, time=time) from exc


def step_nonlinear(state: DistField, cfg: SolverConfig, dt: float | None = None) -> DistField:
    """One Strang step: half transport, collision with fresh coefficients, half transport."""
    dt = cfg.schedule()[1] if dt is None else dt
    half = transport_step(state, 0.5 * dt)
    coeffs, _, _ = coefficients_for(half, cfg.reg)
    out = collision_step(half, coeffs, dt)
    return transport_step(out, 0.5 * dt)


@dataclass
class Trajectory:
    dim: int
    rows: list = dc_field(default_factory=list)
    extras: list = dc_field(default_factory=list)
    snapshots: dict = dc_field(default_factory=dict)
    states: list = dc_field(default_factory=list)
    initial: DistField | None = None
    final: DistField | None = None
    reg: RegParams | None = None
    homogeneous: bool = False

    @property
    def columns(self):
        return ["time", "mass"] + [f"mom_{k + 1}" for k in range(self.dim)] + [
            "energy", "entropy", "dissipation", "third_moment"]

    @property
    def times(self):
        return np.array([r["time"] for r in self.rows])

    def column(self, name):
        return np.array([r[name] for r in self.rows])

    def extra(self, name):
        return np.array([r[name] for r in self.extras])

    def to_csv(self, path):
        _write_rows(path, self.columns, self.rows)

    def extras_to_csv(self, path):
        if self.extras:
            _write_rows(path, list(self.extras[0]), self.extras)


def _write_rows(path, columns, rows):
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def _fmt(x):
    return "%.17g" % x if isinstance(x, (float, np.floating)) else str(x)


def read_trajectory_csv(path) -> Trajectory:
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.DictReader(fh)
        rows = [{k: float(v) for k, v in r.items()} for r in reader]
        cols = reader.fieldnames or []
    dim = sum(1 for c in cols if c.startswith("mom_"))
    return Trajectory(dim=dim, rows=rows)


def third_moment_rate(field: DistField, coeffs: CoefficientSet) -> float:
    """d/dt of int int |v|^3 f under the collision dynamics with ``coeffs``.

    Transport leaves the velocity moments unchanged, so this is the full
    rate: 3 int |v| v.(u - v) f + 3 (N+1) int |v| T f.
    """
    grid = field.grid
    N = grid.dim
    comps = grid.v_components()
    speed = np.sqrt(grid.speed_sq())
    vals = field.values
    expand = (Ellipsis,) + (None,) * N
    drift = sum(c * (coeffs.u[..., k][expand] - c) for k, c in enumerate(comps))
    integrand = 3.0 * speed * drift * vals + 3.0 * (N + 1) * speed * coeffs.T[expand] * vals
    return float(np.sum(integrand)) * grid.cell_x * grid.cell_v


def _record(traj: Trajectory, t, field: DistField, reg):
    grid = field.grid
    coeffs, m, rf = coefficients_for(field, reg)
    cx = grid.cell_x
    row = {"time": float(t), "mass": float(np.sum(m.rho)) * cx}
    for k in range(grid.dim):
        row[f"mom_{k + 1}"] = float(np.sum(m.mom[..., k])) * cx
    row["energy"] = float(np.sum(m.en2)) * cx
    row["entropy"] = entropy(field)
    row["dissipation"] = entropy_dissipation(field, m)
    row["third_moment"] = third_moment(field)
    traj.rows.append(row)

    vals = field.values
    cell = grid.cell_x * grid.cell_v
    extra = {
        "time": float(t),
        "lp2": float(np.sum(vals ** 2)) * cell,
        "lp4": float(np.sum(vals ** 4)) * cell,
        "fmax": float(vals.max()),
        "fmin": float(vals.min()),
        "m3_rate": third_moment_rate(field, coeffs),
    }
    if rf is not None:
        N = grid.dim
        extra["u_eps_scaled"] = float(np.max(np.sqrt(np.sum(rf.u_eps ** 2, axis=-1)))) * reg.eps
        extra["t_scaled"] = float(rf.t_eps_delta.max()) * reg.delta
        extra["t_min"] = float(rf.t_eps_delta.min())
        extra["phi_margin"] = float(np.min(rf.phi - N * rf.rhoT_moll))
        extra["rhoT_moll_min"] = float(np.min(rf.rhoT_moll))
    traj.extras.append(extra)


def is_homogeneous(field: DistField) -> bool:
    """True when every spatial cell holds the same velocity profile."""
    vals = field.values
    first = vals[(0,) * field.grid.dim]
    return bool(np.all(vals == first))


def run(cfg: SolverConfig, f0: DistField, initial_regularized=False, keep_states=False) -> Trajectory:
    """Integrate the nonlinear equation to ``cfg.t_end``.

    Regularized configurations start from the regularized initial data unless
    ``initial_regularized`` says ``f0`` already is.
    """
    reg = cfg.reg
    f = f0
    if reg is not None and not initial_regularized:
        f = regularize_initial(f0, reg.eps)
    steps, dt = cfg.schedule()
    traj = Trajectory(dim=cfg.grid.dim, initial=f, reg=reg, homogeneous=is_homogeneous(f))
    snap_steps = {int(round(ts / dt)): ts for ts in cfg.snapshot_times if 0 <= ts <= cfg.t_end + 1e-12}
    _record(traj, 0.0, f, reg)
    if keep_states:
        traj.states.append(f.values)
    if 0 in snap_steps:
        traj.snapshots[0.0] = f
    for n in range(1, steps + 1):
        prev = f
        t = n * dt
        f = _checked(lambda: step_nonlinear(prev, cfg, dt), prev, (n - 1) * dt)
        if keep_states:
            traj.states.append(f.values)
        if n % cfg.cadence == 0 or n == steps:
            _record(traj, t, f, reg)
        if n in snap_steps:
            traj.snapshots[t] = f
    traj.final = f
    return traj


@dataclass
class PicardResult:
    final: DistField
    residuals: list
    converged: bool
    times: np.ndarray
    states: list


def _stored_steps(steps, stride):
    idx = list(range(0, steps, stride))
    if steps and idx[-1] != steps - 1:
        idx.append(steps - 1)
    return idx


def _interp_coeffs(store, k):
    """Coefficients at step ``k`` from a {step: CoefficientSet} store."""
    if k in store:
        return store[k]
    keys = sorted(store)
    hi = next(s for s in keys if s > k)
    lo = max(s for s in keys if s < k)
    a = (k - lo) / (hi - lo)
    c0, c1 = store[lo], store[hi]
    return CoefficientSet(u=(1 - a) * c0.u + a * c1.u, T=(1 - a) * c0.T + a * c1.T,
                          source=c0.source)


def picard_solve(f0eps: DistField, cfg: SolverConfig) -> PicardResult:
    """Frozen-coefficient iteration for the regularized equation.

    Iterate 0 is ``f0eps`` at every time. Iterate n+1 solves the linear
    equation whose coefficients at each step come from iterate n at the same
    stage of the same step, so a fixed point reproduces the direct run. The
    residual is sup over stored times of the weighted L^2_q distance between
    successive iterates.
    """
    if cfg.reg is None:
        raise ValueError("picard_solve needs regularization parameters")
    if np.min(f0eps.values) <= 0:
        raise ValueError("picard_solve needs strictly positive initial data")
    steps, dt = cfg.schedule()
    times = np.arange(steps + 1) * dt
    if steps == 0:
        return PicardResult(final=f0eps, residuals=[], converged=True, times=times,
                            states=[f0eps.values])
    pc = cfg.picard
    keep = _stored_steps(steps, pc.store_stride)
    keep_set = set(keep)
    base_coeff, _, _ = coefficients_for(f0eps, cfg.reg)
    prev_coeffs = {k: base_coeff for k in keep}
    prev_states = {k: f0eps.values for k in [0] + [s + 1 for s in keep]}
    grid = f0eps.grid
    residuals = []
    converged = False
    f = f0eps
    states = [f0eps.values]
    for _ in range(pc.n_max):
        f = f0eps
        states = [f.values]
        new_coeffs = {}
        r = 0.0
        for k in range(steps):
            half = transport_step(f, 0.5 * dt)
            if k in keep_set:
                new_coeffs[k], _, _ = coefficients_for(half, cfg.reg)
            coeff = _interp_coeffs(prev_coeffs, k)
            f = transport_step(collision_step(half, coeff, dt), 0.5 * dt)
            states.append(f.values)
            if (k + 1) in prev_states:
                diff = f.values - prev_states[k + 1]
                r = max(r, weighted_norm((grid, diff), 2, pc.q))
        residuals.append(r)
        prev_coeffs = new_coeffs
        prev_states = {k: states[k] for k in [0] + [s + 1 for s in keep]}
        if r < pc.tol:
            converged = True
            break
        if len(residuals) >= 4 and all(residuals[-i] >= residuals[-i - 1] for i in (1, 2, 3)):
            raise PicardDivergence("Picard divergence: residuals stopped decreasing",
                                   residuals, state=f)
    return PicardResult(final=f, residuals=residuals, converged=converged, times=times,
                        states=states)


@dataclass
class ContinuationTable:
    rows: list
    reference_rows: list

    columns = ("eps", "delta", "dist_rho", "dist_mom", "dist_energy")

    def to_csv(self, path, reference=False):
        _write_rows(path, list(self.columns), self.reference_rows if reference else self.rows)


def moment_distance(a: DistField, b: DistField):
    """L^1(torus) distances of rho, rho u and the energy density."""
    ma, mb = compute_moments(a), compute_moments(b)
    cx = a.grid.cell_x
    d_rho = float(np.sum(np.abs(ma.rho - mb.rho))) * cx
    d_mom = float(np.sum(np.sqrt(np.sum((ma.mom - mb.mom) ** 2, axis=-1)))) * cx
    d_en = float(np.sum(np.abs(ma.en2 - mb.en2))) * cx
    return d_rho, d_mom, d_en


def continuation_study(cfg: SolverConfig, f0: DistField, eps_list, delta_list,
                       reference=True) -> ContinuationTable:
    """Final-moment distances along eps (at delta_list[0]) then delta (at eps_list[-1]).

    ``rows`` hold distances between consecutive parameter pairs (NaN for the
    first of each sweep). ``reference_rows`` hold distances to a run with raw
    coefficients started from the same regularized initial data, so that only
    the coefficient regularization is measured (the initial floor adds a
    uniform mass eps * pi^(N/2) that no coefficient change can remove).
    Runs execute concurrently, up to ``VFP_THREADS``.
    """
    eps_list = [float(e) for e in eps_list]
    delta_list = [float(d) for d in delta_list]
    pairs_eps = [(e, delta_list[0]) for e in eps_list]
    pairs_delta = [(eps_list[-1], d) for d in delta_list]
    unique = list(dict.fromkeys(pairs_eps + pairs_delta))
    last_only = replace(cfg, cadence=max(1, cfg.schedule()[0]), snapshot_times=())

    def one(pair):
        return run(replace(last_only, reg=RegParams(*pair)), f0).final

    def raw_from(eps):
        return run(replace(last_only, reg=None), regularize_initial(f0, eps)).final

    eps_values = list(dict.fromkeys(p[0] for p in unique))
    with ThreadPoolExecutor(max_workers=kernels.thread_count()) as pool:
        finals = dict(zip(unique, pool.map(one, unique)))
        refs = dict(zip(eps_values, pool.map(raw_from, eps_values))) if reference else {}

    rows, ref_rows = [], []
    for sweep in (pairs_eps, pairs_delta):
        prev = None
        for pair in sweep:
            d = moment_distance(finals[prev], finals[pair]) if prev else (math.nan,) * 3
            rows.append(dict(zip(ContinuationTable.columns, pair + d)))
            if reference:
                ref_rows.append(dict(zip(ContinuationTable.columns,
                                         pair + moment_distance(finals[pair], refs[pair[0]]))))
            prev = pair
    return ContinuationTable(rows=rows, reference_rows=ref_rows)
