"""Stochastic particle oracle for the regularized equation.

Particles follow the mean-field SDE

    dX = V dt,   dV = (u_eps(X) - V) dt + sqrt(2 T_eps,delta(X)) dW,

whose law solves the regularized kinetic equation. All particles carry the
same weight, so count and total weight are conserved exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import DistField, PhaseGrid
from .kinetics import CoefficientSet, regularized_coefficients
from .moments import MomentSet, moments_from_raw
from .regularize import MollifierKernel, mollify, regularize_initial, regularized_fields
from .solver import SolverConfig, Trajectory, _kernel, _write_rows

ENSEMBLE_MAGIC = "vfp-ensemble"
_INIT_STREAM = 2 ** 64 - 1


def stream(seed: int, step: int) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, step)``.

    Draws within a step are taken in particle-index order, so the result
    does not depend on how the update work is split.
    """
    key = np.array([int(seed) % 2 ** 64, int(step) % 2 ** 64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class Ensemble:
    x: np.ndarray  # (n_p, N), wrapped into [0, period)
    v: np.ndarray  # (n_p, N)
    weight: float
    seed: int
    step: int = 0
    period: float = 1.0

    def __post_init__(self):
        if self.x.shape != self.v.shape or self.x.ndim != 2:
            raise ValueError("x and v must both have shape (n_p, N)")
        if not np.all(np.isfinite(self.v)):
            raise ValueError("non-finite particle velocity")

    @property
    def n_p(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def total_weight(self) -> float:
        return self.weight * self.n_p


def init_ensemble(f0eps: DistField, n_p: int, seed: int) -> Ensemble:
    """Sample ``n_p`` particles from the cell histogram of ``f0eps``.

    A cell is drawn with probability proportional to its content, then the
    particle is placed uniformly inside that phase-space cell.
    """
    n_p = int(n_p)
    if n_p <= 0:
        raise ValueError(f"n_p must be positive, got {n_p}")
    grid = f0eps.grid
    probs = f0eps.values.ravel()
    total = math.fsum(probs)
    if not total > 0:
        raise ValueError("cannot sample particles from a field with zero mass")
    cdf = np.cumsum(probs) / total
    cdf[-1] = 1.0
    rng = stream(seed, _INIT_STREAM)
    cells = np.searchsorted(cdf, rng.random(n_p), side="right")
    cells = np.minimum(cells, probs.size - 1)
    idx = np.unravel_index(cells, grid.shape)
    jitter = rng.random((n_p, 2 * grid.dim))
    N = grid.dim
    x = np.stack([(idx[k] + jitter[:, k]) * grid.dx for k in range(N)], axis=1)
    v = np.stack([-grid.vmax + (idx[N + k] + jitter[:, N + k]) * grid.dv for k in range(N)], axis=1)
    mass = total * grid.cell_x * grid.cell_v
    return Ensemble(x=np.mod(x, grid.period), v=v, weight=mass / n_p, seed=int(seed),
                    step=0, period=grid.period)


def interpolate_periodic(field: np.ndarray, x: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    """Linear (bilinear in 2D) periodic interpolation of a cell-centred field.

    ``field`` may carry trailing component axes beyond ``spatial_shape``.
    """
    s = x / grid.dx - 0.5
    lo = np.floor(s)
    a = s - lo
    i0 = lo.astype(np.intp) % grid.nx
    i1 = (i0 + 1) % grid.nx
    if grid.dim == 1:
        w0, w1 = 1.0 - a[:, 0], a[:, 0]
        tail = (None,) * (field.ndim - 1)
        return field[i0[:, 0]] * w0[(slice(None),) + tail] + field[i1[:, 0]] * w1[(slice(None),) + tail]
    out = 0.0
    tail = (slice(None),) + (None,) * (field.ndim - 2)
    for ia, wa in ((i0[:, 0], 1.0 - a[:, 0]), (i1[:, 0], a[:, 0])):
        for ib, wb in ((i0[:, 1], 1.0 - a[:, 1]), (i1[:, 1], a[:, 1])):
            out = out + field[ia, ib] * (wa * wb)[tail]
    return out


def em_step(ens: Ensemble, coeffs: CoefficientSet, grid: PhaseGrid, dt: float,
            rng: np.random.Generator | None = None) -> Ensemble:
    """One Euler-Maruyama step with coefficients read at the old positions."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if rng is None:
        rng = stream(ens.seed, ens.step)
    u = interpolate_periodic(coeffs.u, ens.x, grid)
    T = np.maximum(interpolate_periodic(coeffs.T, ens.x, grid), 0.0)
    xi = rng.standard_normal(ens.v.shape)
    v_new = ens.v + (u - ens.v) * dt + np.sqrt(2.0 * T * dt)[:, None] * xi
    x_new = np.mod(ens.x + ens.v * dt, ens.period)
    return Ensemble(x=x_new, v=v_new, weight=ens.weight, seed=ens.seed, step=ens.step + 1,
                    period=ens.period)


@dataclass(frozen=True)
class ParticleMoments:
    moments: MomentSet
    se_rho: np.ndarray
    se_mom: np.ndarray
    se_en2: np.ndarray


def _cell_index(ens: Ensemble, grid: PhaseGrid) -> np.ndarray:
    idx = np.floor(ens.x / grid.dx).astype(np.intp) % grid.nx
    if grid.dim == 1:
        return idx[:, 0]
    return idx[:, 0] * grid.nx + idx[:, 1]


def _binned_sum_and_se(cell, values, ncells, n_p):
    """Per-cell sum of ``values`` and its CLT standard error.

    The estimate is sum_i y_i with y_i = values_i on the cell and 0 elsewhere;
    its standard error is sqrt(n_p * var(y)).
    """
    s1 = np.bincount(cell, weights=values, minlength=ncells)
    s2 = np.bincount(cell, weights=values * values, minlength=ncells)
    var = s2 / n_p - (s1 / n_p) ** 2
    return s1, np.sqrt(np.maximum(var, 0.0) * n_p)


def estimate_moments(ens: Ensemble, grid: PhaseGrid, kernel: MollifierKernel | None = None) -> ParticleMoments:
    """Histogram estimates of rho, rho u and en2 on the spatial cells.

    With ``kernel`` the raw moment fields are mollified before u and T are
    formed. Standard errors refer to the unmollified histogram.
    """
    cell = _cell_index(ens, grid)
    ncells = grid.nx ** grid.dim
    scale = ens.weight / grid.cell_x
    n = ens.n_p
    ones = np.full(n, scale)
    rho, se_rho = _binned_sum_and_se(cell, ones, ncells, n)
    mom, se_mom = [], []
    for k in range(grid.dim):
        s, e = _binned_sum_and_se(cell, scale * ens.v[:, k], ncells, n)
        mom.append(s)
        se_mom.append(e)
    en2, se_en2 = _binned_sum_and_se(cell, scale * np.sum(ens.v ** 2, axis=1), ncells, n)
    shp = grid.spatial_shape
    rho = rho.reshape(shp)
    mom = np.stack(mom, axis=-1).reshape(shp + (grid.dim,))
    en2 = en2.reshape(shp)
    if kernel is not None:
        rho, mom, en2 = mollify(kernel, rho), mollify(kernel, mom), mollify(kernel, en2)
    m = moments_from_raw(rho, mom, en2, grid)
    return ParticleMoments(moments=m, se_rho=se_rho.reshape(shp),
                           se_mom=np.stack(se_mom, axis=-1).reshape(shp + (grid.dim,)),
                           se_en2=se_en2.reshape(shp))


def histogram_entropy(ens: Ensemble, grid: PhaseGrid) -> float:
    """Entropy of the phase-space histogram on ``grid`` (particles outside the box are dropped)."""
    inside = np.all(np.abs(ens.v) < grid.vmax, axis=1)
    xi = np.floor(ens.x[inside] / grid.dx).astype(np.intp) % grid.nx
    vi = np.floor((ens.v[inside] + grid.vmax) / grid.dv).astype(np.intp)
    vi = np.clip(vi, 0, grid.nv - 1)
    flat = np.ravel_multi_index(tuple(xi.T) + tuple(vi.T), grid.shape)
    counts = np.bincount(flat, minlength=int(np.prod(grid.shape)))
    f = counts * ens.weight / (grid.cell_x * grid.cell_v)
    pos = f > 0
    return float(np.sum(f[pos] * np.log(f[pos]))) * grid.cell_x * grid.cell_v


@dataclass
class ParticleTrajectory(Trajectory):
    ensemble: Ensemble | None = None
    moment_snapshots: dict = dc_field(default_factory=dict)


def _record(traj: ParticleTrajectory, t, ens: Ensemble, grid: PhaseGrid):
    w = ens.weight
    speed2 = np.sum(ens.v ** 2, axis=1)
    row = {"time": float(t), "mass": ens.total_weight}
    for k in range(ens.dim):
        row[f"mom_{k + 1}"] = w * float(np.sum(ens.v[:, k]))
    row["energy"] = w * float(np.sum(speed2))
    row["entropy"] = histogram_entropy(ens, grid)
    row["dissipation"] = math.nan
    row["third_moment"] = w * float(np.sum(speed2 * np.sqrt(speed2)))
    traj.rows.append(row)
    mean_v = np.mean(ens.v, axis=0)
    temp = float(np.mean(np.sum((ens.v - mean_v) ** 2, axis=1))) / ens.dim
    m4 = float(np.mean(np.sum((ens.v - mean_v) ** 4, axis=1))) / ens.dim
    traj.extras.append({"time": float(t), "temperature": temp,
                        "fourth_moment": m4, "fourth_excess": m4 - 3.0 * temp ** 2})


def run_particles(cfg: SolverConfig, f0: DistField, n_p: int, seed: int,
                  snapshot_times=(), initial_regularized=False) -> ParticleTrajectory:
    """Self-consistent particle run matched to the grid solver's schedule."""
    if cfg.reg is None:
        raise ValueError("particle runs need regularization parameters")
    grid = cfg.grid
    f0eps = f0 if initial_regularized else regularize_initial(f0, cfg.reg.eps)
    ens = init_ensemble(f0eps, n_p, seed)
    kern = _kernel(grid, cfg.reg.eps)
    steps, dt = cfg.schedule()
    snap_steps = {int(round(ts / dt)) for ts in snapshot_times if 0 <= ts <= cfg.t_end + 1e-12}
    traj = ParticleTrajectory(dim=grid.dim, reg=cfg.reg, initial=f0eps)
    _record(traj, 0.0, ens, grid)
    if 0 in snap_steps:
        traj.moment_snapshots[0.0] = estimate_moments(ens, grid)
    for n in range(1, steps + 1):
        pm = estimate_moments(ens, grid)
        coeffs = regularized_coefficients(regularized_fields(pm.moments, kern, cfg.reg))
        ens = em_step(ens, coeffs, grid, dt)
        t = n * dt
        if n % cfg.cadence == 0 or n == steps:
            _record(traj, t, ens, grid)
        if n in snap_steps:
            traj.moment_snapshots[t] = estimate_moments(ens, grid)
    traj.ensemble = ens
    return traj


def write_ensemble(path, ens: Ensemble, time=0.0) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{ENSEMBLE_MAGIC} v1 {ens.dim} {ens.n_p} {ens.weight!r} {ens.seed} "
                 f"{ens.step} {ens.period!r} {float(time)!r}\n")
        data = np.concatenate([ens.x, ens.v], axis=1)
        np.savetxt(fh, data, fmt="%.17g")


def read_ensemble(path):
    with open(path, encoding="ascii") as fh:
        head = fh.readline().split()
        if len(head) != 9 or head[0] != ENSEMBLE_MAGIC:
            raise ValueError(f"{path}: not a {ENSEMBLE_MAGIC} file")
        dim, n_p = int(head[2]), int(head[3])
        data = np.loadtxt(fh, ndmin=2).reshape(n_p, 2 * dim)
    ens = Ensemble(x=data[:, :dim], v=data[:, dim:], weight=float(head[4]), seed=int(head[5]),
                   step=int(head[6]), period=float(head[7]))
    return ens, float(head[8])


@dataclass
class ComparisonRow:
    time: float
    quantity: str
    rms_z: float
    max_z: float
    l1_distance: float


def compare_fields(grid_m: MomentSet, grid_err: dict, part: ParticleMoments, cell_x: float):
    """z-scores of particle minus grid moment fields, per quantity.

    ``grid_err`` maps 'rho', 'mom', 'en2' to grid error estimates added in
    quadrature to the particle standard errors.
    """
    out = {}
    pairs = {
        "rho": (grid_m.rho, part.moments.rho, part.se_rho),
        "mom": (grid_m.mom, part.moments.mom, part.se_mom),
        "en2": (grid_m.en2, part.moments.en2, part.se_en2),
    }
    for name, (g, p, se) in pairs.items():
        sigma = np.sqrt(se ** 2 + np.asarray(grid_err.get(name, 0.0)) ** 2)
        z = np.abs(p - g) / np.where(sigma > 0, sigma, np.inf)
        out[name] = (float(np.sqrt(np.mean(z ** 2))), float(np.max(z)),
                     float(np.sum(np.abs(p - g))) * cell_x)
    return out


def write_comparison(path, rows):
    cols = ["time", "quantity", "rms_z", "max_z", "l1_distance"]
    _write_rows(path, cols, [r.__dict__ for r in rows])
