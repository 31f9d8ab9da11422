"""Velocity moments, local Maxwellians, entropy and its dissipation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import DistField, PhaseGrid, unchecked_values, velocity_integral

F_FLOOR = 1e-300
RHO_FLOOR_FACTOR = 1e-12


class DegenerateTemperature(ValueError):
    pass


@dataclass(frozen=True)
class MomentSet:
    """Spatial moment fields. Vector fields carry a trailing component axis."""

    rho: np.ndarray
    mom: np.ndarray
    en2: np.ndarray
    u: np.ndarray
    T: np.ndarray

    @property
    def dim(self) -> int:
        return self.mom.shape[-1]

    @property
    def energy_density(self) -> np.ndarray:
        """N rho T + rho |u|^2, which equals ``en2``."""
        return self.en2

    def rho_temperature(self) -> np.ndarray:
        """N rho T computed as en2 - |rho u|^2 / rho (zero in vacuum)."""
        mom_sq = np.sum(self.mom ** 2, axis=-1)
        out = np.zeros_like(self.rho)
        pos = self.rho > 0
        out[pos] = self.en2[pos] - mom_sq[pos] / self.rho[pos]
        return np.maximum(out, 0.0)


def rho_floor(rho: np.ndarray, grid: PhaseGrid) -> float:
    mass = float(np.sum(rho)) * grid.cell_x
    return RHO_FLOOR_FACTOR * mass / grid.volume


def moments_from_raw(rho, mom, en2, grid: PhaseGrid, floor=None) -> MomentSet:
    """Derive u and T from raw moments using the vacuum convention."""
    rho = np.asarray(rho, dtype=np.float64)
    mom = np.asarray(mom, dtype=np.float64)
    en2 = np.asarray(en2, dtype=np.float64)
    if floor is None:
        floor = rho_floor(rho, grid)
    occupied = rho > floor
    u = np.zeros_like(mom)
    T = np.zeros_like(rho)
    r = rho[occupied]
    u[occupied] = mom[occupied] / r[:, None]
    mom_sq = np.sum(mom[occupied] ** 2, axis=-1)
    T[occupied] = np.maximum(en2[occupied] - mom_sq / r, 0.0) / (grid.dim * r)
    return MomentSet(rho=rho, mom=mom, en2=en2, u=u, T=T)


def raw_moments(values: np.ndarray, grid: PhaseGrid):
    rho = velocity_integral(values, grid)
    comps = grid.v_components()
    mom = np.stack([velocity_integral(values, grid, c) for c in comps], axis=-1)
    en2 = velocity_integral(values, grid, grid.speed_sq())
    return rho, mom, en2


def compute_moments(field) -> MomentSet:
    """rho, rho u and the second raw moment by the midpoint rule."""
    grid, values = _unpack(field)
    return moments_from_raw(*raw_moments(values, grid), grid)


def gaussian_values(grid: PhaseGrid, rho, u, T) -> np.ndarray:
    """rho / (2 pi T)^(N/2) exp(-|v-u|^2 / 2T) sampled on the nodes.

    ``rho`` and ``T`` are spatial arrays (or scalars), ``u`` has a trailing
    component axis. Cells with ``rho == 0`` give zero.
    """
    N = grid.dim
    rho = np.broadcast_to(np.asarray(rho, dtype=np.float64), grid.spatial_shape)
    T = np.broadcast_to(np.asarray(T, dtype=np.float64), grid.spatial_shape)
    u = np.broadcast_to(np.asarray(u, dtype=np.float64), grid.spatial_shape + (N,))
    occupied = rho > 0
    if np.any(occupied & ~(T > 0)):
        raise DegenerateTemperature("degenerate temperature: rho > 0 with T = 0")
    Ts = np.where(occupied, T, 1.0)
    expand = (Ellipsis,) + (None,) * N
    dist2 = 0.0
    for k, c in enumerate(grid.v_components()):
        dist2 = dist2 + (c - u[..., k][expand]) ** 2
    norm = np.where(occupied, rho / (2.0 * np.pi * Ts) ** (N / 2), 0.0)
    return norm[expand] * np.exp(-dist2 / (2.0 * Ts[expand]))


def local_maxwellian(moments: MomentSet, grid: PhaseGrid) -> DistField:
    return DistField(grid, gaussian_values(grid, moments.rho, moments.u, moments.T))


def discrete_maxwellian(grid: PhaseGrid, rho, u, T) -> DistField:
    """Sampled Gaussian rescaled so its discrete density is exactly ``rho``.

    This is the stationary state of the collision step for coefficients
    ``(u, T)``.
    """
    vals = gaussian_values(grid, 1.0, u, T)
    dens = velocity_integral(vals, grid)
    rho = np.broadcast_to(np.asarray(rho, dtype=np.float64), grid.spatial_shape)
    scale = np.where(dens > 0, rho / np.where(dens > 0, dens, 1.0), 0.0)
    return DistField(grid, vals * scale[(Ellipsis,) + (None,) * grid.dim])


def entropy(field) -> float:
    """Integral of f log f with 0 log 0 = 0."""
    grid, values = _unpack(field)
    pos = values > F_FLOOR
    integrand = np.zeros_like(values)
    integrand[pos] = values[pos] * np.log(values[pos])
    return float(np.sum(np.sum(integrand, axis=grid.v_axes))) * grid.cell_x * grid.cell_v


def velocity_gradient(values: np.ndarray, grid: PhaseGrid, axis: int) -> np.ndarray:
    """d f / d v along one velocity axis.

    Fourth-order centred differences in the interior, second-order stencils on
    the two outermost nodes at each box edge.
    """
    h = grid.dv
    f = np.moveaxis(values, axis, -1)
    g = np.empty_like(f)
    g[..., 2:-2] = (f[..., :-4] - 8.0 * f[..., 1:-3] + 8.0 * f[..., 3:-1] - f[..., 4:]) / (12.0 * h)
    g[..., 1] = (f[..., 2] - f[..., 0]) / (2.0 * h)
    g[..., -2] = (f[..., -1] - f[..., -3]) / (2.0 * h)
    g[..., 0] = (-3.0 * f[..., 0] + 4.0 * f[..., 1] - f[..., 2]) / (2.0 * h)
    g[..., -1] = (3.0 * f[..., -1] - 4.0 * f[..., -2] + f[..., -3]) / (2.0 * h)
    return np.moveaxis(g, -1, axis)


def entropy_dissipation_density(field, moments: MomentSet | None = None, u=None, T=None):
    """Per-cell dissipation  int (1/(T f)) |T grad f + (v - u) f|^2 dv.

    ``u``/``T`` default to the field's own mean velocity and temperature.
    Nodes with ``f`` below ``F_FLOOR`` and vacuum cells contribute nothing.
    """
    grid, values = _unpack(field)
    if moments is None and (u is None or T is None):
        moments = compute_moments(field)
    u = moments.u if u is None else np.asarray(u)
    T = moments.T if T is None else np.asarray(T)
    expand = (Ellipsis,) + (None,) * grid.dim
    Tx = T[expand]
    active = (values > F_FLOOR) & (Tx > 0)
    safe_f = np.where(active, values, 1.0)
    safe_T = np.where(Tx > 0, Tx, 1.0)
    total = np.zeros_like(values)
    for k, c in enumerate(grid.v_coords()):
        flux = Tx * velocity_gradient(values, grid, grid.dim + k) + (c - u[..., k][expand]) * values
        total += flux * flux
    dens = np.where(active, total / (safe_T * safe_f), 0.0)
    return velocity_integral(dens, grid)


def entropy_dissipation(field, moments: MomentSet | None = None) -> float:
    grid, _ = _unpack(field)
    per_x = entropy_dissipation_density(field, moments)
    return float(np.sum(per_x)) * grid.cell_x


def weighted_norm(field, p, q) -> float:
    """(int int (1 + |v|^q) |f|^p)^(1/p); for p = inf the weighted sup."""
    grid, values = _unpack(field)
    if q < 0 or not math.isfinite(q):
        raise ValueError(f"q must be a finite nonnegative number, got {q}")
    speed = np.sqrt(grid.speed_sq())
    weight = 1.0 + speed ** q
    if p == math.inf:
        return float(np.max(weight * np.abs(values))) if values.size else 0.0
    if not (p >= 1 and math.isfinite(p)):
        raise ValueError(f"p must be in [1, inf) or inf, got {p}")
    integral = float(np.sum(velocity_integral(np.abs(values) ** p, grid, weight))) * grid.cell_x
    return integral ** (1.0 / p)


def third_moment(field) -> float:
    grid, values = _unpack(field)
    w = np.sqrt(grid.speed_sq()) ** 3
    return float(np.sum(velocity_integral(values, grid, w))) * grid.cell_x


def unit_ball_volume(dim: int) -> float:
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)


def density_temperature_constant(dim: int) -> float:
    """Constant C_N with rho <= C_N ||f||_inf T^(N/2) for every f >= 0.

    Comes from splitting the density integral at radius R around u and
    choosing R^(N+2) = rho T / ||f||_inf, which gives
    C_N = (N + |B_1|)^((N+2)/2).
    """
    return (dim + unit_ball_volume(dim)) ** ((dim + 2) / 2)


def density_temperature_ratio(field) -> np.ndarray:
    """Per-cell rho / (||f(x,.)||_inf T^(N/2)); zero in vacuum cells."""
    grid, values = _unpack(field)
    m = compute_moments(field)
    fmax = np.max(values, axis=grid.v_axes)
    denom = fmax * m.T ** (grid.dim / 2)
    out = np.zeros_like(m.rho)
    ok = denom > 0
    out[ok] = m.rho[ok] / denom[ok]
    return out


def _unpack(field):
    if isinstance(field, DistField):
        return field.grid, field.values
    grid, values = field
    return grid, unchecked_values(grid, values)
