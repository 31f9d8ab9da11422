"""Periodic mollification and the bounded surrogates for u and T.

With a kernel theta_eps of unit mass,

    u_eps   = (rho u * theta) / (rho * theta + eps (1 + |rho u * theta|^2))
    Phi     = (en2 * theta) - |rho u * theta|^2 / (rho * theta + delta (1 + |rho u * theta|^2))
    T_eps,d = (Phi + delta^2) / (N rho * theta + delta (1 + Phi))

which satisfy |u_eps| <= 1/eps and 0 <= T_eps,d <= 1/delta for any f >= 0.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .grid import DistField, PhaseGrid
from .moments import MomentSet


class KernelResolutionError(ValueError):
    pass


@dataclass(frozen=True)
class RegParams:
    eps: float
    delta: float

    def __post_init__(self):
        for name in ("eps", "delta"):
            val = getattr(self, name)
            if not (0.0 < val < 1.0):
                raise ValueError(f"{name} must lie in (0, 1), got {val}")


@dataclass(frozen=True)
class MollifierKernel:
    """Discrete mollifier. ``weights`` already include the cell volume dx^N."""

    grid: PhaseGrid
    eps: float
    offsets: np.ndarray
    weights: np.ndarray

    def dense(self) -> np.ndarray:
        """Kernel values theta_eps on the periodic spatial grid (not mass weights)."""
        out = np.zeros(self.grid.spatial_shape)
        idx = tuple((self.offsets[:, k] % self.grid.nx) for k in range(self.grid.dim))
        np.add.at(out, idx, self.weights / self.grid.cell_x)
        return out


@dataclass(frozen=True)
class RegFields:
    u_eps: np.ndarray
    phi: np.ndarray
    t_eps_delta: np.ndarray
    rho_moll: np.ndarray
    mom_moll: np.ndarray
    en2_moll: np.ndarray
    rhoT_moll: np.ndarray


def bump(r2):
    """exp(-1 / (1 - |z|^2)) inside the unit ball, zero outside (unnormalised)."""
    r2 = np.asarray(r2, dtype=np.float64)
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


def build_mollifier(grid: PhaseGrid, eps: float) -> MollifierKernel:
    """Bump kernel of radius ``eps`` wrapped onto the torus.

    The weights are renormalised so that they sum to one, which makes
    mollification of a constant return the constant.
    """
    eps = float(eps)
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if eps < grid.dx:
        raise KernelResolutionError(f"kernel under-resolved: eps={eps} < dx={grid.dx}")
    if eps < 2 * grid.dx:
        warnings.warn(f"mollifier width eps={eps} spans fewer than two cells (dx={grid.dx})",
                      stacklevel=2)
    reach = int(math.ceil(eps / grid.dx))
    span = np.arange(-reach, reach + 1)
    mesh = np.meshgrid(*([span] * grid.dim), indexing="ij")
    offs = np.stack([m.ravel() for m in mesh], axis=-1)
    r2 = np.sum((offs * grid.dx / eps) ** 2, axis=-1)
    vals = bump(r2)
    keep = vals > 0
    offs, vals = offs[keep], vals[keep]
    # wrap offsets that alias onto the same periodic cell
    wrapped = offs % grid.nx
    uniq, inverse = np.unique(wrapped, axis=0, return_inverse=True)
    acc = np.zeros(len(uniq))
    np.add.at(acc, inverse.ravel(), vals)
    uniq = np.where(uniq > grid.nx // 2, uniq - grid.nx, uniq)
    total = math.fsum(acc)
    weights = acc / total
    return MollifierKernel(grid=grid, eps=eps, offsets=uniq.astype(np.intp), weights=weights)


def mollify(kernel: MollifierKernel, field: np.ndarray) -> np.ndarray:
    """Periodic convolution of a spatial scalar or vector field with the kernel.

    Scalars have shape ``spatial_shape``; vectors add a trailing component axis.
    """
    grid = kernel.grid
    g = np.asarray(field, dtype=np.float64)
    sshape = grid.spatial_shape
    if g.shape == sshape:
        comps, vector = g[None], False
    elif g.shape[:-1] == sshape:
        comps, vector = np.moveaxis(g, -1, 0), True
    else:
        raise ValueError(f"field shape {g.shape} does not match grid {sshape}")
    out = kernels.periodic_convolve(comps, kernel.offsets, kernel.weights)
    return np.moveaxis(out, 0, -1) if vector else out[0]


def regularized_velocity(moments: MomentSet, kernel: MollifierKernel, eps: float) -> np.ndarray:
    rho_m = mollify(kernel, moments.rho)
    mom_m = mollify(kernel, moments.mom)
    return _u_eps(rho_m, mom_m, eps)


def _u_eps(rho_m, mom_m, eps):
    denom = rho_m + eps * (1.0 + np.sum(mom_m ** 2, axis=-1))
    return mom_m / denom[..., None]


def _phi_t(rho_m, mom_m, en2_m, delta, N):
    mom_sq = np.sum(mom_m ** 2, axis=-1)
    phi = en2_m - mom_sq / (rho_m + delta * (1.0 + mom_sq))
    T = (phi + delta ** 2) / (N * rho_m + delta * (1.0 + phi))
    return phi, T


def regularized_temperature(moments: MomentSet, kernel: MollifierKernel, eps: float, delta: float):
    """Return ``(phi, T_eps_delta)``. ``eps`` only selects the kernel width."""
    rho_m = mollify(kernel, moments.rho)
    mom_m = mollify(kernel, moments.mom)
    en2_m = mollify(kernel, moments.en2)
    return _phi_t(rho_m, mom_m, en2_m, delta, kernel.grid.dim)


def regularized_fields(moments: MomentSet, kernel: MollifierKernel, params: RegParams) -> RegFields:
    N = kernel.grid.dim
    rho_m = mollify(kernel, moments.rho)
    mom_m = mollify(kernel, moments.mom)
    en2_m = mollify(kernel, moments.en2)
    rhoT_m = mollify(kernel, moments.rho_temperature() / N)
    phi, T = _phi_t(rho_m, mom_m, en2_m, params.delta, N)
    return RegFields(u_eps=_u_eps(rho_m, mom_m, params.eps), phi=phi, t_eps_delta=T,
                     rho_moll=rho_m, mom_moll=mom_m, en2_moll=en2_m, rhoT_moll=rhoT_m)


def saturating_ratio(x, a, b):
    """x / (a + b x); increasing on x >= 0 whenever a, b > 0."""
    return x / (a + b * x)


def _velocity_smoothing(grid: PhaseGrid, eps: float) -> np.ndarray:
    """Column-normalised smoothing matrix along one velocity axis.

    Each source node spreads its content over the in-box nodes with bump
    weights, so the total is preserved when the stencil meets the box edge.
    """
    v = grid.v
    diff = (v[:, None] - v[None, :]) / eps
    K = bump(diff ** 2)
    K /= K.sum(axis=0, keepdims=True)
    return K


def regularize_initial(f0: DistField, eps: float) -> DistField:
    """Phase-space mollification of ``f0`` plus the floor ``eps * exp(-|v|^2)``."""
    grid = f0.grid
    N = grid.dim
    kern = build_mollifier(grid, eps)
    vals = f0.values
    # x-smoothing: spatial axes lead, so treat the velocity block as components
    flat = vals.reshape(grid.spatial_shape + (-1,))
    smoothed = mollify(kern, flat).reshape(grid.shape)
    K = _velocity_smoothing(grid, eps)
    for k in range(N):
        ax = N + k
        smoothed = np.moveaxis(np.tensordot(K, smoothed, axes=([1], [ax])), 0, ax)
    smoothed = np.maximum(smoothed, 0.0)
    floor = eps * np.exp(-grid.speed_sq())
    return DistField(grid, smoothed + floor[(None,) * N])
