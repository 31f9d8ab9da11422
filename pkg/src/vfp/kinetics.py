"""Fokker-Planck operator and the two positivity-preserving sub-steps.

The collision step discretises d_t f = div_v (T grad_v f + (v - u) f) with a
Chang-Cooper flux on the velocity faces,

    G_{j+1/2} = (T/dv) [ B(-w) f_{j+1} - B(w) f_j ],  w = (v_{j+1/2} - u) dv / T,
    B(w) = w / (e^w - 1),

so that the flux vanishes exactly when f_{j+1}/f_j equals the Gaussian ratio
exp(-w). The step is backward Euler, one tridiagonal solve per velocity line.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .grid import DistField, PhaseGrid
from .moments import MomentSet
from .regularize import RegFields


@dataclass(frozen=True)
class CoefficientSet:
    """Drift centre ``u`` (trailing component axis) and diffusion ``T``."""

    u: np.ndarray
    T: np.ndarray
    source: str = "raw"

    def __post_init__(self):
        if self.source not in ("raw", "regularized", "frozen"):
            raise ValueError(f"unknown coefficient source {self.source!r}")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.T))):
            raise ValueError("coefficients must be finite")
        if np.any(self.T < 0):
            raise ValueError("diffusion coefficient T must be nonnegative")


def raw_coefficients(moments: MomentSet) -> CoefficientSet:
    return CoefficientSet(u=moments.u, T=moments.T, source="raw")


def regularized_coefficients(reg: RegFields) -> CoefficientSet:
    return CoefficientSet(u=reg.u_eps, T=reg.t_eps_delta, source="regularized")


def constant_coefficients(grid: PhaseGrid, u=0.0, T=1.0) -> CoefficientSet:
    uu = np.broadcast_to(np.asarray(u, dtype=np.float64), grid.spatial_shape + (grid.dim,))
    TT = np.broadcast_to(np.asarray(T, dtype=np.float64), grid.spatial_shape)
    return CoefficientSet(u=np.array(uu), T=np.array(TT), source="frozen")


def _face_weights(a, T, dv):
    """(T/dv) B(a dv / T) with its T -> 0 upwind limit max(-a, 0)."""
    T = np.broadcast_to(T, a.shape)
    out = np.maximum(-a, 0.0)
    hot = T > 0
    Th = T[hot]
    w = a[hot] * dv / Th
    small = np.abs(w) < 1e-8
    b = np.empty_like(w)
    b[small] = 1.0 - 0.5 * w[small]
    wl = w[~small]
    b[~small] = wl / np.expm1(wl)
    out[hot] = Th / dv * b
    return out


def _collision_line_system(grid: PhaseGrid, u_line, T_line, dt):
    """Tridiagonal matrix of (I - dt L) for velocity lines.

    ``u_line`` and ``T_line`` have one entry per line. Returns lower, diag,
    upper arrays of shape ``(lines, nv)``.
    """
    v = grid.v
    vh = 0.5 * (v[1:] + v[:-1])
    a = vh[None, :] - u_line[:, None]
    A = _face_weights(a, T_line[:, None], grid.dv)
    Bc = A + a  # (T/dv) B(-w)
    r = dt / grid.dv
    nl, nv = len(u_line), grid.nv
    lower = np.zeros((nl, nv))
    upper = np.zeros((nl, nv))
    diag = np.ones((nl, nv))
    diag[:, :-1] += r * A
    diag[:, 1:] += r * Bc
    upper[:, :-1] = -r * Bc
    lower[:, 1:] = -r * A
    return lower, diag, upper


def _lines(values, grid, k):
    """Move velocity axis ``k`` last and flatten everything else into lines."""
    ax = grid.dim + k
    moved = np.moveaxis(values, ax, -1)
    return moved, moved.reshape(-1, grid.nv)


def _line_coeff(arr, grid, k, moved_shape):
    """Broadcast a spatial coefficient to every line of velocity axis ``k``."""
    expand = arr[(Ellipsis,) + (None,) * grid.dim]
    full = np.broadcast_to(expand, grid.shape)
    return np.moveaxis(full, grid.dim + k, -1)[..., 0].reshape(-1)


def collision_step(field: DistField, coeffs: CoefficientSet, dt: float) -> DistField:
    """Backward-Euler collision step, independent in every spatial cell.

    Preserves nonnegativity and the density of each cell; the discrete
    Maxwellian of ``(u, T)`` is left unchanged. In 2D the two velocity axes
    are swept one after the other.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    grid = field.grid
    vals = np.array(field.values)
    for k in range(grid.dim):
        moved, flat = _lines(vals, grid, k)
        u_line = _line_coeff(coeffs.u[..., k], grid, k, moved.shape)
        T_line = _line_coeff(coeffs.T, grid, k, moved.shape)
        lower, diag, upper = _collision_line_system(grid, u_line, T_line, dt)
        sol = kernels.tridiag_solve(lower, diag, upper, flat)
        vals = np.moveaxis(sol.reshape(moved.shape), -1, grid.dim + k)
    # Thomas elimination on an M-matrix yields no negatives; guard -0.0 only
    vals = np.maximum(vals, 0.0)
    return DistField(grid, vals)


def _face_values(f, dv):
    """Value and derivative on interior velocity faces.

    Fourth-order four-point stencils, two-point ones on the outermost faces.
    """
    val = 0.5 * (f[..., 1:] + f[..., :-1])
    der = (f[..., 1:] - f[..., :-1]) / dv
    val[..., 1:-1] = (-f[..., :-3] + 9.0 * f[..., 1:-2] + 9.0 * f[..., 2:-1] - f[..., 3:]) / 16.0
    der[..., 1:-1] = (f[..., :-3] - 27.0 * f[..., 1:-2] + 27.0 * f[..., 2:-1] - f[..., 3:]) / (24.0 * dv)
    return val, der


def apply_operator(field, coeffs: CoefficientSet) -> np.ndarray:
    """Conservative evaluation of div_v (T grad_v f + (v - u) f) with zero edge flux."""
    from .moments import _unpack

    grid, values = _unpack(field)
    out = np.zeros_like(values)
    v = grid.v
    vh = 0.5 * (v[1:] + v[:-1])
    expand = (Ellipsis,) + (None,) * grid.dim
    for k in range(grid.dim):
        ax = grid.dim + k
        f = np.moveaxis(values, ax, -1)
        T = np.moveaxis(np.broadcast_to(coeffs.T[expand], grid.shape), ax, -1)[..., :-1]
        u = np.moveaxis(np.broadcast_to(coeffs.u[..., k][expand], grid.shape), ax, -1)[..., :-1]
        val, der = _face_values(f, grid.dv)
        flux = T * der + (vh - u) * val
        div = np.zeros_like(f)
        div[..., :-1] += flux
        div[..., 1:] -= flux
        out += np.moveaxis(div / grid.dv, -1, ax)
    return out


def transport_step(field: DistField, dt: float) -> DistField:
    """Semi-Lagrangian free streaming f(x, v) <- f(x - v dt, v).

    Each velocity row is shifted with periodic cubic interpolation. Rows that
    dip below zero are clipped and rescaled to their original mass.
    """
    grid = field.grid
    vals = np.array(field.values)
    if dt == 0:
        return DistField(grid, vals)
    for k in range(grid.dim):
        moved = np.moveaxis(vals, k, -1)
        rows = moved.reshape(-1, grid.nx)
        # shift per row: v_k dt / dx, with v_k read off velocity axis k
        vk = grid.v_coords()[k]
        shift = np.moveaxis(np.broadcast_to(vk, grid.shape), k, -1)[..., 0].reshape(-1) * dt / grid.dx
        new = kernels.shift_rows(rows, shift)
        new = _clip_rows(new, rows)
        vals = np.moveaxis(new.reshape(moved.shape), -1, k)
    return DistField(grid, vals)


def _clip_rows(new, old):
    bad = np.any(new < 0, axis=1)
    if not np.any(bad):
        return new
    target = old[bad].sum(axis=1)
    clipped = np.maximum(new[bad], 0.0)
    have = clipped.sum(axis=1)
    scale = np.where(have > 0, target / np.where(have > 0, have, 1.0), 0.0)
    new[bad] = clipped * scale[:, None]
    return new
