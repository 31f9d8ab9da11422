"""Discrete phase space: periodic torus in x times a truncated box in v.

Fields are stored row-major with the spatial axes first, so a 1D field has
shape ``(nx, nv)`` and a 2D field ``(nx, nx, nv, nv)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

SNAPSHOT_MAGIC = "vfp-snapshot"
SNAPSHOT_VERSION = "v1"
ROUNDOFF = 1e-300


class GridError(ValueError):
    pass


class FieldError(ValueError):
    pass


@dataclass(frozen=True)
class PhaseGrid:
    dim: int
    nx: int
    nv: int
    vmax: float
    period: float = 1.0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise GridError(f"dim must be 1 or 2, got {self.dim}")
        if int(self.nx) != self.nx or self.nx < 4:
            raise GridError(f"nx must be an integer >= 4, got {self.nx}")
        if int(self.nv) != self.nv or self.nv < 8:
            raise GridError(f"nv must be an integer >= 8, got {self.nv}")
        if self.nv % 2:
            raise GridError("nv must be even")
        if not self.vmax > 0 or not math.isfinite(self.vmax):
            raise GridError(f"vmax must be positive, got {self.vmax}")
        if not self.period > 0 or not math.isfinite(self.period):
            raise GridError(f"period must be positive, got {self.period}")

    @property
    def dx(self) -> float:
        return self.period / self.nx

    @property
    def dv(self) -> float:
        return 2.0 * self.vmax / self.nv

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.dx

    @property
    def v(self) -> np.ndarray:
        return -self.vmax + (np.arange(self.nv) + 0.5) * self.dv

    @property
    def spatial_shape(self) -> tuple:
        return (self.nx,) * self.dim

    @property
    def velocity_shape(self) -> tuple:
        return (self.nv,) * self.dim

    @property
    def shape(self) -> tuple:
        return self.spatial_shape + self.velocity_shape

    @property
    def x_axes(self) -> tuple:
        return tuple(range(self.dim))

    @property
    def v_axes(self) -> tuple:
        return tuple(range(self.dim, 2 * self.dim))

    @property
    def cell_x(self) -> float:
        return self.dx ** self.dim

    @property
    def cell_v(self) -> float:
        return self.dv ** self.dim

    @property
    def volume(self) -> float:
        return self.period ** self.dim

    def x_coords(self):
        """Spatial node coordinates, one array per axis, broadcast to ``shape``."""
        return tuple(self._axis_view(self.x, k) for k in range(self.dim))

    def v_coords(self):
        """Velocity node coordinates, one array per axis, broadcast to ``shape``."""
        return tuple(self._axis_view(self.v, self.dim + k) for k in range(self.dim))

    def v_components(self):
        """Velocity coordinates over the velocity axes only (``velocity_shape``)."""
        out = []
        for k in range(self.dim):
            s = [1] * self.dim
            s[k] = self.nv
            out.append(self.v.reshape(s))
        return tuple(out)

    def speed_sq(self) -> np.ndarray:
        """|v|^2 over ``velocity_shape``."""
        return sum(c * c for c in self.v_components())

    def _axis_view(self, values, axis):
        s = [1] * (2 * self.dim)
        s[axis] = values.size
        return values.reshape(s)

    def header(self, time=0.0) -> str:
        return (f"{SNAPSHOT_MAGIC} {SNAPSHOT_VERSION} {self.dim} {self.nx} {self.nv} "
                f"{self.vmax!r} {self.period!r} {float(time)!r}")


def build_grid(dim, nx, nv, vmax, period=1.0) -> PhaseGrid:
    return PhaseGrid(int(dim), int(nx), int(nv), float(vmax), float(period))


@dataclass(frozen=True)
class DistField:
    """Nonnegative, finite distribution sampled on a :class:`PhaseGrid`."""

    grid: PhaseGrid
    values: np.ndarray = dc_field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.shape != self.grid.shape:
            raise FieldError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise FieldError("field contains NaN or Inf")
        if vals.size and vals.min() < 0:
            idx = np.unravel_index(np.argmin(vals), vals.shape)
            raise FieldError(f"negative value {vals[idx]!r} at cell {tuple(int(i) for i in idx)}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def __eq__(self, other):
        if not isinstance(other, DistField):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.values, other.values)

    __hash__ = None

    def mass(self) -> float:
        return integrate_phase(self)

    def with_values(self, values) -> "DistField":
        return DistField(self.grid, values)


def unchecked_values(grid: PhaseGrid, values) -> np.ndarray:
    """Coerce raw values to the grid shape without positivity validation.

    Audits use this to inspect corrupted states that :class:`DistField`
    would refuse.
    """
    vals = np.asarray(values, dtype=np.float64)
    if vals.shape != grid.shape:
        raise FieldError(f"values shape {vals.shape} does not match grid {grid.shape}")
    return vals


def _call_on_nodes(grid, fn):
    if grid.dim == 1:
        out = fn(grid.x_coords()[0], grid.v_coords()[0])
    else:
        out = fn(grid.x_coords(), grid.v_coords())
    return np.broadcast_to(np.asarray(out, dtype=np.float64), grid.shape)


def sample_function(grid: PhaseGrid, fn) -> DistField:
    """Evaluate ``fn(x, v)`` on every phase-space node.

    ``fn`` receives broadcastable arrays (tuples of them in 2D) and must be
    vectorised. Values in ``(-1e-300, 0)`` are treated as round-off and
    clamped to zero.
    """
    vals = np.array(_call_on_nodes(grid, fn))
    if not np.all(np.isfinite(vals)):
        raise FieldError("sampled function is not finite on the grid")
    tiny = (vals < 0) & (vals > -ROUNDOFF)
    vals[tiny] = 0.0
    return DistField(grid, vals)


def integrate_phase(field: DistField, weight=None) -> float:
    """Midpoint rule for the integral of ``f * weight`` over phase space.

    The velocity sum is taken first, then the spatial one; NumPy's pairwise
    summation keeps the order fixed.
    """
    grid = field.grid
    integrand = field.values
    if weight is not None:
        integrand = integrand * _call_on_nodes(grid, weight)
    per_x = np.sum(integrand, axis=grid.v_axes)
    return float(np.sum(per_x)) * grid.cell_x * grid.cell_v


def velocity_integral(values: np.ndarray, grid: PhaseGrid, weight=None) -> np.ndarray:
    """Integrate over velocity only; ``weight`` is an array over ``velocity_shape``."""
    integrand = values if weight is None else values * weight
    return np.sum(integrand, axis=grid.v_axes) * grid.cell_v


def write_snapshot(path, field: DistField, time=0.0) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(field.grid.header(time) + "\n")
        fh.write("\n".join("%.17g" % x for x in field.values.ravel()))
        fh.write("\n")


def read_snapshot(path, validate=True):
    """Return ``(field_or_values, grid, time)``.

    With ``validate=False`` the raw array is returned instead of a
    :class:`DistField`, so that corrupted snapshots can still be audited.
    """
    with open(path, encoding="ascii") as fh:
        header = fh.readline().split()
        body = fh.read().split()
    if len(header) != 8 or header[0] != SNAPSHOT_MAGIC or header[1] != SNAPSHOT_VERSION:
        raise FieldError(f"{path}: not a {SNAPSHOT_MAGIC} {SNAPSHOT_VERSION} file")
    grid = build_grid(int(header[2]), int(header[3]), int(header[4]),
                      float(header[5]), float(header[6]))
    time = float(header[7])
    vals = np.array([float(x) for x in body], dtype=np.float64)
    if vals.size != int(np.prod(grid.shape)):
        raise FieldError(f"{path}: expected {int(np.prod(grid.shape))} values, found {vals.size}")
    vals = vals.reshape(grid.shape)
    if validate:
        return DistField(grid, vals), grid, time
    return vals, grid, time
