"""JSON run configuration: parsing, defaults, validation and initial data."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import DistField, GridError, PhaseGrid, build_grid, read_snapshot
from .moments import discrete_maxwellian, gaussian_values
from .regularize import RegParams
from .solver import PicardConfig, SolverConfig, default_dt


class ConfigError(ValueError):
    pass


PRESETS = {
    "maxwellian": {"rho": 1.0, "u": 0.0, "T": 1.0, "amp": 0.0, "mode": 1},
    "sin-perturbed-maxwellian": {"rho": 1.0, "u": 0.0, "T": 1.0, "amp": 0.5, "mode": 1},
    "bimodal": {"rho": 1.0, "shift": 1.0, "T": 0.5, "amp": 0.0, "mode": 1},
    "mixture": {"components": [{"weight": 0.7, "u": -0.5, "T": 0.6},
                               {"weight": 0.3, "u": 1.5, "T": 0.3}],
                "amp": 0.0, "mode": 1},
    "file": {"path": None},
}

TOP_KEYS = {"grid", "t_end", "dt", "reg", "picard", "cadence", "snapshot_times", "initial",
            "seed", "particles", "sweep", "compare", "audit"}
GRID_KEYS = {"dim", "nx", "nv", "vmax", "period"}
PICARD_KEYS = {"n_max", "tol", "q", "store_stride"}
PARTICLE_KEYS = {"n_p"}
SWEEP_KEYS = {"eps_list", "delta_list"}
COMPARE_KEYS = {"times"}
AUDIT_KEYS = {"lp_slack", "enabled"}


@dataclass(frozen=True)
class RunConfig:
    solver: SolverConfig
    initial: dict
    seed: int = 0
    n_p: int = 100_000
    eps_list: tuple = (0.2, 0.1, 0.05)
    delta_list: tuple = (0.2, 0.1, 0.05)
    compare_times: tuple = (0.5, 1.0)
    lp_slack: float = 0.01
    audit: bool = True
    resolved: dict = dc_field(default_factory=dict, compare=False)

    @property
    def grid(self) -> PhaseGrid:
        return self.solver.grid

    def to_json(self) -> str:
        return json.dumps(self.resolved, indent=2, sort_keys=True) + "\n"

    def with_seed(self, seed) -> "RunConfig":
        doc = json.loads(json.dumps(self.resolved))
        doc["seed"] = int(seed)
        return build_config(doc)


def _check_keys(section: dict, allowed: set, where: str):
    if not isinstance(section, dict):
        raise ConfigError(f"{where}: expected an object")
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{where}: unknown key {key!r}")


def _number(doc, key, where, default=None, kind=float):
    if key not in doc or doc[key] is None:
        if default is None:
            raise ConfigError(f"{where}.{key}: required")
        return default
    val = doc[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {val!r}")
    if kind is int:
        if int(val) != val:
            raise ConfigError(f"{where}.{key}: expected an integer, got {val!r}")
        return int(val)
    return float(val)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON configuration document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return build_config(doc)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _resolve_initial(doc, dim):
    ini = dict(doc or {"preset": "maxwellian"})
    preset = ini.pop("preset", "maxwellian")
    if preset not in PRESETS:
        raise ConfigError(f"initial.preset: unknown preset {preset!r}; "
                          f"choose from {', '.join(sorted(PRESETS))}")
    defaults = PRESETS[preset]
    _check_keys(ini, set(defaults), "initial")
    out = {"preset": preset}
    for key, dflt in defaults.items():
        val = ini.get(key, dflt)
        if key == "path":
            if not isinstance(val, str):
                raise ConfigError("initial.path: required for the file preset")
        elif key == "components":
            if not isinstance(val, list) or not val:
                raise ConfigError("initial.components: expected a nonempty list")
            comps = []
            for i, c in enumerate(val):
                _check_keys(c, {"weight", "u", "T"}, f"initial.components[{i}]")
                comp = {k: _number(c, k, f"initial.components[{i}]", default=d)
                        for k, d in (("weight", 1.0), ("u", 0.0), ("T", 1.0))}
                if comp["T"] <= 0 or comp["weight"] <= 0:
                    raise ConfigError(f"initial.components[{i}]: weight and T must be positive")
                comps.append(comp)
            val = comps
        elif key == "mode":
            val = _number(ini, key, "initial", default=dflt, kind=int)
        else:
            val = _number(ini, key, "initial", default=dflt)
        out[key] = val
    if "T" in out and out["T"] <= 0:
        raise ConfigError("initial.T: must be positive")
    if "amp" in out and not 0 <= out["amp"] < 1:
        raise ConfigError("initial.amp: must lie in [0, 1)")
    if "rho" in out and out["rho"] <= 0:
        raise ConfigError("initial.rho: must be positive")
    return out


def reference_temperature(initial: dict, dim: int) -> float:
    """Total temperature of the initial law, used to size the velocity box."""
    p = initial["preset"]
    if p == "bimodal":
        return initial["T"] + initial["shift"] ** 2 / dim
    if p == "mixture":
        comps = initial["components"]
        w = sum(c["weight"] for c in comps)
        mean = sum(c["weight"] * c["u"] for c in comps) / w
        return sum(c["weight"] * (c["T"] + (c["u"] - mean) ** 2 / dim) for c in comps) / w
    return initial.get("T", 1.0)


def build_config(doc) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    _check_keys(doc, TOP_KEYS, "config")
    if "grid" not in doc:
        raise ConfigError("grid: required")
    g = doc["grid"]
    _check_keys(g, GRID_KEYS, "grid")
    dim = _number(g, "dim", "grid", default=1, kind=int)
    initial = _resolve_initial(doc.get("initial"), dim)

    if initial["preset"] == "file":
        try:
            _, fgrid, _ = read_snapshot(initial["path"], validate=False)
        except OSError as exc:
            raise ConfigError(f"initial.path: {exc}") from None
        vmax_default, period_default = fgrid.vmax, fgrid.period
    else:
        vmax_default = 8.0 * math.sqrt(reference_temperature(initial, dim))
        period_default = 1.0
    try:
        grid = build_grid(dim, _number(g, "nx", "grid", kind=int), _number(g, "nv", "grid", kind=int),
                          _number(g, "vmax", "grid", default=vmax_default),
                          _number(g, "period", "grid", default=period_default))
    except GridError as exc:
        raise ConfigError(f"grid: {exc}") from None

    reg_doc = doc.get("reg")
    if reg_doc in (None, "none"):
        reg = None
    else:
        _check_keys(reg_doc, {"eps", "delta"}, "reg")
        try:
            reg = RegParams(_number(reg_doc, "eps", "reg"), _number(reg_doc, "delta", "reg"))
        except ValueError as exc:
            raise ConfigError(f"reg: {exc}") from None

    pdoc = doc.get("picard", {})
    _check_keys(pdoc, PICARD_KEYS, "picard")
    try:
        picard = PicardConfig(n_max=_number(pdoc, "n_max", "picard", default=12, kind=int),
                              tol=_number(pdoc, "tol", "picard", default=1e-8),
                              q=_number(pdoc, "q", "picard") if pdoc.get("q") is not None else None,
                              store_stride=_number(pdoc, "store_stride", "picard", default=1, kind=int))
    except ValueError as exc:
        raise ConfigError(f"picard: {exc}") from None

    snaps = doc.get("snapshot_times", [])
    if not isinstance(snaps, list) or not all(isinstance(s, (int, float)) for s in snaps):
        raise ConfigError("snapshot_times: expected a list of numbers")
    try:
        solver = SolverConfig(grid=grid, t_end=_number(doc, "t_end", "config"),
                              dt=_number(doc, "dt", "config", default=default_dt(grid)),
                              reg=reg, picard=picard,
                              cadence=_number(doc, "cadence", "config", default=1, kind=int),
                              snapshot_times=tuple(float(s) for s in snaps))
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from None

    part = doc.get("particles", {})
    _check_keys(part, PARTICLE_KEYS, "particles")
    n_p = _number(part, "n_p", "particles", default=100_000, kind=int)
    if n_p <= 0:
        raise ConfigError("particles.n_p: must be positive")
    sweep = doc.get("sweep", {})
    _check_keys(sweep, SWEEP_KEYS, "sweep")
    eps_list = tuple(float(x) for x in sweep.get("eps_list", (0.2, 0.1, 0.05)))
    delta_list = tuple(float(x) for x in sweep.get("delta_list", (0.2, 0.1, 0.05)))
    for name, lst in (("eps_list", eps_list), ("delta_list", delta_list)):
        if not lst or any(not 0 < x < 1 for x in lst):
            raise ConfigError(f"sweep.{name}: values must lie in (0, 1)")
    cmp_doc = doc.get("compare", {})
    _check_keys(cmp_doc, COMPARE_KEYS, "compare")
    compare_times = tuple(float(x) for x in cmp_doc.get("times", (0.5, 1.0)))
    audit = doc.get("audit", {})
    _check_keys(audit, AUDIT_KEYS, "audit")
    lp_slack = _number(audit, "lp_slack", "audit", default=0.01)
    enabled = bool(audit.get("enabled", True))
    seed = _number(doc, "seed", "config", default=0, kind=int)
    if seed < 0:
        raise ConfigError("seed: must be nonnegative")

    resolved = {
        "grid": {"dim": grid.dim, "nx": grid.nx, "nv": grid.nv, "vmax": grid.vmax, "period": grid.period},
        "t_end": solver.t_end, "dt": solver.dt,
        "reg": "none" if reg is None else {"eps": reg.eps, "delta": reg.delta},
        "picard": {"n_max": picard.n_max, "tol": picard.tol, "q": solver.picard.q,
                   "store_stride": picard.store_stride},
        "cadence": solver.cadence, "snapshot_times": list(solver.snapshot_times),
        "initial": initial, "seed": seed, "particles": {"n_p": n_p},
        "sweep": {"eps_list": list(eps_list), "delta_list": list(delta_list)},
        "compare": {"times": list(compare_times)},
        "audit": {"lp_slack": lp_slack, "enabled": enabled},
    }
    return RunConfig(solver=solver, initial=initial, seed=seed, n_p=n_p, eps_list=eps_list,
                     delta_list=delta_list, compare_times=compare_times, lp_slack=lp_slack,
                     audit=enabled, resolved=resolved)


def _spatial_profile(grid, amp, mode):
    def prof(x):
        if grid.dim == 1:
            return 1.0 + amp * np.sin(2.0 * np.pi * mode * x / grid.period)
        return 1.0 + amp * np.sin(2.0 * np.pi * mode * x[0] / grid.period)
    return prof


def initial_field(cfg: RunConfig) -> DistField:
    """Build the initial distribution described by ``cfg.initial``."""
    ini = cfg.initial
    grid = cfg.grid
    p = ini["preset"]
    if p == "file":
        field, fgrid, _ = read_snapshot(ini["path"])
        if fgrid != grid:
            raise ConfigError("initial.path: snapshot grid does not match the configured grid")
        return field
    N = grid.dim
    prof = _spatial_profile(grid, ini["amp"], ini["mode"])
    xs = grid.x_coords()
    space = prof(xs[0] if N == 1 else xs)
    space = np.broadcast_to(space, grid.shape)
    ones = np.ones(grid.spatial_shape)
    if p in ("maxwellian", "sin-perturbed-maxwellian"):
        u = np.zeros(grid.spatial_shape + (N,))
        u[..., 0] = ini["u"]
        if ini["amp"] == 0:
            return discrete_maxwellian(grid, ini["rho"] * ones, u, ini["T"] * ones)
        return DistField(grid, space * gaussian_values(grid, ini["rho"] * ones, u, ini["T"] * ones))
    if p == "bimodal":
        vals = 0.0
        for sgn in (1.0, -1.0):
            u = np.zeros(grid.spatial_shape + (N,))
            u[..., 0] = sgn * ini["shift"]
            vals = vals + 0.5 * gaussian_values(grid, ini["rho"] * ones, u, ini["T"] * ones)
        return DistField(grid, space * vals)
    comps = ini["components"]
    total = sum(c["weight"] for c in comps)
    vals = 0.0
    for c in comps:
        u = np.zeros(grid.spatial_shape + (N,))
        u[..., 0] = c["u"]
        vals = vals + c["weight"] / total * gaussian_values(grid, ones, u, c["T"] * ones)
    return DistField(grid, space * vals)

