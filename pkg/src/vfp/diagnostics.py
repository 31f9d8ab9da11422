"""Machine-checkable audits of states and trajectories.

A check FAILs when an exact algebraic guarantee is broken and is FLAGged when
a discretisation-dependent tolerance is exceeded.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import DistField
from .moments import (_unpack, compute_moments, density_temperature_constant, density_temperature_ratio,
                      third_moment)
from .regularize import MollifierKernel, RegParams, build_mollifier, mollify, regularized_fields

PASS, FLAG, FAIL = "PASS", "FLAG", "FAIL"
_RANK = {PASS: 0, FLAG: 1, FAIL: 2}
ROUNDOFF = 1e-12


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    bound: float
    status: str
    anchor: str
    tolerance: float = 0.0
    detail: str = ""


@dataclass
class AuditReport:
    checks: list = dc_field(default_factory=list)
    metadata: dict = dc_field(default_factory=dict)

    def add(self, name, value, bound, ok, anchor, tolerance=0.0, severity=FAIL, detail=""):
        status = PASS if ok else severity
        self.checks.append(Check(name, float(value), float(bound), status, anchor, tolerance, detail))
        return self

    def record(self, name, value, anchor, detail=""):
        """Informational entry with no bound."""
        self.checks.append(Check(name, float(value), math.nan, PASS, anchor, 0.0, detail))
        return self

    def extend(self, other: "AuditReport"):
        self.checks.extend(other.checks)
        self.metadata.update(other.metadata)
        return self

    @property
    def status(self) -> str:
        return max((c.status for c in self.checks), key=_RANK.get, default=PASS)

    def exit_code(self) -> int:
        return {PASS: 0, FLAG: 2, FAIL: 1}[self.status]

    def __getitem__(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="ascii") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["check", "value", "bound", "status", "anchor"])
            for c in self.checks:
                w.writerow([c.name, "%.17g" % c.value, "%.17g" % c.bound, c.status, c.anchor])

    def table(self) -> str:
        width = max([len(c.name) for c in self.checks] + [5])
        lines = [f"{'check':<{width}}  {'value':>14}  {'bound':>14}  status  anchor"]
        for c in self.checks:
            lines.append(f"{c.name:<{width}}  {c.value:>14.6g}  {c.bound:>14.6g}  {c.status:<6}  {c.anchor}"
                         + (f"  ({c.detail})" if c.detail else ""))
        return "\n".join(lines)


def _require_samples(traj, n=2):
    if len(traj.rows) < n:
        raise ValueError("insufficient samples: trajectory needs at least "
                         f"{n} recorded times, has {len(traj.rows)}")


def _drift(series, zero_scale=0.0):
    """Max relative drift, or absolute drift when the initial value is 0.

    Initial values below ``ROUNDOFF * zero_scale`` count as zero.
    """
    s = np.asarray(series, dtype=np.float64)
    d = float(np.max(np.abs(s - s[0])))
    return d / abs(s[0]) if abs(s[0]) > ROUNDOFF * zero_scale else d


def conservation_report(traj, mass_tol=1e-12, moment_tol=1e-3) -> AuditReport:
    _require_samples(traj)
    rep = AuditReport(metadata={"samples": len(traj.rows)})
    rep.add("mass_drift", _drift(traj.column("mass")), mass_tol,
            _drift(traj.column("mass")) <= mass_tol, "mass conservation", mass_tol, FAIL)
    # momentum scale sqrt(mass * energy) decides what counts as zero momentum
    scale = math.sqrt(abs(traj.column("mass")[0] * traj.column("energy")[0]))
    for k in range(traj.dim):
        col = traj.column(f"mom_{k + 1}")
        d = _drift(col, scale)
        kind = "relative" if abs(col[0]) > ROUNDOFF * scale else "absolute"
        rep.add(f"momentum_{k + 1}_drift", d, moment_tol, d <= moment_tol, "momentum conservation",
                moment_tol, FLAG, detail=kind)
    d = _drift(traj.column("energy"))
    rep.add("energy_drift", d, moment_tol, d <= moment_tol, "energy conservation", moment_tol, FLAG)
    return rep


def h_theorem_check(traj, step_tol=1e-8, rate_tol=0.10, window=(0.1, 1.0), compare_rate=None,
                    equilibrium_tol=1e-6) -> AuditReport:
    """Entropy monotonicity and, for homogeneous runs, the dissipation identity.

    The rate test compares H(t_a) - H(t_b) with the trapezoidal integral of
    the recorded dissipation over ``window``; when both are below
    ``equilibrium_tol`` the run is treated as an equilibrium. Regularized runs have no
    entropy inequality (the surrogate temperature is not the state's own),
    so for them the largest increase is only recorded.
    """
    _require_samples(traj)
    t = traj.times
    H = traj.column("entropy")
    rep = AuditReport()
    rise = float(np.max(np.diff(H)))
    worst = int(np.argmax(np.diff(H)))
    where = f"between t={t[worst]:.6g} and t={t[worst + 1]:.6g}"
    if getattr(traj, "reg", None) is not None:
        rep.record("entropy_max_increase", rise, "entropy non-increasing (raw coefficients only)", where)
        return rep
    rep.add("entropy_max_increase", rise, step_tol, rise <= step_tol, "entropy non-increasing",
            step_tol, FAIL, detail=where)
    if compare_rate is None:
        compare_rate = bool(getattr(traj, "homogeneous", False))
    D = traj.column("dissipation")
    if not compare_rate or not np.all(np.isfinite(D)):
        return rep
    sel = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
    if np.count_nonzero(sel) < 2:
        return rep
    ts, Hs, Ds = t[sel], H[sel], D[sel]
    drop = float(Hs[0] - Hs[-1])
    integral = float(np.sum(0.5 * (Ds[1:] + Ds[:-1]) * np.diff(ts)))
    if max(abs(drop), abs(integral)) < equilibrium_tol:
        rep.add("dissipation_rate_mismatch", 0.0, rate_tol, True, "entropy dissipation identity",
                rate_tol, FLAG, detail="equilibrium: both sides vanish")
        return rep
    mismatch = abs(drop - integral) / max(abs(integral), abs(drop))
    rep.add("dissipation_rate_mismatch", mismatch, rate_tol, mismatch <= rate_tol,
            "entropy dissipation identity", rate_tol, FLAG,
            detail=f"H drop {drop:.6g} vs integrated D {integral:.6g}")
    return rep


def bounds_check(state, reg_fields=None, params: RegParams | None = None,
                 positive_expected=True, tol=ROUNDOFF) -> AuditReport:
    """Algebraic bounds of the regularized coefficients plus state positivity.

    ``state`` may be a :class:`DistField` or a ``(grid, values)`` pair; the
    latter allows auditing corrupted data.
    """
    grid, values = _unpack(state)
    rep = AuditReport()
    finite = bool(np.all(np.isfinite(values)))
    fmin = float(np.min(values)) if finite else math.nan
    loc = tuple(int(i) for i in np.unravel_index(np.nanargmin(values), values.shape)) if values.size else ()
    if positive_expected:
        rep.add("min_f", fmin, 0.0, finite and fmin > 0, "positivity of regularized solutions",
                detail=f"min at cell {loc}")
    else:
        rep.add("min_f", fmin, 0.0, finite and fmin >= 0, "nonnegativity",
                detail=f"min at cell {loc}")
    if params is None:
        return rep
    if reg_fields is None:
        if not finite:
            return rep
        from .grid import unchecked_values
        m = compute_moments((grid, unchecked_values(grid, values)))
        reg_fields = regularized_fields(m, build_mollifier(grid, params.eps), params)
    rf = reg_fields
    speed = np.sqrt(np.sum(rf.u_eps ** 2, axis=-1))
    u_scaled = float(np.max(speed)) * params.eps
    rep.add("u_eps_times_eps", u_scaled, 1.0, u_scaled <= 1.0 + tol, "velocity surrogate cap", tol)
    t_scaled = float(np.max(rf.t_eps_delta)) * params.delta
    rep.add("t_eps_delta_times_delta", t_scaled, 1.0, t_scaled <= 1.0 + tol, "temperature surrogate cap", tol)
    tmin = float(np.min(rf.t_eps_delta))
    rep.add("t_eps_delta_min", tmin, 0.0, tmin >= 0.0, "temperature surrogate nonnegative", tol)
    N = grid.dim
    scale = max(1.0, float(np.max(np.abs(rf.en2_moll))))
    margin = float(np.min(rf.phi - N * rf.rhoT_moll))
    rep.add("phi_minus_mollified_pressure", margin, 0.0, margin >= -tol * scale,
            "Phi dominates mollified pressure", tol * scale)
    p_min = float(np.min(rf.rhoT_moll))
    rep.add("mollified_pressure_min", p_min, 0.0, p_min >= -tol * scale, "mollified pressure nonnegative",
            tol * scale)
    rep.record("temperature_lower_value", tmin, "empirical temperature floor")
    return rep


def regularization_bounds_report(traj, tol=ROUNDOFF) -> AuditReport:
    """Bound audit over every recorded time of a regularized grid trajectory."""
    rep = AuditReport()
    if not traj.extras or "u_eps_scaled" not in traj.extras[0]:
        return rep
    u = float(np.max(traj.extra("u_eps_scaled")))
    rep.add("u_eps_times_eps", u, 1.0, u <= 1.0 + tol, "velocity surrogate cap", tol)
    tt = float(np.max(traj.extra("t_scaled")))
    rep.add("t_eps_delta_times_delta", tt, 1.0, tt <= 1.0 + tol, "temperature surrogate cap", tol)
    tmin = float(np.min(traj.extra("t_min")))
    rep.add("t_eps_delta_min", tmin, 0.0, tmin >= 0.0, "temperature surrogate nonnegative", tol)
    margin = float(np.min(traj.extra("phi_margin")))
    rep.add("phi_minus_mollified_pressure", margin, 0.0, margin >= -tol,
            "Phi dominates mollified pressure", tol)
    pmin = float(np.min(traj.extra("rhoT_moll_min")))
    rep.add("mollified_pressure_min", pmin, 0.0, pmin >= -tol, "mollified pressure nonnegative", tol)
    fmin = float(np.min(traj.extra("fmin")))
    rep.add("min_f", fmin, 0.0, fmin > 0, "positivity of regularized solutions")
    rep.record("temperature_lower_value", tmin, "empirical temperature floor")
    return rep


def lp_growth_check(traj, p, slack=0.01) -> AuditReport:
    """int int f^p (t) <= (1 + slack) e^{N (p-1) t} int int f0^p at every recorded time.

    ``p`` is 1, 2, 4 or ``math.inf`` (the max value, bounded by e^{N t} max f0).
    """
    _require_samples(traj)
    t = traj.times
    N = traj.dim
    rep = AuditReport()
    if p == 1:
        mass = traj.column("mass")
        ratio = float(np.max(np.abs(mass / mass[0] - 1.0))) if mass[0] else 0.0
        rep.add("lp1_ratio_deviation", ratio, ROUNDOFF, ratio <= ROUNDOFF, "L^p growth bound", ROUNDOFF)
        return rep
    if p == math.inf:
        series, growth, name = traj.extra("fmax"), np.exp(N * t), "linf"
    elif p in (2, 4):
        series, growth, name = traj.extra(f"lp{int(p)}"), np.exp(N * (p - 1) * t), f"lp{int(p)}"
    else:
        raise ValueError(f"unsupported exponent {p}; use 1, 2, 4 or inf")
    bound = growth * series[0]
    ratio = float(np.max(series / np.where(bound > 0, bound, np.inf)))
    rep.add(f"{name}_growth_ratio", ratio, 1.0 + slack, ratio <= 1.0 + slack, "L^p growth bound",
            slack, FLAG)
    return rep


def third_moment_check(traj, factor=2.0) -> AuditReport:
    """Third moment against its Groenwall envelope.

    The rate constant is the largest measured ratio of the instantaneous
    third-moment rate to mass + third moment; the envelope is
    (m3(0) + mass) e^{C t} - mass.
    """
    _require_samples(traj)
    rep = AuditReport()
    t = traj.times
    m3 = traj.column("third_moment")
    mass = traj.column("mass")[0]
    if traj.extras and "m3_rate" in traj.extras[0]:
        rate = traj.extra("m3_rate")
        C = float(np.max(np.maximum(rate, 0.0) / (mass + m3)))
    else:
        # no instantaneous rates recorded: bound the constant by finite differences
        dm = np.diff(m3) / np.diff(t)
        C = float(np.max(np.maximum(dm, 0.0) / (mass + m3[:-1]))) if len(dm) else 0.0
    envelope = (m3[0] + mass) * np.exp(C * t) - mass
    ratio = float(np.max(m3 / envelope)) if np.all(envelope > 0) else 0.0
    rep.record("third_moment_rate_constant", C, "third-moment growth constant")
    rep.add("third_moment_envelope_ratio", ratio, factor, ratio <= factor, "third-moment bound",
            factor, FLAG)
    linear = m3[0] + C * (m3[0] + mass) * t[-1]
    rep.add("third_moment_linear_ratio", float(np.max(m3)) / linear, factor,
            float(np.max(m3)) <= factor * linear, "third-moment bound", factor, FLAG)
    return rep


def density_temperature_check(state, margin=0.05) -> AuditReport:
    """rho <= C_N ||f(x, .)||_inf T^(N/2) in every cell.

    C_N comes from a crude splitting argument and may not be sharp, so
    overshoots within ``margin`` are flagged rather than failed.
    """
    grid, values = _unpack(state)
    C = density_temperature_constant(grid.dim)
    ratio = float(np.max(density_temperature_ratio((grid, values))))
    rep = AuditReport()
    status = PASS if ratio <= C else (FLAG if ratio <= (1 + margin) * C else FAIL)
    rep.checks.append(Check("density_temperature_ratio", ratio, C, status, "density-temperature bound",
                            margin, f"C_{grid.dim} = {C:.6g}"))
    return rep


def critical_exponents(dim):
    return ((dim + 3) / dim, (dim + 3) / (dim + 1), (dim + 3) / (dim + 2))


def _lp_torus(arr, p, cell_x):
    return float(np.sum(np.abs(arr) ** p) * cell_x) ** (1.0 / p)


def moment_integrability_check(state, fraction=0.9) -> AuditReport:
    """L^p norms of rho, rho u and en2 below the critical exponents, with M.

    M = max(sup f, third moment). Ratios norm / (1 + M) are recorded; they are
    informative across a corpus, not against a fixed bound.
    """
    grid, values = _unpack(state)
    m = compute_moments((grid, values))
    p_rho, p_mom, p_en = (fraction * c for c in critical_exponents(grid.dim))
    M = max(float(np.max(values)) if values.size else 0.0, third_moment((grid, values)))
    norms = {
        "rho_lp": _lp_torus(m.rho, p_rho, grid.cell_x),
        "mom_lp": _lp_torus(np.sqrt(np.sum(m.mom ** 2, axis=-1)), p_mom, grid.cell_x),
        "energy_lp": _lp_torus(m.en2, p_en, grid.cell_x),
    }
    rep = AuditReport(metadata={"M": M, "exponents": (p_rho, p_mom, p_en)})
    rep.record("moment_bound_M", M, "moment integrability")
    for name, val in norms.items():
        ok = math.isfinite(val)
        rep.add(name, val, math.inf, ok, "moment integrability", severity=FAIL)
        rep.record(f"{name}_over_1_plus_M", val / (1.0 + M), "moment integrability")
    return rep


def mollifier_mass_check(rho, kernel: MollifierKernel) -> float:
    """sup_y int theta(x - y) rho(x) / (theta * rho)(x) dx over grid points y."""
    rho = np.asarray(rho, dtype=np.float64)
    if np.any(rho < 0):
        raise ValueError("rho must be nonnegative")
    if not np.any(rho > 0):
        raise ValueError("rho is identically zero")
    smooth = mollify(kernel, rho)
    ratio = np.where(smooth > 0, rho / np.where(smooth > 0, smooth, 1.0), 0.0)
    # the bump kernel is even, so correlation equals convolution
    return float(np.max(mollify(kernel, ratio)))


def full_report(traj, lp_slack=0.01) -> AuditReport:
    """All trajectory audits that apply to ``traj``."""
    rep = AuditReport()
    cons = conservation_report(traj)
    if traj.reg is not None:
        # the surrogates do not conserve momentum or energy; keep mass only
        cons.checks = [c for c in cons.checks if c.name == "mass_drift"]
    rep.extend(cons)
    rep.extend(h_theorem_check(traj))
    rep.extend(third_moment_check(traj))
    if traj.extras and "lp2" in traj.extras[0]:
        for p in (1, 2, math.inf):
            rep.extend(lp_growth_check(traj, p, lp_slack))
    rep.extend(regularization_bounds_report(traj))
    return rep
