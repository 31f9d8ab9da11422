"""Command-line entry point: ``vfp <command> --config <path> --out <dir>``.

Exit status: 0 when every audit passes, 2 when some are only flagged,
1 on a failed audit or an error.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace

import numpy as np

from .config import ConfigError, RunConfig, initial_field, load_config
from .diagnostics import (FLAG, AuditReport, bounds_check, conservation_report, density_temperature_check,
                          full_report, h_theorem_check, moment_integrability_check, third_moment_check)
from .grid import FieldError, read_snapshot, write_snapshot
from .moments import compute_moments
from .regularize import regularize_initial
from .solver import (PicardDivergence, SolverAbort, continuation_study, picard_solve,
                     read_trajectory_csv, run)

COMMANDS = ("run", "picard", "particles", "sweep", "compare", "check", "plot")


def _time_tag(t):
    return f"{t:.6f}".rstrip("0").rstrip(".")


def _emit(report: AuditReport, out, name="audit.csv"):
    report.to_csv(os.path.join(out, name))
    print(report.table())
    return report.exit_code()


def cmd_run(cfg: RunConfig, out):
    f0 = initial_field(cfg)
    traj = run(cfg.solver, f0)
    traj.to_csv(os.path.join(out, "trajectory.csv"))
    traj.extras_to_csv(os.path.join(out, "trajectory_extras.csv"))
    for t, snap in sorted(traj.snapshots.items()):
        write_snapshot(os.path.join(out, f"snapshot_t{_time_tag(t)}.txt"), snap, t)
    write_snapshot(os.path.join(out, "final.txt"), traj.final, cfg.solver.t_end)
    if not cfg.audit or len(traj.rows) < 2:
        return 0
    rep = full_report(traj, cfg.lp_slack)
    rep.extend(moment_integrability_check(traj.final))
    rep.extend(density_temperature_check(traj.final))
    return _emit(rep, out)


def cmd_picard(cfg: RunConfig, out):
    if cfg.solver.reg is None:
        raise ConfigError("reg: the picard command needs eps and delta")
    f0eps = regularize_initial(initial_field(cfg), cfg.solver.reg.eps)
    try:
        res = picard_solve(f0eps, cfg.solver)
    except PicardDivergence as exc:
        _write_residuals(os.path.join(out, "picard_residuals.csv"), exc.residuals)
        if exc.state is not None:
            write_snapshot(os.path.join(out, "picard_dump.txt"), exc.state, cfg.solver.t_end)
        raise
    _write_residuals(os.path.join(out, "picard_residuals.csv"), res.residuals)
    write_snapshot(os.path.join(out, "picard_final.txt"), res.final, cfg.solver.t_end)
    rep = AuditReport()
    r = np.asarray(res.residuals)
    rep.add("picard_converged", r[-1] if len(r) else 0.0, cfg.solver.picard.tol, res.converged,
            "Picard iterates form a Cauchy sequence", severity=FLAG)
    if len(r) > 1:
        rep.add("picard_residuals_decreasing", float(np.max(np.diff(r))), 0.0,
                bool(np.all(np.diff(r) < 0)), "Picard iterates form a Cauchy sequence", severity=FLAG)
    direct = run(cfg.solver, f0eps, initial_regularized=True, keep_states=True)
    grid = f0eps.grid
    dist = max(float(np.sum(np.abs(a - b))) * grid.cell_x * grid.cell_v
               for a, b in zip(direct.states, res.states))
    rep.add("fixed_point_vs_direct_l1", dist, 5 * cfg.solver.picard.tol, dist <= 5 * cfg.solver.picard.tol,
            "fixed point equals the direct regularized run", severity=FLAG)
    return _emit(rep, out)


def _write_residuals(path, residuals):
    with open(path, "w", encoding="ascii") as fh:
        fh.write("iteration,residual\n")
        for i, r in enumerate(residuals, 1):
            fh.write(f"{i},{r!r}\n")


def cmd_particles(cfg: RunConfig, out):
    from .particles import run_particles, write_ensemble

    traj = run_particles(cfg.solver, initial_field(cfg), cfg.n_p, cfg.seed,
                         snapshot_times=cfg.solver.snapshot_times)
    traj.to_csv(os.path.join(out, "particles_trajectory.csv"))
    traj.extras_to_csv(os.path.join(out, "particles_extras.csv"))
    write_ensemble(os.path.join(out, "ensemble_final.txt"), traj.ensemble, cfg.solver.t_end)
    for t, pm in sorted(traj.moment_snapshots.items()):
        _write_moment_fields(os.path.join(out, f"particle_moments_t{_time_tag(t)}.csv"), pm)
    rep = AuditReport()
    mass = traj.column("mass")
    drift = float(np.max(np.abs(mass - mass[0])))
    rep.add("total_weight_drift", drift, 0.0, drift == 0.0, "particle weight conservation")
    return _emit(rep, out)


def _write_moment_fields(path, pm):
    m = pm.moments
    dim = m.mom.shape[-1]
    cols = ["cell", "rho", "se_rho"] + [f"mom_{k + 1}" for k in range(dim)] + \
        [f"se_mom_{k + 1}" for k in range(dim)] + ["en2", "se_en2"]
    with open(path, "w", encoding="ascii") as fh:
        fh.write(",".join(cols) + "\n")
        rho = m.rho.ravel()
        mom = m.mom.reshape(-1, dim)
        se_mom = pm.se_mom.reshape(-1, dim)
        for i in range(rho.size):
            vals = [rho[i], pm.se_rho.ravel()[i], *mom[i], *se_mom[i], m.en2.ravel()[i], pm.se_en2.ravel()[i]]
            fh.write(str(i) + "," + ",".join("%.17g" % v for v in vals) + "\n")


def cmd_sweep(cfg: RunConfig, out):
    from .plotting import plot_continuation

    table = continuation_study(cfg.solver, initial_field(cfg), cfg.eps_list, cfg.delta_list)
    table.to_csv(os.path.join(out, "continuation.csv"))
    table.to_csv(os.path.join(out, "continuation_reference.csv"), reference=True)
    plot_continuation([r for r in table.rows if not math.isnan(r["dist_rho"])],
                      os.path.join(out, "continuation.svg"))
    rep = AuditReport()
    n_eps = len(cfg.eps_list)
    sweeps = {"eps": table.rows[1:n_eps], "delta": table.rows[n_eps + 1:]}
    for label, rows in sweeps.items():
        for key in ("dist_rho", "dist_mom", "dist_energy"):
            vals = np.array([r[key] for r in rows])
            ok = len(vals) < 2 or bool(np.all(np.diff(vals) < 0))
            rep.add(f"{label}_sweep_{key}_shrinking", float(vals[-1]) if len(vals) else 0.0, math.nan, ok,
                    "regularization limits", severity=FLAG)
    ref = table.reference_rows[n_eps:]
    for key in ("dist_rho", "dist_mom", "dist_energy"):
        vals = np.array([r[key] for r in ref])
        rep.add(f"delta_reference_{key}_decreasing", float(vals[-1]), math.nan,
                bool(np.all(np.diff(vals) < 0)), "regularization limits", severity=FLAG)
    return _emit(rep, out)


def grid_error_fields(cfg: RunConfig, f0, times):
    """Grid moment fields at ``times`` plus |fine - coarse| error estimates (dt halved)."""
    coarse = run(replace(cfg.solver, snapshot_times=tuple(times)), f0)
    fine = run(replace(cfg.solver, dt=cfg.solver.schedule()[1] / 2, snapshot_times=tuple(times)), f0)
    out = {}
    for t in times:
        a = coarse.snapshots[_closest(coarse.snapshots, t)]
        b = fine.snapshots[_closest(fine.snapshots, t)]
        ma, mb = compute_moments(a), compute_moments(b)
        out[t] = (ma, {"rho": np.abs(ma.rho - mb.rho), "mom": np.abs(ma.mom - mb.mom),
                       "en2": np.abs(ma.en2 - mb.en2)})
    return out


def _closest(d, t):
    return min(d, key=lambda s: abs(s - t))


def cmd_compare(cfg: RunConfig, out, z_bound=3.0):
    from .particles import ComparisonRow, compare_fields, run_particles, write_comparison

    if cfg.solver.reg is None:
        raise ConfigError("reg: grid-vs-particle comparison needs eps and delta")
    times = tuple(t for t in cfg.compare_times if 0 < t <= cfg.solver.t_end + 1e-12)
    f0 = initial_field(cfg)
    grid_fields = grid_error_fields(cfg, f0, times)
    ptraj = run_particles(cfg.solver, f0, cfg.n_p, cfg.seed, snapshot_times=times)
    rows = []
    rep = AuditReport()
    for t in times:
        gm, err = grid_fields[t]
        pm = ptraj.moment_snapshots[_closest(ptraj.moment_snapshots, t)]
        for name, (rms, zmax, l1) in compare_fields(gm, err, pm, cfg.grid.cell_x).items():
            rows.append(ComparisonRow(t, name, rms, zmax, l1))
            rep.add(f"{name}_rms_z_t{_time_tag(t)}", rms, z_bound, rms <= z_bound,
                    "particle law solves the regularized equation", severity=FLAG,
                    detail=f"max |z| {zmax:.3g}")
    write_comparison(os.path.join(out, "comparison.csv"), rows)
    return _emit(rep, out)


def cmd_check(cfg: RunConfig | None, out, snapshot=None, trajectory=None):
    rep = AuditReport()
    reg = cfg.solver.reg if cfg is not None else None
    if snapshot is not None:
        values, grid, _ = read_snapshot(snapshot, validate=False)
        rep.extend(bounds_check((grid, values), params=reg, positive_expected=reg is not None))
        if np.all(np.isfinite(values)) and np.min(values) >= 0:
            rep.extend(moment_integrability_check((grid, values)))
            rep.extend(density_temperature_check((grid, values)))
    elif cfg is not None:
        f0 = initial_field(cfg)
        state = regularize_initial(f0, reg.eps) if reg is not None else f0
        rep.extend(bounds_check(state, params=reg, positive_expected=reg is not None))
        rep.extend(moment_integrability_check(state))
        rep.extend(density_temperature_check(state))
    if trajectory is not None:
        traj = read_trajectory_csv(trajectory)
        traj.reg = reg
        rep.extend(conservation_report(traj))
        rep.extend(h_theorem_check(traj, compare_rate=False))
        rep.extend(third_moment_check(traj))
    return _emit(rep, out, "check.csv")


def cmd_plot(cfg, out, trajectory=None):
    from .plotting import plot_continuation, plot_drift, plot_entropy, plot_residuals

    made = 0
    tpath = trajectory or os.path.join(out, "trajectory.csv")
    if os.path.exists(tpath):
        traj = read_trajectory_csv(tpath)
        plot_entropy(traj, os.path.join(out, "entropy.svg"))
        plot_drift(traj, os.path.join(out, "moment_drift.svg"))
        made += 2
    rpath = os.path.join(out, "picard_residuals.csv")
    if os.path.exists(rpath):
        r = np.loadtxt(rpath, delimiter=",", skiprows=1, ndmin=2)
        plot_residuals(r[:, 1], os.path.join(out, "picard_residuals.svg"))
        made += 1
    cpath = os.path.join(out, "continuation.csv")
    if os.path.exists(cpath):
        traj = read_trajectory_csv(cpath)
        plot_continuation([r for r in traj.rows if not math.isnan(r["dist_rho"])],
                          os.path.join(out, "continuation.svg"))
        made += 1
    if not made:
        raise FileNotFoundError(f"no trajectory, residual or continuation CSV found in {out}")
    print(f"wrote {made} plot(s) to {out}")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="vfp", description="Vlasov-Fokker-Planck solver and audits")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON configuration file")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--seed", type=int, help="override the configured seed")
    ap.add_argument("--snapshot", help="check: audit this snapshot file")
    ap.add_argument("--trajectory", help="check/plot: trajectory CSV to audit or plot")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        os.makedirs(args.out, exist_ok=True)
        cfg = None
        if args.config:
            cfg = load_config(args.config)
            if args.seed is not None:
                cfg = cfg.with_seed(args.seed)
            with open(os.path.join(args.out, "config.json"), "w", encoding="utf-8") as fh:
                fh.write(cfg.to_json())
        elif args.command not in ("check", "plot"):
            raise ConfigError(f"--config is required for {args.command}")
        if args.command == "check":
            if cfg is None and args.snapshot is None and args.trajectory is None:
                raise ConfigError("check needs --config, --snapshot or --trajectory")
            return cmd_check(cfg, args.out, args.snapshot, args.trajectory)
        if args.command == "plot":
            return cmd_plot(cfg, args.out, args.trajectory)
        handler = {"run": cmd_run, "picard": cmd_picard, "particles": cmd_particles,
                   "sweep": cmd_sweep, "compare": cmd_compare}[args.command]
        return handler(cfg, args.out)
    except SolverAbort as exc:
        if exc.state is not None:
            write_snapshot(os.path.join(args.out, "abort_snapshot.txt"), exc.state, exc.time or 0.0)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, FieldError, PicardDivergence, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
