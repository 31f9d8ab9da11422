import json
import os
import subprocess
import sys

import numpy as np
import pytest

from vfp.cli import main
from vfp.grid import read_snapshot
from vfp.solver import read_trajectory_csv


def write_cfg(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


EQUILIBRIUM = {"grid": {"dim": 1, "nx": 16, "nv": 128, "vmax": 8}, "t_end": 0.5, "dt": 0.05,
               "initial": {"preset": "maxwellian"}}
REGULARIZED = {"grid": {"dim": 1, "nx": 16, "nv": 64}, "t_end": 0.2, "dt": 0.02,
               "reg": {"eps": 0.2, "delta": 0.1},
               "initial": {"preset": "sin-perturbed-maxwellian"},
               "particles": {"n_p": 20000}, "compare": {"times": [0.1, 0.2]},
               "sweep": {"eps_list": [0.3, 0.2], "delta_list": [0.2, 0.1]}, "seed": 3}


def test_run_equilibrium_exit_zero(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", write_cfg(tmp_path, EQUILIBRIUM), "--out", str(out)]) == 0
    traj = read_trajectory_csv(out / "trajectory.csv")
    assert len(traj.rows) == 11
    assert (out / "audit.csv").exists() and (out / "config.json").exists()
    assert (out / "final.txt").exists()


def test_check_corrupted_snapshot_fails(tmp_path):
    out = tmp_path / "out"
    main(["run", "--config", write_cfg(tmp_path, EQUILIBRIUM), "--out", str(out)])
    values, grid, t = read_snapshot(out / "final.txt", validate=False)
    values[3, 60] = -0.5
    bad = tmp_path / "bad.txt"
    # write by hand: DistField refuses negative values
    bad.write_text(grid.header(t) + "\n" + "\n".join("%.17g" % x for x in values.ravel()) + "\n")
    rc = main(["check", "--snapshot", str(bad), "--out", str(tmp_path / "chk")])
    assert rc == 1
    assert "FAIL" in (tmp_path / "chk" / "check.csv").read_text()
    clean = main(["check", "--snapshot", str(out / "final.txt"), "--out", str(tmp_path / "ok")])
    assert clean == 0


def test_config_errors_exit_one(tmp_path, capsys):
    bad = dict(EQUILIBRIUM, grid={"dim": 1, "nx": 16, "nv": 63})
    assert main(["run", "--config", write_cfg(tmp_path, bad), "--out", str(tmp_path / "o")]) == 1
    assert "nv must be even" in capsys.readouterr().err
    bad = dict(EQUILIBRIUM, foo=1)
    assert main(["run", "--config", write_cfg(tmp_path, bad), "--out", str(tmp_path / "o")]) == 1
    assert "foo" in capsys.readouterr().err
    assert main(["run", "--out", str(tmp_path / "o")]) == 1


def test_unknown_command_rejected(tmp_path):
    with pytest.raises(SystemExit):
        main(["explode", "--out", str(tmp_path)])


def test_compare_exit_zero_with_table(tmp_path):
    out = tmp_path / "cmp"
    rc = main(["compare", "--config", write_cfg(tmp_path, REGULARIZED), "--out", str(out)])
    assert rc == 0
    table = (out / "comparison.csv").read_text().splitlines()
    assert table[0].startswith("time,quantity")
    assert len(table) == 1 + 2 * 3


def test_picard_and_plot(tmp_path):
    out = tmp_path / "pic"
    doc = dict(REGULARIZED, t_end=0.1)
    assert main(["picard", "--config", write_cfg(tmp_path, doc), "--out", str(out)]) == 0
    res = np.loadtxt(out / "picard_residuals.csv", delimiter=",", skiprows=1, ndmin=2)
    assert res[-1, 1] < 1e-8
    assert main(["plot", "--out", str(out)]) == 0
    assert (out / "picard_residuals.svg").exists()


def test_sweep_writes_tables(tmp_path):
    out = tmp_path / "sw"
    assert main(["sweep", "--config", write_cfg(tmp_path, REGULARIZED), "--out", str(out)]) in (0, 2)
    assert (out / "continuation.csv").exists()
    assert (out / "continuation_reference.csv").exists()
    assert (out / "continuation.svg").exists()


def _snapshot_dir(path):
    return {f: (path / f).read_bytes() for f in sorted(os.listdir(path))}


def test_echo_rerun_bitwise(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["particles", "--config", write_cfg(tmp_path, REGULARIZED), "--out", str(a)]) in (0, 2)
    assert main(["particles", "--config", str(a / "config.json"), "--out", str(b)]) in (0, 2)
    assert _snapshot_dir(a) == _snapshot_dir(b)


def test_thread_count_does_not_change_output(tmp_path):
    cfg = write_cfg(tmp_path, dict(REGULARIZED, t_end=0.1))
    outs = []
    for threads in ("1", "3"):
        out = tmp_path / f"t{threads}"
        env = dict(os.environ, VFP_THREADS=threads)
        subprocess.run([sys.executable, "-m", "vfp.cli", "sweep", "--config", cfg, "--out", str(out)],
                       env=env, check=False, capture_output=True)
        outs.append(_snapshot_dir(out))
    assert outs[0] == outs[1]
    assert "continuation.csv" in outs[0]
