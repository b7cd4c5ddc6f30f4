"""Smoke test for the psmgd_py extension module.

Uses an installed module if present (e.g. after `maturin develop`);
otherwise builds the extension with cargo and loads it from a temp dir.
"""

import importlib
import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        return importlib.import_module("psmgd_py")
    except ImportError:
        pass
    subprocess.run(
        ["cargo", "build", "--release", "-p", "psmgd-python"],
        cwd=ROOT,
        check=True,
    )
    lib = ROOT / "target" / "release" / "libpsmgd_py.so"
    tmp = pathlib.Path(tempfile.mkdtemp())
    shutil.copy(lib, tmp / "psmgd_py.so")
    sys.path.insert(0, str(tmp))
    return importlib.import_module("psmgd_py")


def main():
    p = load()

    sol = p.min_norm_point([[1.0, 0.0], [0.0, 1.0]])
    assert sol.converged and abs(sol.min_norm_sq - 0.5) < 1e-12, sol.weights
    assert p.project_simplex([0.5, 0.5]) == [0.5, 0.5]

    suite = p.Suite.fonseca(5)
    assert suite.n_objectives == 2 and suite.dim == 5
    traj = p.run(suite, "psmgd", [0.1] * 5, 500, period=4)
    assert len(traj) == 500
    assert traj.gradient_evals == p.bp_count(500, 2, 4, "psmgd") == 625
    assert all(abs(sum(w) - 1.0) < 1e-9 for w in traj.weights)

    ls_suite, x_ref = p.Suite.random_least_squares(2, 6, 3)
    assert max(ls_suite.values(x_ref)) < 1e-20

    quad = p.Suite.quadratic([[10.0, 0.0]], [1.0])
    try:
        p.run(quad, "mgda", [0.0, 0.0], 1000, step_value=50.0)
    except p.DivergedError:
        pass
    else:
        raise AssertionError("expected divergence")

    slope, _, r2, _ = p.fit_rate([(t, 2.0 / math.sqrt(t)) for t in range(1, 50)])
    assert abs(slope + 0.5) < 1e-12 and abs(r2 - 1.0) < 1e-12
    dm = dict(p.delta_m_percent(["stl", "m"], [[10.0], [11.0]], [False], "stl"))
    assert dm["m"] == 10.0

    print("psmgd_py smoke test passed")


if __name__ == "__main__":
    main()
