import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from nepkit import gallery
from nepkit.cli import main
from nepkit.oracle import oracle_eigenvalues
from nepkit.problem import dump_problem


@pytest.fixture
def files(tmp_path):
    out = {}
    for name in ("quadratic", "linear_diag", "exponential", "logarithmic", "fold_family", "diag_family",
                 "delta_linear"):
        factory = gallery.PROBLEMS[name][0]
        path = tmp_path / f"{name}.json"
        path.write_text(dump_problem(factory()))
        out[name] = str(path)
    return out


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(tmp_path, argv, out="out"):
    target = tmp_path / out
    return main(argv + ["--out", str(target)]), target


def test_solve_matches_oracle(tmp_path, files):
    code, out = run(tmp_path, ["solve", "--problem", files["quadratic"], "--radius", "2"])
    assert code == 0
    found = [complex(float(r["re"]), float(r["im"])) for r in rows(out / "eigenvalues.csv")]
    ref = oracle_eigenvalues(gallery.quadratic())
    assert len(found) == 4
    assert max(min(abs(z - w) for w in ref) for z in found) < 1e-8
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["files"] == ["contours.csv", "eigenvalues.csv"]
    assert set(manifest) == {"command", "config", "seed", "version", "input_sha256", "files"}
    assert manifest["command"] == "solve" and "out" not in manifest["config"]


def test_solve_log_with_audit(tmp_path, files, capsys):
    code, out = run(tmp_path, ["solve", "--problem", files["logarithmic"], "--center", "3,0", "--radius", "1.5",
                               "--residual-audit"])
    assert code == 0
    audit = rows(out / "audit.csv")
    assert len(audit) == 1 and audit[0]["passed"] == "1"
    assert "1/1 eigenpairs pass" in capsys.readouterr().out


def test_invalid_inputs(tmp_path, files, capsys):
    assert run(tmp_path, ["solve", "--problem", files["quadratic"], "--radius", "0"])[0] == 1
    assert "radius must be positive" in capsys.readouterr().err
    assert run(tmp_path, ["solve", "--problem", files["logarithmic"], "--radius", "1"])[0] == 1
    assert run(tmp_path, ["oracle", "--problem", files["exponential"]])[0] == 1
    assert run(tmp_path, ["solve", "--problem", files["fold_family"], "--radius", "1"])[0] == 1
    assert run(tmp_path, ["bifurcate", "--problem", files["quadratic"], "--lambda0", "1"])[0] == 1
    assert run(tmp_path, ["refine", "--problem", files["quadratic"], "--lambda0", "x"])[0] == 1
    assert run(tmp_path, ["perturb", "--problem", files["quadratic"], "--lambda0", "3,3"])[0] == 1
    assert main(["solve"]) == 1


def test_oracle_command(tmp_path, files):
    code, out = run(tmp_path, ["oracle", "--problem", files["linear_diag"]])
    assert code == 0
    assert [float(r["re"]) for r in rows(out / "oracle_eigenvalues.csv")] == [1.0, 2.0]
    code, out = run(tmp_path, ["oracle", "--problem", files["quadratic"]], "q")
    assert len(rows(out / "oracle_eigenvalues.csv")) == 4


def test_refine_command(tmp_path, files):
    code, out = run(tmp_path, ["refine", "--problem", files["linear_diag"], "--lambda0", "0.9"])
    table = rows(out / "convergence.csv")
    assert code == 0 and len(table) <= 6 and float(table[-1]["residual"]) <= 1e-12
    code, out = run(tmp_path, ["refine", "--problem", files["linear_diag"], "--lambda0", "1"], "b")
    assert code == 0 and len(rows(out / "convergence.csv")) == 1
    lam = oracle_eigenvalues(gallery.quadratic())[0] + 1e-2
    code, out = run(tmp_path, ["refine", "--problem", files["quadratic"], "--lambda0", f"{float(lam.real)!r},{float(lam.imag)!r}",
                               "--method", "variational", "--tol", "1e-10"], "c")
    code, out = run(tmp_path, ["refine", "--problem", files["linear_diag"], "--lambda0", "-0.5"], "neg")
    assert code == 0 and float(rows(out / "convergence.csv")[-1]["lambda_re"]) == pytest.approx(1)
    assert code == 0 and len(rows(out / "convergence.csv")) <= 11
    code, out = run(tmp_path, ["refine", "--problem", files["linear_diag"], "--lambda0", "0.9", "--max-iter", "1"], "d")
    assert code == 2 and len(rows(out / "convergence.csv")) == 2
    assert run(tmp_path, ["refine", "--problem", files["linear_diag"], "--lambda0", "1.5"], "e")[0] == 2


def test_perturb_command(tmp_path, files, capsys):
    lam = oracle_eigenvalues(gallery.quadratic())[0]
    base = ["perturb", "--problem", files["quadratic"], "--lambda0", f"{float(lam.real)!r},{float(lam.imag)!r}"]
    code, out = run(tmp_path, base + ["--epsilon", "1e-6", "--seed", "42"])
    assert code == 0 and len(rows(out / "bound_vs_actual.csv")) == 100
    rate = float(capsys.readouterr().out.split("satisfaction_rate=")[1].split()[0])
    assert rate >= 0.99
    code, out = run(tmp_path, base + ["--epsilon", "0", "--trials", "5"], "zero")
    assert all(float(r["actual"]) == 0 for r in rows(out / "bound_vs_actual.csv"))
    run(tmp_path, base + ["--trials", "1", "--seed", "4"], "one_a")
    run(tmp_path, base + ["--trials", "1", "--seed", "4"], "one_b")
    assert (tmp_path / "one_a/bound_vs_actual.csv").read_bytes() == (tmp_path / "one_b/bound_vs_actual.csv").read_bytes()


def test_bifurcate_command(tmp_path, files):
    code, out = run(tmp_path, ["bifurcate", "--problem", files["fold_family"], "--lambda0", "1",
                               "--delta", files["delta_linear"]])
    assert code == 0
    (row,) = rows(out / "bifurcation.csv")
    assert abs(float(row["critical_mu"])) <= 1e-6
    assert all(np.isfinite(float(row[k])) for k in ("delta_alpha_closed", "delta_alpha_fd"))
    code, out = run(tmp_path, ["bifurcate", "--problem", files["diag_family"], "--lambda0", "0"], "diag")
    assert code == 0 and not (out / "bifurcation.csv").exists() and (out / "path.csv").exists()
    code, out = run(tmp_path, ["bifurcate", "--problem", files["fold_family"], "--lambda0", "0"], "broken")
    assert code == 2 and (out / "path.csv").exists()
    code, out = run(tmp_path, ["bifurcate", "--problem", files["fold_family"], "--lambda0", "1",
                               "--grid", "1:0.64:2"], "grid")
    assert code == 0 and len(rows(out / "path.csv")) == 2


def test_gallery_command(tmp_path, problem_dir):
    code, out = run(tmp_path, ["gallery"])
    assert code == 0
    for name in gallery.PROBLEMS:
        assert (out / f"{name}.json").read_text() == (problem_dir / f"{name}.json").read_text()


def test_fixed_seed_is_byte_identical(tmp_path, files):
    argv = ["solve", "--problem", files["exponential"], "--radius", "5", "--seed", "11"]
    run(tmp_path, argv, "a")
    run(tmp_path, argv, "b")
    for name in ("eigenvalues.csv", "contours.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_from_environment(tmp_path, files):
    env = dict(os.environ, NEPKIT_SEED="17")
    out = tmp_path / "env"
    proc = subprocess.run(
        [sys.executable, "-m", "nepkit", "oracle", "--problem", files["linear_diag"], "--out", str(out)],
        env=env, capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert json.loads((out / "manifest.json").read_text())["seed"] == 17
    env["NEPKIT_SEED"] = "abc"
    proc = subprocess.run([sys.executable, "-m", "nepkit", "gallery", "--out", str(out)], env=env,
                          capture_output=True, text=True)
    assert proc.returncode == 1
