import json
import subprocess
import sys

import pytest

from monokernel.cli import main
from monokernel.core import ReducedModel
from monokernel.lp import kernel_from_json, verify_kernel
from monokernel.sweep import SweepTable


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("argv, code, verdict", [
    (["--R", "2", "--rho", "0.4", "--s", "1"], 0, "feasible"),
    (["--R", "10", "--rho", "0.6", "--s", "5"], 1, "infeasible"),
    (["--R", "5", "--rho", "1", "--s", "5"], 0, "feasible"),
])
def test_check(capsys, argv, code, verdict):
    c, out, _ = run(capsys, "check", *argv)
    assert c == code
    assert out.splitlines()[0] == f"verdict: {verdict}"


def test_check_json(capsys):
    c, out, _ = run(capsys, "check", "--R", "2", "--rho", "0.6", "--s", "1", "--json")
    d = json.loads(out)
    assert c == 1 and d["feasible"] is False
    assert d["threshold"] == pytest.approx(2.4)
    c, out, _ = run(capsys, "check", "--R", "2", "--rho", "0", "--s", "1", "--json")
    assert c == 0 and json.loads(out)["margin"] is None


def test_check_boundary(capsys):
    c, out, _ = run(capsys, "check", "--R", "2", "--rho", "0.5", "--s", "1")
    assert c == 3
    assert "boundary: true" in out


def test_kernel_diagonal(capsys):
    c, out, _ = run(capsys, "kernel", "--R", "1", "--rho", "1", "--s", "1")
    assert c == 0
    k = kernel_from_json(out)
    assert k[1, 1] == pytest.approx(0.5) and k[-1, -1] == pytest.approx(0.5)


def test_kernel_to_file(tmp_path, capsys):
    path = tmp_path / "k.json"
    c, out, _ = run(capsys, "kernel", "--R", "2", "--rho", "0.99", "--s", "2", "-o", str(path))
    assert c == 0 and out == ""
    k = kernel_from_json(path.read_text())
    assert verify_kernel(k, ReducedModel(2, 0.99)).passed


def test_kernel_infeasible_prints_certificate(capsys):
    c, out, _ = run(capsys, "kernel", "--R", "2", "--rho", "0.6", "--s", "1")
    d = json.loads(out)
    assert c == 1 and d["status"] == "infeasible"
    assert 0 < d["certificate"]["z1"]


def test_kernel_lam_and_compactness(capsys):
    c, out, _ = run(capsys, "kernel", "--R", "1", "--rho", "0.5", "--s", "1", "--lam", "0.5")
    assert c == 0 and kernel_from_json(out).lam == pytest.approx(0.5)
    c, _, err = run(capsys, "kernel", "--R", "1", "--rho", "0.5", "--s", "1", "--lam", "5")
    assert c == 2 and "exceeds" in err
    c, out, _ = run(capsys, "kernel", "--R", "1.5", "--rho", "0.7", "--s", "2", "--objective", "compactness")
    assert c == 0 and verify_kernel(kernel_from_json(out), ReducedModel(1.5, 0.7)).passed


def test_kernel_drift(capsys):
    c, out, _ = run(capsys, "kernel", "--R", "1", "--rho", "0.5", "--s", "1", "--lam", "0.3",
                    "--mu1", "1", "--mu2", "-1", "--h", "0.01")
    assert c == 0
    k = kernel_from_json(out)
    assert min(k.entries.values()) >= 0
    c, out, _ = run(capsys, "kernel", "--R", "1", "--rho", "0.5", "--s", "1",
                    "--mu1", "50", "--h", "0.1")
    d = json.loads(out)
    assert c == 4 and d["status"] == "drift-step-too-large"
    assert 0 < d["admissible_k"] < d["k"]


def test_rhomax_csv(tmp_path, capsys):
    path = tmp_path / "curve.csv"
    c, _, _ = run(capsys, "rhomax", "--R-min", "1", "--R-max", "5", "--steps", "17", "--s", "5", "-o", str(path))
    t = SweepTable.from_csv(path.read_text())
    assert c == 0 and len(t) == 17
    assert t["rho_max"][0] == 1.0 and t["rho_max"][-1] == 1.0 and t["rho_max"][8] == 1.0


def test_window_json_roundtrip(capsys):
    c, out, _ = run(capsys, "window", "--rho", "0.99", "--s", "3", "--R-min", "1", "--R-max", "6",
                    "--steps", "50", "--json")
    t = SweepTable.from_json(out)
    assert c == 0 and set(t.columns) == {"R", "z_minus", "z_plus", "empty"}
    assert t.to_json() == out


def test_minstencil(capsys):
    assert run(capsys, "minstencil", "--R", "2", "--rho", "0.99", "--s-max", "3")[:2] == (0, "2\n")
    c, out, _ = run(capsys, "minstencil", "--R", "3.5", "--rho", "0.99", "--s-max", "3", "--json")
    assert c == 1 and json.loads(out)["min_s"] is None and json.loads(out)["necessary_s"] == 4


def test_audit_bs(tmp_path, capsys):
    path = tmp_path / "audit.csv"
    c, out, _ = run(capsys, "audit-bs", "--rho", "0.3", "--n", "20", "--s-max", "2", "-o", str(path))
    d = json.loads(out)
    assert c == 0 and d["nodes"] == 400 and d["infeasible"] > 0 and d["claim_holds"]
    assert path.read_text().splitlines()[0] == "S1,S2,localR,min_s,feasible"


def test_crosscheck(capsys):
    c, out, _ = run(capsys, "crosscheck", "--trials", "30", "--seed", "5", "--s-max", "3")
    d = json.loads(out)
    assert c == 0 and sum(d["counts"].values()) == 30 and d["counts"]["disagree"] == 0


@pytest.mark.parametrize("argv", [[], ["check", "--R", "2"], ["check", "--R", "x", "--rho", "0", "--s", "1"],
                                  ["check", "--R", "-1", "--rho", "0", "--s", "1"],
                                  ["check", "--R", "1", "--rho", "2", "--s", "1"],
                                  ["check", "--R", "1", "--rho", "0", "--s", "0"],
                                  ["rhomax", "--R-min", "2", "--R-max", "1", "--steps", "5", "--s", "1"]])
def test_usage_errors(capsys, argv):
    with pytest.raises(SystemExit) as exc:
        if main(argv) == 2:
            raise SystemExit(2)
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "monokernel", "check", "--R", "1", "--rho", "1", "--s", "1"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "verdict: feasible" in r.stdout
