import csv
import io
import json


import numpy as np
import pytest

from quadrobin.cli import RunConfig, main
from quadrobin.square_exact import solve_square


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_solve_square_artifact(capsys):
    code, out, _ = run_cli(capsys, "solve-square", "--alpha", "-1", "--S", "1")
    assert code == 0
    artifact = json.loads(out)
    assert artifact["schema_version"] == 1
    sol = solve_square(-1.0, 1.0)
    assert artifact["result"]["solution"]["lambda1"] == pytest.approx(sol.lambda1)
    assert artifact["result"]["solution"]["t_star"] == pytest.approx(sol.t_star)
    # the echoed configuration reparses into the structure that produced it
    cfg = RunConfig.from_dict(artifact["config"])
    assert cfg.command == "solve-square"
    assert cfg.alpha == -1.0


def test_solve_quad_and_output_file(capsys, tmp_path):
    out_path = tmp_path / "artifact.json"
    code, out, _ = run_cli(
        capsys,
        "solve-quad", "--a1", "0.3", "--a2", "-0.2", "--c", "1.3", "--S1", "0.55",
        "--alpha", "-1", "--mesh", "12", "--out", str(out_path),
    )
    assert code == 0
    artifact = json.loads(out_path.read_text())
    from quadrobin.geometry import QuadParams
    from quadrobin.solver import solve_quad

    expected = solve_quad(QuadParams(0.3, -0.2, 1.3, 0.55), -1.0, 12).lambda_h
    assert artifact["result"]["lambda_h"] == pytest.approx(expected, rel=1e-12)


def test_gradient_and_hessian_methods(capsys):
    base = ["--a1", "0.2", "--c", "1.1", "--S1", "0.9", "--alpha", "-1", "--mesh", "8"]
    code, out, _ = run_cli(capsys, "gradient", *base)
    assert code == 0
    grad_report = json.loads(out)["result"]["report"]
    assert grad_report["method"] == "discrete_formula"
    code, out, _ = run_cli(capsys, "hessian", *base, "--method", "fd")
    assert code == 0
    hess_report = json.loads(out)["result"]["report"]
    assert hess_report["method"] == "finite_difference"
    H = np.array(hess_report["hessian"])
    assert np.allclose(H, H.T, atol=1e-6)


def test_hessian_closed_form_at_square(capsys):
    code, out, _ = run_cli(
        capsys, "hessian", "--alpha", "-1", "--mesh", "8", "--method", "closed"
    )
    assert code == 0
    H = np.array(json.loads(out)["result"]["report"]["hessian"])
    assert H[0, 2] == 0.0 and H[2, 3] == 0.0
    assert np.all(np.diag(H) < 0)


def test_certify_kinds(capsys):
    code, out, _ = run_cli(
        capsys, "certify", "--a1", "6", "--c", "1", "--S1", "1", "--alpha", "-1"
    )
    assert code == 0
    certs = json.loads(out)["result"]["certificates"]
    assert [c["kind"] for c in certs] == [
        "small_alpha", "trial_one", "large_alpha_asymptotic",
    ]
    code, out, _ = run_cli(
        capsys, "certify", "--c", "1.5", "--S1", "1", "--kind", "asymptotic"
    )
    assert code == 0
    (cert,) = json.loads(out)["result"]["certificates"]
    assert cert["verdict"] == "certified_less"


def test_validation_errors_exit_2_with_error_object(capsys):
    code, out, err = run_cli(capsys, "solve-square")  # missing alpha
    assert code == 2
    error = json.loads(err)["error"]
    assert error["type"] == "validation"
    code, _, err = run_cli(capsys, "sweep", "--grid", "bogus", "--alpha", "-1")
    assert code == 2
    assert "grid" in json.loads(err)["error"]["message"]
    code, _, err = run_cli(capsys, "solve-quad", "--alpha", "-1", "--c", "-2")
    assert code == 2
    code, _, err = run_cli(capsys, "sweep", "--grid", "a1=0:1:2000000", "--alpha", "-1")
    assert code == 2


def test_sweep_csv_ordering_and_max_at_square(capsys):
    code, out, _ = run_cli(
        capsys, "sweep", "--grid", "a1=-0.1:0.1:5", "--alpha", "-1", "--mesh", "8"
    )
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [int(r["index"]) for r in rows] == [0, 1, 2, 3, 4]
    lams = [float(r["lambda_h"]) for r in rows]
    assert np.argmax(lams) == 2  # the square gridpoint
    assert set(rows[0]) == {
        "index", "a1", "a2", "c", "S1", "S", "alpha", "mesh", "lambda_h", "residual",
    }


def test_sweep_json_and_cartesian_grid(capsys):
    code, out, _ = run_cli(
        capsys,
        "sweep", "--grid", "a1=-0.05:0.05:3", "--grid", "alpha=-2:-1:2",
        "--mesh", "8", "--format", "json",
    )
    assert code == 0
    rows = json.loads(out)["result"]["rows"]
    assert len(rows) == 6
    assert [r["index"] for r in rows] == list(range(6))
    assert rows[0]["alpha"] == -2.0 and rows[1]["alpha"] == -1.0


def test_verify_theorem1(capsys):
    code, out, _ = run_cli(capsys, "verify-theorem1", "--alpha", "-1", "--mesh", "16")
    assert code == 0
    result = json.loads(out)["result"]
    assert result["checks"]["negative_definite"] is True
    assert all(m < 0 for m in result["verdict"]["mu"])


def test_verify_theorem2(capsys):
    code, out, _ = run_cli(
        capsys,
        "verify-theorem2", "--a1", "0.5", "--c", "1", "--S1", "1", "--mesh", "16",
    )
    assert code == 0
    result = json.loads(out)["result"]
    assert result["empirical_crossovers"]["small_alpha"] is not None
    assert all(c["quad_below_square"] for c in result["fem_checks"])


def test_verify_theorem3(capsys):
    code, out, _ = run_cli(
        capsys, "verify-theorem3", "--alpha", "-0.5", "--trials", "4"
    )
    assert code == 0
    result = json.loads(out)["result"]
    assert result["violations"] == []
    assert result["outside_samples_checked"] == 4
    assert result["radius"] > 0


def test_sweep_with_worker_pool_matches_serial(capsys, monkeypatch):
    argv = ["sweep", "--grid", "a1=-0.05:0.05:4", "--alpha", "-1", "--mesh", "6"]
    code, serial, _ = run_cli(capsys, *argv)
    assert code == 0
    monkeypatch.setenv("QUADROBIN_THREADS", "2")
    code, pooled, _ = run_cli(capsys, *argv)
    assert code == 0
    assert pooled == serial  # rows in grid order regardless of worker count


def test_square_requires_nonzero_alpha_everywhere(capsys):
    code, _, err = run_cli(capsys, "verify-theorem1", "--alpha", "0.5", "--mesh", "8")
    assert code == 2
    assert json.loads(err)["error"]["type"] == "validation"
