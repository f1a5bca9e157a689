"""CLI subcommands: artifacts written, exit codes honored."""

import csv
import json

import numpy as np
import pytest

from screenopt.cli import main
from screenopt.euler_lagrange import THETA_START


@pytest.fixture(scope="module")
def solved_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("solve")
    rc = main(
        [
            "solve-direct",
            "--a", "1.0",
            "--n", "24",
            "--max-iters", "600",
            "--out", str(out),
        ]
    )
    assert rc == 0
    return out


def test_closed_form_table(tmp_path):
    path = tmp_path / "profile.csv"
    rc = main(["closed-form", "--a", "1.0", "--num", "41", "--out", str(path)])
    assert rc == 0
    rows = path.read_text().splitlines()
    assert rows[0] == "t,U,U_prime,U_second"
    assert len(rows) == 42


def test_solve_direct_artifacts(solved_dir):
    report = json.loads((solved_dir / "report.json").read_text())
    assert set(report) >= {"phi", "iterations", "primal_residual", "stationarity_residual"}
    assert report["phi"] > 0.0
    with open(solved_dir / "u.csv") as fh:
        header = fh.readline().strip()
    assert header == "x1,x2,value"


def test_classify_artifacts(solved_dir, tmp_path):
    out = tmp_path / "regions"
    rc = main(
        [
            "classify",
            "--in", str(solved_dir / "u.csv"),
            "--out", str(out),
            "--svg", str(tmp_path / "regions.svg"),
        ]
    )
    assert rc == 0
    assert (out / "labels.csv").exists()
    assert (out / "interface.csv").exists()
    svg_text = (tmp_path / "regions.svg").read_text()
    assert svg_text.lstrip().startswith("<svg")


def test_el_solve_roundtrip(tmp_path):
    a, t10 = 1.0, 2.5
    theta = np.linspace(THETA_START, 0.4, 25)
    r0 = (t10 - 2 * a) / np.sqrt(2.0)
    r = r0 * np.exp(-0.5 * (theta - THETA_START))
    samples = tmp_path / "r.csv"
    with open(samples, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "R"])
        w.writerows(zip(theta, r))
    fan_path = tmp_path / "fan.csv"
    rc = main(
        [
            "el-solve",
            "--a", str(a),
            "--t10", str(t10),
            "--r-samples", str(samples),
            "--out", str(fan_path),
        ]
    )
    assert rc == 0
    header = fan_path.read_text().splitlines()[0]
    assert header == "theta,m,m_prime,h,b,R"


def test_el_solve_rejects_inconsistent_t10(tmp_path):
    theta = np.linspace(THETA_START, 0.4, 10)
    samples = tmp_path / "r.csv"
    with open(samples, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "R"])
        w.writerows(zip(theta, np.full(10, 0.3)))
    rc = main(
        [
            "el-solve",
            "--a", "1.0",
            "--t10", "2.5",
            "--r-samples", str(samples),
            "--out", str(tmp_path / "fan.csv"),
        ]
    )
    assert rc == 2  # validation error: R(-pi/4) inconsistent with t10


def test_bvp_solve_artifacts(solved_dir, tmp_path):
    regions = tmp_path / "regions"
    main(["classify", "--in", str(solved_dir / "u.csv"), "--out", str(regions)])
    interface = regions / "interface.csv"
    dirichlet = tmp_path / "u1.csv"
    with open(interface) as fh:
        rows = list(csv.reader(fh))[1:]
    with open(dirichlet, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "value"])
        for srow in rows:
            w.writerow([srow[0], "0.29"])
    out = tmp_path / "u2.csv"
    rc = main(
        [
            "bvp-solve",
            "--domain", str(interface),
            "--dirichlet", str(dirichlet),
            "--a", "1.0",
            "--n", "32",
            "--out", str(out),
        ]
    )
    assert rc == 0
    assert out.read_text().startswith("x1,x2,value")


def test_refute_rc_report(tmp_path):
    out = tmp_path / "report.json"
    rc = main(["refute-rc", "--a", "1.0", "--n", "48", "--out", str(out)])
    assert rc == 0
    report = json.loads(out.read_text())
    assert report["verdict"] == "ansatz inconsistent"
    assert abs(report["bound_lhs"] - 0.5505102572168219) <= 1e-12
    assert report["bound_rhs"] == 0.6
    assert report["required_jump"] == 0.9


def test_price_menu_artifacts(solved_dir, tmp_path):
    out = tmp_path / "pricing"
    rc = main(["price-menu", "--in", str(solved_dir / "u.csv"), "--out", str(out)])
    assert rc == 0
    payload = json.loads((out / "pricing.json").read_text())
    assert payload["v_origin"] == 0.0
    assert abs(payload["intensity_mass"] - 1.0) <= 1e-9
    assert (out / "menu.csv").exists()
    assert (out / "intensity.csv").exists()


def test_validation_exit_code():
    rc = main(["solve-direct", "--a", "-1.0", "--n", "24", "--out", "/tmp/nope"])
    assert rc == 2


def test_pipeline_single_stage(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"a": 1.0, "n": 24, "stages": ["closed-form"]}))
    out = tmp_path / "run"
    rc = main(["pipeline", "--config", str(cfg), "--out", str(out)])
    assert rc == 0
    assert (out / "profile.csv").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert list(summary["stages"]) == ["closed-form"]
    # nothing but the requested stage ran
    assert not (out / "u.csv").exists()


def test_pipeline_solve_and_classify(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps(
            {
                "a": 1.0,
                "n": 24,
                "max_iters": 500,
                "stages": ["solve-direct", "classify"],
                "svg": False,
            }
        )
    )
    out = tmp_path / "run"
    rc = main(["pipeline", "--config", str(cfg), "--out", str(out)])
    assert rc == 0
    assert (out / "u.csv").exists()
    assert (out / "labels.csv").exists()
    assert (out / "interface.csv").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["ok"] is True
