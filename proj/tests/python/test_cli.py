"""CLI smoke tests: subcommands, output shape, exit codes, reproducibility."""

import json
import os
import subprocess
import sys

import pytest

CLI = os.environ.get("MINTERP_CLI")

pytestmark = pytest.mark.skipif(CLI is None, reason="MINTERP_CLI not set")


def run_cli(*args, cwd=None, expect_code=0):
    proc = subprocess.run(
        [CLI, *args], capture_output=True, text=True, cwd=cwd, timeout=300
    )
    assert proc.returncode == expect_code, (
        f"exit {proc.returncode} != {expect_code}\nstdout: {proc.stdout}"
        f"\nstderr: {proc.stderr}"
    )
    return proc


def output_json(proc):
    payload = json.loads(proc.stdout)
    assert "version" in payload
    assert "timestamp" in payload
    assert "config" in payload
    return payload["result"]


def stable_stdout(proc):
    payload = json.loads(proc.stdout)
    payload.pop("timestamp")
    return json.dumps(payload, sort_keys=True)


def result_only(proc):
    return json.dumps(json.loads(proc.stdout)["result"], sort_keys=True)


def test_ranks_constant(tmp_path):
    proc = run_cli(
        "ranks", "--family", "constant:p=10", "--kmax", "3", "--n", "100",
        "--out-dir", str(tmp_path),
    )
    result = output_json(proc)
    csv_path = result["csv"]
    lines = open(csv_path).read().splitlines()
    assert lines[0].startswith("# minterp")
    assert lines[1] == "k,r_k,R_k"
    rows = [line.split(",") for line in lines[2:]]
    assert rows[0] == ["0", "10", "10"]
    assert rows[3][0] == "3"
    assert float(rows[3][1]) == 7.0


def test_ranks_divergent_renders_inf(tmp_path):
    proc = run_cli(
        "ranks", "--family", "polylog:a=0.5,b=0", "--kmax", "1",
        "--out-dir", str(tmp_path),
    )
    result = output_json(proc)
    body = open(result["csv"]).read()
    assert ",inf,inf" in body


def test_kstar(tmp_path):
    proc = run_cli("kstar", "--family", "constant:p=100", "--n", "10", "--b", "5")
    result = output_json(proc)
    assert result["k_star"] == 0
    assert abs(result["variance_term"] - 0.1) < 1e-12

    proc = run_cli("kstar", "--family", "geometric:q=0.5", "--n", "10", "--b", "5")
    result = output_json(proc)
    assert result["k_star"] == "inf"

    proc = run_cli(
        "kstar", "--values", "1", "--n", "1", "--b", "2"
    )
    result = output_json(proc)
    assert result["k_star"] == "inf"
    assert result["reason"] == "finite rank below bn"


def test_risk_exact_and_mc(tmp_path):
    args = [
        "--family", "expiso:tau=1,eps=0.01,p=200", "--n", "20",
        "--sigma", "1", "--seed", "7", "--out-dir", str(tmp_path),
    ]
    exact = output_json(run_cli("risk-exact", *args, "--smw-checks", "4"))
    assert exact["bias_term"] >= 0.0
    assert exact["trace_c"] > 0.0
    rel = abs(exact["trace_c"] - exact["trace_c_alt"]) / max(exact["trace_c"], 1.0)
    assert rel <= 1e-8
    assert len(exact["smw_checks"]) == 4

    mc = output_json(
        run_cli("risk-mc", *args, "--replicas", "300", "--mode", "fixed-design")
    )
    assert abs(mc["mc_mean"] - mc["expected_risk_given_X"]) <= 4 * mc["mc_stderr"]
    csv_body = open(mc["csv"]).read()
    assert "mc_mean" in csv_body


def test_benign_scan(tmp_path):
    proc = run_cli(
        "benign-scan", "--family", "expiso:tau=1,eps=n^-1,p=n^1.5",
        "--ngrid", "32,64", "--seeds", "3", "--out-dir", str(tmp_path),
    )
    result = output_json(proc)
    assert result["verdict"]["verdict"] == "benign"
    body = open(result["csv"]).read()
    assert "n,r0_over_n,kstar_over_n,n_over_Rkstar,mc_median,mc_iqr,seeds" in body


def test_spectrum_commands(tmp_path):
    gen = output_json(
        run_cli(
            "spectrum-gen", "--family", "geometric:q=0.5", "--truncate", "2",
            "--out-dir", str(tmp_path),
        )
    )
    assert gen["discarded_mass"] == pytest.approx(0.25)
    assert gen["spectrum"]["kind"] == "explicit"

    ranks = output_json(
        run_cli("spectrum-from-ranks", "--u", "2,2,2", "--out-dir", str(tmp_path))
    )
    assert [float(v) for v in ranks["values"]] == [0.5, 0.25, 0.125]
    assert ranks["realized_r"] == [2.0, 2.0, 2.0]


def test_probe_concentration(tmp_path):
    proc = run_cli(
        "probe-concentration", "--family", "constant:p=400", "--n", "20",
        "--k", "0", "--seeds", "4", "--out-dir", str(tmp_path),
    )
    result = output_json(proc)
    assert len(result["rows"]) == 4


def test_exit_codes(tmp_path):
    # Config error: unknown family.
    run_cli("kstar", "--family", "nope:p=1", expect_code=2)
    # Config error: no spectrum given.
    run_cli("kstar", expect_code=2)
    # Numerical error: unreachable bracket tolerance in a raw tail sum.
    proc = subprocess.run(
        [CLI, "spectrum-gen", "--family", "polylog:a=1,b=1.5", "--truncate",
         "2", "--tol", "1e-12", "--out-dir", str(tmp_path)],
        capture_output=True, text=True, timeout=300,
    )
    assert proc.returncode == 3
    err = json.loads(proc.stderr)
    assert err["error"]["kind"] == "bracket_too_wide"
    # Size cap: p beyond the desk scale in a linear-algebra path.
    proc = subprocess.run(
        [CLI, "risk-exact", "--family", "constant:p=9000", "--n", "4"],
        capture_output=True, text=True, timeout=300,
    )
    assert proc.returncode == 4


def test_reproducibility_and_config_file(tmp_path):
    args = [
        "risk-mc", "--family", "expiso:tau=1,eps=0.01,p=100", "--n", "10",
        "--replicas", "50", "--seed", "3",
    ]
    a = run_cli(*args, "--out-dir", str(tmp_path / "a"))
    b = run_cli(*args, "--out-dir", str(tmp_path / "b"))
    assert stable_stdout(a).replace(str(tmp_path / "a"), "") == stable_stdout(
        b
    ).replace(str(tmp_path / "b"), "")
    # CSV files byte-identical.
    csv_a = open(tmp_path / "a" / "risk.csv", "rb").read()
    csv_b = open(tmp_path / "b" / "risk.csv", "rb").read()
    assert csv_a.replace(str(tmp_path / "a").encode(), b"") == csv_b.replace(
        str(tmp_path / "b").encode(), b""
    )

    # Threads do not change the results (only the echoed config records them).
    c = run_cli(*args, "--threads", "4", "--out-dir", str(tmp_path / "c"))
    assert result_only(a).replace(str(tmp_path / "a"), "") == result_only(
        c
    ).replace(str(tmp_path / "c"), "")
    csv_c = open(tmp_path / "c" / "risk.csv", "rb").read()
    # CSV body (everything after the config comment line) is byte-identical.
    assert csv_a.split(b"\n", 1)[1] == csv_c.split(b"\n", 1)[1]

    # Config file supplies defaults; flags override.
    config = tmp_path / "conf.json"
    config.write_text(json.dumps({"family": "constant:p=100", "n": 10, "b": 5}))
    d = run_cli("kstar", "--config", str(config))
    assert output_json(d)["k_star"] == 0
    e = run_cli("kstar", "--config", str(config), "--n", "30")
    assert output_json(e)["k_star"] == "inf"
