import json

import numpy as np
import pytest

from onebitdet.cli import (
    gamma_from_snr_db,
    main,
    point_seed,
    snapshots_for_time,
)


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_gamma_snr_convention():
    assert gamma_from_snr_db(0.0) == 1.0
    assert gamma_from_snr_db(-15.0) == pytest.approx(10.0**-0.75, rel=1e-15)


def test_snapshot_budget_rounding():
    assert snapshots_for_time(1.0) == 2046
    assert snapshots_for_time(0.1) == 205  # 204.6 rounds half-up
    assert snapshots_for_time(10.0) == 20460


def test_point_seed_is_stable():
    assert point_seed(157542, 0) == point_seed(157542, 0)
    assert point_seed(157542, 0) != point_seed(157542, 1)
    assert 0 <= point_seed(1, 5) < 2**64


def test_analyze_report(capsys, tmp_path):
    out = tmp_path / "analyze.csv"
    code, text, _ = run_cli(
        capsys, "analyze", "--sensors", "8", "--zeta", "15", "--snapshots", "100",
        "--snr", "-10", "--pfa", "1e-3", "--benchmark-gaussian", "--out", str(out))
    assert code == 0
    assert "pd=" in text and "chi=" in text and "[gaussian]" in text
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "model,snr_db,gamma1,pfa,threshold,pd,chi,chi_db"
    assert len(lines) == 3  # one-bit + gaussian rows
    assert (tmp_path / "analyze.csv.manifest.json").exists()


def test_analyze_pd_matches_simulation(capsys):
    # end-to-end: the reported P_D agrees with a direct Monte Carlo run.
    code, text, _ = run_cli(
        capsys, "analyze", "--sensors", "8", "--zeta", "15", "--snapshots", "100",
        "--snr", "-10", "--pfa", "1e-3")
    assert code == 0
    pd_line = [ln for ln in text.splitlines() if "pfa=0.001" in ln][0]
    pd_reported = float(pd_line.split("pd=")[1])

    from onebitdet import ArrayConfig, StatSelector, build_steering, receive_covariance
    from onebitdet.detector import asymptotic_rates, design_onebit
    from onebitdet.montecarlo import simulate_statistics

    cfg = ArrayConfig(8, np.deg2rad(15.0))
    design = design_onebit(cfg, 0.0, gamma_from_snr_db(-10.0), 100)
    pd_an, xi = asymptotic_rates(design, 1e-3)
    assert pd_reported == pytest.approx(pd_an, abs=1e-9)
    cov1 = receive_covariance(build_steering(cfg), gamma_from_snr_db(-10.0))
    stats = simulate_statistics(cov1, design.weights, StatSelector(16), 20_000, 100,
                                seed=5, threads=4)
    pd_hat = float(np.mean(stats > xi))
    se = np.sqrt(pd_hat * (1 - pd_hat) / 20_000)
    assert abs(pd_reported - pd_hat) <= max(0.02, 3 * se)


def test_analyze_equal_hypotheses_reports_zero_chi(capsys):
    # SNR 0 dB gives gamma1 = 1 exactly, matching --gamma0 1.
    code, text, _ = run_cli(
        capsys, "analyze", "--sensors", "4", "--zeta", "30", "--snapshots", "64",
        "--gamma0", "1", "--snr", "0")
    assert code == 0
    assert "chi=0 " in text


def test_usage_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["analyze", "--snr"])
    assert exc.value.code == 1
    code, _, err = run_cli(capsys, "validate", "--trials", "0", "--snr", "-10")
    assert code == 1 and "trials" in err
    code, _, err = run_cli(capsys, "analyze", "--zeta", "120")
    assert code == 1 and "zeta" in err


def test_sweep_sensors_single_row(capsys, tmp_path):
    out = tmp_path / "s.csv"
    code, text, _ = run_cli(
        capsys, "sweep-sensors", "--sensors-min", "5", "--sensors", "5",
        "--snr", "-15", "--threads", "1", "--out", str(out))
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "sensors,snr_db,chi,chi_db"
    assert len(lines) == 2
    assert lines[1].startswith("5,-15,")


def test_sweep_sensors_chi_nondecreasing(capsys, tmp_path):
    out = tmp_path / "s.csv"
    code, _, _ = run_cli(
        capsys, "sweep-sensors", "--sensors-min", "2", "--sensors", "7",
        "--snr", "-15", "--threads", "2", "--out", str(out))
    assert code == 0
    rows = [ln.split(",") for ln in out.read_text().strip().splitlines()[1:]]
    chis = [float(r[2]) for r in rows]
    assert np.all(np.diff(chis) >= -1e-12)


def test_sweep_time_budget_and_claims(capsys, tmp_path):
    out = tmp_path / "t.csv"
    code, _, _ = run_cli(
        capsys, "sweep-time", "--time-min", "0.1", "--time-max", "10",
        "--time-points", "7", "--snr", "-15", "--threads", "1",
        "--gnuplot", "--out", str(out))
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "t_ms,snapshots,snr_db,chi,chi_db"
    first = lines[1].split(",")
    assert first[0] == "0.1" and first[1] == "205"
    mid = [ln for ln in lines if ln.startswith("1,")][0]
    assert mid.split(",")[1] == "2046"
    assert (tmp_path / "t.csv.gp").exists()


def test_chi_db_column_blank_for_nonpositive_chi(capsys, tmp_path):
    # gamma0 > gamma1 drives the test-statistic separation negative: chi < 0.
    out = tmp_path / "z.csv"
    code, _, _ = run_cli(
        capsys, "analyze", "--sensors", "2", "--zeta", "10", "--snapshots", "4",
        "--gamma0", "0.5", "--snr", "-20", "--out", str(out))
    assert code == 0
    row = out.read_text().strip().splitlines()[1]
    assert row.endswith(",")  # chi_db cell is empty
    chi = float(row.split(",")[-2])
    assert chi < 0


def test_validate_csv_schema_and_agreement(capsys, tmp_path):
    out = tmp_path / "v.csv"
    code, _, _ = run_cli(
        capsys, "validate", "--snr", "-10", "--pfa", "1e-2", "--trials", "4000",
        "--threads", "2", "--out", str(out))
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "snr_db,pfa,pd_analytic,pd_empirical,ci_low,ci_high,seed"
    snr, pfa, pd_an, pd_emp, lo, hi, seed = lines[1].split(",")
    assert float(lo) <= float(pd_emp) <= float(hi)
    se = np.sqrt(float(pd_emp) * (1 - float(pd_emp)) / 4000)
    assert abs(float(pd_an) - float(pd_emp)) <= max(0.02, 3 * se)


def test_validate_deterministic_across_threads_and_runs(capsys, tmp_path):
    args = ["validate", "--snr", "-12", "--snr", "-9", "--pfa", "1e-3",
            "--trials", "3000", "--seed", "7"]
    paths = [tmp_path / f"v{i}.csv" for i in range(3)]
    for path, threads in zip(paths, ("1", "2", "4")):
        code, _, _ = run_cli(capsys, *args, "--threads", threads, "--out", str(path))
        assert code == 0
    blobs = [p.read_bytes() for p in paths]
    assert blobs[0] == blobs[1] == blobs[2]


def test_manifest_replay_reproduces_csv(capsys, tmp_path):
    out = tmp_path / "orig.csv"
    code, _, _ = run_cli(
        capsys, "validate", "--snr", "-11", "--pfa", "1e-3", "--trials", "2000",
        "--threads", "2", "--seed", "99", "--out", str(out))
    assert code == 0
    manifest_path = tmp_path / "orig.csv.manifest.json"
    manifest = json.loads(manifest_path.read_text())
    assert manifest["command"] == "validate"
    assert manifest["params"]["seed"] == 99
    assert "rng" in manifest["numeric_policy"]
    replay_out = tmp_path / "replayed.csv"
    code, _, _ = run_cli(capsys, "replay", "--manifest", str(manifest_path),
                         "--out", str(replay_out))
    assert code == 0
    assert replay_out.read_bytes() == out.read_bytes()
