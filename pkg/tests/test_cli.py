"""End-to-end command-line checks via subprocess."""

import json
import os
import pathlib
import subprocess
import sys

import numpy as np
import pytest

from gebshrink.blocks import TuningConfig
from gebshrink.io import read_signal_csv, write_signal_csv
from gebshrink.mixture import bayes_risk, from_atoms
from gebshrink.wavelets import denoise_equispaced, wavelet_basis

DATA = pathlib.Path(__file__).parent / "data"


def run_cli(*argv, env_extra=None):
    env = dict(os.environ)
    env.pop("GEB_SHRINK_THREADS", None)
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        [sys.executable, "-m", "gebshrink.cli", *map(str, argv)],
        capture_output=True,
        text=True,
        env=env,
    )


# ------------------------------------------------------------------ denoise


def test_denoise_constant_noiseless(tmp_path):
    src = tmp_path / "flat.csv"
    dst = tmp_path / "flat_out.csv"
    write_signal_csv(src, np.full(128, 4.5))
    proc = run_cli("denoise", "--input", src, "--output", dst, "--wavelet", "haar")
    assert proc.returncode == 0, proc.stderr
    assert "sigma_hat = 0" in proc.stdout
    values, _, estimate = read_signal_csv(dst)
    assert np.array_equal(estimate, values)
    assert np.array_equal(estimate, np.full(128, 4.5))


def test_denoise_output_round_trips_in_memory_result(tmp_path):
    noisy, _, _ = read_signal_csv(DATA / "bumps_noisy_2048.csv")
    dst = tmp_path / "out.csv"
    proc = run_cli(
        "denoise", "--input", DATA / "bumps_noisy_2048.csv", "--output", dst
    )
    assert proc.returncode == 0, proc.stderr
    _, truth, estimate = read_signal_csv(dst)
    want, _ = denoise_equispaced(noisy, wavelet_basis("s8"), TuningConfig())
    # 17 significant digits reproduce the doubles exactly
    assert np.array_equal(estimate, want)
    assert truth is not None  # input truth column is carried through


def test_denoise_reproduction_flags_on_bundled_fixture(tmp_path):
    dst = tmp_path / "bumps_hat.csv"
    proc = run_cli(
        "denoise",
        "--input", DATA / "bumps_noisy_2048.csv",
        "--output", dst,
        "--wavelet", "s8",
        "--rho0", "0.4",
        "--b0", "2",
        "--nstar", "64",
    )
    assert proc.returncode == 0, proc.stderr
    assert "sigma_hat = " in proc.stdout
    assert "branch" in proc.stdout  # per-level table
    values, truth, estimate = read_signal_csv(dst)
    assert estimate is not None and estimate.shape == (2048,)
    # shrinkage beats the raw observations against the bundled truth
    assert np.mean((estimate - truth) ** 2) < np.mean((values - truth) ** 2)


def test_denoise_non_dyadic_input_names_the_requirement(tmp_path):
    src = tmp_path / "bad.csv"
    write_signal_csv(src, np.zeros(1000))
    proc = run_cli("denoise", "--input", src, "--output", tmp_path / "o.csv")
    assert proc.returncode == 2
    assert proc.stderr.count("\n") == 1
    assert "power of two" in proc.stderr


def test_denoise_rejects_invalid_tuning(tmp_path):
    src = tmp_path / "flat.csv"
    write_signal_csv(src, np.zeros(64))
    proc = run_cli(
        "denoise", "--input", src, "--output", tmp_path / "o.csv", "--rho0", "0"
    )
    assert proc.returncode == 2
    assert proc.stderr.startswith("error:")
    assert proc.stderr.count("\n") == 1


def test_denoise_missing_input_file(tmp_path):
    proc = run_cli(
        "denoise", "--input", tmp_path / "nope.csv", "--output", tmp_path / "o.csv"
    )
    assert proc.returncode == 2
    assert proc.stderr.startswith("error:")


# ------------------------------------------------------------------- oracle


def test_oracle_point_mass_at_zero():
    proc = run_cli("oracle", "--atoms", "0=1")
    assert proc.returncode == 0, proc.stderr
    table = {}
    for line in proc.stdout.strip().splitlines():
        key, value = line.split("=")
        table[key.strip()] = float(value)
    assert table["bayes_risk"] == 0.0
    assert table["kappa"] == 0.0


def test_oracle_two_point_prior_stable_and_correct():
    a = run_cli("oracle", "--atoms=-3=0.5,3=0.5")
    b = run_cli("oracle", "--atoms=-3=0.5,3=0.5")
    assert a.returncode == 0 and b.returncode == 0
    assert a.stdout == b.stdout
    printed = {}
    for line in a.stdout.strip().splitlines():
        key, value = line.split("=")
        printed[key.strip()] = float(value)
    want = bayes_risk(from_atoms([-3.0, 3.0], [0.5, 0.5]))
    assert printed["bayes_risk"] == pytest.approx(want, rel=1e-12)


def test_oracle_malformed_atoms():
    proc = run_cli("oracle", "--atoms", "0.5")
    assert proc.returncode == 2
    assert proc.stderr.startswith("error:")


def test_oracle_weight_sum_error_prints_plain_number():
    proc = run_cli("oracle", "--atoms", "0=0.2,1=0.2")
    assert proc.returncode == 2
    assert "weights sum to 0.4" in proc.stderr


# ----------------------------------------------------------------- simulate


def write_spec(path, **kv):
    with open(path, "w") as fh:
        for key, value in kv.items():
            fh.write(f"{key} = {value}\n")


def test_simulate_zero_replicates_rejected(tmp_path):
    spec = tmp_path / "exp.cfg"
    write_spec(spec, estimator="mle", truth="zero:3", epsilon="0.5", replicates=0)
    proc = run_cli("simulate", "--spec", spec)
    assert proc.returncode == 2
    assert proc.stderr.startswith("error:")


def test_simulate_seed_fixes_output_bitwise(tmp_path):
    spec = tmp_path / "exp.cfg"
    write_spec(
        spec,
        estimator="geb-hybrid",
        truth="gaussian:1.0:128",
        epsilon="1.0",
        replicates=8,
        kde_mode="fourier",
    )
    out1 = tmp_path / "r1.json"
    out2 = tmp_path / "r2.json"
    for out in (out1, out2):
        proc = run_cli("simulate", "--spec", spec, "--seed", 42, "--output", out)
        assert proc.returncode == 0, proc.stderr
    assert out1.read_bytes() == out2.read_bytes()
    payload = json.loads(out1.read_text())
    assert payload["seed"] == 42
    assert payload["estimator"] == "geb-hybrid"


def test_simulate_csv_format(tmp_path):
    spec = tmp_path / "exp.cfg"
    write_spec(spec, estimator="mle", truth="zero:2", epsilon="0.5", replicates=4, seed=3)
    out = tmp_path / "r.csv"
    proc = run_cli("simulate", "--spec", spec, "--format", "csv", "--output", out)
    assert proc.returncode == 0, proc.stderr
    lines = out.read_text().strip().splitlines()
    assert lines[0].startswith("block_id,")
    assert lines[-1].startswith("total,")


def test_simulate_rejects_unknown_spec_key(tmp_path):
    spec = tmp_path / "exp.cfg"
    write_spec(spec, estimator="mle", truth="zero:3", epsilon="0.5", replicats=9)
    proc = run_cli("simulate", "--spec", spec)
    assert proc.returncode == 2
    assert "unknown keys: replicats" in proc.stderr


def test_simulate_config_file_supplies_tuning_and_flags_win(tmp_path):
    spec = tmp_path / "exp.cfg"
    write_spec(
        spec,
        estimator="geb-hybrid",
        truth="gaussian:1.0:512",
        epsilon="1.0",
        replicates=4,
        kde_mode="fourier",
    )
    tuning = tmp_path / "tuning.cfg"
    write_spec(tuning, b0=0.25)
    out_cfg = tmp_path / "cfg.json"
    out_flag = tmp_path / "flag.json"
    proc = run_cli(
        "simulate", "--spec", spec, "--config", tuning, "--seed", 4, "--output", out_cfg
    )
    assert proc.returncode == 0, proc.stderr
    # the lowered branch coefficient moves the big block onto the kernel rule
    assert json.loads(out_cfg.read_text())["per_block"][0]["branch"] == "geb"
    proc = run_cli(
        "simulate", "--spec", spec, "--config", tuning, "--b0", 2, "--seed", 4,
        "--output", out_flag,
    )
    assert proc.returncode == 0, proc.stderr
    # an explicit flag wins over the config file
    assert json.loads(out_flag.read_text())["per_block"][0]["branch"] == "threshold"


def test_simulate_bare_stdout_is_pure_json(tmp_path):
    spec = tmp_path / "exp.cfg"
    write_spec(spec, estimator="mle", truth="zero:3", epsilon="0.5", replicates=3, seed=9)
    proc = run_cli("simulate", "--spec", spec)
    assert proc.returncode == 0, proc.stderr
    payload = json.loads(proc.stdout)  # the summary line must not share stdout
    assert payload["replicates"] == 3
    assert proc.stderr.startswith("total_mse = ")


def test_denoise_config_rejects_unknown_key(tmp_path):
    cfg = tmp_path / "tuning.cfg"
    write_spec(cfg, wavelet="haar", bananas=1)
    src = tmp_path / "flat.csv"
    write_signal_csv(src, np.full(64, 1.0))
    proc = run_cli(
        "denoise", "--input", src, "--output", tmp_path / "o.csv", "--config", cfg
    )
    assert proc.returncode == 2
    assert "unknown keys: bananas" in proc.stderr


def test_simulate_jobs_do_not_change_results(tmp_path):
    spec = tmp_path / "exp.cfg"
    write_spec(
        spec,
        estimator="geb-hybrid",
        truth="gaussian:1.0:256",
        epsilon="1.0",
        replicates=6,
        seed=21,
        kde_mode="fourier",
    )
    outs = []
    for jobs in (1, 2):
        out = tmp_path / f"jobs{jobs}.json"
        proc = run_cli("simulate", "--spec", spec, "--jobs", jobs, "--output", out)
        assert proc.returncode == 0, proc.stderr
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_threads_env_var_is_jobs_fallback(tmp_path):
    spec = tmp_path / "exp.cfg"
    write_spec(
        spec,
        estimator="geb-hybrid",
        truth="gaussian:1.0:256",
        epsilon="1.0",
        replicates=6,
        seed=21,
        kde_mode="fourier",
    )
    out_flag = tmp_path / "flag.json"
    proc = run_cli("simulate", "--spec", spec, "--jobs", 2, "--output", out_flag)
    assert proc.returncode == 0, proc.stderr
    out_env = tmp_path / "env.json"
    proc = run_cli(
        "simulate", "--spec", spec, "--output", out_env,
        env_extra={"GEB_SHRINK_THREADS": "2"},
    )
    assert proc.returncode == 0, proc.stderr
    assert out_flag.read_bytes() == out_env.read_bytes()


def test_bad_env_thread_count(tmp_path):
    spec = tmp_path / "exp.cfg"
    write_spec(spec, estimator="mle", truth="zero:2", epsilon="0.5", replicates=2)
    proc = run_cli(
        "simulate", "--spec", spec, env_extra={"GEB_SHRINK_THREADS": "0"}
    )
    assert proc.returncode == 2
    assert proc.stderr.startswith("error:")


# --------------------------------------------------------------------- risk


def test_risk_rate_smoke():
    proc = run_cli(
        "risk",
        "--estimator", "mle",
        "--truth", "zero:3",
        "--epsilon", "0.5,0.25,0.125,0.0625",
        "--replicates", 5,
        "--seed", 1,
        "--rate",
    )
    assert proc.returncode == 0, proc.stderr
    first = proc.stdout.splitlines()[0]
    assert first.startswith("slope")
    slope = float(first.split("=")[1])
    assert abs(slope - 2.0) < 0.02


def test_risk_oracle_truth_rate_is_numeric_failure():
    proc = run_cli(
        "risk",
        "--estimator", "oracle-truth",
        "--truth", "zero:3",
        "--epsilon", "0.5,0.25,0.125,0.0625",
        "--replicates", 2,
        "--rate",
    )
    assert proc.returncode == 1
    assert proc.stderr.startswith("numeric failure:")


def test_risk_bad_truth_spec():
    proc = run_cli(
        "risk", "--estimator", "mle", "--truth", "bogus:1", "--epsilon", "0.5"
    )
    assert proc.returncode == 2
    assert "bad --truth" in proc.stderr


def test_risk_report_to_stdout():
    proc = run_cli(
        "risk",
        "--estimator", "james-stein",
        "--truth", "atoms:-2=0.5,2=0.5:64",
        "--epsilon", "1.0",
        "--replicates", 4,
        "--seed", 8,
    )
    assert proc.returncode == 0, proc.stderr
    payload = json.loads(proc.stdout)
    assert payload["estimator"] == "james-stein"
    assert payload["total_mse"] > 0.0
