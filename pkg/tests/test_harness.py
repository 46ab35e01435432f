import csv
import json
from dataclasses import replace

import numpy as np
import pytest

from unifloc import cli
from unifloc.geometry import SphericalLocation
from unifloc.harness import (
    CSV_COLUMNS,
    TIMING_COLUMNS,
    ExperimentConfig,
    Setup,
    emit_csv,
    load_config,
    quantization_error,
    read_csv,
    run_cputime_experiment,
    run_rmse_experiment,
    sample_location,
    trial_seed,
)

# a 4x4 array is near-field only within a few wavelengths
TINY_GRID = dict(range_min_wavelengths=1.0, range_step_wavelengths=1.0)
SMALL = ExperimentConfig(**TINY_GRID, rows=4, cols=4, snr_db=(0.0, 20.0), trials=3, K=3, sides=(3, 4),
                         cputime_runs=2, seed=7)


def _strip_timing(path):
    rows = read_csv(path)
    return [[r[c] for c in CSV_COLUMNS if c not in TIMING_COLUMNS] for r in rows]


def test_config_validation():
    for bad in [dict(trials=0), dict(snr_db=()), dict(variant="x"), dict(policy="x"),
                dict(scenario="x")]:
        with pytest.raises(ValueError):
            ExperimentConfig(**bad)


def test_load_config(tmp_path):
    path = tmp_path / "exp.ini"
    path.write_text("[experiment]\nrows = 5\ncols = 5\nK = 4\nsnr_db = [0, 10]\n"
                    "policy = random\nvariant = 'nf-only'\n")
    cfg = load_config(path)
    assert (cfg.rows, cfg.cols, cfg.K) == (5, 5, 4)
    assert cfg.snr_db == (0, 10)
    assert cfg.policy == "random" and cfg.variant == "nf-only"
    path.write_text("[experiment]\nbogus = 1\n")
    with pytest.raises(ValueError):
        load_config(path)
    path.write_text("[other]\nrows = 1\n")
    with pytest.raises(ValueError):
        load_config(path)


def test_trial_seed_deterministic():
    a = np.random.default_rng(trial_seed(3, 1, 2)).random(4)
    b = np.random.default_rng(trial_seed(3, 1, 2)).random(4)
    c = np.random.default_rng(trial_seed(3, 2, 1)).random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_quantization_error_oracle(rng):
    n = 10
    centres_t = (np.arange(n) + 0.5) * np.pi / n
    centres_p = -np.pi / 2 + (np.arange(n) + 0.5) * np.pi / n
    for _ in range(200):
        th, ph = rng.uniform(0, np.pi), rng.uniform(-np.pi / 2, np.pi / 2)
        et, ep = quantization_error(th, ph, n, n)
        assert et == pytest.approx(th - centres_t[np.argmin(np.abs(centres_t - th))])
        assert ep == pytest.approx(ph - centres_p[np.argmin(np.abs(centres_p - ph))])


def test_sample_location():
    setup = Setup.build(SMALL)
    rng = np.random.default_rng(0)
    from unifloc.channel import Region, classify_region
    for _ in range(20):
        p = sample_location(setup, SMALL, rng, "nf")
        assert classify_region(setup.geom, p) is Region.NEAR_FIELD
        q = sample_location(setup, SMALL, rng, "ff")
        assert q.R == pytest.approx(3 * setup.dictionary.ref_range)
    fixed = replace(SMALL, user_location=(0.1, 1.0, 0.2))
    assert sample_location(setup, fixed, rng) == SphericalLocation(0.1, 1.0, 0.2)


def test_emit_csv_empty_and_round_trip(tmp_path):
    path = tmp_path / "out.csv"
    emit_csv([], path)
    assert path.read_bytes() == (",".join(CSV_COLUMNS) + "\n").encode()
    row = {c: 0.1 + i / 3 for i, c in enumerate(CSV_COLUMNS)}
    row.update(experiment="rmse", variant="unified", policy="random", scenario="nf", trials=5,
               n_elements=100)
    emit_csv([row, row], path)
    raw = path.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    back = read_csv(path)
    assert len(back) == 2
    for c in CSV_COLUMNS:
        if isinstance(row[c], float):
            assert float(back[0][c]) == row[c]
        else:
            assert back[0][c] == str(row[c])


def test_rmse_on_grid_zero():
    cfg = ExperimentConfig(**TINY_GRID, rows=4, cols=4, snr_db=(200.0,), trials=1, K=3)
    setup = Setup.build(cfg)
    loc = tuple(setup.dictionary.nf_locations[7])
    rows = run_rmse_experiment(replace(cfg, user_location=loc), setup)
    assert rows[0]["rmse_angle"] == 0.0
    assert rows[0]["rmse_range"] == 0.0
    assert rows[0]["nf_ff_classification_accuracy"] == 1.0


def test_rmse_reproducible_and_parallel(tmp_path):
    a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
    emit_csv(run_rmse_experiment(SMALL), a)
    emit_csv(run_rmse_experiment(SMALL), b)
    emit_csv(run_rmse_experiment(replace(SMALL, threads=2)), c)
    assert _strip_timing(a) == _strip_timing(b) == _strip_timing(c)
    rows = read_csv(a)
    assert [float(r["snr_db"]) for r in rows] == [0.0, 20.0]
    for r in rows:
        assert float(r["rmse_angle"]) >= 0
        assert 0 <= float(r["nf_ff_classification_accuracy"]) <= 1


def test_trials_csv(tmp_path):
    path = tmp_path / "trials.csv"
    run_rmse_experiment(replace(SMALL, trials_out=str(path)))
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 * SMALL.trials
    assert float(rows[0]["true_R"]) > 0


def test_cputime_rows():
    rows = run_cputime_experiment(SMALL)
    assert [(r["n_elements"], r["variant"]) for r in rows] == [
        (9, "unified"), (9, "nf-only"), (16, "unified"), (16, "nf-only")]
    for r in rows:
        assert r["mean_cpu_seconds"] > 0 and r["std_cpu_seconds"] >= 0


def _write_cfg(tmp_path, extra=""):
    path = tmp_path / "cfg.ini"
    path.write_text("[experiment]\nrows = 4\ncols = 4\nsnr_db = (10,)\ntrials = 2\nK = 3\n"
                    "sides = (3,)\ncputime_runs = 2\nrange_min_wavelengths = 1.0\n"
                    "range_step_wavelengths = 1.0\n" + extra)
    return path


def test_cli_rmse(tmp_path):
    cfg = _write_cfg(tmp_path)
    out = tmp_path / "r.csv"
    assert cli.main(["rmse", "--config", str(cfg), "--seed", "3", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)


def test_cli_cputime(tmp_path):
    cfg = _write_cfg(tmp_path)
    out = tmp_path / "c.csv"
    assert cli.main(["cputime", "--config", str(cfg), "--out", str(out)]) == 0
    assert len(read_csv(out)) == 2


def test_cli_single_run(tmp_path):
    cfg = _write_cfg(tmp_path)
    out = tmp_path / "t.jsonl"
    assert cli.main(["single-run", "--config", str(cfg), "--seed", "1", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert json.loads(lines[0])["type"] == "header"
    assert len(lines) == 4
    again = tmp_path / "t2.jsonl"
    cli.main(["single-run", "--config", str(cfg), "--seed", "1", "--out", str(again)])
    assert again.read_bytes() == out.read_bytes()


def test_cli_errors(tmp_path, capsys):
    bad = _write_cfg(tmp_path, "nonsense = 1\n")
    assert cli.main(["rmse", "--config", str(bad)]) == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("unifloc: error:")
    assert cli.main(["rmse", "--config", str(tmp_path / "missing.ini")]) == 1
    with pytest.raises(SystemExit):
        cli.main(["nope"])
