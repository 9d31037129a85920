import os
import shutil
import subprocess
import sys

import numpy as np
import pytest

from lowrank.cli import FIT_COLUMNS, csv_text, main, read_csv
from lowrank.experiment import (
    SUMMARY_COLUMNS,
    TRAJ_COLUMNS,
    ConfigError,
    config_fields,
    parse_config_text,
    parse_seeds,
)

SMALL = """\
# small noiseless symmetric run
model = sym-quadratic
n = 20
r = 2
kappa = 2
sigma_min = 1.0
phi = 0.05
max_iter = 400
seeds = 0..1
"""


def _write(tmp_path, text, name="cfg.txt"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _read_dir(d):
    return {f: open(os.path.join(d, f), "rb").read() for f in sorted(os.listdir(d))}


def test_parse_seeds_forms():
    assert parse_seeds("3") == (3,)
    assert parse_seeds("0..3") == (0, 1, 2, 3)
    assert parse_seeds("1, 4,7") == (1, 4, 7)
    for bad in ("x", "3..1", "", "-1"):
        with pytest.raises(ConfigError):
            parse_seeds(bad)


def test_parse_config_text_defaults_and_errors():
    cfg = parse_config_text(SMALL)
    assert cfg.n == 20 and cfg.seeds == (0, 1) and cfg.curvature_mode == "declared"
    assert parse_config_text("model = bernoulli\nn = 10").curvature_mode == "estimated"
    cases = {
        "n = ten": "n",
        "model = tensor": "model",
        "colour = red": "colour",
        "n = 5\nn = 6": "n",
        "r = 9\nn = 5": "r",
        "init = spectral": "init",
        "kappa = 2\nr = 1": "kappa",
        "just words": "just",
    }
    for text, field in cases.items():
        with pytest.raises(ConfigError) as info:
            parse_config_text(text)
        assert info.value.field == field
    assert "seeds" in config_fields() and "output_dir" in config_fields()


def test_run_writes_schema_and_meets_rate(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", _write(tmp_path, SMALL), "--out", str(out)]) == 0
    files = sorted(os.listdir(out))
    assert files == ["summary.csv", "traj_0.csv", "traj_1.csv"]
    header, rows = read_csv(out / "traj_0.csv")
    assert tuple(header) == TRAJ_COLUMNS and len(rows) == 401
    assert [r["iter"] for r in rows] == list(range(401))
    header, summary = read_csv(out / "summary.csv")
    assert tuple(header) == SUMMARY_COLUMNS and [r["seed"] for r in summary] == [0, 1]
    for row in summary:
        assert row["rho_hat"] <= row["theorem_rho"] + 0.02


def test_csv_round_trip_is_lossless(tmp_path):
    out = tmp_path / "out"
    main(["run", "--config", _write(tmp_path, SMALL), "--out", str(out), "--seeds", "0"])
    for name in ("traj_0.csv", "summary.csv"):
        text = (out / name).read_text()
        header, rows = read_csv(out / name)
        assert csv_text(header, rows) == text


def test_run_is_byte_deterministic_and_pool_independent(tmp_path, monkeypatch):
    cfg = _write(tmp_path, SMALL)
    main(["run", "--config", cfg, "--out", str(tmp_path / "a")])
    monkeypatch.setenv("LOWRANK_THREADS", "2")
    main(["run", "--config", cfg, "--out", str(tmp_path / "b")])
    assert _read_dir(tmp_path / "a") == _read_dir(tmp_path / "b")


def test_bad_thread_env_is_config_error(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("LOWRANK_THREADS", "many")
    assert main(["run", "--config", _write(tmp_path, SMALL), "--out", str(tmp_path / "o")]) == 2
    assert "LOWRANK_THREADS" in capsys.readouterr().err


def test_malformed_config_exit_2_names_field(tmp_path, capsys):
    code = main(["run", "--config", _write(tmp_path, "model = sym-quadratic\nphi = lots\n")])
    err = capsys.readouterr().err
    assert code == 2 and "phi" in err and err.count("\n") == 1
    assert main(["run", "--config", str(tmp_path / "missing.txt")]) == 2


def test_divergent_step_exit_1(tmp_path, capsys):
    cfg = SMALL.replace("max_iter = 400", "max_iter = 300\neta = 1000")
    assert main(["run", "--config", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 1
    assert "NonFiniteUpdate" in capsys.readouterr().err


def test_fit_subcommand_matches_summary(tmp_path):
    out = tmp_path / "out"
    main(["run", "--config", _write(tmp_path, SMALL), "--out", str(out)])
    assert main(["fit", "--in", str(out)]) == 0
    header, fits = read_csv(out / "fit.csv")
    assert tuple(header) == FIT_COLUMNS
    _, summary = read_csv(out / "summary.csv")
    for f, s in zip(fits, summary):
        assert f["seed"] == s["seed"] and f["rho_hat"] == s["rho_hat"] and f["floor"] == s["floor"]
    assert main(["fit", "--in", str(tmp_path)]) == 1


def test_diagnose_reports_curvature(tmp_path, capsys):
    cfg = "model = sym-quadratic\nn = 12\nr = 2\nnoise = 0.01\n"
    assert main(["diagnose", "--config", _write(tmp_path, cfg)]) == 0
    lines = dict(line.split(" = ", 1) for line in capsys.readouterr().out.strip().splitlines())
    assert float(lines["augmented_lambda_min_at_truth"]) >= float(lines["curvature_lower_bound_at_truth"]) - 1e-6
    assert float(lines["delta2"]) > 0 and "theorem_rho" in lines


@pytest.mark.parametrize(
    "body",
    [
        "model = asym-quadratic\nn = 12\nq = 10\nr = 2\nmax_iter = 30\n",
        "model = sensing\nn = 6\nq = 5\nr = 1\nm = 200\nmax_iter = 30\n",
        "model = sensing\nn = 6\nq = 5\nr = 1\nm = 200\ninit = spectral\nmax_iter = 30\n",
        "model = bernoulli\nn = 20\nq = 15\nr = 1\nsigma_min = 0.5\nmax_iter = 30\n",
    ],
)
def test_run_other_models(tmp_path, body):
    out = tmp_path / "out"
    assert main(["run", "--config", _write(tmp_path, body), "--out", str(out)]) == 0
    _, rows = read_csv(out / "traj_0.csv")
    assert len(rows) == 31 and np.isfinite(rows[-1]["dist2"])


def test_bernoulli_external_data(tmp_path):
    rng = np.random.default_rng(0)
    Y = (rng.random((15, 12)) < 0.4).astype(int)
    data = tmp_path / "y.csv"
    data.write_text("15,12\n" + "\n".join(",".join(map(str, row)) for row in Y) + "\n")
    body = f"model = bernoulli\nn = 15\nq = 12\nr = 1\ninit = spectral\nmax_iter = 10\ndata_file = {data}\n"
    out = tmp_path / "out"
    assert main(["run", "--config", _write(tmp_path, body), "--out", str(out)]) == 0
    _, rows = read_csv(out / "traj_0.csv")
    assert np.all(np.isnan([r["dist2"] for r in rows])) and np.isfinite(rows[-1]["loss"])


@pytest.mark.skipif(shutil.which("lowrank") is None, reason="console script not installed")
def test_console_script_entry_point(tmp_path):
    res = subprocess.run(["lowrank", "run", "--config", _write(tmp_path, "n = five\n")], capture_output=True, text=True)
    assert res.returncode == 2 and "'n'" in res.stderr


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "lowrank.cli", "fit", "--in", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 1 and res.stderr.startswith("lowrank:")
