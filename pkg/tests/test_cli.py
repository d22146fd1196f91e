import csv
import json

import numpy as np
import pytest

from sgito import DailySeries
from sgito.cli import EXIT_INVALID, EXIT_NUMERIC, EXIT_OK, main
from sgito.io import read_config, read_daily, read_ticks, write_daily, write_ticks
from sgito.realized import build_daily_series
from sgito.simulate import SimConfig, simulate_path
from sgito.core import THETA_NULL


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--n-days", "10", "--m-obs", "390", "--seed", "7", "--out", str(out)]) == EXIT_OK
    return out


def test_simulate_writes_files_and_manifest(sim_dir):
    names = {p.name for p in sim_dir.iterdir()}
    assert {"daily_r0000.csv", "ticks_r0000.csv", "truth_r0000.csv", "manifest.json"} <= names
    manifest = json.loads((sim_dir / "manifest.json").read_text())
    assert manifest["options"]["seed"] == 7
    assert manifest["theta"]["gamma1"] == 0.2
    header = (sim_dir / "ticks_r0000.csv").read_text().splitlines()[0]
    assert header == "day_index,t_frac,log_price"
    assert (sim_dir / "daily_r0000.csv").read_text().splitlines()[0] == "day_index,rv,ret,state,m_n,k,floored"


def test_simulate_rerun_is_bit_identical(sim_dir, tmp_path):
    manifest = json.loads((sim_dir / "manifest.json").read_text())
    opts = manifest["options"]
    argv = ["simulate", "--n-days", str(opts["n_days"]), "--m-obs", str(opts["m_obs"]), "--seed", str(opts["seed"])]
    assert main(argv + ["--out", str(tmp_path)]) == EXIT_OK
    for name in ("daily_r0000.csv", "ticks_r0000.csv"):
        assert (tmp_path / name).read_bytes() == (sim_dir / name).read_bytes()


def test_simulate_rejects_invalid_theta(tmp_path, capsys):
    code = main(["simulate", "--theta", "0.1,0.1,1.5,0.2,0.1,0.1", "--out", str(tmp_path)])
    assert code == EXIT_INVALID
    assert "gamma1" in capsys.readouterr().err


def test_tick_round_trip(sim_dir, tmp_path):
    ticks = read_ticks(sim_dir / "ticks_r0000.csv")
    write_ticks(tmp_path / "t.csv", ticks)
    again = read_ticks(tmp_path / "t.csv")
    for a, b in zip(ticks.prices, again.prices):
        np.testing.assert_array_equal(a, b)


def test_rv_command_matches_library(sim_dir, tmp_path):
    assert main(["rv", "--ticks", str(sim_dir / "ticks_r0000.csv"), "--out", str(tmp_path)]) == EXIT_OK
    lib = build_daily_series(read_ticks(sim_dir / "ticks_r0000.csv"))
    write_daily(tmp_path / "lib.csv", lib)
    assert (tmp_path / "daily.csv").read_bytes() == (tmp_path / "lib.csv").read_bytes()


def test_rv_constant_prices(tmp_path):
    lines = ["day_index,t_frac,log_price"]
    for day in (1, 2, 3):
        for t in np.linspace(0, 1, 21):
            lines.append(f"{day},{float(t)!r},4.5")
    (tmp_path / "flat.csv").write_text("\n".join(lines) + "\n")
    assert main(["rv", "--ticks", str(tmp_path / "flat.csv"), "--out", str(tmp_path)]) == EXIT_OK
    assert [float(r["rv"]) for r in _rows(tmp_path / "daily.csv")] == [0.0, 0.0]


def test_rv_early_close_recomputes_k(tmp_path):
    lines = ["day_index,t_frac,log_price"]
    rng = np.random.default_rng(0)
    for day, m in ((1, 100), (2, 100), (3, 36)):
        for t in np.linspace(0, 1, m + 1):
            lines.append(f"{day},{float(t)!r},{rng.normal():.6f}")
    (tmp_path / "ticks.csv").write_text("\n".join(lines) + "\n")
    assert main(["rv", "--ticks", str(tmp_path / "ticks.csv"), "--out", str(tmp_path)]) == EXIT_OK
    rows = _rows(tmp_path / "daily.csv")
    assert [(int(r["m_n"]), int(r["k"])) for r in rows] == [(100, 10), (36, 6)]


def test_malformed_tick_csv(tmp_path):
    (tmp_path / "bad.csv").write_text("day_index,t_frac,log_price\n1,0.0,1.0\n1,0.5,abc\n1,1.0,1.0\n")
    assert main(["rv", "--ticks", str(tmp_path / "bad.csv"), "--out", str(tmp_path)]) == EXIT_INVALID
    (tmp_path / "bad2.csv").write_text("day,time,price\n1,0,1\n")
    assert main(["rv", "--ticks", str(tmp_path / "bad2.csv"), "--out", str(tmp_path)]) == EXIT_INVALID


@pytest.fixture(scope="module")
def fit_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("fit")
    daily = simulate_path(SimConfig(THETA_NULL, 300, 390, seed=3), keep_ticks=False).daily()
    write_daily(out / "daily.csv", daily)
    assert main(["fit", "--daily", str(out / "daily.csv"), "--out", str(out)]) == EXIT_OK
    return out


def test_fit_outputs(fit_dir):
    rows = _rows(fit_dir / "fit.csv")
    assert [r["param"] for r in rows] == ["omega1", "omega2", "gamma1", "gamma2", "beta1", "beta2"]
    assert list(rows[0]) == ["param", "estimate", "std_error"]
    branches = _rows(fit_dir / "integrated.csv")
    assert [b["branch"] for b in branches] == ["11", "12", "21", "22"]
    assert float(branches[0]["gamma_h"]) == pytest.approx(float(rows[2]["estimate"]), rel=1e-9)
    art = json.loads((fit_dir / "fit.json").read_text())
    assert np.array(art["W_hat"]).shape == (6, 6)


def test_fit_low_frequency_mode(fit_dir, tmp_path):
    code = main(["fit", "--daily", str(fit_dir / "daily.csv"), "--mode", "low_frequency", "--out", str(tmp_path)])
    assert code == EXIT_OK
    assert json.loads((tmp_path / "fit.json").read_text())["mode"] == "low_frequency"


def test_fit_warns_on_homogeneous_states(fit_dir, tmp_path):
    daily = read_daily(fit_dir / "daily.csv")
    write_daily(tmp_path / "one.csv", daily.with_state(np.zeros(len(daily), dtype=int)))
    assert main(["fit", "--daily", str(tmp_path / "one.csv"), "--out", str(tmp_path), "--multistart", "1"]) == EXIT_OK
    assert "omega2" in json.loads((tmp_path / "fit.json").read_text())["unidentified"]
    # the Wald test on that fit cannot invert W
    assert main(["test", "--fit", str(tmp_path / "fit.json"), "--out", str(tmp_path)]) == EXIT_NUMERIC


def test_wald_command(fit_dir, tmp_path):
    assert main(["test", "--fit", str(fit_dir / "fit.json"), "--out", str(tmp_path)]) == EXIT_OK
    (row,) = _rows(tmp_path / "wald.csv")
    assert list(row) == ["statistic", "dof", "p_value", "reject_0.1", "reject_0.05", "reject_0.025", "reject_0.01"]
    assert row["dof"] == "3"
    # a custom single restriction from file
    (tmp_path / "R.csv").write_text("# gamma1 = gamma2\n0,0,1,-1,0,0,0\n")
    assert main(["test", "--fit", str(fit_dir / "fit.json"), "--restriction", str(tmp_path / "R.csv"), "--out", str(tmp_path)]) == EXIT_OK
    assert _rows(tmp_path / "wald.csv")[0]["dof"] == "1"


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# desk run\nn-days = 6\nm_obs = 40\nseed = 11\nno_ticks = true\n")
    assert read_config(cfg)["n_days"] == "6"
    assert main(["simulate", "--config", str(cfg), "--seed", "12", "--out", str(tmp_path)]) == EXIT_OK
    opts = json.loads((tmp_path / "manifest.json").read_text())["options"]
    assert (opts["n_days"], opts["m_obs"], opts["seed"], opts["no_ticks"]) == (6, 40, 12, True)
    assert not (tmp_path / "ticks_r0000.csv").exists()


def test_config_rejects_unknown_key(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_INVALID


def test_states_golden(fixtures_dir, tmp_path):
    assert main(["states", "--market", str(fixtures_dir / "market_60.csv"), "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "states.csv").read_text() == (fixtures_dir / "golden_states.csv").read_text()


def test_backtest_command(tmp_path):
    daily = simulate_path(SimConfig(THETA_NULL, 140, 78, seed=8), keep_ticks=False).daily()
    write_daily(tmp_path / "d.csv", daily)
    argv = ["backtest", "--daily", str(tmp_path / "d.csv"), "--est-window", "100", "--refit-every", "20", "--out", str(tmp_path)]
    assert main(argv) == EXIT_OK
    scores = _rows(tmp_path / "scores.csv")
    assert [s["model"] for s in scores] == ["sgito", "garch", "rs_garch", "garch_ito", "har"]
    assert list(scores[0]) == ["model", "mspe", "mape", "mape_excluded", "n_pred"]
    assert all(int(s["n_pred"]) == 40 for s in scores)
    assert _rows(tmp_path / "forecasts.csv")[0].keys() >= {"day_index", "rv", "sgito"}


def test_backtest_perfect_forecast_scores_zero():
    from sgito.benchmarks import mape, mspe

    rv = np.array([0.2, 0.3, 0.25])
    assert mape(rv, rv) == 0.0 and mspe(rv, rv) == 0.0


def test_mc_study_smoke(tmp_path):
    argv = ["mc-study", "--grid", "60x78", "--replicates", "1", "--out", str(tmp_path)]
    assert main(argv) == EXIT_OK
    names = {p.name for p in tmp_path.iterdir()}
    assert {"rejection.csv", "mse.csv", "replicates.csv", "qq_60_78.csv", "manifest.json"} <= names
    rej = _rows(tmp_path / "rejection.csv")
    assert list(rej[0]) == ["hypothesis", "N", "M", "n_ok", "n_failed", "alpha_0.1", "alpha_0.05", "alpha_0.025", "alpha_0.01"]


def test_plot_flag_renders_figures(tmp_path):
    pytest.importorskip("matplotlib")
    argv = ["mc-study", "--grid", "60x78", "--replicates", "2", "--hypotheses", "null", "--out", str(tmp_path), "--plot"]
    assert main(argv) == EXIT_OK
    assert (tmp_path / "qq.png").stat().st_size > 0
    assert (tmp_path / "mse.png").stat().st_size > 0


def test_missing_required_option(tmp_path, capsys):
    assert main(["fit", "--out", str(tmp_path)]) == EXIT_INVALID
    assert "--daily" in capsys.readouterr().err


def test_daily_csv_round_trip(tmp_path):
    d = DailySeries(np.array([0.1, 0.2]), np.array([0.01, -0.02]), np.array([0, 1]))
    write_daily(tmp_path / "d.csv", d)
    back = read_daily(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.rv, d.rv)
    np.testing.assert_array_equal(back.state, d.state)
