import math
import subprocess
import sys

import numpy as np
import pytest

from gaussfisher import cli, oracle
from gaussfisher.errors import ConfigError, NumericFailure, QuadratureError
from gaussfisher.scenarios import (COLUMNS, GAP_COLUMNS, Scenario, ScenarioConfig,
                                   build_config, format_value, read_csv, run_scenario,
                                   set_param, sweep)


def test_builtin_defaults():
    cfg = build_config("fig1b")
    assert cfg.params["omega"] == 2.1 and cfg.params["gamma"] == 0.05
    beta = cfg.params["beta_mod"] * np.exp(1j * cfg.params["beta_arg"])
    alpha = cfg.params["alpha_mod"] * np.exp(1j * cfg.params["alpha_arg"])
    assert beta == pytest.approx(-0.5j)
    assert alpha == pytest.approx(1j)
    opt = build_config("fig_optdyne").params
    assert opt["beta_mod"] * np.exp(1j * opt["beta_arg"]) == pytest.approx(0.3 - 0.5j)
    assert opt["n_th"] == 0.1
    fig4 = build_config("fig4").params
    assert (fig4["omega"], fig4["beta_mod"], fig4["alpha_mod"], fig4["temp_ratio"],
            fig4["gamma"], fig4["n_th"]) == (5.0, 0.2, 0.025, 4.0, 0.07, 0.4)
    assert build_config("fig3a").params["lambda_c"] == 2.0
    assert build_config("fig5_gap").sweep == ("beta_I", (0.0, 0.1, 0.2, 0.3, 0.4, 0.5))


def test_cartesian_entry():
    params = set_param({"beta_mod": 0.0, "beta_arg": 0.0}, "beta_im", -0.5)
    params = set_param(params, "beta_re", 0.3)
    assert params["beta_mod"] * np.exp(1j * params["beta_arg"]) == pytest.approx(0.3 - 0.5j)
    params = set_param(params, "beta_I", 0.2)
    assert params["beta_mod"] * np.exp(1j * params["beta_arg"]) == pytest.approx(-0.2j)


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nomega = 3.0\nbeta_re = 0.1  # inline\nt_steps = 11\n"
                    "sweep_field = n_th\nsweep_values = 0, 0.5\n", encoding="utf-8")
    cfg = build_config("custom", str(path), ["omega=4", "t_end=2"])
    assert cfg.params["omega"] == 4.0
    assert cfg.t_steps == 11 and cfg.t_end == 2.0
    assert cfg.sweep == ("n_th", (0.0, 0.5))
    beta = cfg.params["beta_mod"] * np.exp(1j * cfg.params["beta_arg"])
    assert beta == pytest.approx(0.1 - 0.5j)


@pytest.mark.parametrize("overrides,field", [
    (["bogus=1"], "bogus"),
    (["t_end=-1"], "t_end"),
    (["t_steps=1"], "t_steps"),
    (["t_steps=2.5"], "t_steps"),
    (["omega=abc"], "omega"),
    (["omega=-1"], "omega"),
    (["sweep_field=omega"], "sweep_values"),
    (["model=lattice"], "model"),
    (["exact_noise=maybe"], "exact_noise"),
    (["novalue"], "--set"),
])
def test_config_errors_name_the_field(overrides, field):
    with pytest.raises(ConfigError, match=field):
        run_scenario(build_config("custom", overrides=overrides))


def test_unknown_scenario():
    with pytest.raises(ConfigError, match="scenario"):
        build_config("fig9")


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="config"):
        build_config("custom", str(tmp_path / "absent.cfg"))


def test_fig1a_unsqueezed_curve_is_quadratic():
    table = run_scenario(build_config("fig1a", overrides=["t_steps=401"]))
    assert table.header == ("beta_mod",) + COLUMNS
    rows = np.array([[r[0], r[1], r[2]] for r in table.rows])
    assert set(rows[:, 0]) == {0.0, 0.5}
    flat = rows[rows[:, 0] == 0.0]
    np.testing.assert_allclose(flat[:, 2], 4 * flat[:, 1] ** 2, rtol=1e-9, atol=1e-12)


def test_fig2_rates_have_negative_excursions(tmp_path):
    out = tmp_path / "fig2.csv"
    run_scenario(build_config("fig2", overrides=["t_steps=501"], output_path=str(out)))
    table = read_csv(str(out))
    assert table.header == COLUMNS
    minus = np.array([float(r[COLUMNS.index("rate_minus")]) for r in table.rows])
    assert minus.min() < 0
    assert all(r[COLUMNS.index("qfi")] == "" for r in table.rows)


def test_output_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        run_scenario(build_config("fig6_qbm_dyne", overrides=["t_steps=41"],
                                  output_path=str(path)))
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes().startswith((",".join(COLUMNS) + "\r\n").encode())


def test_parallel_workers_do_not_change_output(tmp_path, monkeypatch):
    serial, parallel = tmp_path / "s.csv", tmp_path / "p.csv"
    cfg = dict(overrides=["t_steps=21"])
    run_scenario(build_config("fig3b", output_path=str(serial), **cfg))
    monkeypatch.setenv("GAUSSFISHER_MAX_WORKERS", "2")
    run_scenario(build_config("fig3b", output_path=str(parallel), **cfg))
    assert serial.read_bytes() == parallel.read_bytes()


def test_bad_worker_setting(monkeypatch):
    monkeypatch.setenv("GAUSSFISHER_MAX_WORKERS", "lots")
    with pytest.raises(ConfigError):
        run_scenario(build_config("fig3b", overrides=["t_steps=3"]))


def test_csv_number_format():
    x = 0.1 + 0.2
    assert float(format_value(x)) == x
    assert format_value(None) == "" and format_value(float("nan")) == ""
    assert format_value(True) == "true"
    assert format_value(float("inf")) == "inf"


def test_fisher_columns_non_negative():
    table = run_scenario(build_config("custom", overrides=["t_steps=101"]))
    for name in ("qfi", "cfi_homodyne_q", "cfi_homodyne_p", "cfi_heterodyne", "cfi_optimal"):
        k = table.header.index(name)
        assert min(r[k] for r in table.rows) >= 0


def test_custom_bath_model_populates_everything():
    table = run_scenario(build_config("custom", overrides=[
        "model=qbm", "omega=7", "xi=0.3", "lambda_c=1", "temp_ratio=1000", "alpha_mod=0.1",
        "t_steps=11"]))
    assert all(v is not None for v in table.rows[-1])


def test_singleton_sweep_matches_plain_run():
    base = build_config("custom", overrides=["t_steps=51"])
    plain = run_scenario(base)
    swept = run_scenario(build_config("custom", overrides=[
        "t_steps=51", "sweep_field=n_th", f"sweep_values={base.params['n_th']}"]))
    assert swept.header == ("n_th",) + plain.header
    assert [r[1:] for r in swept.rows] == plain.rows


def test_thermal_sweep_lowers_qfi():
    cfg = build_config("custom", overrides=["beta_mod=0", "t_steps=201", "t_end=60",
                                            "sweep_field=n_th", "sweep_values=0,0.5,1"])
    table = sweep(cfg)
    k = table.header.index("qfi")
    curves = np.array([r[k] for r in table.rows]).reshape(3, -1)
    assert np.all(np.diff(curves, axis=0) <= 1e-12)


def test_gap_sweep_schema():
    table = run_scenario(build_config("fig5_gap", overrides=[
        "t_steps=4001", "sweep_values=0,0.5"]))
    assert table.header == GAP_COLUMNS
    assert [r[0] for r in table.rows] == [0.0, 0.5]
    for _, qmax, cmax, gap in table.rows:
        assert 0 <= cmax <= qmax and gap == pytest.approx((qmax - cmax) / qmax)


def test_gap_scenario_needs_beta_sweep():
    with pytest.raises(ConfigError, match="sweep_field"):
        run_scenario(build_config("fig5_gap", overrides=["sweep_field=omega",
                                                          "sweep_values=2"]))


def test_config_validation_direct():
    with pytest.raises(ConfigError, match="t_start"):
        ScenarioConfig(Scenario.CUSTOM, t_start=-1.0)
    with pytest.raises(ConfigError, match="sweep_values"):
        ScenarioConfig(Scenario.CUSTOM, sweep=("omega", (1.0, math.inf)))


def test_cli_run_and_config_exit_codes(tmp_path, capsys):
    out = tmp_path / "o.csv"
    assert cli.main(["run", "--scenario", "fig2", "--set", "t_steps=11", "--out", str(out)]) == 0
    assert out.exists()
    assert cli.main(["run", "--scenario", "nope", "--out", str(out)]) == 1
    assert cli.main(["run", "--scenario", "fig2", "--set", "t_end=0", "--out", str(out)]) == 1
    assert "t_end" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", "--scenario", "fig2"])
    assert exc.value.code == 1


def test_cli_numeric_failure(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise QuadratureError("did not converge")
    monkeypatch.setattr("gaussfisher.scenarios.moments_on_grid", boom)
    code = cli.main(["run", "--scenario", "custom", "--out", str(tmp_path / "x.csv")])
    assert code == 2
    with pytest.raises(NumericFailure, match="custom"):
        run_scenario(build_config("custom"))


def test_cli_verification_failure(tmp_path, monkeypatch):
    bad = oracle.OracleReport("broken", 1.0, 2.0, 1.0, 1e-6, False)
    monkeypatch.setattr(oracle, "run_verification", lambda: [bad])
    out = tmp_path / "v.csv"
    assert cli.main(["verify", "--out", str(out)]) == 3
    table = read_csv(str(out))
    assert table.header == ("quantity", "analytic", "oracle", "rel_error", "tolerance", "pass")
    assert table.rows == [["broken", "1", "2", "1", "9.9999999999999995e-07", "false"]]


def test_console_entry_point(tmp_path):
    out = tmp_path / "o.csv"
    proc = subprocess.run([sys.executable, "-m", "gaussfisher.cli", "run", "--scenario", "fig2",
                           "--set", "t_steps=5", "--out", str(out)], capture_output=True)
    assert proc.returncode == 0
    assert out.read_text().count("\n") == 6
