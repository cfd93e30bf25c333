import math

import pytest

from rsplit import ConfigError, SystemConfig
from rsplit.cli import main, parse_samples, read_config_file
from rsplit.experiment import CSV_COLUMNS, SweepSpec, build_tag, emit_csv, emit_plot, parse_snr_range, read_csv, run_sweep

HEADER = (
    "snr_db,scheme,estimator,csit,modulation,N,K,t,rate_common_min,rate_private_sum,"
    "sum_rate,ci_halfwidth,n_channel,n_noise,seed,build"
)


def _spec(**changes):
    base = dict(
        config=SystemConfig(N=3, K=2, M=4),
        snr_grid=[0.0, 10.0],
        schemes=["RS-ZF", "NoRS-ZF"],
        t_values=[0.5],
        n_channel=20,
        n_noise=4,
        master_seed=3,
    )
    base.update(changes)
    return SweepSpec(**base)


@pytest.mark.parametrize(
    "text, grid",
    [("0:30:10", [0.0, 10.0, 20.0, 30.0]), ("5", [5.0]), ("0,7.5", [0.0, 7.5]), ("-4:0:2", [-4.0, -2.0, 0.0])],
)
def test_parse_snr_range(text, grid):
    assert parse_snr_range(text) == grid


@pytest.mark.parametrize("text", ["10:0:2", "0:10:0", "a:b"])
def test_parse_snr_range_rejects(text):
    with pytest.raises(ConfigError):
        parse_snr_range(text)


def test_parse_samples():
    assert parse_samples("500:20") == (500, 20)
    with pytest.raises(ConfigError):
        parse_samples("500")


def test_header_matches_schema(tmp_path):
    path = emit_csv(run_sweep(_spec()), tmp_path / "r.csv")
    assert path.read_text().splitlines()[0] == HEADER
    assert ",".join(CSV_COLUMNS) == HEADER


def test_csv_round_trip(tmp_path):
    result = run_sweep(_spec(estimator="both"))
    path = emit_csv(result, tmp_path / "r.csv")
    parsed = read_csv(path)
    records = result.records()
    assert len(parsed) == len(records) == 2 * 2 * 2
    for a, b in zip(parsed, records):
        for key in CSV_COLUMNS:
            if isinstance(b[key], float) and math.isnan(b[key]):
                assert math.isnan(a[key])
            else:
                assert a[key] == b[key]


def test_rows_are_sorted_and_no_rs_uses_full_private_power():
    result = run_sweep(_spec(estimator="both"))
    keys = [(r["modulation"], r["scheme"], r["estimator"], r["snr_db"]) for r in result.records()]
    assert keys == sorted(keys)
    for r in result.records():
        if r["scheme"].startswith("NoRS"):
            assert r["t"] == 1.0 and r["rate_common_min"] == 0.0
        assert r["sum_rate"] == pytest.approx(r["rate_common_min"] + r["rate_private_sum"])


def test_analytic_rows_have_no_halfwidth():
    result = run_sweep(_spec(estimator="analytic"))
    assert all(math.isnan(r["ci_halfwidth"]) and r["n_channel"] == 0 for r in result.records())


@pytest.mark.parametrize(
    "changes",
    [dict(schemes=[]), dict(snr_grid=[]), dict(t_values=[1.5]), dict(schemes=["RS-MMSE"]), dict(estimator="exact")],
)
def test_invalid_spec_writes_nothing(changes, tmp_path):
    out = tmp_path / "out"
    with pytest.raises(ConfigError):
        run_sweep(_spec(output_path=str(out), **changes))
    assert not out.exists()


def test_validation_reports_all_problems():
    with pytest.raises(ConfigError) as err:
        _spec(schemes=[], snr_grid=[], t_mode="nope").validate()
    msg = str(err.value)
    assert "SNR grid is empty" in msg and "no schemes" in msg and "t-mode" in msg


@pytest.mark.parametrize("mode", ["golden", "grid", "rate-match", "min-power"])
def test_split_modes(mode):
    spec = _spec(t_mode=mode, estimator="analytic", snr_grid=[20.0], schemes=["RS-ZF"], grid_points=6, config=SystemConfig(N=3, K=2, M=2))
    (row,) = run_sweep(spec).records()
    assert 0.0 <= row["t"] <= 1.0


def test_plot_is_static_and_reproducible(tmp_path):
    result = run_sweep(_spec())
    a = emit_plot(result, tmp_path / "a.svg").read_bytes()
    b = emit_plot(result, tmp_path / "b.svg").read_bytes()
    assert a == b
    assert a.lstrip().startswith(b"<?xml") and b"<svg" in a


def test_empty_result_is_rejected(tmp_path):
    from rsplit.experiment import SweepResult

    with pytest.raises(ConfigError):
        emit_csv(SweepResult(), tmp_path / "x.csv")


def test_io_errors_carry_the_path(tmp_path):
    with pytest.raises(OSError, match="missing"):
        emit_csv(run_sweep(_spec()), tmp_path / "missing" / "r.csv")


def test_build_tag():
    assert build_tag().startswith("v0.1.0")


CONFIG_TEXT = """\
# two-user sweep
N = 3
K = 2
modulation = bpsk
distances = 1, 1
snr_db_min = 0
snr_db_max = 10
snr_db_step = 10
samples = 20:4
scheme = rs-zf, nors-zf
t_value = 0.5
seed = 4
"""


def test_config_file_parsing(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(CONFIG_TEXT)
    values = read_config_file(str(cfg))
    assert values["scheme"] == "rs-zf, nors-zf" and values["n"] == "3"
    cfg.write_text(CONFIG_TEXT + "colour = blue\n")
    with pytest.raises(ConfigError, match="colour"):
        read_config_file(str(cfg))


def test_cli_end_to_end(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(CONFIG_TEXT)
    out = tmp_path / "out"
    assert main(["--config", str(cfg), "--out", str(out)]) == 0
    rows = read_csv(out / "results.csv")
    assert {r["scheme"] for r in rows} == {"RS-ZF", "NoRS-ZF"}
    assert {r["modulation"] for r in rows} == {"bpsk"}
    assert all(r["seed"] == 4 and r["n_channel"] == 20 for r in rows)
    assert (out / "sum_rate.svg").exists()


def test_cli_flags_override_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(CONFIG_TEXT)
    out = tmp_path / "out"
    code = main(["--config", str(cfg), "--scheme", "rs-ci", "--modulation", "qpsk", "--snr-db", "5", "--seed", "9", "--out", str(out)])
    assert code == 0
    (row,) = read_csv(out / "results.csv")
    assert (row["scheme"], row["modulation"], row["snr_db"], row["seed"]) == ("RS-CI", "qpsk", 5.0, 9)


def test_cli_config_error_exit_code(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["--scheme", "foo", "--snr-db", "9:1:1", "--out", str(out)]) == 2
    err = capsys.readouterr().err
    assert "foo" in err and "SNR" in err
    assert not out.exists()


def test_cli_missing_config_file(tmp_path):
    assert main(["--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path / "o")]) == 2


def test_cli_resource_cap_exit_code(tmp_path):
    args = ["--N", "7", "--K", "6", "--modulation", "8psk", "--csit", "imperfect", "--scheme", "nors-zf"]
    assert main(args + ["--snr-db", "10", "--samples", "1:1", "--out", str(tmp_path / "o")]) == 4
