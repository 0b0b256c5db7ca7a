import numpy as np
import pytest

from mvabo import __version__
from mvabo.cli import main
from mvabo.runner import (
    OUTPUT_ROOT_ENV,
    PLOT_COLUMNS,
    ConfigError,
    ExperimentConfig,
    RunError,
    aggregate,
    emit_plot_data,
    format_config,
    parse_config,
    parse_seeds,
    read_plot_data,
    read_summary,
    read_trace,
    run,
    write_summary,
)

SMALL = """
# a tiny multi-task run
benchmark = gp-sample
benchmark.n_x = 12
benchmark.n_w = 6
method = mt-mva-bo
budget = 5
seeds = 0,1,2
"""


def fake_trace(values, method="rs", benchmark="gp-sample", metric="regret"):
    return ({"method": method, "benchmark": benchmark, "metric": metric},
            {metric: np.asarray(values, dtype=float)})


class TestConfig:
    def test_parse_and_defaults(self):
        config = parse_config(SMALL)
        assert config.seeds == (0, 1, 2)
        assert dict(config.benchmark_params)["n_x"] == 12
        assert dict(config.benchmark_params)["n_anchor"] == 25
        assert config.scenario == "multi-task"
        assert config.refit_interval == 0
        assert parse_config("benchmark = bird\n").refit_interval == 10

    def test_header_materializes_everything(self):
        lines = format_config(parse_config(SMALL))
        keys = {line.split("=", 1)[0] for line in lines}
        assert {"alpha", "delta", "rkhs_bound", "noise_variance", "env_mode", "benchmark.lengthscale"} <= keys

    @pytest.mark.parametrize("text", [
        "colour = blue\n", "benchmark = moon\n", "method = magic\n", "budget = many\n",
        "no equals sign\n", "benchmark.wiggle = 3\n", "method = constrained-mva-bo\n", "seeds =\n",
    ])
    def test_errors(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)


class TestRun:
    def test_three_seeds(self, tmp_path):
        out = run(parse_config(SMALL), out=tmp_path, workers=1)
        traces = sorted(p.name for p in out.glob("trace_seed*.csv"))
        assert traces == ["trace_seed0.csv", "trace_seed1.csv", "trace_seed2.csv"]
        assert (out / "summary.txt").exists()
        header, columns = read_trace(out / "trace_seed1.csv")
        assert header["seed"] == "1" and len(columns["step"]) == 5
        assert np.all(columns["regret"] >= 0)

    def test_byte_identical(self, tmp_path):
        config = parse_config(SMALL.replace("mt-mva-bo", "mo-mva-bo") + "beta_fixed = 9\n")
        a = run(config, out=tmp_path / "a", workers=1)
        b = run(config, out=tmp_path / "b", workers=2)
        for name in ("trace_seed0.csv", "trace_seed1.csv", "trace_seed2.csv", "summary.txt"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_budget_zero(self, tmp_path):
        out = run(parse_config(SMALL.replace("budget = 5", "budget = 0")), out=tmp_path, workers=1)
        _, columns = read_trace(out / "trace_seed0.csv")
        assert len(columns["step"]) == 0
        header, rows = read_summary(out / "summary.txt")
        assert rows == [] and header["budget"] == "0"

    def test_seed_override_and_env_root(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path))
        out = run(parse_config(SMALL), seeds=[7], workers=1)
        assert out.parent == tmp_path
        assert [p.name for p in out.glob("trace_*.csv")] == ["trace_seed7.csv"]
        header, _ = read_summary(out / "summary.txt")
        assert header["seeds"] == "7"

    def test_seed_failure(self, tmp_path, monkeypatch):
        import mvabo.runner as runner

        real = runner.run_scenario

        def flaky(config, bench, seed, truth=None):
            if seed == 1:
                raise FloatingPointError("synthetic failure")
            return real(config, bench, seed, truth)

        monkeypatch.setattr(runner, "run_scenario", flaky)
        with pytest.raises(RunError, match="seed 1"):
            run(parse_config(SMALL), out=tmp_path, workers=1)
        assert (tmp_path / "trace_seed0.csv").exists() and (tmp_path / "summary.txt").exists()


class TestAggregate:
    def test_single_trace_has_zero_band(self):
        rows = aggregate([fake_trace([0.5, 0.25])])
        assert all(r.lo == r.mean == r.hi for r in rows)

    def test_hand_formula(self):
        row = aggregate([fake_trace([0.0]), fake_trace([2.0])])[0]
        assert (row.mean, row.se, row.lo, row.hi, row.n) == (1.0, 1.0, -1.0, 3.0, 2)

    def test_permutation_invariant(self, rng):
        traces = [fake_trace(rng.normal(size=4)) for _ in range(5)]
        forward = aggregate(traces)
        backward = aggregate(traces[::-1])
        for a, b in zip(forward, backward):
            assert a.mean == pytest.approx(b.mean) and a.se == pytest.approx(b.se)

    def test_padding(self):
        rows = aggregate([fake_trace([3.0, 1.0]), fake_trace([2.0, 2.0, 0.0])])
        assert [r.padded for r in rows] == [0, 0, 1]
        assert rows[2].mean == pytest.approx(0.5)

    def test_groups(self):
        rows = aggregate([fake_trace([1.0], method="rs"), fake_trace([2.0], method="us")])
        assert [(r.method, r.mean) for r in rows] == [("rs", 1.0), ("us", 2.0)]


class TestPlotData:
    def test_empty_summary(self, tmp_path):
        write_summary(tmp_path / "s.txt", [])
        assert emit_plot_data(tmp_path / "s.txt", tmp_path / "p.csv") == 0
        assert (tmp_path / "p.csv").read_text() == ",".join(PLOT_COLUMNS) + "\n"

    def test_round_trip(self, tmp_path):
        rows = aggregate([fake_trace([0.1, 0.2, 0.3], method="rs"), fake_trace([1 / 3, 0.7], method="us")])
        write_summary(tmp_path / "s.txt", rows)
        assert emit_plot_data(tmp_path / "s.txt", tmp_path / "p.csv") == 2 + 3
        loaded = read_plot_data(tmp_path / "p.csv")
        for original, back in zip(rows, loaded):
            assert (back["method"], back["step"], back["mean"], back["lo"], back["hi"]) == (
                original.method, original.step, original.mean, original.lo, original.hi)


class TestCli:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["--version"])
        assert info.value.code == 0
        assert __version__ in capsys.readouterr().out

    def test_pipeline(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(SMALL)
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "out"), "--seeds", "0,1", "--workers", "1"]) == 0
        assert main(["aggregate", "--in", str(tmp_path / "out"), "--out", str(tmp_path / "s.txt")]) == 0
        assert main(["emit-plot-data", "--in", str(tmp_path / "s.txt"), "--out", str(tmp_path / "p.csv")]) == 0
        assert len(read_plot_data(tmp_path / "p.csv")) == 5

    def test_config_error_exit_code(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("method = warp-drive\n")
        assert main(["run", "--config", str(cfg)]) == 2
        assert "unknown method" in capsys.readouterr().err

    def test_aggregate_missing(self, tmp_path):
        assert main(["aggregate", "--in", str(tmp_path), "--out", str(tmp_path / "s.txt")]) == 2


def test_experiment_config_requires_seeds():
    with pytest.raises(ConfigError):
        ExperimentConfig(seeds=())


class TestSeedLists:
    def test_ranges_and_singletons(self):
        assert parse_seeds("0,3,5-7") == (0, 3, 5, 6, 7)
        assert parse_seeds(" 2 , ") == (2,)

    def test_config_accepts_ranges(self):
        assert parse_config("seeds = 1-3\n").seeds == (1, 2, 3)

    @pytest.mark.parametrize("text", ["3-1", "a", "1-x"])
    def test_malformed(self, text):
        with pytest.raises(ValueError):
            parse_seeds(text)
