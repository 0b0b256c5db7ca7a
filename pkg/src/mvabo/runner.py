"""Experiment configuration, seeded fan-out, trace files and aggregation.

File formats
------------
Config (``*.cfg``): UTF-8 text, one ``key = value`` per line, ``#`` starts a
comment. Benchmark parameters use a ``benchmark.`` prefix, for example
``benchmark.n_x = 30``. Pairs and lists are comma-separated. Unknown keys are
errors.

Trace (``trace_seed<k>.csv``): ``#``-prefixed header lines holding
``key=value`` pairs (the resolved config, the seed, and for Pareto runs the
hypervolume reference), then a CSV table with columns :data:`TRACE_COLUMNS`.
Floats are written with ``repr`` so they round-trip exactly; missing metrics
are ``nan`` and integer fields use ``-1``. Wall-clock time per step goes to a
separate ``timing_seed<k>.csv`` so trace files stay byte-identical across runs.

Summary: ``#``-prefixed header lines, then a CSV table with columns
:data:`SUMMARY_COLUMNS`. ``padded`` counts traces that had already stopped at
that step and contribute their last value.
"""

from __future__ import annotations

import csv
import dataclasses
import inspect
import io
import math
import os
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .benchmarks import BENCHMARKS, make_benchmark
from .metrics import ground_truth
from .scenarios import METHODS, ScenarioConfig, run_scenario

__all__ = [
    "ConfigError",
    "RunError",
    "ExperimentConfig",
    "parse_config",
    "parse_seeds",
    "load_config",
    "format_config",
    "run",
    "run_seed",
    "write_trace",
    "read_trace",
    "aggregate",
    "aggregate_dir",
    "write_summary",
    "read_summary",
    "emit_plot_data",
    "read_plot_data",
    "TRACE_COLUMNS",
    "SUMMARY_COLUMNS",
    "PLOT_COLUMNS",
    "OUTPUT_ROOT_ENV",
]

OUTPUT_ROOT_ENV = "MVABO_OUTPUT_ROOT"
TRACE_COLUMNS = (
    "step", "x_index", "w_index", "y", "recommendation", "regret", "hv_gap",
    "n_pareto", "n_potential", "n_uncertain", "terminated",
)
SUMMARY_COLUMNS = ("method", "benchmark", "metric", "step", "mean", "se", "lo", "hi", "n", "padded")
PLOT_COLUMNS = ("method", "benchmark", "step", "mean", "lo", "hi")


# Kernel hyperparameters are refit every 10 steps on the named test
# functions and kept at their true values on GP sample paths.
REFIT_PRESETS = {"gp-sample": 0, "bird": 10, "rosenbrock": 10, "newsvendor": 10}


class ConfigError(ValueError):
    pass


def _materialize(benchmark, params):
    """Benchmark parameters with every factory default filled in, sorted by name."""
    signature = inspect.signature(BENCHMARKS[benchmark])
    given = dict(params)
    unknown = set(given) - set(signature.parameters)
    if unknown:
        raise ConfigError(f"unknown {benchmark} parameter(s): {sorted(unknown)}")
    for name, param in signature.parameters.items():
        if name == "seed" and benchmark == "gp-sample":
            continue
        if name not in given and param.default is not inspect.Parameter.empty:
            given[name] = param.default
    return tuple(sorted(given.items()))


class RunError(RuntimeError):
    def __init__(self, failures):
        self.failures = failures
        lines = "; ".join(f"seed {seed}: {msg}" for seed, msg in failures)
        super().__init__(f"{len(failures)} seed(s) failed: {lines}")


@dataclass(frozen=True)
class ExperimentConfig:
    benchmark: str = "gp-sample"
    benchmark_params: tuple = ()
    method: str = "mt-mva-bo"
    scenario: str = ""
    alpha: float = 0.5
    epsilon1: float = 0.1
    epsilon2: float = 0.1
    h: Optional[float] = None
    delta: float = 0.1
    rkhs_bound: float = 2.0
    delta_divisor: int = 3
    beta_fixed: Optional[float] = None
    noise_variance: float = 1e-4
    budget: int = 100
    env_mode: str = "sampled-known-p"
    input_mode: str = ""
    recommendation_rule: str = "per-step-bounds"
    refit_interval: Optional[int] = None
    strict: str = "all"
    reference_point: Optional[tuple] = None
    seeds: tuple = (0,)
    output_dir: str = ""

    def __post_init__(self):
        if self.benchmark not in BENCHMARKS:
            raise ConfigError(f"unknown benchmark {self.benchmark!r}; choose from {sorted(BENCHMARKS)}")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {list(METHODS)}")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        try:
            resolved = self.scenario_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        object.__setattr__(self, "scenario", resolved.scenario)
        if not self.input_mode:
            object.__setattr__(self, "input_mode", "joint")
        if self.refit_interval is None:
            object.__setattr__(self, "refit_interval", REFIT_PRESETS[self.benchmark])
        object.__setattr__(self, "benchmark_params", _materialize(self.benchmark, self.benchmark_params))

    def scenario_config(self) -> ScenarioConfig:
        return ScenarioConfig(
            method=self.method, scenario=self.scenario or None, alpha=self.alpha,
            epsilon=(self.epsilon1, self.epsilon2), h=self.h, delta=self.delta,
            rkhs_bound=self.rkhs_bound, delta_divisor=self.delta_divisor,
            beta_fixed=self.beta_fixed, noise_variance=self.noise_variance,
            budget=self.budget, env_mode=self.env_mode,
            recommendation_rule=self.recommendation_rule,
            refit_interval=self.refit_interval, input_mode=self.input_mode or None,
            strict=self.strict,
        )

    def benchmark_kwargs(self, seed):
        params = dict(self.benchmark_params)
        if self.benchmark == "gp-sample":
            params.setdefault("seed", seed)
        return params


# -- config text ------------------------------------------------------------

_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_INTS = {"delta_divisor", "budget", "refit_interval"}
_FLOATS = {"alpha", "epsilon1", "epsilon2", "h", "delta", "rkhs_bound", "beta_fixed", "noise_variance"}
_OPTIONAL = {"h", "beta_fixed", "refit_interval", "reference_point"}


def _scalar(text):
    text = text.strip()
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def parse_seeds(text: str) -> tuple:
    """Parse a seed list such as ``"0,3,5-9"`` into a tuple of ints.

    Raises ``ValueError`` on malformed items or a descending range.
    """
    seeds = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        lo, sep, hi = item.partition("-")
        if sep and lo:
            start, stop = int(lo), int(hi)
            if stop < start:
                raise ValueError(f"descending seed range {item!r}")
            seeds.extend(range(start, stop + 1))
        else:
            seeds.append(int(item))
    return tuple(seeds)


def _parse_value(key, text):
    text = text.strip()
    if key in _OPTIONAL and text.lower() in ("", "none"):
        return None
    try:
        if key in _INTS:
            return int(text)
        if key in _FLOATS:
            return float(text)
        if key == "seeds":
            return parse_seeds(text)
        if key == "reference_point":
            return tuple(float(s) for s in text.split(","))
    except ValueError:
        raise ConfigError(f"bad value for {key}: {text!r}") from None
    return text


def parse_config(text: str) -> ExperimentConfig:
    values, params = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key.startswith("benchmark."):
            name = key.split(".", 1)[1]
            parts = [_scalar(v) for v in value.split(",")]
            params[name] = parts[0] if len(parts) == 1 else tuple(parts)
        elif key in _FIELDS and key != "benchmark_params":
            values[key] = _parse_value(key, value)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    values["benchmark_params"] = tuple(sorted(params.items()))
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _format_value(value):
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_config(config: ExperimentConfig) -> list:
    """``key=value`` lines for every field, defaults included, in a fixed order."""
    lines = []
    for name, value in asdict(config).items():
        if name == "benchmark_params":
            lines.extend(f"benchmark.{k}={_format_value(v)}" for k, v in config.benchmark_params)
        elif name != "output_dir":
            lines.append(f"{name}={_format_value(value)}")
    return lines


# -- single seed ------------------------------------------------------------


def _cell(value):
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def write_trace(path, trace, header_lines):
    buffer = io.StringIO()
    for line in header_lines:
        buffer.write(f"# {line}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for record in trace.records:
        writer.writerow([_cell(getattr(record, c)) for c in TRACE_COLUMNS])
    Path(path).write_text(buffer.getvalue(), encoding="utf-8")


def _split_header(text):
    header, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            header[key] = value
        else:
            body.append(line)
    return header, body


def read_trace(path):
    """Header dict and a dict of column arrays."""
    header, body = _split_header(Path(path).read_text(encoding="utf-8"))
    rows = list(csv.reader(body))
    names, rows = rows[0], rows[1:]
    columns = {}
    for k, name in enumerate(names):
        values = [row[k] for row in rows]
        kind = float if name in ("y", "regret", "hv_gap") else int
        columns[name] = np.array([kind(v) for v in values], dtype=kind)
    return header, columns


def run_seed(config: ExperimentConfig, seed: int, out_dir) -> Path:
    """Run one seed and write its trace and timing files."""
    bench = make_benchmark(config.benchmark, **config.benchmark_kwargs(seed))
    scenario = config.scenario_config()
    truth = ground_truth(bench, alpha=config.alpha, h=config.h, reference_point=config.reference_point)
    trace = run_scenario(scenario, bench, seed, truth)
    header = ["mvabo trace v1", *format_config(config), f"seed={seed}",
              f"metric={'hv_gap' if config.scenario == 'multi-objective' else 'regret'}"]
    if config.scenario == "multi-objective":
        header.append(f"hv_reference={_format_value(tuple(float(v) for v in truth.reference))}")
    out_dir = Path(out_dir)
    path = out_dir / f"trace_seed{seed}.csv"
    write_trace(path, trace, header)
    timing = "step,wall_ms\n" + "".join(f"{r.step},{r.wall_ms:.3f}\n" for r in trace.records)
    (out_dir / f"timing_seed{seed}.csv").write_text(timing, encoding="utf-8")
    return path


def _run_seed_safe(args):
    config, seed, out_dir = args
    try:
        return seed, str(run_seed(config, seed, out_dir)), None
    except Exception as exc:  # reported per seed by the parent
        return seed, None, f"{type(exc).__name__}: {exc}"


def default_output_dir(config: ExperimentConfig) -> Path:
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
    return root / f"{config.method}-{config.benchmark}"


def run(config: ExperimentConfig, seeds=None, out=None, workers=None) -> Path:
    """Run every seed, then write ``summary.txt``. Returns the output directory.

    Raises :class:`RunError` after all seeds finish if any of them failed;
    traces of the successful seeds are kept.
    """
    seeds = tuple(config.seeds if seeds is None else seeds)
    if not seeds:
        raise ConfigError("seeds must be nonempty")
    config = dataclasses.replace(config, seeds=seeds)
    out_dir = Path(out or config.output_dir or default_output_dir(config))
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(config, seed, out_dir) for seed in seeds]
    workers = workers or os.cpu_count() or 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_run_seed_safe, jobs))
    else:
        results = [_run_seed_safe(job) for job in jobs]
    failures = [(seed, msg) for seed, _, msg in results if msg is not None]
    paths = [Path(p) for _, p, msg in results if msg is None]
    header = ["mvabo summary v1", *format_config(config)]
    write_summary(out_dir / "summary.txt", aggregate([read_trace(p) for p in paths]), header)
    if failures:
        raise RunError(failures)
    return out_dir


# -- aggregation ------------------------------------------------------------


@dataclass
class SummaryRow:
    method: str
    benchmark: str
    metric: str
    step: int
    mean: float
    se: float
    lo: float
    hi: float
    n: int
    padded: int


def _band(values):
    n = len(values)
    if n == 0:
        return math.nan, math.nan, 0
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se, n


def aggregate(traces) -> list:
    """Per-step mean and 2-standard-error band, per (method, benchmark) group.

    ``traces`` are ``(header, columns)`` pairs from :func:`read_trace`.
    Shorter traces carry their last metric value forward. Steps where a
    trace has no value yet (``nan``) are left out of that step's ``n``.
    """
    groups = defaultdict(list)
    for header, columns in traces:
        key = (header.get("method", ""), header.get("benchmark", ""), header.get("metric", "regret"))
        groups[key].append(columns[key[2]] if len(columns.get(key[2], ())) else np.empty(0))
    rows = []
    for (method, bench, metric), series in sorted(groups.items()):
        length = max(len(s) for s in series)
        for step in range(1, length + 1):
            values, padded = [], 0
            for s in series:
                if len(s) == 0:
                    continue
                if step > len(s):
                    padded += 1
                value = s[min(step, len(s)) - 1]
                if not math.isnan(value):
                    values.append(value)
            mean, se, n = _band(values)
            rows.append(SummaryRow(method, bench, metric, step, mean, se, mean - 2 * se, mean + 2 * se, n, padded))
    return rows


def aggregate_dir(in_dir) -> list:
    paths = sorted(Path(in_dir).rglob("trace_seed*.csv"))
    if not paths:
        raise FileNotFoundError(f"no trace files under {in_dir}")
    return aggregate([read_trace(p) for p in paths])


def write_summary(path, rows, header_lines=("mvabo summary v1",)):
    buffer = io.StringIO()
    for line in header_lines:
        buffer.write(f"# {line}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for row in rows:
        writer.writerow([_cell(getattr(row, c)) for c in SUMMARY_COLUMNS])
    Path(path).write_text(buffer.getvalue(), encoding="utf-8")


def read_summary(path):
    header, body = _split_header(Path(path).read_text(encoding="utf-8"))
    reader = csv.DictReader(body)
    rows = []
    for rec in reader:
        rows.append(SummaryRow(
            rec["method"], rec["benchmark"], rec["metric"], int(rec["step"]),
            float(rec["mean"]), float(rec["se"]), float(rec["lo"]), float(rec["hi"]),
            int(rec["n"]), int(rec["padded"]),
        ))
    return header, rows


def emit_plot_data(summary_path, out_path):
    """Long-format ``method,benchmark,step,mean,lo,hi`` table from a summary file."""
    _, rows = read_summary(summary_path)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(PLOT_COLUMNS)
    for row in rows:
        writer.writerow([_cell(getattr(row, c)) for c in PLOT_COLUMNS])
    Path(out_path).write_text(buffer.getvalue(), encoding="utf-8")
    return len(rows)


def read_plot_data(path):
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        return [
            {"method": r["method"], "benchmark": r["benchmark"], "step": int(r["step"]),
             "mean": float(r["mean"]), "lo": float(r["lo"]), "hi": float(r["hi"])}
            for r in reader
        ]
