"""Decision loops for the weighted, Pareto and constrained mean-variance problems.

Index conventions: design points are rows of the design grid, environment
points rows of the environment support, and every argmax breaks ties toward
the lowest index.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ._pareto import nondominated_mask, weakly_covered
from .baselines import argmax_first, bovo_select, bqoucb_select, rs_select, us_select_from_std
from .bounds import EnvDistribution, RiskBoundTable, rect_diameters, risk_bounds, scalarized_bounds
from .gp import BetaSchedule, GpPosterior, GridPosterior, KernelSpec, NumericalError, beta, fit_kernel
from .metrics import GroundTruth, exact_objectives, hypervolume_gap, regret

__all__ = [
    "InvalidStateError",
    "GridTooLargeError",
    "ParetoState",
    "ConstrainedState",
    "ScenarioConfig",
    "TraceRecord",
    "Trace",
    "mt_select",
    "mt_recommend",
    "estimate_pareto",
    "mo_select",
    "mo_terminated",
    "constrained_step",
    "constrained_select",
    "env_sample",
    "empirical_env",
    "simulator_env_select",
    "noisy_simulator_select",
    "Discretization",
    "discretize_design_space",
    "run_scenario",
    "METHODS",
]

SCENARIOS = ("multi-task", "multi-objective", "constrained")
METHODS = (
    "mt-mva-bo", "mo-mva-bo", "constrained-mva-bo",
    "rs", "us", "bqoucb", "bo-vo", "ada-bqoucb", "ada-bo-vo",
)
ENV_MODES = ("sampled-known-p", "sampled-empirical-p", "simulator-selected")
RULES = ("per-step-bounds", "current-step-bounds")


class InvalidStateError(RuntimeError):
    pass


class GridTooLargeError(MemoryError):
    pass


# -- multi-task -------------------------------------------------------------


def mt_select(table: RiskBoundTable, alpha: float) -> int:
    _, upper = scalarized_bounds(table, alpha)
    return argmax_first(upper)


def mt_recommend(selected, lower_at_selection=None, rule="per-step-bounds", current_lower=None) -> int:
    """Estimated solution among the design points selected so far.

    ``per-step-bounds`` ranks step ``t'`` by the lower bound that was current
    when ``x_t'`` was chosen; ``current-step-bounds`` re-ranks every past
    choice with ``current_lower``. Ties go to the earliest step.
    """
    selected = np.asarray(selected, dtype=int)
    if len(selected) == 0:
        raise ValueError("no completed steps to recommend from")
    if rule == "per-step-bounds":
        scores = np.asarray(lower_at_selection, dtype=float)
    elif rule == "current-step-bounds":
        scores = np.asarray(current_lower, dtype=float)[selected]
    else:
        raise ValueError(f"unknown recommendation rule {rule!r}")
    return int(selected[argmax_first(scores)])


# -- multi-objective --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ParetoState:
    step: int
    pareto_hat: np.ndarray
    potential: np.ndarray
    uncertain: np.ndarray
    epsilon: tuple
    terminated: bool


def _strictly_below(lhs, rhs, rule):
    """``lhs ≺ rhs`` elementwise over broadcast rows."""
    less = lhs < rhs
    return less.all(axis=-1) if rule == "all" else less.any(axis=-1)


def estimate_pareto(table: RiskBoundTable, epsilon, strict="all", step=None) -> ParetoState:
    """Estimated Pareto set, potential set and uncertain set from the bounds.

    The estimated set keeps points whose pessimistic vector is not dominated
    by a different pessimistic vector. A point outside it is *potential* when
    its optimistic vector is not epsilon-dominated by any kept pessimistic
    vector. A kept point is *uncertain* when its pessimistic vector plus
    epsilon is strictly below another kept point's optimistic vector;
    ``strict="all"`` means strictly below in both objectives, ``strict="any"``
    in at least one.
    """
    if strict not in ("all", "any"):
        raise ValueError(f"unknown strictness rule {strict!r}")
    eps = np.asarray(epsilon, dtype=float)
    pes, opt = table.pessimistic, table.optimistic
    kept = nondominated_mask(pes)
    pareto_hat = np.flatnonzero(kept)
    outside = np.flatnonzero(~kept)
    covered = weakly_covered(opt[outside], pes[pareto_hat] + eps)
    potential = outside[~covered]

    shifted = pes[pareto_hat] + eps
    others = opt[pareto_hat]
    flags = np.zeros(len(pareto_hat), dtype=bool)
    chunk = max(1, 2_000_000 // max(len(pareto_hat), 1))
    for start in range(0, len(pareto_hat), chunk):
        block = _strictly_below(shifted[start:start + chunk, None, :], others[None, :, :], strict)
        rows = np.arange(block.shape[0])
        block[rows, start + rows] = False
        flags[start:start + chunk] = block.any(axis=1)
    uncertain = pareto_hat[flags]
    return ParetoState(
        table.step if step is None else step,
        pareto_hat, potential, uncertain,
        (float(eps[0]), float(eps[1])),
        len(potential) == 0 and len(uncertain) == 0,
    )


def mo_select(state: ParetoState, table: RiskBoundTable) -> int:
    if state.terminated:
        raise InvalidStateError("selection requested after termination")
    candidates = np.union1d(state.pareto_hat, state.potential)
    return int(candidates[argmax_first(rect_diameters(table)[candidates])])


def mo_terminated(state: ParetoState) -> bool:
    return len(state.potential) == 0 and len(state.uncertain) == 0


# -- constrained ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConstrainedState:
    step: int
    m_cons: np.ndarray
    s_feasible: np.ndarray
    m_obj: np.ndarray
    m_latent: np.ndarray
    h: float
    epsilon: tuple
    max_diameter: float
    terminated: bool
    recommendation: Optional[int]
    best_feasible: Optional[int]


def constrained_step(table: RiskBoundTable, h, epsilon, step=None) -> ConstrainedState:
    """Candidate sets for ``max F1 s.t. F2 >= h``.

    ``best_feasible`` is the best pessimistic mean inside the
    high-probability feasible set whenever that set is nonempty;
    ``recommendation`` repeats it once ``terminated`` is true and is ``None``
    before that.
    """
    if h >= 0:
        raise ValueError(f"threshold h must be negative, got {h}")
    e1, e2 = (float(v) for v in epsilon)
    everything = np.arange(len(table))
    m_cons = np.flatnonzero(table.upper_f2 >= h - e2)
    feasible = np.flatnonzero(table.lower_f2 >= h - e2)
    if len(feasible) == 0:
        m_obj = everything
        best_feasible = None
    else:
        best = table.lower_f1[feasible]
        m_obj = np.flatnonzero(table.upper_f1 >= best.max() - e1)
        best_feasible = int(feasible[argmax_first(best)])
    latent = np.intersect1d(m_cons, m_obj)
    widest = float(rect_diameters(table)[latent].max()) if len(latent) else 0.0
    terminated = widest <= min(e1, e2)
    return ConstrainedState(
        table.step if step is None else step,
        m_cons, feasible, m_obj, latent, float(h), (e1, e2),
        widest, terminated, best_feasible if terminated else None, best_feasible,
    )


def constrained_select(state: ConstrainedState, table: RiskBoundTable) -> int:
    if state.terminated:
        raise InvalidStateError("selection requested after termination")
    latent = state.m_latent
    return int(latent[argmax_first(rect_diameters(table)[latent])])


# -- environment handling ---------------------------------------------------


def env_sample(p: EnvDistribution, rng) -> int:
    """Index of an environment point drawn from ``p``."""
    return int(rng.choice(len(p), p=p.weights))


def empirical_env(observed, support) -> EnvDistribution:
    """Relative frequencies of the observed environment indices over ``support``."""
    observed = np.asarray(observed, dtype=int)
    if observed.size == 0:
        raise ValueError("empirical distribution needs at least one observation")
    counts = np.bincount(observed, minlength=len(support)).astype(float)
    return EnvDistribution(support, counts / counts.sum())


def simulator_env_select(model: GpPosterior, x, omega, input_mode="joint") -> int:
    """Environment point with the largest posterior std at design point ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    omega = np.asarray(omega, dtype=float).reshape(len(omega), -1)
    xs = np.tile(x, (len(omega), 1))
    points = xs + omega if input_mode == "noisy" else np.hstack([xs, omega])
    _, var = model.query(points)
    return argmax_first(var)


def noisy_simulator_select(model: GpPosterior, x, perturbations, p: EnvDistribution) -> int:
    """Perturbation maximizing ``sigma(x + xi) * p(xi)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    perturbations = np.asarray(perturbations, dtype=float).reshape(len(perturbations), -1)
    _, var = model.query(x + perturbations)
    return argmax_first(np.sqrt(var) * p.weights)


@dataclass(frozen=True, eq=False)
class Discretization:
    grid: np.ndarray
    tau: float
    segments: int
    epsilon_half: tuple


def discretize_design_space(d1, epsilon, lipschitz, deviation_bound, cap=10**6) -> Discretization:
    """Evenly spaced grid on ``[0, 1]^d1`` fine enough for the Pareto guarantee.

    Uses ``tau = max(2 L d1 / eps1, 16 B L d1 / eps2^2)`` and ``ceil(tau)``
    segments per axis, so ``|x - [x]|_1 <= d1 / tau``. The Pareto loop should
    then run with ``epsilon_half`` in its potential and uncertain sets.
    """
    e1, e2 = (float(v) for v in epsilon)
    if lipschitz <= 0 or deviation_bound <= 0 or e1 <= 0 or e2 <= 0:
        raise ValueError("Lipschitz constant, deviation bound and epsilon must be positive")
    tau = max(2 * lipschitz * d1 / e1, 16 * deviation_bound * lipschitz * d1 / e2**2)
    segments = math.ceil(tau)
    size = (segments + 1) ** d1
    if size > cap:
        raise GridTooLargeError(f"discretization needs {size} points; raise cap to at least {size}")
    axis = np.linspace(0.0, 1.0, segments + 1)
    mesh = np.meshgrid(*([axis] * d1), indexing="ij")
    grid = np.stack([m.ravel() for m in mesh], axis=1)
    return Discretization(grid, tau, segments, (e1 / 2, e2 / 2))


# -- orchestration ----------------------------------------------------------


@dataclass(frozen=True)
class ScenarioConfig:
    method: str = "mt-mva-bo"
    scenario: Optional[str] = None
    alpha: float = 0.5
    epsilon: tuple = (0.1, 0.1)
    h: Optional[float] = None
    delta: float = 0.1
    rkhs_bound: float = 2.0
    delta_divisor: int = 3
    beta_fixed: Optional[float] = None
    noise_variance: float = 1e-4
    budget: int = 100
    env_mode: str = "sampled-known-p"
    recommendation_rule: str = "per-step-bounds"
    refit_interval: Optional[int] = None
    input_mode: Optional[str] = None
    kernel: Optional[KernelSpec] = None
    strict: str = "all"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        implied = {"mt-mva-bo": "multi-task", "mo-mva-bo": "multi-objective",
                   "constrained-mva-bo": "constrained"}.get(self.method)
        scenario = self.scenario or implied or "multi-task"
        if implied and scenario != implied:
            raise ValueError(f"method {self.method} runs the {implied} scenario, not {scenario}")
        if self.method in ("bqoucb", "bo-vo", "ada-bqoucb", "ada-bo-vo") and scenario != "multi-task":
            raise ValueError(f"method {self.method} only applies to the multi-task scenario")
        if scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {scenario!r}")
        object.__setattr__(self, "scenario", scenario)
        object.__setattr__(self, "epsilon", tuple(float(v) for v in np.broadcast_to(self.epsilon, 2)))
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must lie in [0, 1]")
        if min(self.epsilon) < 0:
            raise ValueError("epsilon must be nonnegative")
        if scenario == "constrained" and (self.h is None or self.h >= 0):
            raise ValueError("the constrained scenario needs a negative threshold h")
        if self.env_mode not in ENV_MODES:
            raise ValueError(f"unknown environment mode {self.env_mode!r}")
        if self.recommendation_rule not in RULES:
            raise ValueError(f"unknown recommendation rule {self.recommendation_rule!r}")
        if self.budget < 0 or (self.refit_interval or 0) < 0:
            raise ValueError("budget and refit interval must be nonnegative")
        if self.input_mode not in (None, "joint", "noisy"):
            raise ValueError(f"unknown input mode {self.input_mode!r}")

    @property
    def schedule(self):
        return BetaSchedule(self.rkhs_bound, self.delta, self.delta_divisor, self.beta_fixed)


@dataclass
class TraceRecord:
    step: int
    x_index: int
    w_index: int
    y: float
    recommendation: int = -1
    regret: float = math.nan
    hv_gap: float = math.nan
    n_pareto: int = -1
    n_potential: int = -1
    n_uncertain: int = -1
    terminated: bool = False
    wall_ms: float = 0.0


@dataclass
class Trace:
    records: list = field(default_factory=list)
    recommendation: object = None
    final_state: object = None
    refits: int = 0
    contained: Optional[bool] = None
    objective_contained: Optional[bool] = None

    @property
    def metric(self):
        key = "hv_gap" if isinstance(self.final_state, ParetoState) else "regret"
        return np.array([getattr(r, key) for r in self.records])


def random_streams(seed):
    """Independent generators for environment draws, observation noise and policy randomness."""
    env, noise, policy, fit = np.random.SeedSequence(seed).spawn(4)
    return (np.random.default_rng(env), np.random.default_rng(noise),
            np.random.default_rng(policy), np.random.default_rng(fit))


def _recommend_target(method):
    return {"bqoucb": "f1", "bo-vo": "f2"}.get(method, "g")


def run_scenario(config: ScenarioConfig, benchmark, seed=0, truth: Optional[GroundTruth] = None,
                 check_containment=False) -> Trace:
    """Run one seeded optimization loop on a benchmark.

    Each step builds the confidence table from the current posterior, checks
    the scenario's stopping rule, selects ``x`` (and ``w`` in simulator mode),
    observes ``f + N(0, noise)``, and updates the posterior. Logged metrics
    (recommendation, regret or hypervolume gap, set sizes) reflect the
    posterior after the step's observation; metrics need ``truth``.

    With ``check_containment`` the trace also reports whether every table
    used during the run contained ``f`` pointwise (``contained``) and the
    exact mean and negative standard deviation (``objective_contained``).
    """
    n_x, n_w = benchmark.shape
    env_rng, noise_rng, policy_rng, fit_rng = random_streams(seed)
    input_mode = benchmark.input_mode
    points = benchmark.model_points()
    kernel = config.kernel or benchmark.kernel
    if config.input_mode is not None and config.input_mode != input_mode:
        raise ValueError(f"benchmark {benchmark.name!r} uses {input_mode} inputs, not {config.input_mode}")
    refit_interval = benchmark.refit_interval if config.refit_interval is None else config.refit_interval
    noise_sd = math.sqrt(config.noise_variance)
    schedule = config.schedule
    true_p = benchmark.env
    grid = GridPosterior(GpPosterior(kernel, config.noise_variance), points)

    observed_w = []
    selected, lower_at_selection = [], []
    target = _recommend_target(config.method)
    trace = Trace()

    def current_p():
        if config.env_mode == "sampled-empirical-p":
            if not observed_w:
                return EnvDistribution.uniform(true_p.support)
            return empirical_env(observed_w, true_p.support)
        return true_p

    def snapshot(step):
        root_beta = math.sqrt(beta(grid.model, schedule))
        std = grid.std
        half = root_beta * std
        lower = (grid.mean - half).reshape(n_x, n_w)
        upper = (grid.mean + half).reshape(n_x, n_w)
        p = current_p()
        table = risk_bounds(lower, upper, p, step)
        if check_containment:
            values = benchmark.table()
            inside = bool(np.all((lower <= values) & (values <= upper)))
            trace.contained = inside and trace.contained is not False
            f1, f2 = exact_f1, exact_f2
            tol = 1e-9
            hit = bool(np.all((table.lower_f1 - tol <= f1) & (f1 <= table.upper_f1 + tol)
                              & (table.lower_f2 - tol <= f2) & (f2 <= table.upper_f2 + tol)))
            trace.objective_contained = hit and trace.objective_contained is not False
        return table, std.reshape(n_x, n_w), p

    def scenario_state(table):
        if config.scenario == "multi-objective":
            return estimate_pareto(table, config.epsilon, config.strict)
        if config.scenario == "constrained":
            return constrained_step(table, config.h, config.epsilon)
        return None

    def recommend_lower(table):
        if target == "f1":
            return table.lower_f1
        if target == "f2":
            return table.lower_f2
        return scalarized_bounds(table, config.alpha)[0]

    if check_containment:
        exact_f1, exact_f2 = exact_objectives(benchmark.table(), true_p)
    table, std, p = snapshot(1)
    state = scenario_state(table)
    trace.final_state = state
    proposed = config.method in ("mt-mva-bo", "mo-mva-bo", "constrained-mva-bo")

    for step in range(1, config.budget + 1):
        if proposed and state is not None and state.terminated:
            break
        started = time.perf_counter()

        if config.method == "mt-mva-bo":
            x = mt_select(table, config.alpha)
        elif config.method == "mo-mva-bo":
            x = mo_select(state, table)
        elif config.method == "constrained-mva-bo":
            x = constrained_select(state, table)
        elif config.method == "rs":
            x = rs_select(n_x, policy_rng)
        elif config.method == "us":
            x = us_select_from_std(std, p)
        elif config.method in ("bqoucb", "ada-bqoucb"):
            x = bqoucb_select(table)
        else:
            x = bovo_select(table)
        selected.append(x)
        lower_at_selection.append(recommend_lower(table)[x])

        if config.env_mode == "simulator-selected":
            if input_mode == "noisy":
                w = argmax_first(std[x] * true_p.weights)
            else:
                w = argmax_first(std[x])
        else:
            w = env_sample(true_p, env_rng)
        observed_w.append(w)

        y = benchmark.evaluate(x, w) + noise_sd * noise_rng.standard_normal()
        try:
            grid.add(points[x * n_w + w], y)
            if refit_interval and step % refit_interval == 0 and grid.model.t >= 2:
                kernel = fit_kernel(grid.model.points, grid.model.targets, kernel,
                                    config.noise_variance, rng=fit_rng)
                grid.replace(grid.model.refit(kernel))
                trace.refits += 1
        except NumericalError as exc:
            raise NumericalError(f"step {step}: {exc}", exc.condition_number) from exc

        table, std, p = snapshot(step + 1)
        state = scenario_state(table)
        record = TraceRecord(step, x, w, float(y))

        if config.scenario == "multi-task":
            rec = mt_recommend(selected, lower_at_selection, config.recommendation_rule,
                               recommend_lower(table))
            record.recommendation = rec
            trace.recommendation = rec
            if truth is not None:
                record.regret = regret(truth, rec)
        elif config.scenario == "multi-objective":
            record.n_pareto = len(state.pareto_hat)
            record.n_potential = len(state.potential)
            record.n_uncertain = len(state.uncertain)
            record.terminated = state.terminated and proposed
            trace.recommendation = state.pareto_hat
            if truth is not None:
                record.hv_gap = hypervolume_gap(truth, state.pareto_hat)
        else:
            record.terminated = state.terminated and proposed
            if state.best_feasible is not None:
                record.recommendation = state.best_feasible
                if truth is not None and truth.constrained_opt is not None:
                    record.regret = float(truth.f1[truth.constrained_opt] - truth.f1[state.best_feasible])
            trace.recommendation = state.best_feasible
        trace.final_state = state
        record.wall_ms = (time.perf_counter() - started) * 1e3
        trace.records.append(record)

    if config.scenario == "multi-objective" and trace.recommendation is None and state is not None:
        trace.recommendation = state.pareto_hat
    if config.scenario == "constrained" and state is not None:
        trace.recommendation = state.best_feasible
    return trace


def with_overrides(config: ScenarioConfig, **changes) -> ScenarioConfig:
    return replace(config, **changes)
