"""Constrained optimization plus the environment-handling variants."""
import numpy as np

from mvabo.benchmarks import gp_sample_benchmark, grid_1d, noisy_input_benchmark
from mvabo.metrics import ground_truth
from mvabo.scenarios import ScenarioConfig, discretize_design_space, run_scenario

# %% maximize the mean subject to a standard deviation of at most 0.6
bench = gp_sample_benchmark(seed=2, n_x=30, n_w=20)
truth = ground_truth(bench, h=-0.6)
config = ScenarioConfig(method="constrained-mva-bo", h=-0.6, epsilon=(0.2, 0.2), budget=400, beta_fixed=25.0)
trace = run_scenario(config, bench, seed=0, truth=truth)
state = trace.final_state
print(f"terminated after {len(trace.records)} steps, recommendation x={state.recommendation}")
if state.recommendation is not None and truth.constrained_opt is not None:
    # epsilon-accuracy allows a slightly infeasible point with a better mean
    print(f"  F1(x_hat) - F1(x*) = {truth.f1[state.recommendation] - truth.f1[truth.constrained_opt]:+.4f} (need >= -0.2)")
    print(f"  F2(x_hat) = {truth.f2[state.recommendation]:.4f} (need >= -0.6 - 0.2)")

# %% unknown p(w): bounds use the empirical distribution of observed w
for mode in ("sampled-known-p", "sampled-empirical-p", "simulator-selected"):
    cfg = ScenarioConfig(method="mt-mva-bo", env_mode=mode, budget=40, beta_fixed=9.0)
    regrets = [run_scenario(cfg, gp_sample_benchmark(s, n_x=40, n_w=30), s,
                            ground_truth(gp_sample_benchmark(s, n_x=40, n_w=30))).metric[-1] for s in range(5)]
    print(f"{mode:20s} mean final regret {np.mean(regrets):.4f}")

# %% the design point itself is perturbed: f(x + xi)
deltas = np.linspace(-0.15, 0.15, 7)[:, None]
noisy = noisy_input_benchmark(lambda z: np.sin(4 * z[:, 0]) - z[:, 0] ** 2, grid_1d(50)[:, None], deltas)
cfg = ScenarioConfig(method="mt-mva-bo", env_mode="simulator-selected", input_mode="noisy", budget=30, beta_fixed=9.0)
print("noisy-input final regret:", run_scenario(cfg, noisy, 0, ground_truth(noisy)).metric[-1])

# %% a continuous design space gets a grid fine enough for the Pareto guarantee
grid = discretize_design_space(d1=1, epsilon=(0.5, 0.5), lipschitz=1.0, deviation_bound=1.0)
print(f"tau={grid.tau:g}, {grid.segments} segments, {len(grid.grid)} points, run with epsilon/2={grid.epsilon_half}")
