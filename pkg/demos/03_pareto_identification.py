"""Identify an epsilon-accurate Pareto set of (mean, -std) and check it."""
import numpy as np

from mvabo.benchmarks import gp_sample_benchmark
from mvabo.metrics import epsilon_pareto_check, ground_truth, hypervolume_gap
from mvabo.scenarios import ScenarioConfig, run_scenario

bench = gp_sample_benchmark(seed=5, n_x=30, n_w=20)
truth = ground_truth(bench)
config = ScenarioConfig(method="mo-mva-bo", epsilon=(0.3, 0.3), budget=400, beta_fixed=25.0)
trace = run_scenario(config, bench, seed=0, truth=truth, check_containment=True)
state = trace.final_state

print(f"stopped after {len(trace.records)} evaluations, terminated={state.terminated}")
print(f"containment held throughout: {trace.contained}")
print(f"estimated Pareto set: {sorted(state.pareto_hat.tolist())}")
print(f"true Pareto set:      {sorted(truth.pareto.tolist())}")
print(f"hypervolume gap: {hypervolume_gap(truth, state.pareto_hat):.4f}")
print("epsilon-accuracy check:", epsilon_pareto_check(truth, state.pareto_hat, config.epsilon))

# %% set sizes over time
for record in trace.records[:: max(1, len(trace.records) // 8)]:
    print(f"  step {record.step:4d}: |Pi|={record.n_pareto:2d} |M|={record.n_potential:2d} |U|={record.n_uncertain:2d}")
