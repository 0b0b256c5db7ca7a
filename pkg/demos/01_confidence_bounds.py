"""Confidence bounds on the mean and the negative standard deviation.

Draw a GP sample path, observe it at a few random (x, w) pairs, and compare
the lifted intervals for F1 and F2 against the exact values.
"""
import numpy as np

from mvabo.benchmarks import gp_sample_benchmark
from mvabo.bounds import risk_bounds
from mvabo.gp import BetaSchedule, GpPosterior, beta, pointwise_bounds
from mvabo.metrics import exact_objectives

bench = gp_sample_benchmark(seed=3, n_x=40, n_w=25)
f = bench.table()
F1, F2 = exact_objectives(f, bench.env)

# %% observe 60 noisy evaluations at random grid pairs
rng = np.random.default_rng(0)
points = bench.model_points()
model = GpPosterior(bench.kernel, noise_variance=1e-4)
for idx in rng.integers(0, len(points), size=60):
    model = model.add(points[idx], f.ravel()[idx] + 1e-2 * rng.standard_normal())

# %% a single confidence statement uses divisor 1
beta_t = beta(model, BetaSchedule(rkhs_bound=2.0, delta=0.1, delta_divisor=1))
lower, upper = pointwise_bounds(model, beta_t, points)
lower, upper = lower.reshape(f.shape), upper.reshape(f.shape)
print(f"beta after {model.t} observations: {beta_t:.2f}")
print("f inside its pointwise band everywhere:", bool(np.all((lower <= f) & (f <= upper))))

table = risk_bounds(lower, upper, bench.env)
inside_f1 = np.all((table.lower_f1 <= F1) & (F1 <= table.upper_f1))
inside_f2 = np.all((table.lower_f2 <= F2) & (F2 <= table.upper_f2))
print("F1 inside its interval for every x:", bool(inside_f1))
print("F2 inside its interval for every x:", bool(inside_f2))

# %% a few rows to look at
print("\n   x      F1   [lower, upper]        F2   [lower, upper]")
for i in range(0, 40, 8):
    print(f"{bench.design[i, 0]:+.2f}  {F1[i]:+.3f} [{table.lower_f1[i]:+.3f}, {table.upper_f1[i]:+.3f}]"
          f"  {F2[i]:+.3f} [{table.lower_f2[i]:+.3f}, {table.upper_f2[i]:+.3f}]")
