"""Blackbox test problems on finite design and environment grids.

Every :class:`Benchmark` exposes model coordinates (what the GP sees) and a
vectorized ``func(x_rows, w_rows)``. Bird and Rosenbrock map the ``[-1, 1]``
grids affinely onto their conventional domains; the newsvendor problem maps
inventory levels and preference weights onto roughly unit ranges.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from .bounds import EnvDistribution
from .gp import GpPosterior, KernelSpec, kernel_matrix

__all__ = [
    "Benchmark",
    "pair_points",
    "grid_1d",
    "product_grid",
    "truncated_normal_weights",
    "gp_sample_benchmark",
    "bird",
    "bird_benchmark",
    "rosenbrock",
    "rosenbrock_benchmark",
    "newsvendor_profit",
    "newsvendor_benchmark",
    "noisy_input_benchmark",
    "make_benchmark",
    "BENCHMARKS",
]

BIRD_DOMAIN = (-2 * np.pi, 2 * np.pi)
ROSENBROCK_DOMAIN = (-2.048, 2.048)


@dataclass(eq=False)
class Benchmark:
    name: str
    design: np.ndarray
    env: EnvDistribution
    func: Callable
    input_mode: str = "joint"
    kernel: KernelSpec = field(default_factory=KernelSpec)
    refit_interval: int = 0
    _table: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.design = np.asarray(self.design, dtype=float)
        if self.design.ndim == 1:
            self.design = self.design[:, None]
        if len(self.design) == 0:
            raise ValueError("empty design grid")
        if self.input_mode not in ("joint", "noisy"):
            raise ValueError(f"unknown input mode {self.input_mode!r}")

    @property
    def omega(self):
        return self.env.support

    @property
    def shape(self):
        return len(self.design), len(self.env)

    def evaluate(self, i, j) -> float:
        return float(self.func(self.design[[i]], self.omega[[j]])[0])

    def table(self) -> np.ndarray:
        """``f(x_i, w_j)`` on the full grid, shape ``(n_x, n_w)``."""
        if self._table is None:
            n_x, n_w = self.shape
            xs = np.repeat(self.design, n_w, axis=0)
            ws = np.tile(self.omega, (n_x, 1))
            values = np.asarray(self.func(xs, ws), dtype=float).reshape(n_x, n_w)
            if not np.all(np.isfinite(values)):
                raise ValueError(f"benchmark {self.name!r} is not finite on its grid")
            self._table = values
        return self._table

    def model_points(self):
        return pair_points(self.design, self.omega, self.input_mode)


def pair_points(design, omega, input_mode="joint"):
    """GP inputs for every grid pair, row ``i * n_w + j``.

    ``joint`` concatenates ``(x, w)``; ``noisy`` forms the perturbed input ``x + w``.
    """
    design = np.asarray(design, dtype=float).reshape(len(design), -1)
    omega = np.asarray(omega, dtype=float).reshape(len(omega), -1)
    xs = np.repeat(design, len(omega), axis=0)
    ws = np.tile(omega, (len(design), 1))
    if input_mode == "noisy":
        return xs + ws
    if input_mode != "joint":
        raise ValueError(f"unknown input mode {input_mode!r}")
    return np.hstack([xs, ws])


def grid_1d(n, lo=-1.0, hi=1.0):
    return np.linspace(lo, hi, n)


def product_grid(*axes):
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def truncated_normal_weights(grid) -> EnvDistribution:
    """Standard-normal density restricted to a finite grid and renormalized.

    Multi-dimensional grids use the product of per-coordinate densities.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim == 1:
        grid = grid[:, None]
    if len(grid) == 0:
        raise ValueError("empty grid")
    mass = np.prod(stats.norm.pdf(grid), axis=1)
    return EnvDistribution.from_unnormalized(grid, mass)


@functools.lru_cache(maxsize=8)
def _anchor_factor(n_anchor, lengthscale):
    axis = grid_1d(n_anchor)
    anchors = product_grid(axis, axis)
    eigval, eigvec = np.linalg.eigh(kernel_matrix(KernelSpec.isotropic(lengthscale), anchors, anchors))
    keep = eigval > 1e-8 * eigval.max()
    return anchors, eigvec[:, keep] * np.sqrt(eigval[keep])


def gp_sample_benchmark(seed, n_x=100, n_w=100, n_anchor=25, lengthscale=0.25) -> Benchmark:
    """Posterior mean of a noise-free GP fit to a prior sample path.

    The sample is drawn on an ``n_anchor x n_anchor`` grid over ``[-1, 1]^2``.
    Eigen-directions of the anchor covariance below ``1e-8`` of the largest are
    dropped so the interpolant reproduces the anchors to ~1e-7.
    """
    anchors, factor = _anchor_factor(n_anchor, float(lengthscale))
    rng = np.random.default_rng(seed)
    values = factor @ rng.standard_normal(factor.shape[1])
    kernel = KernelSpec.isotropic(lengthscale)
    model = GpPosterior.fit(kernel, 1e-10, anchors, values)
    weights = model.weights

    def func(x, w):
        return kernel_matrix(kernel, np.hstack([x, w]), anchors) @ weights

    omega = grid_1d(n_w)
    bench = Benchmark(
        f"gp-sample[{seed}]", grid_1d(n_x), truncated_normal_weights(omega), func, kernel=kernel
    )
    bench.anchors = anchors
    bench.anchor_values = values
    return bench


def _rescale(u, lo, hi):
    return lo + (np.asarray(u, dtype=float) + 1.0) * 0.5 * (hi - lo)


def bird(x, y):
    return (
        np.sin(x) * np.exp((1 - np.cos(y)) ** 2)
        + np.cos(y) * np.exp((1 - np.sin(x)) ** 2)
        + (x - y) ** 2
    )


def rosenbrock(z):
    z = np.atleast_2d(np.asarray(z, dtype=float))
    return np.sum(100.0 * (z[:, 1:] - z[:, :-1] ** 2) ** 2 + (1.0 - z[:, :-1]) ** 2, axis=1)


def bird_benchmark(n=100, negate=False) -> Benchmark:
    """Bird function; ``x`` is the first coordinate and ``w`` the second."""
    sign = -1.0 if negate else 1.0

    def func(x, w):
        return sign * bird(_rescale(x[:, 0], *BIRD_DOMAIN), _rescale(w[:, 0], *BIRD_DOMAIN))

    grid = grid_1d(n)
    return Benchmark(
        "bird", grid, truncated_normal_weights(grid), func,
        kernel=KernelSpec.ard((0.25, 0.25)), refit_interval=10,
    )


def rosenbrock_benchmark(n=100, negate=False) -> Benchmark:
    """3-D Rosenbrock; coordinates 1-2 are the design, coordinate 3 the environment."""
    sign = -1.0 if negate else 1.0

    def func(x, w):
        return sign * rosenbrock(_rescale(np.hstack([x, w]), *ROSENBROCK_DOMAIN))

    axis = grid_1d(n)
    return Benchmark(
        "rosenbrock", product_grid(axis, axis), truncated_normal_weights(axis), func,
        kernel=KernelSpec.ard((0.25, 0.25, 0.25)), refit_interval=10,
    )


def newsvendor_profit(inventory, preference, prices, costs, customers):
    """Profit when identical customers greedily buy their best in-stock product.

    Each customer takes the product with the highest utility
    ``preference - price`` among those still in stock, and leaves empty-handed
    once every product with nonnegative utility is sold out.
    """
    inventory = np.atleast_2d(np.asarray(inventory, dtype=float))
    preference = np.atleast_2d(np.asarray(preference, dtype=float))
    prices = np.asarray(prices, dtype=float)
    costs = np.asarray(costs, dtype=float)
    utility = preference - prices
    order = np.argsort(-utility, axis=1, kind="stable")
    remaining = np.full(len(inventory), float(customers))
    revenue = np.zeros(len(inventory))
    rows = np.arange(len(inventory))
    for rank in range(prices.size):
        product = order[:, rank]
        wanted = utility[rows, product] >= 0
        sold = np.where(wanted, np.minimum(inventory[rows, product], remaining), 0.0)
        revenue += sold * prices[product]
        remaining -= sold
    return revenue - inventory @ costs


def newsvendor_benchmark(
    prices=(1.0, 0.9),
    costs=(0.5, 0.4),
    customers=50,
    shape=2.0,
    scale=0.5,
    n_env=200,
    levels=20,
    max_inventory=30,
    seed=0,
) -> Benchmark:
    """Inventory planning under random customer preferences.

    ``x`` is the initial inventory per product on a ``levels``-per-product grid
    over ``{0, ..., max_inventory}``; ``w`` is a preference vector with
    independent Gamma(shape, scale) coordinates. The environment grid is a
    frozen sample of ``n_env`` preference vectors with uniform weights.
    """
    prices = np.asarray(prices, dtype=float)
    costs = np.asarray(costs, dtype=float)
    if prices.shape != costs.shape or np.any(costs <= 0) or np.any(costs >= prices):
        raise ValueError("need 0 < cost < price for every product")
    k = prices.size
    axis = np.unique(np.round(np.linspace(0, max_inventory, levels)))
    inventory = product_grid(*([axis] * k))
    rng = np.random.default_rng(seed)
    prefs = rng.gamma(shape, scale, size=(n_env, k))
    w_center, w_span = shape * scale, 2.0 * np.sqrt(shape) * scale

    def func(x, w):
        inv = np.round((x + 1.0) * 0.5 * max_inventory)
        return newsvendor_profit(inv, w * w_span + w_center, prices, costs, customers)

    design = inventory / max_inventory * 2.0 - 1.0
    env = EnvDistribution.uniform((prefs - w_center) / w_span)
    bench = Benchmark(
        "newsvendor", design, env, func,
        kernel=KernelSpec.ard((0.5,) * (2 * k), signal_variance=25.0), refit_interval=10,
    )
    bench.inventory = inventory
    bench.preferences = prefs
    return bench


def noisy_input_benchmark(func, design, perturbations, weights=None, name="noisy-input", kernel=None):
    """Benchmark for ``f(x + xi)`` with a random input perturbation ``xi``.

    ``func`` takes an array of shape ``(n, d)`` of perturbed inputs.
    """
    perturbations = np.asarray(perturbations, dtype=float)
    if weights is None:
        env = EnvDistribution.uniform(perturbations)
    else:
        env = EnvDistribution(perturbations, weights)
    return Benchmark(
        name, design, env, lambda x, xi: func(x + xi), input_mode="noisy",
        kernel=kernel or KernelSpec(),
    )


BENCHMARKS = {
    "gp-sample": gp_sample_benchmark,
    "bird": bird_benchmark,
    "rosenbrock": rosenbrock_benchmark,
    "newsvendor": newsvendor_benchmark,
}


def make_benchmark(name, **params) -> Benchmark:
    try:
        factory = BENCHMARKS[name]
    except KeyError:
        raise ValueError(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}") from None
    return factory(**params)
