"""Interval bounds on the mean and negative standard deviation over ``w``.

Pointwise tables are arrays of shape ``(n_x, n_w)``: row ``i`` holds the
bounds on ``f(x_i, w_j)`` for every environment point ``w_j``. Integrals over
the environment are exact weighted sums over the finite support.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "EnvDistribution",
    "RiskBoundTable",
    "mean_bounds",
    "variance_bounds",
    "risk_bounds",
    "scalarized_bounds",
    "rect_diameter",
    "rect_diameters",
    "noisy_input_bounds",
]


@dataclass(frozen=True, eq=False)
class EnvDistribution:
    """Probability mass function over a finite grid of environment points."""

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float)
        if support.ndim == 1:
            support = support[:, None]
        weights = np.asarray(self.weights, dtype=float).ravel()
        if len(weights) != len(support):
            raise ValueError(f"{len(weights)} weights for {len(support)} support points")
        if len(weights) == 0:
            raise ValueError("empty support")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to one")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, support):
        support = np.asarray(support, dtype=float)
        n = len(support)
        return cls(support, np.full(n, 1.0 / n))

    @classmethod
    def from_unnormalized(cls, support, mass):
        mass = np.asarray(mass, dtype=float)
        return cls(support, mass / mass.sum())

    def __len__(self):
        return len(self.weights)

    def expect(self, values):
        """Weighted sum over the last axis."""
        values = np.asarray(values, dtype=float)
        if values.shape[-1] != len(self.weights):
            raise ValueError(
                f"table has {values.shape[-1]} environment columns, distribution has {len(self.weights)}"
            )
        return values @ self.weights


@dataclass(frozen=True, eq=False)
class RiskBoundTable:
    """Per-design-point intervals on ``F1`` (mean) and ``F2`` (negative std)."""

    lower_f1: np.ndarray
    upper_f1: np.ndarray
    lower_f2: np.ndarray
    upper_f2: np.ndarray
    step: int = 0

    def __len__(self):
        return len(self.lower_f1)

    @property
    def optimistic(self):
        return np.column_stack([self.upper_f1, self.upper_f2])

    @property
    def pessimistic(self):
        return np.column_stack([self.lower_f1, self.lower_f2])


def _check(lower, upper):
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.ndim != 2 or lower.shape != upper.shape:
        raise ValueError(f"pointwise tables must be matching 2-D arrays, got {lower.shape} and {upper.shape}")
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise ValueError("pointwise table is incomplete (non-finite entries)")
    return lower, upper


def mean_bounds(lower, upper, p: EnvDistribution):
    lower, upper = _check(lower, upper)
    return p.expect(lower), p.expect(upper)


def variance_bounds(lower, upper, p: EnvDistribution):
    """Bounds on ``-sqrt(Var_w f(x, w))`` from pointwise bounds on ``f``.

    The centred value ``f - E_w f`` lies in ``[lower - E_w upper, upper - E_w lower]``;
    squaring that interval and integrating gives bounds on the variance, and
    the square root is monotone. A distribution with a single atom has zero
    variance whatever ``f`` is, so both bounds are then exactly zero.
    """
    lower, upper = _check(lower, upper)
    if np.count_nonzero(p.weights) == 1:
        zeros = np.zeros(len(lower))
        return zeros, zeros.copy()
    lo_c = lower - p.expect(upper)[:, None]
    hi_c = upper - p.expect(lower)[:, None]
    lo_sq, hi_sq = lo_c**2, hi_c**2
    straddles = (lo_c <= 0) & (hi_c >= 0)
    sq_lower = np.where(straddles, 0.0, np.minimum(lo_sq, hi_sq))
    sq_upper = np.maximum(lo_sq, hi_sq)
    return -np.sqrt(p.expect(sq_upper)), -np.sqrt(p.expect(sq_lower))


def risk_bounds(lower, upper, p: EnvDistribution, step=0) -> RiskBoundTable:
    l1, u1 = mean_bounds(lower, upper, p)
    l2, u2 = variance_bounds(lower, upper, p)
    return RiskBoundTable(l1, u1, l2, u2, step)


def scalarized_bounds(table: RiskBoundTable, alpha: float):
    """Bounds on ``alpha * F1 + (1 - alpha) * F2``."""
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    lower = alpha * table.lower_f1 + (1 - alpha) * table.lower_f2
    upper = alpha * table.upper_f1 + (1 - alpha) * table.upper_f2
    return lower, upper


def rect_diameters(table: RiskBoundTable) -> np.ndarray:
    return np.hypot(table.upper_f1 - table.lower_f1, table.upper_f2 - table.lower_f2)


def rect_diameter(table: RiskBoundTable, index: int) -> float:
    return float(rect_diameters(table)[index])


def noisy_input_bounds(lower, upper, noise: EnvDistribution, step=0) -> RiskBoundTable:
    """Risk bounds when the design point itself is perturbed, ``f(x + xi)``.

    ``lower[i, j]`` and ``upper[i, j]`` bound ``f(x_i + xi_j)``; the calculus is
    the same as for an environment variable with ``p(w)`` replaced by ``p(xi)``.
    """
    lower, upper = _check(lower, upper)
    if lower.shape[1] != len(noise):
        raise ValueError(
            f"bounds cover {lower.shape[1]} perturbations, noise grid has {len(noise)}"
        )
    return risk_bounds(lower, upper, noise, step)
