"""Exact objectives on finite grids, and the performance measures built on them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from ._pareto import nondominated_mask, weakly_covered
from .bounds import EnvDistribution

__all__ = [
    "GroundTruth",
    "exact_objectives",
    "ground_truth",
    "regret",
    "hypervolume",
    "hypervolume_gap",
    "ParetoCheck",
    "epsilon_pareto_check",
]


@dataclass(frozen=True, eq=False)
class GroundTruth:
    f1: np.ndarray
    f2: np.ndarray
    alpha: float
    pareto: np.ndarray
    reference: np.ndarray
    hv: float
    h: Optional[float] = None
    constrained_opt: Optional[int] = None

    @property
    def objectives(self):
        return np.column_stack([self.f1, self.f2])

    @property
    def g(self):
        return self.alpha * self.f1 + (1 - self.alpha) * self.f2

    @property
    def x_star(self) -> int:
        return int(np.argmax(self.g))

    @property
    def front(self):
        """Distinct nondominated objective vectors."""
        return np.unique(self.objectives[self.pareto], axis=0)


def exact_objectives(values, p: EnvDistribution):
    """Mean and negative standard deviation over ``w`` of a ``(n_x, n_w)`` table."""
    values = np.asarray(values, dtype=float)
    f1 = p.expect(values)
    var = p.expect((values - f1[:, None]) ** 2)
    return f1, -np.sqrt(np.maximum(var, 0.0))


def ground_truth(benchmark, alpha=0.5, h=None, reference_point=None) -> GroundTruth:
    """Brute-force objectives, optima and true Pareto set of a benchmark.

    The hypervolume reference defaults to the componentwise minimum of
    ``(F1, F2)`` over the grid, shifted down by ``1e-6``.
    """
    if getattr(benchmark, "stochastic", False):
        raise ValueError("ground truth needs a benchmark evaluated on a fixed environment grid")
    f1, f2 = exact_objectives(benchmark.table(), benchmark.env)
    objectives = np.column_stack([f1, f2])
    pareto = np.flatnonzero(nondominated_mask(objectives))
    if reference_point is None:
        reference = objectives.min(axis=0) - 1e-6
    else:
        reference = np.asarray(reference_point, dtype=float)
    constrained_opt = None
    if h is not None:
        feasible = np.flatnonzero(f2 >= h)
        if len(feasible):
            constrained_opt = int(feasible[np.argmax(f1[feasible])])
    return GroundTruth(
        f1, f2, float(alpha), pareto, reference,
        hypervolume(objectives[pareto], reference), h, constrained_opt,
    )


def regret(truth: GroundTruth, x_hat: int) -> float:
    g = truth.g
    return float(g[truth.x_star] - g[x_hat])


def hypervolume(points, reference) -> float:
    """Area dominated by ``points`` and dominating ``reference`` (maximization).

    Points that do not strictly dominate the reference contribute nothing.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    reference = np.asarray(reference, dtype=float)
    points = points[np.all(points > reference, axis=1)]
    if len(points) == 0:
        return 0.0
    order = np.lexsort((-points[:, 1], -points[:, 0]))
    area, level = 0.0, reference[1]
    for p1, p2 in points[order]:
        if p2 > level:
            area += (p1 - reference[0]) * (p2 - level)
            level = p2
    return float(area)


def hypervolume_gap(truth: GroundTruth, pareto_hat, reference=None) -> float:
    """HV of the true front minus HV of the true objectives at ``pareto_hat``."""
    reference = truth.reference if reference is None else np.asarray(reference, dtype=float)
    front = truth.front
    if not np.any(np.all(front > reference, axis=1)):
        raise ValueError("reference point is not dominated by the true Pareto front")
    hv_true = truth.hv if reference is truth.reference else hypervolume(front, reference)
    pareto_hat = np.asarray(pareto_hat, dtype=int)
    return hv_true - hypervolume(truth.objectives[pareto_hat], reference)


class ParetoCheck(NamedTuple):
    ok: bool
    condition: Optional[int] = None
    point: Optional[int] = None
    witness: Optional[int] = None


def epsilon_pareto_check(truth: GroundTruth, pareto_hat, epsilon) -> ParetoCheck:
    """Is ``pareto_hat`` an epsilon-accurate Pareto set on the grid?

    Condition 1: no design point beats a kept point by more than epsilon in
    both objectives, and every kept vector lies on or below the true front
    (together: kept vectors lie within epsilon of the front).
    Condition 2: every true Pareto point is epsilon-dominated by a kept point.
    On failure, reports the condition and the first offending point together
    with a witness (``None`` when nothing covers the point).
    """
    eps = np.asarray(epsilon, dtype=float)
    objectives = truth.objectives
    pareto_hat = np.asarray(pareto_hat, dtype=int)
    for i in pareto_hat:
        beaters = np.flatnonzero(np.all(objectives > objectives[i] + eps, axis=1))
        if len(beaters):
            return ParetoCheck(False, 1, int(i), int(beaters[0]))
    below_front = weakly_covered(objectives[pareto_hat], objectives[truth.pareto])
    if not np.all(below_front):
        return ParetoCheck(False, 1, int(pareto_hat[np.argmin(below_front)]), None)
    covered = weakly_covered(objectives[truth.pareto], objectives[pareto_hat] + eps)
    if not np.all(covered):
        return ParetoCheck(False, 2, int(truth.pareto[np.argmin(covered)]), None)
    return ParetoCheck(True)
