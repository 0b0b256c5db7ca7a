"""Comparison policies: random, uncertainty sampling, and single-objective UCB."""

import numpy as np

from .benchmarks import pair_points
from .bounds import EnvDistribution, RiskBoundTable

__all__ = ["argmax_first", "rs_select", "us_select", "us_select_from_std", "bqoucb_select", "bovo_select"]


def argmax_first(values) -> int:
    """Index of the maximum; ties go to the lowest index."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("empty candidate set")
    return int(np.argmax(values))


def rs_select(n_design, rng) -> int:
    if n_design < 1:
        raise ValueError("empty design grid")
    return int(rng.integers(n_design))


def us_select_from_std(std_table, p: EnvDistribution) -> int:
    return argmax_first(p.expect(std_table))


def us_select(model, design, p: EnvDistribution, input_mode="joint") -> int:
    """Design point with the largest ``E_w[sigma(x, w)]``."""
    points = pair_points(design, p.support, input_mode)
    _, var = model.query(points)
    return us_select_from_std(np.sqrt(var).reshape(len(design), len(p)), p)


def bqoucb_select(table: RiskBoundTable) -> int:
    return argmax_first(table.upper_f1)


def bovo_select(table: RiskBoundTable) -> int:
    return argmax_first(table.upper_f2)
