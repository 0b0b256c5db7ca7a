"""Sort-based 2-D dominance queries (maximization)."""

import numpy as np


def nondominated_mask(values) -> np.ndarray:
    """Rows not weakly dominated by any row carrying a *different* vector.

    Duplicated vectors never eliminate each other.
    """
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        return np.zeros(0, dtype=bool)
    a1, a2 = values[:, 0], values[:, 1]
    keys, inv = np.unique(a1, return_inverse=True)
    group_max = np.full(len(keys), -np.inf)
    np.maximum.at(group_max, inv, a2)
    suffix = np.maximum.accumulate(group_max[::-1])[::-1]
    above = np.append(suffix[1:], -np.inf)
    dominated = (above[inv] >= a2) | (group_max[inv] > a2)
    return ~dominated


def weakly_covered(queries, anchors) -> np.ndarray:
    """For each query q: is there an anchor a with ``a >= q`` componentwise?"""
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    anchors = np.asarray(anchors, dtype=float)
    if len(anchors) == 0:
        return np.zeros(len(queries), dtype=bool)
    order = np.argsort(anchors[:, 0], kind="stable")
    a1 = anchors[order, 0]
    suffix = np.maximum.accumulate(anchors[order, 1][::-1])[::-1]
    idx = np.searchsorted(a1, queries[:, 0], side="left")
    covered = np.zeros(len(queries), dtype=bool)
    inside = idx < len(a1)
    covered[inside] = suffix[idx[inside]] >= queries[inside, 1]
    return covered
