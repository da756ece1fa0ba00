"""Partition agreement: Rand index, adjusted Rand index, confusion tables."""

import numpy as np

from .errors import DomainError

__all__ = ["rand_index", "adjusted_rand_index", "confusion_matrix"]


def _contingency(a, b):
    a = list(a)
    b = list(b)
    if len(a) == 0:
        raise DomainError("partitions must be nonempty")
    if len(a) != len(b):
        raise DomainError(f"partition lengths differ: {len(a)} vs {len(b)}")

    def _ordered(values):
        try:
            return sorted(set(values))
        except TypeError:  # mixed label types: fall back to a stable order
            return sorted(set(values), key=repr)

    ra = _ordered(a)
    rb = _ordered(b)
    ia = {v: i for i, v in enumerate(ra)}
    ib = {v: i for i, v in enumerate(rb)}
    table = np.zeros((len(ra), len(rb)), dtype=np.int64)
    for x, y in zip(a, b):
        table[ia[x], ib[y]] += 1
    return table, ra, rb


def _comb2(x):
    return x * (x - 1) // 2


def rand_index(a, b):
    """Fraction of observation pairs on which the two partitions agree."""
    table, _, _ = _contingency(a, b)
    n = int(table.sum())
    if n < 2:
        raise DomainError("need at least two observations")
    pairs = _comb2(n)
    same_both = int(np.sum(_comb2(table)))
    same_a = int(np.sum(_comb2(table.sum(axis=1))))
    same_b = int(np.sum(_comb2(table.sum(axis=0))))
    agreements = pairs + 2 * same_both - same_a - same_b
    return agreements / pairs


def adjusted_rand_index(a, b):
    """Rand index corrected for chance: 1 at equality (up to relabeling),
    expectation 0 under independent random labels, possibly negative.

    The degenerate case where the expected and maximum index coincide
    (both partitions trivial) returns 1.0.
    """
    table, _, _ = _contingency(a, b)
    n = int(table.sum())
    if n < 2:
        raise DomainError("need at least two observations")
    sum_cells = float(np.sum(_comb2(table)))
    sum_a = float(np.sum(_comb2(table.sum(axis=1))))
    sum_b = float(np.sum(_comb2(table.sum(axis=0))))
    pairs = float(_comb2(n))
    expected = sum_a * sum_b / pairs
    maximum = 0.5 * (sum_a + sum_b)
    if maximum == expected:
        return 1.0
    return (sum_cells - expected) / (maximum - expected)


def confusion_matrix(truth, predicted):
    """Cross-tabulation of two label sequences.

    Returns (table, row_labels, col_labels) with rows indexed by the
    distinct truth labels and columns by the distinct predicted labels.
    """
    return _contingency(truth, predicted)
