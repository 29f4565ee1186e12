"""Rank metrics."""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from .errors import ContractError


def auc_exact(scores, labels) -> Fraction:
    """Mann-Whitney AUC as an exact rational.

    Equals the probability that a random positive outscores a random negative,
    ties counted one half. Average ranks are multiples of 1/2, so twice the U
    statistic is an integer.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise ContractError(f"{len(s)} scores but {len(y)} labels")
    if not np.isin(y, (0, 1)).all():
        raise ContractError("labels must be 0 or 1")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ContractError("AUC needs both classes present")
    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    # group boundaries of tied scores; doubled average rank of a group spanning i..j is i + j + 2
    starts = np.flatnonzero(np.r_[True, sorted_s[1:] != sorted_s[:-1]])
    ends = np.r_[starts[1:], len(s)] - 1
    doubled = np.empty(len(s), dtype=np.int64)
    doubled[order] = np.repeat(starts + ends + 2, ends - starts + 1)
    twice_u = int(doubled[pos].sum()) - n_pos * (n_pos + 1)
    return Fraction(twice_u, 2 * n_pos * n_neg)


def auc(scores, labels) -> float:
    """Area under the ROC curve (Mann-Whitney, half credit for ties), correctly rounded."""
    return float(auc_exact(scores, labels))


def permutation_null(scores, labels, n_shuffles: int = 1000, seed: int = 0) -> np.ndarray:
    """AUCs of ``scores`` against ``n_shuffles`` random permutations of ``labels``."""
    rng = np.random.default_rng(seed)
    y = np.asarray(labels)
    return np.array([auc(scores, rng.permutation(y)) for _ in range(n_shuffles)])
