"""Group-fairness, correlation and classification metrics.

Rates are plain empirical frequencies. Group comparisons accumulate their
per-class terms in class order, so the hard and soft statistical parity
forms agree bit-for-bit on one-hot inputs.
"""

import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy import stats
from sklearn.metrics import auc as sk_auc
from sklearn.metrics import f1_score, roc_curve

from .errors import DomainError, GraphValidationError, UndefinedMetricError


logger = logging.getLogger(__name__)


@dataclass
class GroupStats:
    """Per-group counts and per-class rates."""
    group_sizes: Tuple[int, int]
    class_counts: np.ndarray  # (2, C)
    rates: np.ndarray  # (2, C), rows sum to 1

    @property
    def num_nodes(self) -> int:
        return int(sum(self.group_sizes))


@dataclass
class CorrelationBound:
    """Admissible interval for a correlation given two angular premises."""
    alpha: float
    delta: float
    interval: Tuple[float, float]

    def contains(self, rho: float, slack: float = 0.0) -> bool:
        low, high = self.interval
        return low - slack <= rho <= high + slack


def _as_binary_groups(s) -> np.ndarray:
    s = np.asarray(s)
    if s.size and not np.isin(s, (0, 1)).all():
        raise DomainError("sensitive attribute values must be 0 or 1")
    return s.astype(bool)


def _group_masks(s) -> Tuple[np.ndarray, np.ndarray]:
    s = _as_binary_groups(s)
    mask1 = s
    mask0 = ~s
    if not mask0.any() or not mask1.any():
        raise UndefinedMetricError("statistical parity needs both sensitive groups to be non-empty")
    return mask0, mask1


def _total_variation(rates0: Sequence[float], rates1: Sequence[float]) -> float:
    total = 0.0
    for r0, r1 in zip(rates0, rates1):
        total += abs(r0 - r1)
    return 0.5 * total


def group_stats(assignments, s, num_classes: int = 0) -> GroupStats:
    """Counts and rates of each class within each sensitive group."""
    assignments = np.asarray(assignments, dtype=np.int64)
    mask0, mask1 = _group_masks(s)
    if assignments.size and assignments.min() < 0:
        raise DomainError("class ids must be non-negative")
    num_classes = max(num_classes, int(assignments.max()) + 1 if assignments.size else 1)
    counts = np.vstack([
        np.bincount(assignments[mask0], minlength=num_classes),
        np.bincount(assignments[mask1], minlength=num_classes),
    ])
    sizes = (int(mask0.sum()), int(mask1.sum()))
    rates = counts / np.array(sizes, dtype=np.float64)[:, None]
    return GroupStats(group_sizes=sizes, class_counts=counts, rates=rates)


def delta_sp_binary(preds, s) -> float:
    """|P(y=1 | s=0) - P(y=1 | s=1)|."""
    preds = np.asarray(preds, dtype=np.int64)
    if preds.size and not np.isin(preds, (0, 1)).all():
        raise DomainError("binary predictions must be 0 or 1")
    mask0, mask1 = _group_masks(s)
    p0 = int(preds[mask0].sum()) / int(mask0.sum())
    p1 = int(preds[mask1].sum()) / int(mask1.sum())
    return abs(p0 - p1)


def delta_sp_multiclass(assignments, s) -> float:
    """Total-variation distance between the per-group class distributions."""
    gs = group_stats(assignments, s)
    return _total_variation(gs.rates[0].tolist(), gs.rates[1].tolist())


def check_row_stochastic(cmat: np.ndarray, tol: float = 1e-6) -> None:
    if cmat.ndim != 2:
        raise GraphValidationError(f"assignment matrix must be 2-D, got shape {cmat.shape}")
    sums = cmat.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if bad.size:
        raise GraphValidationError(f"row {int(bad[0])} of the assignment matrix sums to {sums[bad[0]]!r}, not 1")
    if (cmat < 0).any():
        raise GraphValidationError("assignment matrix has negative entries")


def soft_group_means(cmat: np.ndarray, s) -> Tuple[np.ndarray, np.ndarray]:
    mask0, mask1 = _group_masks(s)
    return cmat[mask0].mean(axis=0), cmat[mask1].mean(axis=0)


def delta_sp_soft(cmat, s) -> float:
    """Differentiable statistical parity over soft memberships."""
    cmat = np.asarray(cmat, dtype=np.float64)
    check_row_stochastic(cmat)
    m0, m1 = soft_group_means(cmat, s)
    return _total_variation(m0.tolist(), m1.tolist())


def delta_eo(preds, s, y) -> float:
    """|P(y_hat=1 | s=0, y=1) - P(y_hat=1 | s=1, y=1)|."""
    preds = np.asarray(preds, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    s = _as_binary_groups(s)
    pos = y == 1
    rates = []
    for group in (~s, s):
        members = pos & group
        count = int(members.sum())
        if count == 0:
            raise UndefinedMetricError("equal opportunity needs a positive example in each sensitive group")
        rates.append(int(preds[members].sum()) / count)
    return abs(rates[0] - rates[1])


def pearson(x, y) -> float:
    """Sample correlation; equals the cosine of the z-scored vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise GraphValidationError("pearson expects two vectors of equal length")
    if x.size < 2 or np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedMetricError("correlation is undefined for zero-variance input")
    return float(np.clip(stats.pearsonr(x, y).statistic, -1.0, 1.0))


def correlation_interval(angle_xy: float, angle_yz: float) -> Tuple[float, float]:
    """Range of rho(x, z) when rho(x, y) = cos(angle_xy) and rho(y, z) = cos(angle_yz)."""
    for angle in (angle_xy, angle_yz):
        if not 0.0 <= angle <= math.pi:
            raise DomainError(f"angle {angle} outside [0, pi]")
    return math.cos(min(angle_xy + angle_yz, math.pi)), math.cos(abs(angle_xy - angle_yz))


def correlation_bound(alpha: float, delta: float) -> CorrelationBound:
    """Bound on rho(s, y_hat) from rho(c, y_hat) = cos(alpha) and |angle(s, c) - pi/2| <= delta."""
    if alpha < 0 or delta < 0 or alpha + delta > math.pi / 2 + 1e-15:
        raise DomainError(f"need alpha, delta >= 0 and alpha + delta <= pi/2, got {alpha}, {delta}")
    spread = alpha + delta
    low = math.cos(math.pi / 2 + spread)
    high = math.cos(math.pi / 2 - spread)
    # both endpoints are +-sin(spread); force exact symmetry
    half = 0.5 * (high - low)
    return CorrelationBound(alpha=alpha, delta=delta, interval=(-half, half))


def f1_binary(y_true, y_pred) -> float:
    """F1 of the positive class; a constant ground truth scores its own class."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    classes = np.unique(y_true)
    pos_label = int(classes[0]) if classes.size == 1 else 1
    return float(f1_score(y_true, y_pred, pos_label=pos_label, average="binary", zero_division=0))


def _check_auc_inputs(y_true, scores) -> Tuple[np.ndarray, np.ndarray]:
    y_true = np.asarray(y_true, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    if y_true.shape != scores.shape:
        raise GraphValidationError("labels and scores must have the same length")
    if np.unique(y_true).size < 2:
        raise UndefinedMetricError("AUC is undefined when only one class is present")
    return y_true, scores


def auc_rank(y_true, scores) -> float:
    """AUC as the Mann-Whitney rank statistic (ties get average ranks)."""
    y_true, scores = _check_auc_inputs(y_true, scores)
    ranks = stats.rankdata(scores)
    pos = y_true == 1
    n_pos = int(pos.sum())
    n_neg = len(y_true) - n_pos
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auc_trapezoid(y_true, scores) -> float:
    """AUC by trapezoidal integration of the ROC curve."""
    y_true, scores = _check_auc_inputs(y_true, scores)
    fpr, tpr, _ = roc_curve(y_true, scores)
    return float(sk_auc(fpr, tpr))
