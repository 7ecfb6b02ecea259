"""Tests for fairness, correlation and classification metrics."""

import math

import numpy as np
import pytest

from fairguide.errors import DomainError, GraphValidationError, UndefinedMetricError
from fairguide.metrics import (auc_rank, auc_trapezoid, correlation_bound, correlation_interval,
                               delta_eo, delta_sp_binary, delta_sp_multiclass, delta_sp_soft, f1_binary,
                               group_stats, pearson)


def brute_sp_binary(preds, s):
    counts = {0: [0, 0], 1: [0, 0]}
    for p, g in zip(preds, s):
        counts[int(g)][0] += int(p)
        counts[int(g)][1] += 1
    return abs(counts[0][0] / counts[0][1] - counts[1][0] / counts[1][1])


def brute_sp_multiclass(assignments, s):
    classes = max(int(a) for a in assignments) + 1
    sizes = [sum(1 for g in s if g == grp) for grp in (0, 1)]
    total = 0.0
    for k in range(classes):
        r0 = sum(1 for a, g in zip(assignments, s) if g == 0 and a == k) / sizes[0]
        r1 = sum(1 for a, g in zip(assignments, s) if g == 1 and a == k) / sizes[1]
        total += abs(r0 - r1)
    return 0.5 * total


def brute_eo(preds, s, y):
    rates = []
    for grp in (0, 1):
        hits = [int(p) for p, g, t in zip(preds, s, y) if g == grp and t == 1]
        rates.append(sum(hits) / len(hits))
    return abs(rates[0] - rates[1])


def _random_groups(rng, n):
    s = rng.integers(0, 2, size=n)
    s[0], s[1] = 0, 1
    return s


class TestStatisticalParity:
    """Statistical parity forms against brute-force counting."""

    def test_binary_matches_brute_force(self):
        """1000 random instances agree exactly."""
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n = int(rng.integers(2, 40))
            s = _random_groups(rng, n)
            preds = rng.integers(0, 2, size=n)
            assert delta_sp_binary(preds, s) == brute_sp_binary(preds, s)

    def test_multiclass_matches_brute_force(self):
        """1000 random instances agree exactly."""
        rng = np.random.default_rng(1)
        for _ in range(1000):
            n = int(rng.integers(2, 40))
            s = _random_groups(rng, n)
            assignments = rng.integers(0, int(rng.integers(1, 6)), size=n)
            assert delta_sp_multiclass(assignments, s) == brute_sp_multiclass(assignments, s)

    def test_multiclass_ignores_class_ids(self):
        """Permuting class ids leaves the disparity unchanged."""
        rng = np.random.default_rng(7)
        for _ in range(200):
            n = int(rng.integers(2, 40))
            classes = int(rng.integers(2, 6))
            s = _random_groups(rng, n)
            assignments = rng.integers(0, classes, size=n)
            relabel = rng.permutation(classes)
            assert delta_sp_multiclass(relabel[assignments], s) == pytest.approx(
                delta_sp_multiclass(assignments, s), abs=1e-12)

    def test_eo_matches_brute_force(self):
        """1000 random instances agree exactly."""
        rng = np.random.default_rng(2)
        for _ in range(1000):
            n = int(rng.integers(4, 40))
            s = _random_groups(rng, n)
            y = rng.integers(0, 2, size=n)
            y[0], y[1] = 1, 1
            preds = rng.integers(0, 2, size=n)
            assert delta_eo(preds, s, y) == brute_eo(preds, s, y)

    def test_soft_equals_multiclass_on_onehot(self):
        """One-hot soft assignments reproduce the hard value bit for bit."""
        rng = np.random.default_rng(3)
        for _ in range(200):
            n = int(rng.integers(2, 30))
            c = int(rng.integers(1, 6))
            s = _random_groups(rng, n)
            labels = rng.integers(0, c, size=n)
            onehot = np.zeros((n, c))
            onehot[np.arange(n), labels] = 1.0
            assert delta_sp_soft(onehot, s) == delta_sp_multiclass(labels, s)

    def test_binary_is_multiclass_with_two_classes(self):
        """For two classes the total variation equals the rate gap."""
        preds = np.array([1, 0, 1, 1, 0, 0])
        s = np.array([0, 0, 0, 1, 1, 1])
        assert delta_sp_binary(preds, s) == pytest.approx(delta_sp_multiclass(preds, s))
        assert delta_sp_binary(preds, s) == pytest.approx(2.0 / 3.0 - 1.0 / 3.0)

    def test_identical_distributions_give_zero(self):
        """Same class mix in both groups means no disparity."""
        assert delta_sp_multiclass([0, 1, 0, 1], [0, 0, 1, 1]) == 0.0

    def test_empty_group_is_undefined(self):
        """A missing group makes parity undefined."""
        with pytest.raises(UndefinedMetricError):
            delta_sp_binary([1, 0], [0, 0])

    def test_non_binary_group_rejected(self):
        """Sensitive values outside {0, 1} are a domain error."""
        with pytest.raises(DomainError):
            delta_sp_multiclass([0, 1], [0, 2])

    def test_soft_rows_must_sum_to_one(self):
        """Soft assignments have to be row stochastic."""
        with pytest.raises(GraphValidationError):
            delta_sp_soft(np.array([[0.5, 0.2], [0.5, 0.5]]), [0, 1])

    def test_eo_without_positive_is_undefined(self):
        """A group without positives makes equal opportunity undefined."""
        with pytest.raises(UndefinedMetricError):
            delta_eo([1, 1, 0], [0, 1, 1], [1, 0, 0])

    def test_group_stats(self):
        """Counts and rates per group."""
        gs = group_stats([0, 1, 1, 2], [0, 0, 1, 1])
        assert gs.group_sizes == (2, 2)
        assert gs.class_counts.tolist() == [[1, 1, 0], [0, 1, 1]]
        assert gs.num_nodes == 4


class TestCorrelation:
    """Pearson correlation and the angular bounds."""

    def test_pearson_is_cosine_of_zscores(self):
        """rho equals the cosine between centered, scaled vectors."""
        rng = np.random.default_rng(4)
        x, y = rng.normal(size=30), rng.normal(size=30)
        zx = (x - x.mean()) / x.std()
        zy = (y - y.mean()) / y.std()
        cos = float(zx @ zy / (np.linalg.norm(zx) * np.linalg.norm(zy)))
        assert pearson(x, y) == pytest.approx(cos, abs=1e-12)

    def test_pearson_affine_invariance(self):
        """Positive affine maps keep rho; negating one side flips its sign."""
        rng = np.random.default_rng(5)
        x, y = rng.normal(size=50), rng.normal(size=50)
        rho = pearson(x, y)
        assert pearson(2.5 * x + 7.0, y) == pytest.approx(rho, abs=1e-12)
        assert pearson(x, 0.1 * y - 3.0) == pytest.approx(rho, abs=1e-12)
        assert pearson(-x, y) == pytest.approx(-rho, abs=1e-12)
        assert pearson([1, 2, 3, 4], [2 * v + 3 for v in (1, 2, 3, 4)]) == pytest.approx(1.0)

    def test_pearson_zero_variance(self):
        """Constant input has no correlation."""
        with pytest.raises(UndefinedMetricError):
            pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_correlation_interval(self):
        """cos of the sum and of the difference of the angles."""
        low, high = correlation_interval(math.pi / 3, math.pi / 6)
        assert low == pytest.approx(0.0, abs=1e-15)
        assert high == pytest.approx(math.cos(math.pi / 6))
        assert correlation_interval(math.pi, math.pi)[0] == -1.0

    def test_bound_is_symmetric(self):
        """The sensitive correlation bound is +-sin(alpha + delta)."""
        bound = correlation_bound(0.3, 0.2)
        low, high = bound.interval
        assert low == -high
        assert high == pytest.approx(math.sin(0.5))

    def test_bound_degenerates_to_zero(self):
        """Orthogonal premises force zero correlation."""
        assert correlation_bound(0.0, 0.0).interval == (0.0, 0.0)

    def test_bound_domain(self):
        """alpha + delta above pi/2 is rejected."""
        with pytest.raises(DomainError):
            correlation_bound(1.0, 1.0)
        with pytest.raises(DomainError):
            correlation_bound(-0.1, 0.0)

    def test_bound_holds_on_random_triples(self):
        """No constructed triple violates the bound beyond numerical slack."""
        rng = np.random.default_rng(5)
        t, n = 50000, 8

        def zscore(v):
            v = v - v.mean(axis=1, keepdims=True)
            return v / np.linalg.norm(v, axis=1, keepdims=True)

        c = rng.normal(size=(t, n))
        s = rng.normal(size=(t, n))
        y = c + rng.uniform(0.2, 3.0, size=(t, 1)) * rng.normal(size=(t, n))
        zc, zs, zy = zscore(c), zscore(s), zscore(y)
        rho_cy = np.clip(np.einsum("ij,ij->i", zc, zy), -1.0, 1.0)
        rho_sc = np.clip(np.einsum("ij,ij->i", zs, zc), -1.0, 1.0)
        rho_sy = np.einsum("ij,ij->i", zs, zy)
        alpha = np.arccos(rho_cy)
        delta = np.abs(np.arccos(rho_sc) - math.pi / 2)
        usable = np.flatnonzero(alpha + delta <= math.pi / 2)
        assert len(usable) >= 10000

        violations = 0
        for k in usable:
            if not correlation_bound(float(alpha[k]), float(delta[k])).contains(float(rho_sy[k]), slack=1e-9):
                violations += 1
        assert violations == 0


class TestClassification:
    """F1 and the two AUC implementations."""

    def test_auc_implementations_agree(self):
        """Rank statistic equals trapezoidal ROC area on random scores."""
        rng = np.random.default_rng(6)
        for _ in range(200):
            n = int(rng.integers(2, 60))
            y = rng.integers(0, 2, size=n)
            y[0], y[1] = 0, 1
            scores = rng.random(n) if rng.random() < 0.5 else rng.integers(0, 4, size=n).astype(float)
            assert auc_rank(y, scores) == pytest.approx(auc_trapezoid(y, scores), abs=1e-9)

    def test_auc_perfect_and_reversed(self):
        """Separating scores give 1, reversed give 0."""
        y = [0, 0, 1, 1]
        assert auc_rank(y, [0.1, 0.2, 0.8, 0.9]) == 1.0
        assert auc_rank(y, [0.9, 0.8, 0.2, 0.1]) == 0.0

    def test_auc_single_class_undefined(self):
        """One class only leaves AUC undefined."""
        with pytest.raises(UndefinedMetricError):
            auc_rank([1, 1, 1], [0.1, 0.5, 0.9])
        with pytest.raises(UndefinedMetricError):
            auc_trapezoid([0, 0], [0.1, 0.5])

    def test_f1_constant_labels(self):
        """A constant ground truth scores its own class."""
        assert f1_binary([1, 1, 1], [1, 1, 1]) == 1.0
        assert f1_binary([0, 0, 0], [0, 0, 0]) == 1.0

    def test_f1_positive_class(self):
        """F1 of class 1 from precision and recall."""
        assert f1_binary([1, 1, 0, 0], [1, 0, 1, 0]) == pytest.approx(0.5)
