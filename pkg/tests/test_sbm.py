"""Tests for the synthetic SBM generator."""

import numpy as np
import pytest

from fairguide.errors import DomainError
from fairguide.sbm import SbmSpec, block_assignment, expected_edge_count, generate_sbm, spec_for_average_degree


class TestGenerateSbm:
    """Structure and attributes of generated graphs."""

    def test_disjoint_cliques(self):
        """p_in = 1 and p_out = 0 give one clique per block."""
        g = generate_sbm(SbmSpec(num_nodes=10, p_in=1.0, p_out=0.0, seed=1))
        blocks = block_assignment(SbmSpec(num_nodes=10))
        assert g.edge_count == 2 * (5 * 4 // 2)
        assert all(blocks[i] == blocks[j] for i, j in g.edges)

    def test_empty_graph(self):
        """Zero probabilities give an edgeless graph that still carries attributes."""
        g = generate_sbm(SbmSpec(num_nodes=12, num_blocks=3, p_in=0.0, p_out=0.0, seed=1))
        assert g.edge_count == 0
        assert g.features.shape == (12, 8)

    def test_blocks_follow_round_robin_layout(self):
        """With p_out = 0 every edge joins nodes of the same block for any block count."""
        spec = SbmSpec(num_nodes=30, num_blocks=3, p_in=0.5, p_out=0.0, seed=6)
        g = generate_sbm(spec)
        blocks = block_assignment(spec)
        assert g.edge_count > 0
        assert all(blocks[i] == blocks[j] for i, j in g.edges)

    def test_full_alignment(self):
        """alignment = 1 makes the attribute equal the block parity."""
        spec = SbmSpec(num_nodes=40, alignment=1.0, seed=2)
        g = generate_sbm(spec)
        np.testing.assert_array_equal(g.sensitive, block_assignment(spec) % 2)

    def test_no_label_noise(self):
        """Without noise the label is the block parity."""
        spec = SbmSpec(num_nodes=40, label_noise=0.0, seed=2)
        np.testing.assert_array_equal(generate_sbm(spec).labels, block_assignment(spec) % 2)

    def test_edge_count_near_expectation(self):
        """The edge count lies within three standard deviations."""
        spec = SbmSpec(seed=10)
        sizes = np.bincount(block_assignment(spec)).astype(float)
        within = float(np.sum(sizes * (sizes - 1) / 2))
        between = spec.num_nodes * (spec.num_nodes - 1) / 2 - within
        sigma = np.sqrt(within * spec.p_in * (1 - spec.p_in) + between * spec.p_out * (1 - spec.p_out))
        g = generate_sbm(spec)
        assert abs(g.edge_count - expected_edge_count(spec)) <= 3 * sigma

    def test_same_seed_same_graph(self):
        """Generation is a pure function of its parameters."""
        a = generate_sbm(SbmSpec(num_nodes=50, seed=4))
        b = generate_sbm(SbmSpec(num_nodes=50, seed=4))
        assert a.edges == b.edges
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.sensitive, b.sensitive)
        assert a.edges != generate_sbm(SbmSpec(num_nodes=50, seed=5)).edges

    def test_feature_shape(self):
        """One feature row per node."""
        g = generate_sbm(SbmSpec(num_nodes=30, feature_dim=3, seed=1))
        assert g.features.shape == (30, 3)

    def test_invalid_spec(self):
        """Probabilities outside [0, 1] are rejected."""
        with pytest.raises(DomainError, match="p_in"):
            generate_sbm(SbmSpec(p_in=1.5))
        assert SbmSpec(num_blocks=1).validate()


class TestSpecHelpers:
    """Derived specs for benchmarks."""

    def test_average_degree(self):
        """The expected average degree matches the request."""
        spec = spec_for_average_degree(400, 8.0, seed=3)
        assert 2 * expected_edge_count(spec) / spec.num_nodes == pytest.approx(8.0)
        assert spec.p_in == pytest.approx(20 * spec.p_out)

    def test_to_dict(self):
        """Specs serialize to plain dicts."""
        assert SbmSpec(seed=7).to_dict()["seed"] == 7
