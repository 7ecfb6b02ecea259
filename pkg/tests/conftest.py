"""Shared fixtures: small graphs and fast model settings."""

import numpy as np
import pytest

from fairguide.community import kmeans
from fairguide.config import AutoencoderConfig, GcnConfig, GuideConfig
from fairguide.graph import make_graph
from fairguide.sbm import SbmSpec, generate_sbm


@pytest.fixture
def fast_autoencoder():
    return AutoencoderConfig(hidden=16, latent=4, epochs=30, lr=1e-2)


@pytest.fixture
def fast_gcn():
    return GcnConfig(hidden=16, epochs=60, lr=1e-2)


@pytest.fixture
def path_graph():
    """0-1-2-3-4 path with alternating groups and 2-d features."""
    features = np.array([[0.0, 1.0], [1.0, 0.0], [0.5, 0.5], [1.0, 1.0], [0.0, 0.0]])
    return make_graph(5, [(0, 1), (1, 2), (2, 3), (3, 4)], features=features, sensitive=[0, 1, 0, 1, 0])


@pytest.fixture
def small_sbm():
    """20-node biased SBM used by gradient and sampler tests."""
    return generate_sbm(SbmSpec(num_nodes=20, num_blocks=2, p_in=0.4, p_out=0.05, alignment=0.9,
                                feature_dim=4, seed=3))


@pytest.fixture
def acceptance_sbm():
    return generate_sbm(SbmSpec(num_nodes=200, num_blocks=2, p_in=0.1, p_out=0.005, alignment=0.95,
                                label_noise=0.1, seed=10))


@pytest.fixture
def block_init():
    """Factory: K-means init on the raw features of a graph (no autoencoder)."""
    def build(g, communities=2, seed=10):
        return kmeans(g.features, communities, seed)
    return build


@pytest.fixture
def quick_guide_config():
    return GuideConfig(budget=10, batch_k=5, communities=2, seed=10)
