"""Per-component random streams derived from a single run seed.

A run seed is split by appending a fixed component id to a
``numpy.random.SeedSequence``; changing how one component consumes
randomness never shifts the stream of another.
"""

from typing import Dict

import numpy as np

COMPONENT_IDS: Dict[str, int] = {
    "autoencoder": 1,
    "kmeans": 2,
    "gumbel": 3,
    "baselines": 4,
    "sbm": 5,
    "gcn": 6,
    "louvain": 7,
    "splits": 8,
    "gradcheck": 9,
    "random_init": 10,
}


def _sequence(seed: int, component: str) -> np.random.SeedSequence:
    if component not in COMPONENT_IDS:
        raise KeyError(f"Unknown random component: {component}")
    return np.random.SeedSequence([int(seed), COMPONENT_IDS[component]])


def derive_rng(seed: int, component: str) -> np.random.Generator:
    """Return the generator for ``component`` under run seed ``seed``."""
    return np.random.default_rng(_sequence(seed, component))


def derive_seed(seed: int, component: str) -> int:
    """Integer seed for libraries that do not accept a Generator."""
    return int(_sequence(seed, component).generate_state(1)[0])
