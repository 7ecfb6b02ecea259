"""Seeded stochastic block model graphs with a biased sensitive attribute."""

import logging
from dataclasses import asdict, dataclass
from typing import Dict, List

import networkx as nx
import numpy as np

from .errors import DomainError
from .graph import Graph, make_graph
from .seeding import derive_rng, derive_seed


logger = logging.getLogger(__name__)


@dataclass
class SbmSpec:
    """Parameters of a synthetic attributed SBM."""
    num_nodes: int = 200
    num_blocks: int = 2
    p_in: float = 0.1
    p_out: float = 0.005
    alignment: float = 0.95  # P(s equals the block's majority attribute)
    feature_dim: int = 8
    feature_signal: float = 3.0  # mean shift of a block's feature direction
    label_noise: float = 0.1  # rate at which the block label is flipped
    seed: int = 10

    def validate(self) -> List[str]:
        issues = []
        for name in ("p_in", "p_out", "alignment", "label_noise"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                issues.append(f"{name} must lie in [0, 1], got {value}")
        if self.num_blocks < 2:
            issues.append(f"num_blocks must be at least 2, got {self.num_blocks}")
        if self.num_nodes < self.num_blocks:
            issues.append(f"num_nodes ({self.num_nodes}) must be at least num_blocks ({self.num_blocks})")
        if self.feature_dim < 1:
            issues.append(f"feature_dim must be at least 1, got {self.feature_dim}")
        return issues

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


def block_assignment(spec: SbmSpec) -> np.ndarray:
    """Round-robin blocks: node i belongs to block i mod B."""
    return np.arange(spec.num_nodes, dtype=np.int64) % spec.num_blocks


def expected_edge_count(spec: SbmSpec) -> float:
    sizes = np.bincount(block_assignment(spec), minlength=spec.num_blocks).astype(np.float64)
    within = float(np.sum(sizes * (sizes - 1) / 2.0))
    total = spec.num_nodes * (spec.num_nodes - 1) / 2.0
    return within * spec.p_in + (total - within) * spec.p_out


def spec_for_average_degree(num_nodes: int, degree: float, num_blocks: int = 2, ratio: float = 20.0,
                            seed: int = 10) -> SbmSpec:
    """SBM whose expected average degree is ``degree`` with p_in = ratio * p_out."""
    per_block = num_nodes / num_blocks
    p_out = degree / (ratio * (per_block - 1) + (num_nodes - per_block))
    return SbmSpec(num_nodes=num_nodes, num_blocks=num_blocks, p_in=min(1.0, ratio * p_out),
                   p_out=p_out, seed=seed)


def _block_edges(spec: SbmSpec, blocks: np.ndarray) -> np.ndarray:
    """Edge pairs of an undirected SBM over the round-robin block layout."""
    sizes = np.bincount(blocks, minlength=spec.num_blocks).tolist()
    probs = np.full((spec.num_blocks, spec.num_blocks), spec.p_out)
    np.fill_diagonal(probs, spec.p_in)
    # networkx fills blocks from consecutive nodelist slices
    nodelist = np.argsort(blocks, kind="stable").tolist()
    sampled = nx.stochastic_block_model(sizes, probs.tolist(), nodelist=nodelist,
                                        seed=derive_seed(spec.seed, "sbm"))
    pairs = np.array(list(sampled.edges()), dtype=np.int64)
    return pairs if len(pairs) else np.zeros((0, 2), dtype=np.int64)


def generate_sbm(spec: SbmSpec) -> Graph:
    """Sample the edge set with networkx, then attributes, features and labels from the SBM stream."""
    issues = spec.validate()
    if issues:
        raise DomainError("; ".join(issues))

    rng = derive_rng(spec.seed, "sbm")
    n = spec.num_nodes
    blocks = block_assignment(spec)
    pairs = _block_edges(spec, blocks)

    majority = blocks % 2
    flip = rng.random(n) >= spec.alignment
    sensitive = np.where(flip, 1 - majority, majority)

    means = np.zeros((spec.num_blocks, spec.feature_dim))
    means[np.arange(spec.num_blocks), np.arange(spec.num_blocks) % spec.feature_dim] = spec.feature_signal
    features = means[blocks] + rng.standard_normal((n, spec.feature_dim))

    labels = blocks % 2
    noisy = rng.random(n) < spec.label_noise
    labels = np.where(noisy, 1 - labels, labels)

    g = make_graph(n, pairs, features=features, sensitive=sensitive, labels=labels)
    logger.info(f"Generated SBM with {n} nodes, {g.edge_count} edges "
                f"(expected {expected_edge_count(spec):.1f}), seed {spec.seed}")
    return g
