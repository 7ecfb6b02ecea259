"""Naive link-addition baselines: uniform random links and feature-similarity links."""

import logging

import numpy as np

from .errors import GraphConstraintError
from .graph import EdgeBatch, Graph, add_edges, candidate_block, candidate_count, normalized_adjacency, \
    standardize_features
from .seeding import derive_rng


logger = logging.getLogger(__name__)


def _check_budget(g: Graph, n_links: int) -> None:
    if n_links < 0:
        raise GraphConstraintError(f"number of links must be non-negative, got {n_links}")
    available = candidate_count(g)
    if n_links > available:
        raise GraphConstraintError(f"cannot add {n_links} links: only {available} candidate pairs")


def random_batch(g: Graph, n_links: int, seed: int, block_rows: int = 256) -> EdgeBatch:
    """Uniform sample without replacement from the candidate pairs."""
    _check_budget(g, n_links)
    if n_links == 0:
        return EdgeBatch()
    rng = derive_rng(seed, "baselines")
    picks = np.sort(rng.choice(candidate_count(g), size=n_links, replace=False))

    pairs = []
    offset = 0
    cursor = 0
    for start in range(0, g.num_nodes, block_rows):
        rows, cols = candidate_block(g, start, start + block_rows)
        end = offset + len(rows)
        while cursor < len(picks) and picks[cursor] < end:
            k = int(picks[cursor]) - offset
            pairs.append((int(rows[k]), int(cols[k])))
            cursor += 1
        offset = end
        if cursor == len(picks):
            break
    return EdgeBatch(pairs=pairs)


def similarity_embedding(g: Graph) -> np.ndarray:
    """Row-normalized two-hop propagated standardized features; zero rows stay zero."""
    matrix = normalized_adjacency(g).matrix
    emb = matrix @ (matrix @ standardize_features(g.features))
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    return np.divide(emb, norms, out=np.zeros_like(emb), where=norms > 0)


def linkpred_batch(g: Graph, n_links: int, block_rows: int = 256) -> EdgeBatch:
    """The n_links candidates with the highest cosine similarity of embeddings."""
    _check_budget(g, n_links)
    if n_links == 0:
        return EdgeBatch()
    emb = similarity_embedding(g)
    best_i = np.zeros(0, dtype=np.int64)
    best_j = np.zeros(0, dtype=np.int64)
    best_v = np.zeros(0)
    for start in range(0, g.num_nodes, block_rows):
        rows, cols = candidate_block(g, start, start + block_rows)
        if not len(rows):
            continue
        sims = np.einsum("ij,ij->i", emb[rows], emb[cols])
        best_i = np.concatenate([best_i, rows])
        best_j = np.concatenate([best_j, cols])
        best_v = np.concatenate([best_v, sims])
        order = np.lexsort((best_j, best_i, -best_v))[:n_links]
        best_i, best_j, best_v = best_i[order], best_j[order], best_v[order]
    return EdgeBatch(pairs=[(int(i), int(j)) for i, j in zip(best_i, best_j)])


def baseline_random_add(g: Graph, n_links: int, seed: int) -> Graph:
    batch = random_batch(g, n_links, seed)
    logger.info(f"Random baseline adds {len(batch)} links (seed {seed})")
    return add_edges(g, batch)


def baseline_linkpred_add(g: Graph, n_links: int, seed: int = 0) -> Graph:
    """Connect the most similar nodes; deterministic, so ``seed`` is only recorded."""
    batch = linkpred_batch(g, n_links)
    logger.info(f"Link-prediction baseline adds {len(batch)} links")
    return add_edges(g, batch)
