"""Attributed graph representation and addition-only edits."""

import logging
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Set, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, GraphConstraintError, GraphValidationError, NodeIndexError


logger = logging.getLogger(__name__)

Pair = Tuple[int, int]


@dataclass(frozen=True)
class Graph:
    """Undirected attributed graph.

    ``adjacency`` is a symmetric CSR matrix with unit entries and an empty
    diagonal. Instances are treated as immutable; ``add_edges`` returns a
    new graph.
    """
    adjacency: sp.csr_matrix
    features: np.ndarray
    sensitive: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        validate_graph(self)

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def edge_count(self) -> int:
        return int(self.adjacency.nnz // 2)

    @property
    def edges(self) -> Set[Pair]:
        upper = sp.triu(self.adjacency, k=1).tocoo()
        return {(int(i), int(j)) for i, j in zip(upper.row, upper.col)}

    def edge_array(self) -> np.ndarray:
        """Edges as an (|E|, 2) array with i < j, sorted lexicographically."""
        upper = sp.triu(self.adjacency, k=1).tocoo()
        pairs = np.column_stack([upper.row, upper.col]).astype(np.int64)
        order = np.lexsort((pairs[:, 1], pairs[:, 0]))
        return pairs[order]

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr).astype(np.int64)

    def has_edge(self, i: int, j: int) -> bool:
        row = self.adjacency.indices[self.adjacency.indptr[i]:self.adjacency.indptr[i + 1]]
        return bool(np.any(row == j))

    def cross_group_edge_fraction(self) -> float:
        """Share of edges whose endpoints have different sensitive values."""
        pairs = self.edge_array()
        if len(pairs) == 0:
            return 0.0
        s = self.sensitive
        return float(np.mean(s[pairs[:, 0]] != s[pairs[:, 1]]))

    def with_adjacency(self, adjacency: sp.csr_matrix) -> "Graph":
        return Graph(adjacency=adjacency, features=self.features,
                     sensitive=self.sensitive, labels=self.labels)


@dataclass(frozen=True)
class NormAdj:
    """Symmetric normalization of A + I."""
    matrix: sp.csr_matrix
    degree_vector: np.ndarray


@dataclass
class EdgeBatch:
    """Links added in one pipeline round."""
    pairs: List[Pair] = field(default_factory=list)
    iteration_index: int = 0
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.pairs)


def build_adjacency(num_nodes: int, pairs: np.ndarray) -> sp.csr_matrix:
    """Symmetric binary CSR matrix from an (m, 2) array of unordered pairs.

    Reciprocal and repeated pairs collapse; callers drop self-loops first.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
    data = np.ones(len(rows), dtype=np.float64)
    adj = sp.csr_matrix((data, (rows, cols)), shape=(num_nodes, num_nodes))
    adj.sum_duplicates()
    adj.data[:] = 1.0
    adj.sort_indices()
    return adj


def make_graph(num_nodes: int, pairs, features: Optional[np.ndarray] = None,
               sensitive=None, labels=None) -> Graph:
    """Convenience constructor used by generators and tests."""
    pairs = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs,
                       dtype=np.int64).reshape(-1, 2)
    if features is None:
        features = np.zeros((num_nodes, 1))
    if sensitive is None:
        sensitive = np.zeros(num_nodes, dtype=np.int64)
    return Graph(
        adjacency=build_adjacency(num_nodes, pairs),
        features=np.asarray(features, dtype=np.float64),
        sensitive=np.asarray(sensitive, dtype=np.int64),
        labels=None if labels is None else np.asarray(labels, dtype=np.int64),
    )


def validate_graph(g: Graph) -> None:
    """Raise GraphValidationError if any structural invariant is violated."""
    adj = g.adjacency
    if not sp.isspmatrix_csr(adj):
        raise GraphValidationError("adjacency must be a CSR matrix")
    n, m = adj.shape
    if n != m:
        raise GraphValidationError(f"adjacency must be square, got {adj.shape}")
    if adj.nnz and not np.all(adj.data == 1.0):
        raise GraphValidationError("adjacency entries must be exactly 0 or 1")
    if adj.diagonal().any():
        raise GraphValidationError("adjacency has self-loops")
    if (adj != adj.T).nnz:
        raise GraphValidationError("adjacency is not symmetric")
    if g.features.ndim != 2 or g.features.shape[0] != n:
        raise GraphValidationError(f"features must have {n} rows, got shape {g.features.shape}")
    if g.sensitive.shape != (n,):
        raise GraphValidationError(f"sensitive vector must have length {n}")
    if g.sensitive.size and not np.isin(g.sensitive, (0, 1)).all():
        raise DomainError("sensitive attribute values must be 0 or 1")
    if g.labels is not None and g.labels.shape != (n,):
        raise GraphValidationError(f"labels must have length {n}")


def standardize_features(x: np.ndarray) -> np.ndarray:
    """Zero mean, unit variance columns; constant columns become zero."""
    x = np.asarray(x, dtype=np.float64)
    std = x.std(axis=0)
    std[std == 0] = 1.0
    return (x - x.mean(axis=0)) / std


def normalize_matrix(adj: sp.spmatrix) -> NormAdj:
    """D^-1/2 (A + I) D^-1/2 for a possibly real-valued adjacency.

    Degrees are row sums of A + I. Accepting real entries lets the
    finite-difference oracle evaluate perturbed adjacencies.
    """
    n = adj.shape[0]
    tilde = (sp.csr_matrix(adj, dtype=np.float64) + sp.identity(n, format="csr")).tocsr()
    deg = np.asarray(tilde.sum(axis=1)).ravel()
    r = 1.0 / np.sqrt(deg)
    scale = sp.diags(r)
    matrix = (scale @ tilde @ scale).tocsr()
    matrix.sort_indices()
    return NormAdj(matrix=matrix, degree_vector=deg)


def normalized_adjacency(g: Graph) -> NormAdj:
    return normalize_matrix(g.adjacency)


def candidate_block(g: Graph, start: int, stop: int) -> Tuple[np.ndarray, np.ndarray]:
    """Non-edges (i, j), i < j, with start <= i < stop, in lexicographic order."""
    n = g.num_nodes
    stop = min(stop, n)
    if start >= stop:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    dense = g.adjacency[start:stop].toarray()
    rows = np.arange(start, stop)[:, None]
    cols = np.arange(n)[None, :]
    mask = (dense == 0) & (cols > rows)
    i, j = np.nonzero(mask)
    return (i + start).astype(np.int64), j.astype(np.int64)


def candidate_count(g: Graph) -> int:
    n = g.num_nodes
    return n * (n - 1) // 2 - g.edge_count


def candidate_edges(g: Graph, block_rows: int = 256) -> Iterator[Pair]:
    """Yield every unordered non-edge (i, j), i < j, lexicographically."""
    for start in range(0, g.num_nodes, block_rows):
        rows, cols = candidate_block(g, start, start + block_rows)
        for i, j in zip(rows.tolist(), cols.tolist()):
            yield i, j


def add_edges(g: Graph, batch: EdgeBatch) -> Graph:
    """Return ``g`` plus the batch; any invalid pair rejects the whole batch."""
    if not batch.pairs:
        return g
    n = g.num_nodes
    seen: Set[Pair] = set()
    for i, j in batch.pairs:
        for node in (i, j):
            if not 0 <= node < n:
                raise NodeIndexError(node, n)
        if i == j:
            raise GraphConstraintError(f"Self-pair ({i}, {j}) cannot be added")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise GraphConstraintError(f"Pair {key} appears twice in batch {batch.iteration_index}")
        if g.has_edge(i, j):
            raise GraphConstraintError(f"Pair {key} is already an edge")
        seen.add(key)

    new = np.array(sorted(seen), dtype=np.int64)
    added = build_adjacency(n, new)
    adjacency = (g.adjacency + added).tocsr()
    adjacency.sort_indices()
    logger.debug(f"Added {len(new)} edges in batch {batch.iteration_index}")
    return g.with_adjacency(adjacency)
