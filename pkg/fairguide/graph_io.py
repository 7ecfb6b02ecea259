"""Reading and writing datasets, addition logs and traces."""

import csv
import hashlib
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DomainError, FairGuideError, GraphParseError, GraphValidationError, NodeIndexError
from .graph import EdgeBatch, Graph, build_adjacency


logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

EDGES_FILE = "edges.tsv"
FEATURES_FILE = "features.csv"
SENSITIVE_FILE = "sensitive.txt"
LABELS_FILE = "labels.txt"
ADDITIONS_FILE = "additions.tsv"
TRACE_FILE = "trace.csv"
NODE_IDS_FILE = "node_ids.tsv"

TRACE_COLUMNS = ["iteration", "soft_dsp_before", "soft_dsp_after", "batch_size", "cross_group_fraction"]


class ArtifactWriteError(FairGuideError):
    """Writing an output file failed."""
    exit_code = 2

    def __init__(self, path: PathLike, reason: str):
        self.path = str(path)
        super().__init__(f"Cannot write {path}: {reason}")


def _content_lines(path: PathLike):
    """Yield (line_number, stripped_text) skipping blanks and '#' comments."""
    with open(path, "r") as f:
        for number, raw in enumerate(f, start=1):
            text = raw.split("#", 1)[0].strip()
            if text:
                yield number, text


def _read_int_column(path: PathLike) -> List[Tuple[int, int]]:
    values = []
    for number, text in _content_lines(path):
        try:
            values.append((number, int(text)))
        except ValueError:
            raise GraphParseError(str(path), number, f"expected an integer, got '{text}'")
    return values


def read_sensitive(path: PathLike) -> np.ndarray:
    values = _read_int_column(path)
    for number, value in values:
        if value not in (0, 1):
            raise DomainError(f"{path}:{number}: sensitive value must be 0 or 1, got {value}")
    return np.array([v for _, v in values], dtype=np.int64)


def read_labels(path: PathLike, num_nodes: int) -> np.ndarray:
    values = _read_int_column(path)
    if len(values) != num_nodes:
        raise GraphValidationError(f"{path}: expected {num_nodes} labels, got {len(values)}")
    for number, value in values:
        if value < -1:
            raise DomainError(f"{path}:{number}: labels must be >= -1, got {value}")
    return np.array([v for _, v in values], dtype=np.int64)


def read_features(path: PathLike, num_nodes: Optional[int] = None) -> np.ndarray:
    """Feature CSV with an optional header row."""
    rows: List[List[float]] = []
    for index, (number, text) in enumerate(_content_lines(path)):
        try:
            values = [float(cell) for cell in text.split(",")]
        except ValueError:
            if index == 0:
                continue  # header
            raise GraphParseError(str(path), number, f"malformed feature row '{text}'")
        if rows and len(values) != len(rows[0]):
            raise GraphParseError(str(path), number, f"expected {len(rows[0])} columns, got {len(values)}")
        rows.append(values)
    features = np.array(rows, dtype=np.float64) if rows else np.zeros((0, 1))
    if num_nodes is not None and features.shape[0] != num_nodes:
        raise GraphValidationError(f"{path}: expected {num_nodes} feature rows, got {features.shape[0]}")
    return features


def read_edge_list(path: PathLike, num_nodes: int) -> np.ndarray:
    """Parse an edge list; returns unique unordered pairs with i < j."""
    pairs = []
    self_loops = 0
    for number, text in _content_lines(path):
        parts = text.split()
        if len(parts) != 2:
            raise GraphParseError(str(path), number, f"expected two node ids, got '{text}'")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphParseError(str(path), number, f"node ids must be integers, got '{text}'")
        for node in (i, j):
            if not 0 <= node < num_nodes:
                raise NodeIndexError(node, num_nodes, number)
        if i == j:
            self_loops += 1
            continue
        pairs.append((min(i, j), max(i, j)))
    if self_loops:
        logger.warning(f"Dropped {self_loops} self-loop line(s) from {path}")
    if not pairs:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(np.array(pairs, dtype=np.int64), axis=0)


def load_graph(edge_list_source: PathLike, feature_source: PathLike, sensitive_source: PathLike,
               label_source: Optional[PathLike] = None) -> Graph:
    """Load and validate a graph; N is the length of the sensitive file."""
    sensitive = read_sensitive(sensitive_source)
    n = len(sensitive)
    features = read_features(feature_source, n)
    pairs = read_edge_list(edge_list_source, n)
    labels = read_labels(label_source, n) if label_source is not None else None
    g = Graph(adjacency=build_adjacency(n, pairs), features=features,
              sensitive=sensitive, labels=labels)
    logger.info(f"Loaded graph with {n} nodes and {g.edge_count} edges from {edge_list_source}")
    return g


def load_dataset(directory: PathLike, edge_list_source: Optional[PathLike] = None) -> Graph:
    """Load a dataset directory; ``edge_list_source`` swaps in another edge list."""
    directory = Path(directory)
    labels = directory / LABELS_FILE
    return load_graph(
        edge_list_source or directory / EDGES_FILE,
        directory / FEATURES_FILE,
        directory / SENSITIVE_FILE,
        labels if labels.exists() else None,
    )


def resolve_edge_source(path: PathLike) -> Path:
    """Accept either a dataset directory or an edge list file."""
    path = Path(path)
    return path / EDGES_FILE if path.is_dir() else path


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            f.write(text)
    except OSError as e:
        raise ArtifactWriteError(path, e.strerror or str(e))


def format_edges(pairs: Sequence[Tuple[int, int]]) -> str:
    return "".join(f"{i}\t{j}\n" for i, j in pairs)


def save_graph(g: Graph, directory: PathLike) -> Dict[str, str]:
    """Write the four dataset files; returns their paths by role."""
    directory = Path(directory)
    edges = [tuple(p) for p in g.edge_array().tolist()]
    paths = {
        "edges": directory / EDGES_FILE,
        "features": directory / FEATURES_FILE,
        "sensitive": directory / SENSITIVE_FILE,
    }
    _write_text(paths["edges"], f"# {g.num_nodes} nodes, {len(edges)} edges\n" + format_edges(edges))
    feature_rows = "".join(",".join(repr(float(v)) for v in row) + "\n" for row in g.features)
    _write_text(paths["features"], feature_rows)
    _write_text(paths["sensitive"], "".join(f"{int(v)}\n" for v in g.sensitive))
    if g.labels is not None:
        paths["labels"] = directory / LABELS_FILE
        _write_text(paths["labels"], "".join(f"{int(v)}\n" for v in g.labels))
    logger.info(f"Saved graph with {g.num_nodes} nodes and {len(edges)} edges to {directory}")
    return {k: str(v) for k, v in paths.items()}


def save_edge_additions(batches: Sequence[EdgeBatch], path: PathLike) -> str:
    """Addition log: '# iteration k' headers followed by 'i<TAB>j' lines."""
    blocks = []
    for batch in batches:
        blocks.append(f"# iteration {batch.iteration_index}\n" + format_edges(batch.pairs))
    _write_text(Path(path), "".join(blocks))
    return str(path)


def load_edge_additions(path: PathLike) -> List[EdgeBatch]:
    """Read an addition log back into ordered batches."""
    batches: List[EdgeBatch] = []
    with open(path, "r") as f:
        for number, raw in enumerate(f, start=1):
            text = raw.strip()
            if not text:
                continue
            if text.startswith("#"):
                header = text[1:].split()
                if len(header) != 2 or header[0] != "iteration":
                    raise GraphParseError(str(path), number, f"expected '# iteration k', got '{text}'")
                try:
                    batches.append(EdgeBatch(iteration_index=int(header[1])))
                except ValueError:
                    raise GraphParseError(str(path), number, f"bad iteration index in '{text}'")
                continue
            if not batches:
                raise GraphParseError(str(path), number, "edge line before any iteration header")
            parts = text.split()
            try:
                i, j = int(parts[0]), int(parts[1])
            except (ValueError, IndexError):
                raise GraphParseError(str(path), number, f"expected 'i<TAB>j', got '{text}'")
            batches[-1].pairs.append((i, j))
    return batches


def save_trace(rows: Sequence[Dict[str, object]], path: PathLike) -> str:
    """Write per-iteration trace rows as CSV."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=TRACE_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    except OSError as e:
        raise ArtifactWriteError(path, e.strerror or str(e))
    return str(path)


def remap_edge_list(source: PathLike, edges_out: PathLike, mapping_out: PathLike) -> Dict[str, int]:
    """Rewrite an edge list with arbitrary ids into dense ids 0..N-1.

    Ids are numbered in order of first appearance; the sidecar mapping
    file holds 'dense<TAB>original' lines.
    """
    mapping: Dict[str, int] = {}
    pairs = []
    for number, text in _content_lines(source):
        parts = text.split()
        if len(parts) != 2:
            raise GraphParseError(str(source), number, f"expected two node ids, got '{text}'")
        dense = []
        for token in parts:
            if token not in mapping:
                mapping[token] = len(mapping)
            dense.append(mapping[token])
        pairs.append(tuple(dense))
    _write_text(Path(edges_out), format_edges(pairs))
    _write_text(Path(mapping_out), "".join(f"{v}\t{k}\n" for k, v in mapping.items()))
    logger.info(f"Remapped {len(mapping)} node ids from {source}")
    return mapping


def file_digest(path: PathLike) -> str:
    """sha256 of a file's bytes."""
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def dataset_digests(directory: PathLike) -> Dict[str, str]:
    directory = Path(directory)
    digests = {}
    for name in (EDGES_FILE, FEATURES_FILE, SENSITIVE_FILE, LABELS_FILE):
        path = directory / name
        if path.exists():
            digests[str(path)] = file_digest(path)
    return digests


def ensure_dataset_dir(directory: PathLike) -> Path:
    directory = Path(directory)
    missing = [n for n in (EDGES_FILE, FEATURES_FILE, SENSITIVE_FILE) if not (directory / n).exists()]
    if missing:
        raise GraphValidationError(f"Dataset directory {directory} is missing: {', '.join(missing)}")
    return directory

