"""Differentiable pseudo community detection.

Communities are seeded from node features (autoencoder embedding then
K-means) and smoothed over the graph by K steps of propagation with
restart, followed by a row softmax.
"""

import hashlib
import io
import json
import logging
import struct
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.special import softmax
from sklearn.cluster import kmeans_plusplus

from .config import AutoencoderConfig
from .errors import DomainError, GraphValidationError, NumericalError
from .graph import Graph, NormAdj, normalized_adjacency, standardize_features
from .metrics import delta_sp_soft
from .optim import RMSProp, glorot
from .seeding import derive_rng, derive_seed


logger = logging.getLogger(__name__)

CACHE_MAGIC = b"FGCINIT\x00"
CACHE_VERSION = 1


@dataclass
class AutoencoderModel:
    """Tanh MLP autoencoder M -> H -> L -> H -> M with linear output."""
    weights: Dict[str, np.ndarray]
    hidden: int
    latent: int
    loss_trace: List[float] = field(default_factory=list)

    def encode(self, x: np.ndarray) -> np.ndarray:
        w = self.weights
        h = np.tanh(x @ w["W1"] + w["b1"])
        return h @ w["W2"] + w["b2"]

    def reconstruct(self, x: np.ndarray) -> np.ndarray:
        w = self.weights
        h = np.tanh(self.encode(x) @ w["W3"] + w["b3"])
        return h @ w["W4"] + w["b4"]


@dataclass
class CommunityInit:
    """Hard K-means communities and their one-hot matrix."""
    labels: np.ndarray
    onehot: np.ndarray
    centroids: np.ndarray
    num_communities: int
    inertia: float = 0.0


@dataclass
class CommunityAssignment:
    """Row-stochastic soft memberships after propagation."""
    soft: np.ndarray
    alpha: float
    k_steps: int


def train_autoencoder(x: np.ndarray, config: AutoencoderConfig, seed: int) -> AutoencoderModel:
    """Fit the autoencoder on mean squared reconstruction error (full batch, RMSProp)."""
    x = np.asarray(x, dtype=np.float64)
    n, m = x.shape
    if m < 1 or n < 1:
        raise GraphValidationError(f"autoencoder needs a non-empty feature matrix, got shape {x.shape}")
    if config.hidden < 1 or config.latent < 1 or config.epochs < 1 or config.lr <= 0:
        raise DomainError("autoencoder hidden, latent, epochs and lr must be positive")

    rng = derive_rng(seed, "autoencoder")
    h, l = config.hidden, config.latent
    params = {
        "W1": glorot(rng, m, h), "b1": np.zeros(h),
        "W2": glorot(rng, h, l), "b2": np.zeros(l),
        "W3": glorot(rng, l, h), "b3": np.zeros(h),
        "W4": glorot(rng, h, m), "b4": np.zeros(m),
    }
    optimizer = RMSProp(params, lr=config.lr)
    trace: List[float] = []
    scale = 2.0 / (n * m)

    for epoch in range(1, config.epochs + 1):
        h1 = np.tanh(x @ params["W1"] + params["b1"])
        z = h1 @ params["W2"] + params["b2"]
        h2 = np.tanh(z @ params["W3"] + params["b3"])
        out = h2 @ params["W4"] + params["b4"]
        diff = out - x
        loss = float(np.mean(diff * diff))
        if not np.isfinite(loss):
            raise NumericalError(f"autoencoder diverged at epoch {epoch}")
        trace.append(loss)

        d_out = scale * diff
        d_a2 = (d_out @ params["W4"].T) * (1.0 - h2 * h2)
        d_z = d_a2 @ params["W3"].T
        d_a1 = (d_z @ params["W2"].T) * (1.0 - h1 * h1)
        grads = {
            "W4": h2.T @ d_out, "b4": d_out.sum(axis=0),
            "W3": z.T @ d_a2, "b3": d_a2.sum(axis=0),
            "W2": h1.T @ d_z, "b2": d_z.sum(axis=0),
            "W1": x.T @ d_a1, "b1": d_a1.sum(axis=0),
        }
        optimizer.step(params, grads)

        if epoch == 1 or epoch % 100 == 0:
            logger.debug(f"autoencoder epoch {epoch}: reconstruction loss {loss:.6f}")

    return AutoencoderModel(weights=params, hidden=h, latent=l, loss_trace=trace)


def _squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def kmeans(latent: np.ndarray, num_communities: int, seed: int, max_iters: int = 300) -> CommunityInit:
    """Lloyd iterations from k-means++ seeds.

    Nearest-centroid ties go to the lowest centroid index. An empty
    cluster is re-seeded at the point farthest from its own centroid.
    """
    points = np.asarray(latent, dtype=np.float64)
    n = points.shape[0]
    c = int(num_communities)
    if not 1 <= c <= n:
        raise DomainError(f"need 1 <= communities <= nodes, got {c} communities for {n} nodes")

    centroids, _ = kmeans_plusplus(points, n_clusters=c, random_state=derive_seed(seed, "kmeans") % (2 ** 31))
    centroids = centroids.astype(np.float64)
    labels = np.full(n, -1, dtype=np.int64)

    for iteration in range(max_iters):
        d2 = _squared_distances(points, centroids)
        new_labels = np.argmin(d2, axis=1)
        new_labels = _reseed_empty(points, centroids, d2, new_labels, c)
        converged = np.array_equal(new_labels, labels)
        labels = new_labels
        for k in range(c):
            centroids[k] = points[labels == k].mean(axis=0)
        if converged:
            logger.debug(f"k-means converged after {iteration + 1} iterations")
            break
    else:
        logger.debug(f"k-means stopped at max_iters={max_iters}")

    inertia = float(_squared_distances(points, centroids)[np.arange(n), labels].sum())
    onehot = np.zeros((n, c), dtype=np.float64)
    onehot[np.arange(n), labels] = 1.0
    return CommunityInit(labels=labels, onehot=onehot, centroids=centroids,
                         num_communities=c, inertia=inertia)


def _reseed_empty(points, centroids, d2, labels, c):
    labels = labels.copy()
    for k in range(c):
        counts = np.bincount(labels, minlength=c)
        if counts[k] > 0:
            continue
        own = d2[np.arange(len(labels)), labels].copy()
        own[counts[labels] <= 1] = -np.inf
        far = int(np.argmax(own))
        logger.debug(f"k-means cluster {k} empty; re-seeding at point {far}")
        labels[far] = k
        centroids[k] = points[far]
        d2[far] = _squared_distances(points[far:far + 1], centroids)[0]
    return labels


def propagation_trace(matrix: sp.spmatrix, c_init: np.ndarray, alpha: float, k_steps: int) -> List[np.ndarray]:
    """Z_0 = C_init, Z_{t+1} = (1 - alpha) A_hat Z_t + alpha C_init; returns Z_0..Z_K."""
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    if k_steps < 1:
        raise DomainError(f"k_steps must be at least 1, got {k_steps}")
    trace = [c_init]
    current = c_init
    for _ in range(k_steps):
        current = (1.0 - alpha) * (matrix @ current) + alpha * c_init
        trace.append(current)
    return trace


def propagate(init: CommunityInit, norm: NormAdj, alpha: float, k_steps: int) -> CommunityAssignment:
    z = propagation_trace(norm.matrix, init.onehot, alpha, k_steps)[-1]
    return CommunityAssignment(soft=softmax(z, axis=1), alpha=alpha, k_steps=k_steps)


def pseudo_task_loss(g: Graph, init: CommunityInit, alpha: float, k_steps: int) -> float:
    """Soft statistical parity of the propagated communities."""
    assignment = propagate(init, normalized_adjacency(g), alpha, k_steps)
    return delta_sp_soft(assignment.soft, g.sensitive)


def _cache_key(features: np.ndarray, num_communities: int, config: AutoencoderConfig, seed: int) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(features).tobytes())
    h.update(json.dumps({
        "shape": list(features.shape), "communities": num_communities, "seed": seed,
        "hidden": config.hidden, "latent": config.latent, "epochs": config.epochs,
        "lr": config.lr, "max_iters": config.kmeans_max_iters,
    }, sort_keys=True).encode())
    return h.hexdigest()


def save_community_cache(init: CommunityInit, key: str, path: Union[str, Path]) -> None:
    buffer = io.BytesIO()
    np.savez(buffer, labels=init.labels, centroids=init.centroids,
             inertia=np.array(init.inertia), key=np.array(key))
    with open(path, "wb") as f:
        f.write(CACHE_MAGIC)
        f.write(struct.pack("<I", CACHE_VERSION))
        f.write(buffer.getvalue())


def _read_cache(blob: bytes, path: Path, key: str) -> Optional[CommunityInit]:
    header = len(CACHE_MAGIC) + 4
    if blob[:len(CACHE_MAGIC)] != CACHE_MAGIC:
        logger.warning(f"Ignoring community cache {path}: bad magic header")
        return None
    (version,) = struct.unpack("<I", blob[len(CACHE_MAGIC):header])
    if version != CACHE_VERSION:
        logger.warning(f"Ignoring community cache {path}: version {version} != {CACHE_VERSION}")
        return None
    data = np.load(io.BytesIO(blob[header:]), allow_pickle=False)
    if str(data["key"]) != key:
        logger.info(f"Community cache {path} was built for other inputs; recomputing")
        return None
    labels = data["labels"].astype(np.int64)
    centroids = data["centroids"]
    c = centroids.shape[0]
    onehot = np.zeros((len(labels), c), dtype=np.float64)
    onehot[np.arange(len(labels)), labels] = 1.0
    return CommunityInit(labels=labels, onehot=onehot, centroids=centroids,
                         num_communities=c, inertia=float(data["inertia"]))


def load_community_cache(path: Union[str, Path], key: str) -> Optional[CommunityInit]:
    """Return the cached init, or None if missing, stale or unreadable."""
    path = Path(path)
    if not path.exists():
        return None
    try:
        with open(path, "rb") as f:
            blob = f.read()
        return _read_cache(blob, path, key)
    except (OSError, EOFError, KeyError, IndexError, ValueError, struct.error, zipfile.BadZipFile) as e:
        logger.warning(f"Ignoring unreadable community cache {path}: {e}")
        return None


def random_communities(num_nodes: int, num_communities: int, seed: int) -> CommunityInit:
    """Uniform random pseudo labels, for runs that skip the feature embedding."""
    c = int(num_communities)
    if not 1 <= c <= num_nodes:
        raise DomainError(f"need 1 <= communities <= nodes, got {c} communities for {num_nodes} nodes")
    labels = derive_rng(seed, "random_init").integers(0, c, size=num_nodes).astype(np.int64)
    onehot = np.zeros((num_nodes, c), dtype=np.float64)
    onehot[np.arange(num_nodes), labels] = 1.0
    sizes = np.bincount(labels, minlength=c)
    logger.info(f"Drew {c} random communities, sizes {sizes.tolist()}")
    return CommunityInit(labels=labels, onehot=onehot, centroids=np.zeros((c, 0)), num_communities=c)


def detect_initial_communities(features: np.ndarray, num_communities: int, config: AutoencoderConfig,
                               seed: int, cache_path: Optional[Union[str, Path]] = None) -> CommunityInit:
    """Standardize features, embed them with the autoencoder and cluster with K-means."""
    x = standardize_features(features)
    key = _cache_key(x, num_communities, config, seed)
    if cache_path is not None:
        cached = load_community_cache(cache_path, key)
        if cached is not None:
            logger.info(f"Loaded initial communities from cache {cache_path}")
            return cached

    model = train_autoencoder(x, config, seed)
    logger.info(f"Autoencoder trained: reconstruction loss {model.loss_trace[0]:.4f} -> {model.loss_trace[-1]:.4f}")
    init = kmeans(model.encode(x), num_communities, seed, config.kmeans_max_iters)
    sizes = np.bincount(init.labels, minlength=num_communities)
    logger.info(f"K-means found {num_communities} communities, sizes {sizes.tolist()}")

    if cache_path is not None:
        save_community_cache(init, key, cache_path)
        logger.info(f"Cached initial communities at {cache_path}")
    return init
