"""Two-layer graph convolutional network for downstream node classification.

softmax(A_hat relu(A_hat X W1) W2) trained with cross-entropy on the
training nodes; the epoch with the best validation F1 is kept.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy.special import softmax

from .config import GcnConfig
from .errors import DomainError, GraphValidationError, NumericalError
from .graph import Graph, normalized_adjacency, standardize_features
from .metrics import f1_binary
from .optim import Adam, glorot
from .seeding import derive_rng


logger = logging.getLogger(__name__)


@dataclass
class Split:
    """Disjoint train/validation/test node indices."""
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def validate(self, num_nodes: int) -> None:
        parts = [self.train, self.val, self.test]
        joined = np.concatenate(parts)
        if len(np.unique(joined)) != len(joined):
            raise GraphValidationError("train, validation and test splits overlap")
        if joined.size and (joined.min() < 0 or joined.max() >= num_nodes):
            raise GraphValidationError(f"split index out of range for {num_nodes} nodes")
        if not len(self.train):
            raise GraphValidationError("training split is empty")


def make_splits(labels: np.ndarray, seed: int, val_fraction: float = 0.25,
                test_fraction: float = 0.25) -> Split:
    """Shuffle labeled nodes (label >= 0) and cut them into train/val/test."""
    labels = np.asarray(labels)
    labeled = np.flatnonzero(labels >= 0)
    order = derive_rng(seed, "splits").permutation(labeled)
    n_val = int(round(val_fraction * len(order)))
    n_test = int(round(test_fraction * len(order)))
    val = np.sort(order[:n_val])
    test = np.sort(order[n_val:n_val + n_test])
    train = np.sort(order[n_val + n_test:])
    return Split(train=train, val=val, test=test)


@dataclass
class GcnResult:
    test_index: np.ndarray
    predictions: np.ndarray
    probabilities: np.ndarray  # P(class 1)
    best_epoch: int
    best_val_f1: float
    loss_trace: List[float] = field(default_factory=list)


def _forward(ax: np.ndarray, matrix, params: Dict[str, np.ndarray]):
    pre = ax @ params["W1"] + params["b1"]
    hidden = np.maximum(pre, 0.0)
    ah = matrix @ hidden
    logits = ah @ params["W2"] + params["b2"]
    return pre, hidden, ah, logits


def train_gcn(g: Graph, labels: np.ndarray, split: Split, config: Optional[GcnConfig] = None,
              seed: int = 10) -> GcnResult:
    config = config or GcnConfig()
    labels = np.asarray(labels, dtype=np.int64)
    split.validate(g.num_nodes)
    used = np.concatenate([split.train, split.val, split.test])
    if not np.isin(labels[used], (0, 1)).all():
        raise DomainError("GCN labels must be 0 or 1 on every split node")

    rng = derive_rng(seed, "gcn")
    matrix = normalized_adjacency(g).matrix
    ax = matrix @ standardize_features(g.features)
    m = ax.shape[1]
    params = {
        "W1": glorot(rng, m, config.hidden), "b1": np.zeros(config.hidden),
        "W2": glorot(rng, config.hidden, 2), "b2": np.zeros(2),
    }
    optimizer = Adam(params, lr=config.lr, weight_decay=config.weight_decay)

    train = split.train
    onehot = np.zeros((len(train), 2))
    onehot[np.arange(len(train)), labels[train]] = 1.0

    best_f1 = -1.0
    best_epoch = 0
    best_params = {k: v.copy() for k, v in params.items()}
    trace: List[float] = []

    for epoch in range(1, config.epochs + 1):
        pre, hidden, ah, logits = _forward(ax, matrix, params)
        probs = softmax(logits, axis=1)
        loss = float(-np.mean(np.log(np.clip(probs[train, labels[train]], 1e-300, None))))
        if not np.isfinite(loss) or not np.isfinite(logits).all():
            raise NumericalError(f"GCN training diverged at epoch {epoch}")
        trace.append(loss)

        if len(split.val):
            val_f1 = f1_binary(labels[split.val], np.argmax(logits[split.val], axis=1))
        else:
            val_f1 = -loss
        if val_f1 > best_f1:
            best_f1 = val_f1
            best_epoch = epoch
            best_params = {k: v.copy() for k, v in params.items()}

        d_logits = np.zeros_like(logits)
        d_logits[train] = (probs[train] - onehot) / len(train)
        d_hidden = matrix.T @ (d_logits @ params["W2"].T)
        d_pre = d_hidden * (pre > 0)
        grads = {
            "W2": ah.T @ d_logits, "b2": d_logits.sum(axis=0),
            "W1": ax.T @ d_pre, "b1": d_pre.sum(axis=0),
        }
        optimizer.step(params, grads)

        if epoch == 1 or epoch % 100 == 0:
            logger.debug(f"gcn epoch {epoch}: loss {loss:.4f}, val f1 {val_f1:.4f}")

    logits = _forward(ax, matrix, best_params)[3]
    probs = softmax(logits[split.test], axis=1)
    logger.debug(f"gcn seed {seed}: best epoch {best_epoch} with val f1 {best_f1:.4f}")
    return GcnResult(
        test_index=split.test,
        predictions=np.argmax(probs, axis=1).astype(np.int64),
        probabilities=probs[:, 1],
        best_epoch=best_epoch,
        best_val_f1=best_f1,
        loss_trace=trace,
    )
