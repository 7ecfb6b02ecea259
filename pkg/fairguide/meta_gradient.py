"""Meta-gradient of the pseudo-task fairness loss with respect to adjacency.

The backward pass runs through the row softmax, the unrolled propagation
with restart and the degree normalization of A + I. For the recurrence
Z_{t+1} = (1 - a) A_hat Z_t + a C_init the gradient with respect to A_hat
is the low-rank sum (1 - a) sum_t G_{t+1} Z_t^T, so it is kept in factored
form U V^T and only expanded on the entries that are queried.
"""

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.special import softmax

from .community import CommunityInit, propagation_trace
from .errors import NumericalError
from .graph import Graph, candidate_block, normalize_matrix
from .metrics import delta_sp_soft, soft_group_means


logger = logging.getLogger(__name__)

LossFn = Callable[[np.ndarray, np.ndarray], float]
LossGradFn = Callable[[np.ndarray, np.ndarray], np.ndarray]

_NNZ_CHUNK = 1 << 16


def grad_loss_wrt_assignment(cmat: np.ndarray, s) -> np.ndarray:
    """d(soft statistical parity)/dC; the subgradient of |0| is taken as 0."""
    cmat = np.asarray(cmat, dtype=np.float64)
    s = np.asarray(s).astype(bool)
    m0, m1 = soft_group_means(cmat, s)
    sign = np.sign(m0 - m1)
    n0 = int((~s).sum())
    n1 = int(s.sum())
    grad = np.empty_like(cmat)
    grad[~s] = 0.5 * sign / n0
    grad[s] = -0.5 * sign / n1
    return grad


@dataclass(frozen=True)
class MetaGradient:
    """Symmetrized dL/dA held in factored form.

    Entry (i, j), i != j, is
    0.5 r_i r_j (G[i, j] + G[j, i]) - 0.25 (w_i + w_j) with G = U V^T,
    r = deg^-1/2 and w the degree-dependence term (zero in frozen mode).
    """
    u: np.ndarray
    v: np.ndarray
    r: np.ndarray
    w: np.ndarray
    loss: float
    fingerprint: str
    exact_degree: bool = True

    @property
    def num_nodes(self) -> int:
        return len(self.r)

    def block(self, start: int, stop: int) -> np.ndarray:
        """Rows start..stop-1 of the dense gradient, diagonal zeroed."""
        stop = min(stop, self.num_nodes)
        rows = np.arange(start, stop)
        forward = self.u[start:stop] @ self.v.T
        backward = self.v[start:stop] @ self.u.T
        out = 0.5 * np.outer(self.r[start:stop], self.r) * (forward + backward)
        out -= 0.25 * (self.w[start:stop, None] + self.w[None, :])
        out[np.arange(len(rows)), rows] = 0.0
        return out

    def dense(self) -> np.ndarray:
        full = self.block(0, self.num_nodes)
        return 0.5 * (full + full.T)

    def entries(self, rows, cols) -> np.ndarray:
        """Gradient at the given (i, j) pairs; symmetric in its arguments."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
        forward = np.einsum("ij,ij->i", self.u[lo], self.v[hi])
        backward = np.einsum("ij,ij->i", self.v[lo], self.u[hi])
        out = 0.5 * self.r[lo] * self.r[hi] * (forward + backward) - 0.25 * (self.w[lo] + self.w[hi])
        return np.where(lo == hi, 0.0, out)

    def most_negative(self, g: Graph, k: int, block_rows: int = 256) -> List[Tuple[int, int, float]]:
        """The k candidate links with the most negative gradient."""
        best_i = np.zeros(0, dtype=np.int64)
        best_j = np.zeros(0, dtype=np.int64)
        best_v = np.zeros(0)
        for start in range(0, g.num_nodes, block_rows):
            ci, cj = candidate_block(g, start, start + block_rows)
            if not len(ci):
                continue
            vals = self.block(start, start + block_rows)[ci - start, cj]
            best_i = np.concatenate([best_i, ci])
            best_j = np.concatenate([best_j, cj])
            best_v = np.concatenate([best_v, vals])
            order = np.lexsort((best_j, best_i, best_v))[:k]
            best_i, best_j, best_v = best_i[order], best_j[order], best_v[order]
        return [(int(i), int(j), float(v)) for i, j, v in zip(best_i, best_j, best_v)]


def dump_most_negative(mg: MetaGradient, g: Graph, path: Union[str, Path], k: int) -> str:
    """Write 'i<TAB>j<TAB>grad' lines for inspection."""
    lines = [f"{i}\t{j}\t{v!r}\n" for i, j, v in mg.most_negative(g, k)]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.writelines(lines)
    return str(path)


def _fingerprint(adj: sp.csr_matrix, init: CommunityInit, alpha: float, k_steps: int) -> str:
    h = hashlib.sha256()
    upper = sp.triu(adj, k=1).tocsr()
    upper.sort_indices()
    h.update(upper.indptr.tobytes())
    h.update(upper.indices.tobytes())
    h.update(np.ascontiguousarray(init.onehot).tobytes())
    h.update(repr((float(alpha), int(k_steps))).encode())
    return h.hexdigest()[:16]


def _check_finite(name: str, arr: np.ndarray) -> None:
    bad = np.argwhere(~np.isfinite(arr))
    if bad.size:
        raise NumericalError(f"non-finite {name} at index {tuple(int(x) for x in bad[0])}")


def _adjacency_backward(u: np.ndarray, v: np.ndarray, matrix: sp.csr_matrix) -> np.ndarray:
    """q_i = sum_b A_hat[i, b] (G[i, b] + G[b, i]) over the stored entries of A_hat."""
    coo = matrix.tocoo()
    q = np.zeros(matrix.shape[0])
    for start in range(0, coo.nnz, _NNZ_CHUNK):
        rows = coo.row[start:start + _NNZ_CHUNK]
        cols = coo.col[start:start + _NNZ_CHUNK]
        data = coo.data[start:start + _NNZ_CHUNK]
        g_rc = np.einsum("ij,ij->i", u[rows], v[cols])
        g_cr = np.einsum("ij,ij->i", u[cols], v[rows])
        q += np.bincount(rows, weights=data * (g_rc + g_cr), minlength=matrix.shape[0])
    return q


def meta_gradient(g: Graph, init: CommunityInit, alpha: float, k_steps: int,
                  exact_degree: bool = True, loss: LossFn = delta_sp_soft,
                  loss_grad: LossGradFn = grad_loss_wrt_assignment) -> MetaGradient:
    """Reverse-mode dL/dA of the pseudo-task loss at the current structure."""
    norm = normalize_matrix(g.adjacency)
    trace = propagation_trace(norm.matrix, init.onehot, alpha, k_steps)
    cmat = softmax(trace[-1], axis=1)
    value = loss(cmat, g.sensitive)

    g_c = loss_grad(cmat, g.sensitive)
    grad_z = cmat * (g_c - np.sum(g_c * cmat, axis=1, keepdims=True))

    decay = 1.0 - alpha
    u_parts: List[np.ndarray] = []
    v_parts: List[np.ndarray] = []
    for t in range(k_steps - 1, -1, -1):
        u_parts.append(decay * grad_z)
        v_parts.append(trace[t])
        grad_z = decay * (norm.matrix @ grad_z)
    u = np.hstack(u_parts)
    v = np.hstack(v_parts)
    _check_finite("propagation gradient", u)

    r = 1.0 / np.sqrt(norm.degree_vector)
    if exact_degree:
        w = r * r * _adjacency_backward(u, v, norm.matrix)
        _check_finite("degree gradient", w)
    else:
        w = np.zeros(g.num_nodes)

    mg = MetaGradient(u=u, v=v, r=r, w=w, loss=float(value),
                      fingerprint=_fingerprint(g.adjacency, init, alpha, k_steps),
                      exact_degree=exact_degree)
    logger.debug(f"meta-gradient {mg.fingerprint}: loss {value:.6f}, rank {u.shape[1]}")
    return mg


def _loss_at(adjacency: sp.spmatrix, init: CommunityInit, s: np.ndarray, alpha: float, k_steps: int,
             loss: LossFn = delta_sp_soft) -> float:
    norm = normalize_matrix(adjacency)
    z = propagation_trace(norm.matrix, init.onehot, alpha, k_steps)[-1]
    return loss(softmax(z, axis=1), s)


def finite_difference_oracle(g: Graph, init: CommunityInit, alpha: float, k_steps: int,
                             i: int, j: int, h: float = 1e-5, loss: LossFn = delta_sp_soft) -> float:
    """Symmetric central difference: (L(A + hE) - L(A - hE)) / 4h, E = e_ij + e_ji."""
    n = g.num_nodes
    bump = sp.csr_matrix(([h, h], ([i, j], [j, i])), shape=(n, n))
    plus = _loss_at(g.adjacency + bump, init, g.sensitive, alpha, k_steps, loss)
    minus = _loss_at(g.adjacency - bump, init, g.sensitive, alpha, k_steps, loss)
    return (plus - minus) / (4.0 * h)


def has_kink(g: Graph, init: CommunityInit, alpha: float, k_steps: int, tol: float = 1e-12) -> bool:
    """True if some class has (numerically) equal group means, where |.| is not smooth."""
    norm = normalize_matrix(g.adjacency)
    cmat = softmax(propagation_trace(norm.matrix, init.onehot, alpha, k_steps)[-1], axis=1)
    m0, m1 = soft_group_means(cmat, g.sensitive)
    return bool(np.min(np.abs(m0 - m1)) < tol)


@dataclass
class GradCheckReport:
    """Outcome of comparing analytic and finite-difference gradients."""
    pairs: List[Tuple[int, int]]
    analytic: np.ndarray
    numeric: np.ndarray
    atol: float
    rtol: float

    @property
    def abs_errors(self) -> np.ndarray:
        return np.abs(self.analytic - self.numeric)

    @property
    def rel_errors(self) -> np.ndarray:
        scale = np.maximum(np.abs(self.analytic), np.abs(self.numeric))
        return np.divide(self.abs_errors, scale, out=np.zeros_like(scale), where=scale > 0)

    @property
    def violations(self) -> np.ndarray:
        return self.abs_errors > np.maximum(self.atol, self.rtol * np.abs(self.numeric))

    @property
    def passed(self) -> bool:
        return not bool(self.violations.any())

    def worst(self) -> Optional[Tuple[int, int, float, float]]:
        if not self.pairs:
            return None
        k = int(np.argmax(self.abs_errors))
        i, j = self.pairs[k]
        return i, j, float(self.analytic[k]), float(self.numeric[k])


def gradient_check(g: Graph, init: CommunityInit, alpha: float, k_steps: int,
                   pairs: List[Tuple[int, int]], h: float = 1e-5, atol: float = 1e-6, rtol: float = 1e-4,
                   exact_degree: bool = True, flip_sign: bool = False) -> GradCheckReport:
    """Compare meta_gradient with the oracle on the given off-diagonal pairs.

    ``flip_sign`` negates the analytic side to exercise the failure path.
    """
    mg = meta_gradient(g, init, alpha, k_steps, exact_degree=exact_degree)
    rows = np.array([p[0] for p in pairs], dtype=np.int64)
    cols = np.array([p[1] for p in pairs], dtype=np.int64)
    analytic = mg.entries(rows, cols) if pairs else np.zeros(0)
    if flip_sign:
        analytic = -analytic
    numeric = np.array([finite_difference_oracle(g, init, alpha, k_steps, i, j, h) for i, j in pairs])
    return GradCheckReport(pairs=list(pairs), analytic=analytic, numeric=numeric, atol=atol, rtol=rtol)


def sample_pairs(pool: List[Tuple[int, int]], count: int, rng: np.random.Generator) -> List[Tuple[int, int]]:
    """Up to ``count`` distinct pairs from ``pool``, kept in pool order."""
    count = min(count, len(pool))
    picked = np.sort(rng.choice(len(pool), size=count, replace=False))
    return [pool[int(k)] for k in picked]
