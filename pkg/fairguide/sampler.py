"""Fairness-guided link addition: scoring, Gumbel top-k sampling and the guide loop."""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from .community import CommunityInit, detect_initial_communities, pseudo_task_loss, random_communities
from .config import AutoencoderConfig, GuideConfig, validate_guide_config
from .errors import DomainError, FairGuideError, GraphConstraintError, NumericalError
from .graph import EdgeBatch, Graph, add_edges, candidate_block, candidate_count
from .meta_gradient import MetaGradient, dump_most_negative, meta_gradient
from .seeding import derive_rng


logger = logging.getLogger(__name__)


@dataclass
class CandidateScores:
    """Scores over a subset of candidate links, in lexicographic (i, j) order."""
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    @classmethod
    def empty(cls) -> "CandidateScores":
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0))

    def __len__(self) -> int:
        return len(self.values)

    def concat(self, other: "CandidateScores") -> "CandidateScores":
        return CandidateScores(np.concatenate([self.rows, other.rows]),
                               np.concatenate([self.cols, other.cols]),
                               np.concatenate([self.values, other.values]))

    def take(self, index: np.ndarray) -> "CandidateScores":
        return CandidateScores(self.rows[index], self.cols[index], self.values[index])

    def as_dict(self) -> Dict[tuple, float]:
        return {(int(i), int(j)): float(v) for i, j, v in zip(self.rows, self.cols, self.values)}


@dataclass
class GuideResult:
    """Links added by one guide run and the per-iteration trace."""
    additions: List[EdgeBatch]
    loss_trace: List[float]
    cross_group_fraction: List[float]
    graph: Graph
    status: str = "completed"
    elapsed_seconds: float = 0.0
    diagnostics: Dict[str, int] = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.additions)

    @property
    def total_added(self) -> int:
        return sum(len(b) for b in self.additions)

    @property
    def seconds_per_link(self) -> float:
        return self.elapsed_seconds / self.total_added if self.total_added else 0.0

    def trace_rows(self) -> List[Dict[str, object]]:
        rows = []
        for t, batch in enumerate(self.additions):
            rows.append({
                "iteration": batch.iteration_index,
                "soft_dsp_before": self.loss_trace[t],
                "soft_dsp_after": self.loss_trace[t + 1],
                "batch_size": len(batch),
                "cross_group_fraction": self.cross_group_fraction[t],
            })
        return rows


def adjusted_scores(grad: MetaGradient, g: Graph, beta: float, start: int = 0,
                    stop: Optional[int] = None, block_rows: int = 256) -> CandidateScores:
    """-grad * (1 + beta * [s_i != s_j]) on candidates of rows start..stop-1.

    Candidates whose score is not positive would not reduce bias and are dropped.
    """
    stop = g.num_nodes if stop is None else min(stop, g.num_nodes)
    parts = [CandidateScores.empty()]
    s = g.sensitive
    for lo in range(start, stop, block_rows):
        hi = min(lo + block_rows, stop)
        ci, cj = candidate_block(g, lo, hi)
        if not len(ci):
            continue
        grad_vals = grad.block(lo, hi)[ci - lo, cj]
        boost = 1.0 + beta * (s[ci] != s[cj])
        scores = -grad_vals * boost
        keep = scores > 0
        parts.append(CandidateScores(ci[keep], cj[keep], scores[keep]))
    out = parts[0]
    for part in parts[1:]:
        out = out.concat(part)
    return out


def gumbel_perturb(scores: CandidateScores, tau: float, epsilon: float, rng: np.random.Generator,
                   diagnostics: Optional[Dict[str, int]] = None) -> CandidateScores:
    """(log(score + eps) + g) / tau with g ~ Gumbel(0, 1), one draw per candidate in order."""
    if tau <= 0:
        raise DomainError(f"tau must be positive, got {tau}")
    if len(scores) and (scores.values <= 0).any():
        bad = int(np.argmax(scores.values <= 0))
        raise NumericalError(
            f"internal invariant violated: non-positive score at ({int(scores.rows[bad])}, {int(scores.cols[bad])})")
    tiny = int((scores.values < epsilon).sum())
    if tiny:
        logger.warning(f"{tiny} candidate score(s) fall below epsilon={epsilon}")
        if diagnostics is not None:
            diagnostics["scores_below_epsilon"] = diagnostics.get("scores_below_epsilon", 0) + tiny
    u = rng.random(len(scores))
    u = np.clip(u, np.finfo(np.float64).tiny, 1.0)
    noise = -np.log(-np.log(u))
    values = (np.log(scores.values + epsilon) + noise) / tau
    return CandidateScores(scores.rows, scores.cols, values)


def _top(scores: CandidateScores, k: int) -> CandidateScores:
    order = np.lexsort((scores.cols, scores.rows, -scores.values))[:k]
    return scores.take(order)


def select_topk(perturbed: CandidateScores, k: int, iteration_index: int = 0) -> EdgeBatch:
    """The k highest perturbed scores; ties go to the lexicographically smaller pair."""
    if k < 1:
        raise DomainError(f"k must be at least 1, got {k}")
    best = _top(perturbed, k)
    pairs = [(int(i), int(j)) for i, j in zip(best.rows, best.cols)]
    return EdgeBatch(pairs=pairs, iteration_index=iteration_index, truncated=len(perturbed) < k)


class LinkGuide:
    """Runs the iterative fairness-guided link addition on one graph."""

    def __init__(self, config: GuideConfig, autoencoder: Optional[AutoencoderConfig] = None,
                 cache_path: Optional[Union[str, Path]] = None,
                 gradient_dump_dir: Optional[Union[str, Path]] = None, gradient_dump_k: int = 0):
        issues = validate_guide_config(config)
        if issues:
            raise DomainError("; ".join(issues))
        self.config = config
        self.autoencoder = autoencoder or AutoencoderConfig()
        self.cache_path = cache_path
        self.gradient_dump_dir = gradient_dump_dir
        self.gradient_dump_k = gradient_dump_k

    def initial_communities(self, g: Graph) -> CommunityInit:
        cfg = self.config
        if cfg.init_mode == "random":
            return random_communities(g.num_nodes, cfg.communities, cfg.seed)
        return detect_initial_communities(g.features, cfg.communities, self.autoencoder,
                                          cfg.seed, self.cache_path)

    def check_budget(self, g: Graph) -> None:
        available = candidate_count(g)
        if self.config.budget > available:
            raise GraphConstraintError(f"budget {self.config.budget} exceeds the {available} candidate links")

    def run(self, g: Graph, init: Optional[CommunityInit] = None) -> GuideResult:
        cfg = self.config
        self.check_budget(g)

        if init is None:
            init = self.initial_communities(g)
        rng = derive_rng(cfg.seed, "gumbel")
        diagnostics: Dict[str, int] = {}
        result = GuideResult(additions=[], loss_trace=[], cross_group_fraction=[], graph=g,
                             diagnostics=diagnostics)

        current = g
        added = 0
        iteration = 0
        started = time.perf_counter()
        while added < cfg.budget:
            k = cfg.budget - added if cfg.single_shot else min(cfg.batch_k, cfg.budget - added)
            try:
                batch, mg = self._step(current, init, k, iteration, rng, diagnostics)
                result.loss_trace.append(mg.loss)
                if not batch.pairs:
                    result.status = "exhausted"
                    logger.warning(f"iteration {iteration}: no bias-reducing candidates left after "
                                   f"{added} of {cfg.budget} links")
                    break
                current = add_edges(current, batch)
            except FairGuideError as e:
                e.args = (f"iteration {iteration}: {e}",) + e.args[1:]
                raise

            added += len(batch)
            s = current.sensitive
            cross = float(np.mean([s[i] != s[j] for i, j in batch.pairs]))
            result.additions.append(batch)
            result.cross_group_fraction.append(cross)
            logger.info(f"iteration {iteration}: soft dsp {mg.loss:.6f}, added {len(batch)} links "
                        f"({added}/{cfg.budget}), cross-group fraction {cross:.2f}")
            if batch.truncated:
                result.status = "exhausted"
                logger.warning(f"iteration {iteration}: only {len(batch)} of {k} requested links had "
                               f"positive scores; stopping")
                break
            iteration += 1

        result.elapsed_seconds = time.perf_counter() - started
        if len(result.loss_trace) == result.iterations:
            result.loss_trace.append(pseudo_task_loss(current, init, cfg.alpha, cfg.k_steps))
        result.graph = current
        if result.total_added:
            logger.info(f"Added {result.total_added} links in {result.iterations} iteration(s); "
                        f"soft dsp {result.loss_trace[0]:.6f} -> {result.loss_trace[-1]:.6f}; "
                        f"{result.seconds_per_link * 1e3:.2f} ms per link")
        return result

    def _step(self, g: Graph, init: CommunityInit, k: int, iteration: int, rng: np.random.Generator,
              diagnostics: Dict[str, int]):
        cfg = self.config
        mg = meta_gradient(g, init, cfg.alpha, cfg.k_steps, exact_degree=cfg.exact_degree)
        if self.gradient_dump_dir is not None and self.gradient_dump_k > 0:
            path = Path(self.gradient_dump_dir) / f"gradients_iter{iteration}.tsv"
            dump_most_negative(mg, g, path, self.gradient_dump_k)

        kept = CandidateScores.empty()
        for start in range(0, g.num_nodes, cfg.block_rows):
            scores = adjusted_scores(mg, g, cfg.beta, start, start + cfg.block_rows, cfg.block_rows)
            perturbed = gumbel_perturb(scores, cfg.tau, cfg.epsilon, rng, diagnostics)
            kept = _top(kept.concat(perturbed), k)
        return select_topk(kept, k, iteration), mg


def guide(g: Graph, cfg: GuideConfig, autoencoder: Optional[AutoencoderConfig] = None,
          init: Optional[CommunityInit] = None, cache_path: Optional[Union[str, Path]] = None) -> GuideResult:
    """Add up to ``cfg.budget`` links to ``g`` that lower the pseudo-task bias."""
    return LinkGuide(cfg, autoencoder, cache_path).run(g, init)
