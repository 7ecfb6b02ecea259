"""Downstream evaluation harness: GCN classification, Louvain communities and reports."""

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from .config import AutoencoderConfig, GcnConfig, GuideConfig
from .errors import GraphValidationError, UndefinedMetricError
from .gcn import Split, train_gcn
from .graph import Graph
from .graph_io import ArtifactWriteError
from .metrics import auc_rank, delta_eo, delta_sp_binary, delta_sp_multiclass, f1_binary
from .sampler import LinkGuide
from .sbm import generate_sbm, spec_for_average_degree
from .seeding import derive_seed


logger = logging.getLogger(__name__)

METRICS = ["f1", "auc", "dsp", "deo", "dsp_cd"]
REPORT_FILE = "report.txt"
REPORT_KV_FILE = "report.kv"
RUNS_FILE = "runs.csv"
SWEEP_FILE = "sweep.csv"
SWEEP_COLUMNS = ["beta", "communities", "soft_dsp_start", "soft_dsp_end", "cross_group_fraction"] + METRICS


def louvain(g: Graph, seed: int = 10) -> np.ndarray:
    """Hard community label per node from modularity-based Louvain."""
    n = g.num_nodes
    if g.edge_count == 0:
        logger.warning("Louvain on an edgeless graph: every node is its own community")
        return np.arange(n, dtype=np.int64)
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    graph.add_edges_from(g.edge_array().tolist())
    communities = nx.community.louvain_communities(graph, seed=derive_seed(seed, "louvain") % (2 ** 32),
                                                   threshold=1e-9)
    labels = np.empty(n, dtype=np.int64)
    for cid, members in enumerate(sorted(communities, key=min)):
        labels[list(members)] = cid
    return labels


def modularity(g: Graph, labels: np.ndarray) -> float:
    graph = nx.Graph()
    graph.add_nodes_from(range(g.num_nodes))
    graph.add_edges_from(g.edge_array().tolist())
    groups: Dict[int, set] = {}
    for node, label in enumerate(np.asarray(labels).tolist()):
        groups.setdefault(label, set()).add(node)
    return float(nx.community.modularity(graph, list(groups.values())))


@dataclass
class SeedMetrics:
    """Metrics of one seed; undefined metrics are NaN."""
    seed: int
    f1: float
    auc: float
    dsp: float
    deo: float
    dsp_cd: float

    def as_dict(self) -> Dict[str, float]:
        return {m: getattr(self, m) for m in METRICS}


@dataclass
class EvalReport:
    """Per-seed runs of one graph and their mean and population std."""
    name: str
    runs: List[SeedMetrics] = field(default_factory=list)

    def values(self, metric: str) -> np.ndarray:
        return np.array([getattr(r, metric) for r in self.runs], dtype=np.float64)

    def mean(self, metric: str) -> float:
        vals = self.values(metric)
        vals = vals[np.isfinite(vals)]
        return float(vals.mean()) if vals.size else math.nan

    def std(self, metric: str) -> float:
        vals = self.values(metric)
        vals = vals[np.isfinite(vals)]
        return float(vals.std(ddof=0)) if vals.size else math.nan

    def summary(self) -> Dict[str, Tuple[float, float]]:
        return {m: (self.mean(m), self.std(m)) for m in METRICS}


def _defined(name: str, fn: Callable[..., float], *args) -> float:
    try:
        return float(fn(*args))
    except UndefinedMetricError as e:
        logger.warning(f"{name} undefined: {e}")
        return math.nan


def evaluate_seed(g: Graph, labels: np.ndarray, split: Split, seed: int,
                  gcn_config: Optional[GcnConfig] = None) -> SeedMetrics:
    result = train_gcn(g, labels, split, gcn_config, seed)
    y = np.asarray(labels)[split.test]
    s = g.sensitive[split.test]
    preds = result.predictions
    return SeedMetrics(
        seed=seed,
        f1=f1_binary(y, preds),
        auc=_defined("auc", auc_rank, y, result.probabilities),
        dsp=_defined("dsp", delta_sp_binary, preds, s),
        deo=_defined("deo", delta_eo, preds, s, y),
        dsp_cd=_defined("dsp_cd", delta_sp_multiclass, louvain(g, seed), g.sensitive),
    )


def _run_task(task) -> SeedMetrics:
    g, labels, split, seed, gcn_config = task
    return evaluate_seed(g, labels, split, seed, gcn_config)


def evaluate_graphs(graphs: Dict[str, Graph], labels: np.ndarray, split: Split, seeds: Sequence[int],
                    gcn_config: Optional[GcnConfig] = None, jobs: int = 1) -> Dict[str, EvalReport]:
    """Evaluate every named graph on every seed; reports keep the input order."""
    sizes = {name: g.num_nodes for name, g in graphs.items()}
    if len(set(sizes.values())) > 1:
        raise GraphValidationError(f"graphs have different node counts: {sizes}")
    tasks = [(name, seed) for name in graphs for seed in seeds]
    payload = [(graphs[name], labels, split, seed, gcn_config) for name, seed in tasks]

    if jobs > 1 and len(payload) > 1:
        logger.info(f"Evaluating {len(payload)} (graph, seed) runs on {jobs} processes")
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_task, payload))
    else:
        results = [_run_task(task) for task in payload]

    reports = {name: EvalReport(name=name) for name in graphs}
    for (name, seed), metrics in zip(tasks, results):
        reports[name].runs.append(metrics)
        logger.info(f"{name} seed {seed}: f1 {metrics.f1:.4f}, dsp {metrics.dsp:.4f}, dsp_cd {metrics.dsp_cd:.4f}")
    return reports


def evaluate(g_original: Graph, g_modified: Graph, labels: np.ndarray, split: Split, seeds: Sequence[int],
             gcn_config: Optional[GcnConfig] = None, jobs: int = 1) -> Tuple[EvalReport, EvalReport]:
    reports = evaluate_graphs({"original": g_original, "modified": g_modified}, labels, split, seeds,
                              gcn_config, jobs)
    return reports["original"], reports["modified"]


def _percent(value: float) -> str:
    return "n/a" if not math.isfinite(value) else f"{100.0 * value:.1f}"


def format_report_table(reports: Sequence[EvalReport]) -> str:
    """Aligned metric x graph table, mean ± std in percent."""
    header = ["metric"] + [r.name for r in reports]
    rows = [header]
    for metric in METRICS:
        row = [metric]
        for report in reports:
            mean, std = report.mean(metric), report.std(metric)
            row.append("n/a" if not math.isfinite(mean) else f"{_percent(mean)} ± {_percent(std)}")
        rows.append(row)
    widths = [max(len(row[c]) for row in rows) for c in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def format_report_kv(reports: Sequence[EvalReport]) -> str:
    lines = []
    for report in reports:
        for metric in METRICS:
            lines.append(f"{report.name}.{metric}.mean={_percent(report.mean(metric))}")
            lines.append(f"{report.name}.{metric}.std={_percent(report.std(metric))}")
    return "\n".join(lines) + "\n"


def _float_cell(value: float) -> str:
    return repr(float(value)) if math.isfinite(value) else "nan"


def write_report(reports: Sequence[EvalReport], out_dir: Union[str, Path]) -> Dict[str, str]:
    """Write the table, the key-value file and the per-seed CSV."""
    out_dir = Path(out_dir)
    paths = {
        "report": out_dir / REPORT_FILE,
        "report_kv": out_dir / REPORT_KV_FILE,
        "runs": out_dir / RUNS_FILE,
    }
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        paths["report"].write_text(format_report_table(reports), encoding="utf-8")
        paths["report_kv"].write_text(format_report_kv(reports), encoding="utf-8")
        with open(paths["runs"], "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["graph", "seed"] + METRICS)
            for report in reports:
                for run in report.runs:
                    writer.writerow([report.name, run.seed] + [_float_cell(getattr(run, m)) for m in METRICS])
    except OSError as e:
        raise ArtifactWriteError(out_dir, e.strerror or str(e))
    logger.info(f"Wrote evaluation report for {len(reports)} graph(s) to {out_dir}")
    return {k: str(v) for k, v in paths.items()}


def run_sweep(g: Graph, guide_config: GuideConfig, betas: Sequence[float], communities: Sequence[int],
              split: Split, seeds: Sequence[int], autoencoder: Optional[AutoencoderConfig] = None,
              gcn_config: Optional[GcnConfig] = None, jobs: int = 1) -> List[Dict[str, float]]:
    """Guide and evaluate over the beta x communities grid at a fixed budget."""
    if g.labels is None:
        raise GraphValidationError("sweep needs node labels for the downstream evaluation")
    autoencoder = autoencoder or AutoencoderConfig()
    rows = []
    for c in communities:
        init = LinkGuide(replace(guide_config, communities=c), autoencoder).initial_communities(g)
        for beta in betas:
            cfg = replace(guide_config, beta=beta, communities=c)
            result = LinkGuide(cfg, autoencoder).run(g, init)
            report = evaluate_graphs({"guided": result.graph}, g.labels, split, seeds, gcn_config, jobs)["guided"]
            cross = float(np.mean(result.cross_group_fraction)) if result.cross_group_fraction else math.nan
            row = {
                "beta": beta,
                "communities": c,
                "soft_dsp_start": result.loss_trace[0],
                "soft_dsp_end": result.loss_trace[-1],
                "cross_group_fraction": cross,
            }
            row.update({m: report.mean(m) for m in METRICS})
            rows.append(row)
            logger.info(f"sweep beta={beta} communities={c}: soft dsp {row['soft_dsp_start']:.4f} -> "
                        f"{row['soft_dsp_end']:.4f}, dsp {row['dsp']:.4f}")
    return rows


def write_sweep(rows: Sequence[Dict[str, float]], path: Union[str, Path]) -> str:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: (_float_cell(v) if isinstance(v, float) else v) for k, v in row.items()})
    except OSError as e:
        raise ArtifactWriteError(path, e.strerror or str(e))
    return str(path)


def benchmark_per_link(sizes: Sequence[int], degree: float = 20.0, links: int = 100,
                       guide_config: Optional[GuideConfig] = None,
                       autoencoder: Optional[AutoencoderConfig] = None, seed: int = 10) -> List[Dict[str, float]]:
    """Wall time per suggested link on SBMs of growing size.

    Only the link-addition loop is timed; community initialization is excluded.
    """
    base = guide_config or GuideConfig()
    autoencoder = autoencoder or AutoencoderConfig()
    rows = []
    for n in sizes:
        g = generate_sbm(spec_for_average_degree(n, degree, seed=seed))
        cfg = replace(base, budget=links, batch_k=links, seed=seed)
        result = LinkGuide(cfg, autoencoder).run(g)
        per_link = result.seconds_per_link
        rows.append({
            "num_nodes": n,
            "edges": g.edge_count,
            "links": result.total_added,
            "seconds_per_link": per_link,
            "seconds_per_link_per_node": per_link / n,
        })
        logger.info(f"bench n={n}: {per_link * 1e3:.3f} ms per link")
    return rows
