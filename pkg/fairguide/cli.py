"""Command-line interface for FairGuide."""

import click
import csv
import json
import logging
import os
import sys
import traceback
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from dotenv import load_dotenv

from . import __version__
from .baselines import linkpred_batch, random_batch
from .config import (INIT_MODES, SAMPLE_CONFIG, Config, ConfigManager, apply_overrides, parse_float_list,
                     parse_int_list, split_assignment)
from .errors import FairGuideError, NumericalError
from .evaluation import (SWEEP_FILE, benchmark_per_link, evaluate_graphs, format_report_table, run_sweep,
                         write_report, write_sweep)
from .gcn import make_splits
from .graph import Graph, add_edges, candidate_edges
from .graph_io import (ADDITIONS_FILE, EDGES_FILE, FEATURES_FILE, LABELS_FILE, NODE_IDS_FILE, SENSITIVE_FILE,
                       TRACE_FILE, dataset_digests, ensure_dataset_dir, load_dataset, remap_edge_list,
                       resolve_edge_source, save_edge_additions, save_graph, save_trace)
from .manifest import RunManifest, write_manifest
from .meta_gradient import gradient_check, has_kink, sample_pairs
from .sampler import LinkGuide
from .sbm import SbmSpec, generate_sbm
from .seeding import derive_rng


ASCII_LOGO = r"""
  ______    _       _____       _     _
 |  ____|  (_)     / ____|     (_)   | |
 | |__ __ _ _ _ __| |  __ _   _ _  __| | ___
 |  __/ _` | | '__| | |_ | | | | |/ _` |/ _ \
 | | | (_| | | |  | |__| | |_| | | (_| |  __/
 |_|  \__,_|_|_|   \_____|\__,_|_|\__,_|\___|

  Fairness-guided link addition for attributed graphs
"""

USAGE_EXIT = 1
LOG_LEVEL_ENV = "FAIRGUIDE_LOG_LEVEL"

logger = logging.getLogger(__name__)


def display_logo():
    """Display the ASCII logo."""
    click.echo(click.style(ASCII_LOGO, fg='cyan', bold=True))


def setup_logging(verbose: bool = False):
    """Setup logging configuration; -v wins over FAIRGUIDE_LOG_LEVEL."""
    load_dotenv()
    if verbose:
        level = logging.DEBUG
    else:
        name = os.getenv(LOG_LEVEL_ENV, "INFO").upper()
        level = getattr(logging, name, None)
        if not isinstance(level, int):
            level = logging.INFO
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    logging.getLogger("fairguide").setLevel(level)


class FairGuideGroup(click.Group):
    """Custom Click group: logo on help, usage errors exit with code 1."""

    def get_help(self, ctx):
        """Override to display logo before help."""
        display_logo()
        return super().get_help(ctx)

    def main(self, *args, standalone_mode: bool = True, **kwargs):
        if not standalone_mode:
            return super().main(*args, standalone_mode=False, **kwargs)
        try:
            return super().main(*args, standalone_mode=False, **kwargs)
        except click.UsageError as e:
            e.show()
            sys.exit(USAGE_EXIT)
        except click.ClickException as e:
            e.show()
            sys.exit(e.exit_code)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(USAGE_EXIT)


def version_callback(ctx, param, value):
    """Custom version callback that displays logo."""
    if not value or ctx.resilient_parsing:
        return
    display_logo()
    click.echo(f"Version: {__version__}")
    click.echo()
    ctx.exit()


def _fail(ctx, e: Exception) -> None:
    """Report an error and exit with its code."""
    if isinstance(e, FairGuideError):
        click.echo(f"Error: {str(e)}", err=True)
        sys.exit(e.exit_code)
    click.echo(f"Unexpected error: {str(e)}", err=True)
    if ctx.obj['verbose']:
        traceback.print_exc()
    sys.exit(1)


def _load_config(ctx) -> Config:
    return ConfigManager(ctx.obj['config_path']).load_config()


def _resolve_budget(g: Graph, budget: Optional[int], fraction: Optional[float], default: int) -> int:
    if budget is not None and fraction is not None:
        raise click.UsageError("--budget and --budget-fraction are mutually exclusive")
    if fraction is not None:
        return int(round(fraction * g.edge_count))
    return default if budget is None else budget


def _seed_list(text: Optional[str], default: List[int]) -> List[int]:
    if text is None:
        return list(default)
    seeds = parse_int_list(text)
    if not seeds:
        raise click.UsageError("--seeds must name at least one seed")
    return seeds


def _print_json(payload: Dict[str, Any]) -> None:
    click.echo(json.dumps(payload, indent=2))


def budget_options(f):
    f = click.option('--budget-fraction', type=click.FloatRange(0.0, 1.0),
                     help='Budget as a fraction of the current edge count')(f)
    f = click.option('--budget', type=click.IntRange(min=0), help='Total links to add')(f)
    return f


def guide_options(f):
    options = [
        click.option('--batch', 'batch_k', type=click.IntRange(min=1), help='Links added per iteration'),
        click.option('--alpha', type=click.FloatRange(0.0, 1.0), help='Restart probability of the propagation'),
        click.option('--k-steps', type=click.IntRange(min=1), help='Propagation depth'),
        click.option('--communities', type=click.IntRange(min=1), help='Number of pseudo communities'),
        click.option('--beta', type=click.FloatRange(min=0.0), help='Cross-group boost'),
        click.option('--tau', type=click.FloatRange(min=0.0, min_open=True), help='Gumbel temperature'),
        click.option('--epsilon', type=click.FloatRange(min=0.0, min_open=True), help='Underflow guard'),
        click.option('--exact-degree/--frozen-degree', default=None,
                     help='Differentiate through the degree normalization (default) or freeze it'),
        click.option('--init-mode', type=click.Choice(INIT_MODES),
                     help='Seed communities with K-means on embeddings or with random labels'),
        click.option('--single-shot/--iterative', default=None,
                     help='Spend the whole budget from one gradient instead of batch by batch'),
        click.option('--ae-epochs', type=click.IntRange(min=1), help='Autoencoder training epochs'),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def _guide_overrides(**values) -> Dict[str, Any]:
    return {k: v for k, v in values.items() if k != 'ae_epochs'}


@click.group(cls=FairGuideGroup)
@click.option('--version', is_flag=True, expose_value=False, is_eager=True,
              callback=version_callback, help='Show version and exit')
@click.option('--config', '-c', help='Path to configuration file')
@click.option('--verbose', '-v', is_flag=True, help='Enable verbose logging')
@click.pass_context
def cli(ctx, config: Optional[str], verbose: bool):
    """FairGuide - add links to a graph so downstream tasks become fairer."""
    setup_logging(verbose)

    ctx.ensure_object(dict)
    ctx.obj['config_path'] = config
    ctx.obj['verbose'] = verbose


@cli.command()
@click.option('--n', 'num_nodes', type=click.IntRange(min=2), default=200, show_default=True, help='Number of nodes')
@click.option('--blocks', type=click.IntRange(min=2), default=2, show_default=True, help='Number of blocks')
@click.option('--p-in', type=click.FloatRange(0.0, 1.0), default=0.1, show_default=True,
              help='Edge probability within a block')
@click.option('--p-out', type=click.FloatRange(0.0, 1.0), default=0.005, show_default=True,
              help='Edge probability across blocks')
@click.option('--alignment', type=click.FloatRange(0.0, 1.0), default=0.95, show_default=True,
              help="Probability that s equals the block's majority attribute")
@click.option('--feature-dim', type=click.IntRange(min=1), default=8, show_default=True)
@click.option('--feature-signal', type=float, default=3.0, show_default=True, help='Block mean shift')
@click.option('--label-noise', type=click.FloatRange(0.0, 1.0), default=0.1, show_default=True)
@click.option('--seed', type=int, default=10, show_default=True)
@click.option('--out', required=True, type=click.Path(file_okay=False), help='Output dataset directory')
@click.pass_context
def generate(ctx, num_nodes, blocks, p_in, p_out, alignment, feature_dim, feature_signal, label_noise,
             seed, out):
    """Generate a synthetic biased SBM dataset."""
    spec = SbmSpec(num_nodes=num_nodes, num_blocks=blocks, p_in=p_in, p_out=p_out, alignment=alignment,
                   feature_dim=feature_dim, feature_signal=feature_signal, label_noise=label_noise, seed=seed)
    issues = spec.validate()
    if issues:
        raise click.UsageError("; ".join(issues))
    try:
        out_dir = Path(out)
        manifest = RunManifest(command="generate", seeds=[seed])
        manifest.add_config("sbm", spec)
        manifest.outputs = {name: str(out_dir / name)
                            for name in (EDGES_FILE, FEATURES_FILE, SENSITIVE_FILE, LABELS_FILE)}
        write_manifest(manifest, out_dir)
        g = generate_sbm(spec)
        save_graph(g, out_dir)
        _print_json({"nodes": g.num_nodes, "edges": g.edge_count,
                     "cross_group_edge_fraction": g.cross_group_edge_fraction(), "out": str(out_dir)})
    except click.ClickException:
        raise
    except Exception as e:
        _fail(ctx, e)


@cli.command()
@click.argument('source', type=click.Path(exists=True, dir_okay=False))
@click.option('--out', required=True, type=click.Path(file_okay=False), help='Output dataset directory')
@click.pass_context
def remap(ctx, source, out):
    """Rewrite an edge list with arbitrary node ids as dense ids 0..N-1."""
    try:
        out_dir = Path(out)
        manifest = RunManifest(command="remap")
        manifest.add_input(source)
        manifest.outputs = {name: str(out_dir / name) for name in (EDGES_FILE, NODE_IDS_FILE)}
        write_manifest(manifest, out_dir)
        mapping = remap_edge_list(source, out_dir / EDGES_FILE, out_dir / NODE_IDS_FILE)
        _print_json({"nodes": len(mapping), "out": str(out_dir)})
    except click.ClickException:
        raise
    except Exception as e:
        _fail(ctx, e)


@cli.command()
@click.argument('data_dir', type=click.Path(exists=True, file_okay=False))
@budget_options
@guide_options
@click.option('--seed', type=int, help='Run seed')
@click.option('--cache', type=click.Path(dir_okay=False), help='Cache file for the initial communities')
@click.option('--dump-gradients', type=click.IntRange(min=0), default=0,
              help='Write the K most negative candidate gradients of every iteration')
@click.option('--out', required=True, type=click.Path(file_okay=False), help='Output directory')
@click.pass_context
def guide(ctx, data_dir, budget, budget_fraction, seed, cache, dump_gradients, out, **options):
    """Add fairness-guided links to the graph in DATA_DIR."""
    try:
        config = _load_config(ctx)
        g = load_dataset(ensure_dataset_dir(data_dir))
        total = _resolve_budget(g, budget, budget_fraction, config.guide.budget)
        guide_cfg = apply_overrides(config.guide, dict(_guide_overrides(**options), budget=total, seed=seed))
        ae_cfg = apply_overrides(config.autoencoder, {"epochs": options.get('ae_epochs')})

        out_dir = Path(out)
        manifest = RunManifest(command="guide", seeds=[guide_cfg.seed], inputs=dataset_digests(data_dir))
        manifest.add_config("guide", guide_cfg)
        manifest.add_config("autoencoder", ae_cfg)
        manifest.outputs = {name: str(out_dir / name) for name in
                            (ADDITIONS_FILE, TRACE_FILE, EDGES_FILE, FEATURES_FILE, SENSITIVE_FILE)}
        if g.labels is not None:
            manifest.outputs[LABELS_FILE] = str(out_dir / LABELS_FILE)

        runner = LinkGuide(guide_cfg, ae_cfg, cache_path=cache,
                           gradient_dump_dir=out_dir if dump_gradients else None,
                           gradient_dump_k=dump_gradients)
        # Raises before any training or output when the budget is infeasible
        runner.check_budget(g)
        write_manifest(manifest, out_dir)
        result = runner.run(g)

        save_edge_additions(result.additions, out_dir / ADDITIONS_FILE)
        save_trace(result.trace_rows(), out_dir / TRACE_FILE)
        save_graph(result.graph, out_dir)

        for row in result.trace_rows():
            click.echo(f"iteration {row['iteration']}: soft dsp {row['soft_dsp_before']:.6f} -> "
                       f"{row['soft_dsp_after']:.6f} ({row['batch_size']} links, "
                       f"cross-group {row['cross_group_fraction']:.2f})")
        _print_json({
            "status": result.status,
            "iterations": result.iterations,
            "links_added": result.total_added,
            "soft_dsp_start": result.loss_trace[0],
            "soft_dsp_end": result.loss_trace[-1],
            "out": str(out_dir),
        })
    except click.ClickException:
        raise
    except Exception as e:
        _fail(ctx, e)


@cli.command()
@click.argument('data_dir', type=click.Path(exists=True, file_okay=False))
@click.option('--method', type=click.Choice(['random', 'linkpred']), required=True, help='Baseline to run')
@budget_options
@click.option('--seed', type=int, default=10, show_default=True)
@click.option('--out', required=True, type=click.Path(file_okay=False), help='Output directory')
@click.pass_context
def baseline(ctx, data_dir, method, budget, budget_fraction, seed, out):
    """Add links with a naive baseline (uniform random or feature similarity)."""
    try:
        g = load_dataset(ensure_dataset_dir(data_dir))
        total = _resolve_budget(g, budget, budget_fraction, 0)
        out_dir = Path(out)
        manifest = RunManifest(command=f"baseline {method}", seeds=[seed], inputs=dataset_digests(data_dir))
        manifest.add_config("baseline", {"method": method, "budget": total, "seed": seed})
        manifest.outputs = {name: str(out_dir / name) for name in
                            (ADDITIONS_FILE, EDGES_FILE, FEATURES_FILE, SENSITIVE_FILE)}
        if g.labels is not None:
            manifest.outputs[LABELS_FILE] = str(out_dir / LABELS_FILE)

        batch = random_batch(g, total, seed) if method == 'random' else linkpred_batch(g, total)
        write_manifest(manifest, out_dir)
        modified = add_edges(g, batch)
        save_edge_additions([batch] if len(batch) else [], out_dir / ADDITIONS_FILE)
        save_graph(modified, out_dir)
        s = g.sensitive
        cross = sum(int(s[i] != s[j]) for i, j in batch.pairs) / len(batch) if len(batch) else 0.0
        _print_json({"method": method, "links_added": len(batch), "cross_group_fraction": cross,
                     "out": str(out_dir)})
    except click.ClickException:
        raise
    except Exception as e:
        _fail(ctx, e)


def _named_graphs(original_dir: str, name: str, graphs: Tuple[str, ...], manifest: RunManifest) -> Dict[str, Graph]:
    """Load the original dataset and every LABEL=PATH variant, recording each edge list as an input."""
    loaded = {name: load_dataset(original_dir)}
    for item in graphs:
        label, path = split_assignment(item)
        if label in loaded:
            raise click.UsageError(f"Duplicate graph label: {label}")
        source = resolve_edge_source(path)
        loaded[label] = load_dataset(original_dir, edge_list_source=source)
        manifest.add_input(source)
    return loaded


@cli.command()
@click.argument('original_dir', type=click.Path(exists=True, file_okay=False))
@click.option('--graph', 'graphs', multiple=True, metavar='LABEL=PATH',
              help='Modified graph (dataset directory or edge list); repeatable')
@click.option('--name', default='vanilla', show_default=True, help='Column label of the original graph')
@click.option('--seeds', help='Comma separated evaluation seeds')
@click.option('--split-seed', type=int, help='Seed of the train/val/test split')
@click.option('--jobs', type=click.IntRange(min=1), help='Parallel (graph, seed) runs')
@click.option('--gcn-epochs', type=click.IntRange(min=1), help='GCN training epochs')
@click.option('--out', required=True, type=click.Path(file_okay=False), help='Output directory')
@click.pass_context
def evaluate(ctx, original_dir, graphs, name, seeds, split_seed, jobs, gcn_epochs, out):
    """Compare downstream fairness and utility of the original and modified graphs."""
    try:
        config = _load_config(ctx)
        ev = apply_overrides(config.evaluation, {"split_seed": split_seed, "jobs": jobs})
        seed_list = _seed_list(seeds, ev.seeds)
        gcn_cfg = apply_overrides(config.gcn, {"epochs": gcn_epochs})

        manifest = RunManifest(command="evaluate", seeds=seed_list, inputs=dataset_digests(original_dir))
        loaded = _named_graphs(ensure_dataset_dir(original_dir), name, graphs, manifest)
        labels = loaded[name].labels
        if labels is None:
            raise click.UsageError(f"{original_dir} has no {LABELS_FILE}; evaluation needs node labels")

        out_dir = Path(out)
        manifest.add_config("evaluation", ev)
        manifest.add_config("gcn", gcn_cfg)
        manifest.add_config("graphs", {label: str(path) for label, path in
                                       [(name, original_dir)] + [split_assignment(g) for g in graphs]})
        manifest.outputs = {k: str(out_dir / v) for k, v in
                            {"report": "report.txt", "report_kv": "report.kv", "runs": "runs.csv"}.items()}
        write_manifest(manifest, out_dir)

        split = make_splits(labels, ev.split_seed, ev.val_fraction, ev.test_fraction)
        reports = evaluate_graphs(loaded, labels, split, seed_list, gcn_cfg, ev.jobs)
        write_report(list(reports.values()), out_dir)
        click.echo(format_report_table(list(reports.values())), nl=False)
    except click.ClickException:
        raise
    except Exception as e:
        _fail(ctx, e)


@cli.command()
@click.argument('data_dir', type=click.Path(exists=True, file_okay=False))
@click.option('--max-nodes', type=click.IntRange(min=2), default=50, show_default=True,
              help='Refuse graphs larger than this')
@click.option('--pairs', 'num_pairs', type=click.IntRange(min=1), default=200, show_default=True,
              help='Candidate pairs to check')
@click.option('--step', type=click.FloatRange(min=0.0, min_open=True), default=1e-5, show_default=True,
              help='Finite-difference step')
@click.option('--atol', type=click.FloatRange(min=0.0), default=1e-6, show_default=True)
@click.option('--rtol', type=click.FloatRange(min=0.0), default=1e-4, show_default=True)
@click.option('--alpha', type=click.FloatRange(0.0, 1.0), help='Restart probability of the propagation')
@click.option('--k-steps', type=click.IntRange(min=1), help='Propagation depth')
@click.option('--communities', type=click.IntRange(min=1), help='Number of pseudo communities')
@click.option('--ae-epochs', type=click.IntRange(min=1), help='Autoencoder training epochs')
@click.option('--seed', type=int, help='Run seed')
@click.option('--flip-sign', is_flag=True, hidden=True, help='Negate the analytic gradient (harness self-test)')
@click.option('--out', type=click.Path(file_okay=False), help='Directory for the manifest and report')
@click.pass_context
def gradcheck(ctx, data_dir, max_nodes, num_pairs, step, atol, rtol, alpha, k_steps, communities, ae_epochs,
              seed, flip_sign, out):
    """Check the analytic meta-gradient against finite differences."""
    try:
        config = _load_config(ctx)
        g = load_dataset(ensure_dataset_dir(data_dir))
        if g.num_nodes > max_nodes:
            raise click.UsageError(f"graph has {g.num_nodes} nodes; gradcheck is capped at --max-nodes {max_nodes}")
        cfg = apply_overrides(config.guide, {"alpha": alpha, "k_steps": k_steps,
                                             "communities": communities, "seed": seed})
        ae_cfg = apply_overrides(config.autoencoder, {"epochs": ae_epochs})
        settings = {"pairs": num_pairs, "step": step, "atol": atol, "rtol": rtol, "flip_sign": flip_sign}
        if out:
            manifest = RunManifest(command="gradcheck", seeds=[cfg.seed], inputs=dataset_digests(data_dir))
            manifest.add_config("guide", cfg)
            manifest.add_config("autoencoder", ae_cfg)
            manifest.add_config("gradcheck", settings)
            manifest.outputs = {"report": str(Path(out) / "gradcheck.json")}
            write_manifest(manifest, out)

        init = LinkGuide(cfg, ae_cfg).initial_communities(g)
        if has_kink(g, init, cfg.alpha, cfg.k_steps):
            logger.warning("Some class has equal group means; the loss is not differentiable there")
        pool = list(candidate_edges(g))
        pairs = sample_pairs(pool, num_pairs, derive_rng(cfg.seed, "gradcheck"))
        report = gradient_check(g, init, cfg.alpha, cfg.k_steps, pairs, h=step, atol=atol, rtol=rtol,
                                flip_sign=flip_sign)

        summary: Dict[str, Any] = {
            "pairs": len(pairs),
            "max_abs_error": float(report.abs_errors.max()) if pairs else 0.0,
            "max_rel_error": float(report.rel_errors.max()) if pairs else 0.0,
            "violations": int(report.violations.sum()),
            "passed": report.passed,
        }
        worst = report.worst()
        if worst is not None:
            summary["worst"] = {"pair": [worst[0], worst[1]], "analytic": worst[2], "numeric": worst[3]}
        if out:
            Path(out, "gradcheck.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        _print_json(summary)
        if not report.passed:
            i, j, analytic, numeric = worst
            raise NumericalError(f"gradient check failed at pair ({i}, {j}): analytic {analytic!r} "
                                 f"vs numeric {numeric!r}")
    except click.ClickException:
        raise
    except Exception as e:
        _fail(ctx, e)


@cli.command()
@click.argument('data_dir', type=click.Path(exists=True, file_okay=False))
@click.option('--betas', default='0,1,4,10', show_default=True, help='Comma separated beta values')
@click.option('--communities-list', default='10', show_default=True, help='Comma separated community counts')
@budget_options
@click.option('--seed', type=int, help='Run seed')
@click.option('--seeds', help='Comma separated evaluation seeds')
@click.option('--ae-epochs', type=click.IntRange(min=1), help='Autoencoder training epochs')
@click.option('--gcn-epochs', type=click.IntRange(min=1), help='GCN training epochs')
@click.option('--jobs', type=click.IntRange(min=1), help='Parallel (graph, seed) runs')
@click.option('--init-mode', type=click.Choice(INIT_MODES), help='K-means or random initial communities')
@click.option('--single-shot/--iterative', default=None, help='One gradient for the whole budget')
@click.option('--out', required=True, type=click.Path(file_okay=False), help='Output directory')
@click.pass_context
def sweep(ctx, data_dir, betas, communities_list, budget, budget_fraction, seed, seeds, ae_epochs, gcn_epochs,
          jobs, init_mode, single_shot, out):
    """Guide and evaluate over a grid of beta and community counts."""
    try:
        config = _load_config(ctx)
        g = load_dataset(ensure_dataset_dir(data_dir))
        beta_values = parse_float_list(betas)
        community_values = parse_int_list(communities_list)
        if not beta_values or not community_values:
            raise click.UsageError("--betas and --communities-list must not be empty")
        total = _resolve_budget(g, budget, budget_fraction, config.guide.budget)
        guide_cfg = apply_overrides(config.guide, {"budget": total, "seed": seed, "init_mode": init_mode,
                                                   "single_shot": single_shot})
        ae_cfg = apply_overrides(config.autoencoder, {"epochs": ae_epochs})
        gcn_cfg = apply_overrides(config.gcn, {"epochs": gcn_epochs})
        ev = apply_overrides(config.evaluation, {"jobs": jobs})
        seed_list = _seed_list(seeds, ev.seeds)
        if g.labels is None:
            raise click.UsageError(f"{data_dir} has no {LABELS_FILE}; the sweep needs node labels")

        out_dir = Path(out)
        manifest = RunManifest(command="sweep", seeds=seed_list, inputs=dataset_digests(data_dir))
        for section_name, section in (("guide", guide_cfg), ("autoencoder", ae_cfg), ("gcn", gcn_cfg),
                                      ("evaluation", ev)):
            manifest.add_config(section_name, section)
        manifest.add_config("grid", {"betas": beta_values, "communities": community_values})
        manifest.outputs = {"sweep": str(out_dir / SWEEP_FILE)}
        write_manifest(manifest, out_dir)

        split = make_splits(g.labels, ev.split_seed, ev.val_fraction, ev.test_fraction)
        rows = run_sweep(g, guide_cfg, beta_values, community_values, split, seed_list, ae_cfg, gcn_cfg, ev.jobs)
        write_sweep(rows, out_dir / SWEEP_FILE)
        _print_json({"rows": len(rows), "out": str(out_dir / SWEEP_FILE)})
    except click.ClickException:
        raise
    except Exception as e:
        _fail(ctx, e)


@cli.command()
@click.option('--sizes', default='1000,5000', show_default=True, help='Comma separated node counts')
@click.option('--degree', type=click.FloatRange(min=0.0, min_open=True), default=20.0, show_default=True,
              help='Expected average degree')
@click.option('--links', type=click.IntRange(min=1), default=100, show_default=True, help='Links to time')
@click.option('--communities', type=click.IntRange(min=1), help='Number of pseudo communities')
@click.option('--exact-degree/--frozen-degree', default=None)
@click.option('--ae-epochs', type=click.IntRange(min=1), help='Autoencoder training epochs')
@click.option('--seed', type=int, default=10, show_default=True)
@click.option('--out', type=click.Path(file_okay=False), help='Directory for the manifest and bench.csv')
@click.pass_context
def bench(ctx, sizes, degree, links, communities, exact_degree, ae_epochs, seed, out):
    """Time the link-addition loop per suggested link on growing SBMs."""
    try:
        config = _load_config(ctx)
        size_values = parse_int_list(sizes)
        guide_cfg = apply_overrides(config.guide, {"communities": communities, "exact_degree": exact_degree})
        ae_cfg = apply_overrides(config.autoencoder, {"epochs": ae_epochs})
        if out:
            manifest = RunManifest(command="bench", seeds=[seed])
            manifest.add_config("guide", guide_cfg)
            manifest.add_config("autoencoder", ae_cfg)
            manifest.add_config("bench", {"sizes": size_values, "degree": degree, "links": links})
            manifest.outputs = {"bench": str(Path(out) / "bench.csv")}
            write_manifest(manifest, out)

        rows = benchmark_per_link(size_values, degree, links, guide_cfg, ae_cfg, seed)
        for row in rows:
            click.echo(f"n={row['num_nodes']}: {row['seconds_per_link'] * 1e3:.3f} ms per link "
                       f"({row['edges']} edges)")
        if len(rows) > 1:
            first, last = rows[0], rows[-1]
            ratio = (last['seconds_per_link'] / first['seconds_per_link']) / (last['num_nodes'] / first['num_nodes'])
            click.echo(f"per-link time ratio relative to linear scaling: {ratio:.2f}")
        if out:
            with open(Path(out) / "bench.csv", "w", newline="") as f:
                writer = csv.DictWriter(f, fieldnames=list(rows[0]), lineterminator="\n")
                writer.writeheader()
                writer.writerows(rows)
    except click.ClickException:
        raise
    except Exception as e:
        _fail(ctx, e)


@cli.command()
@click.pass_context
def validate(ctx):
    """Validate configuration file."""
    try:
        config_manager = ConfigManager(ctx.obj['config_path'])
        issues = config_manager.validate_config()

        if not issues:
            source = config_manager.config_path or "built-in defaults"
            click.echo(f"✓ Configuration is valid ({source})")
        else:
            click.echo("Configuration issues found:")
            for issue in issues:
                click.echo(f"  ✗ {issue}")
            sys.exit(1)

    except Exception as e:
        click.echo(f"Error: {str(e)}", err=True)
        sys.exit(1)


@cli.command()
@click.option('--force', '-f', is_flag=True, help='Overwrite an existing file without asking')
@click.option('--stdout', 'to_stdout', is_flag=True, help='Print the sample configuration instead')
@click.pass_context
def init(ctx, force: bool, to_stdout: bool):
    """Initialize configuration file."""
    if to_stdout:
        click.echo(SAMPLE_CONFIG, nl=False)
        return

    config_path = ctx.obj['config_path'] or 'fairguide.yaml'

    if Path(config_path).exists() and not force:
        click.echo(f"Configuration file already exists: {config_path}")
        if not click.confirm("Overwrite?"):
            return

    with open(config_path, 'w') as f:
        f.write(SAMPLE_CONFIG)

    click.echo(f"Created configuration file: {config_path}")
    click.echo("\nNext steps:")
    click.echo("1. Adjust the hyperparameters")
    click.echo("2. Run: fairguide validate")
    click.echo("3. Generate data: fairguide generate --out data/")
    click.echo("4. Guide: fairguide guide data/ --budget-fraction 0.02 --out guided/")


if __name__ == '__main__':
    cli()
