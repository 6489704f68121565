"""
Diagnostics command module.

Contains the sanity, sensitivity and reference-sweep commands, which probe
explanation methods beyond the evaluation curves.
"""

import logging
from typing import Dict, List, Tuple

import click
import numpy as np

from commands.common import (
    attack_options,
    attributions_for,
    explain_context,
    explainer_options,
    load_run_model,
    load_split,
    resolve_config,
    select_examples,
)
from config import REFERENCE_SWEEP, SENS_RADIUS, SENS_SAMPLES, SENS_TOP_FRACTION
from services.criteria import REPLACEMENT_CRITERIA, ReferenceSpec, insertion_deletion_curve, sanity_check, sensitivity
from services.formatters import atomic_write_text, csv_text, format_float, status_payload, write_json
from services.methods import METHODS, OBJECTIVE_FOR_CRITERION, SET_METHODS, attribution_fn, top_set_fn
from services.run_config import RunManifest, timed_stage
from services.seeding import derive_seed
from services.workers import map_ordered

logger = logging.getLogger(__name__)

# stream key of the sensitivity neighbourhood draws
SENSITIVITY_STREAM = 2

# The cli group will be injected by the main module
cli = None


def init_cli(cli_group):
    """Initialize the cli group for this module"""
    global cli
    cli = cli_group

    cli.add_command(sanity)
    cli.add_command(sensitivity_cmd)
    cli.add_command(reference_sweep)


def _prepare(ctx, methods, explainer_overrides, attack_overrides):
    config = resolve_config(
        ctx, methods=methods.split(",") if methods else None, **explainer_overrides, **attack_overrides
    )
    train_set, test_set = load_split(config)
    model = load_run_model(config, test_set.dim)
    ids, examples, _ = select_examples(model, test_set, config)
    return config, model, ids, examples, explain_context(config, train_set)


def _finish(config, command: str, filename: str, payload: Dict, timings: Dict[str, float]):
    run_dir = config.run_directory()
    write_json(run_dir / filename, payload)
    manifest = RunManifest(command=command, config=config.echo(), stage_seconds=timings)
    write_json(run_dir / f"manifest-{command}.json", manifest.model_dump(mode="json"))
    return run_dir


@click.command("sanity")
@click.option("--methods", default=None, help="Comma-separated method names")
@explainer_options
@attack_options
@click.pass_context
def sanity(ctx, methods, explainer_overrides, attack_overrides):
    """Rank correlation of each method before and after last-layer randomisation."""
    config, model, ids, examples, context = _prepare(ctx, methods, explainer_overrides, attack_overrides)
    timings: Dict[str, float] = {}
    results = {}
    for method in config.methods:
        with timed_stage(timings, f"sanity:{method}"):
            result = sanity_check(
                model, examples, attribution_fn(method, config.explainer, context), config.seed, config.jobs
            )
        results[method] = {"mean": result.mean, "per_example": dict(zip(map(str, ids), result.per_example))}
        logger.info(f"Sanity check {method}: mean rank correlation {result.mean:.4f}")

    run_dir = _finish(config, "sanity", "sanity.json", {"methods": results}, timings)
    click.echo(status_payload(run_dir=str(run_dir), mean_rho={m: r["mean"] for m, r in results.items()}))


@click.command("sensitivity")
@click.option("--methods", default=None, help="Comma-separated method names")
@click.option("--radius", type=click.FloatRange(min=0.0), default=SENS_RADIUS, show_default=True)
@click.option("--fraction", type=click.FloatRange(0.0, 1.0, min_open=True), default=SENS_TOP_FRACTION, show_default=True)
@click.option("--sens-samples", "num_samples", type=click.IntRange(min=1), default=SENS_SAMPLES, show_default=True)
@explainer_options
@attack_options
@click.pass_context
def sensitivity_cmd(ctx, methods, radius, fraction, num_samples, explainer_overrides, attack_overrides):
    """Mean sensitivity of each method's top-fraction feature set."""
    config, model, ids, examples, context = _prepare(ctx, methods, explainer_overrides, attack_overrides)
    timings: Dict[str, float] = {}
    results = {}
    for method in config.methods:

        def measure(position: int) -> float:
            example_id = ids[position]
            explain_set = top_set_fn(method, config.explainer, context, fraction, example_id)
            seed = derive_seed(config.seed, SENSITIVITY_STREAM, METHODS.index(method), example_id)
            return sensitivity(model, explain_set, examples[position].x, radius, num_samples, seed)

        with timed_stage(timings, f"sensitivity:{method}"):
            values = map_ordered(measure, range(len(examples)), config.jobs, desc=method)
        results[method] = {"mean": float(np.mean(values)), "per_example": dict(zip(map(str, ids), values))}
        logger.info(f"Sensitivity {method}: mean {results[method]['mean']:.4f}")

    payload = {"radius": radius, "fraction": fraction, "samples": num_samples, "methods": results}
    run_dir = _finish(config, "sensitivity", "sensitivity.json", payload, timings)
    click.echo(status_payload(run_dir=str(run_dir), mean_sensitivity={m: r["mean"] for m, r in results.items()}))


@click.command("reference-sweep")
@click.option("--methods", default=None, help="Comma-separated method names")
@click.option("--values", "values", multiple=True, type=float, help="Scalar reference values (repeatable)")
@explainer_options
@attack_options
@click.pass_context
def reference_sweep(ctx, methods, values, explainer_overrides, attack_overrides):
    """Insertion and Deletion AUC of each method under several scalar references."""
    config, model, ids, examples, context = _prepare(ctx, methods, explainer_overrides, attack_overrides)
    values = tuple(values) or REFERENCE_SWEEP
    timings: Dict[str, float] = {}
    results: Dict[str, Dict[str, Dict[str, float]]] = {}
    rows: List[Tuple] = []
    for method in config.methods:
        results[method] = {}
        cache = {}
        for criterion in REPLACEMENT_CRITERIA:
            objective = OBJECTIVE_FOR_CRITERION[criterion] if method in SET_METHODS else None
            if objective not in cache:
                with timed_stage(timings, f"explain:{method}:{objective or 'scores'}"):
                    cache[objective] = attributions_for(config, model, ids, examples, context, method, objective)
            attributions = cache[objective]
            for value in values:
                curve = insertion_deletion_curve(
                    model, examples, attributions, criterion,
                    ReferenceSpec.scalar(value), config.fractions, config.jobs, ids,
                )
                results[method].setdefault(format_float(value), {})[f"{criterion}_auc"] = curve.auc
                rows.append((method, format_float(value), criterion, format_float(curve.auc)))

    run_dir = _finish(config, "reference-sweep", "reference_sweep.json", {"methods": results}, timings)
    atomic_write_text(run_dir / "reference_sweep.csv", csv_text(("method", "reference", "criterion", "auc"), rows))
    click.echo(status_payload(run_dir=str(run_dir), references=[format_float(v) for v in values]))
