"""
Evaluate command module.

Contains the evaluate command: explain the selected test examples with every
configured method and score the attributions under every configured
criterion.
"""

import logging
from typing import Dict, List, Optional, Tuple

import click

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
from services.criteria import ROBUSTNESS_CRITERIA, EvalCurve, insertion_deletion_curve, robustness_curve
from services.formatters import auc_report, status_payload, write_curves_csv, write_json, write_per_example_csv
from services.methods import OBJECTIVE_FOR_CRITERION, SET_METHODS
from services.run_config import RunManifest, timed_stage

logger = logging.getLogger(__name__)

# The cli group will be injected by the main module
cli = None


def init_cli(cli_group):
    """Initialize the cli group for this module"""
    global cli
    cli = cli_group

    cli.add_command(evaluate)


def criterion_objective(method: str, criterion: str) -> Optional[str]:
    """Selection objective a set method uses for this criterion; None for scoring methods."""
    return OBJECTIVE_FOR_CRITERION[criterion] if method in SET_METHODS else None


def run_evaluation(config, timings: Dict[str, float]) -> Tuple[List[Tuple[str, EvalCurve]], Dict[str, int]]:
    """
    Compute every (method, criterion) curve.

    Returns:
        Tuple of (curves in method then criterion order, diagnostics)
    """
    with timed_stage(timings, "load"):
        train_set, test_set = load_split(config)
        model = load_run_model(config, test_set.dim)
        ids, examples, passed = select_examples(model, test_set, config)
        context = explain_context(config, train_set)

    criteria_cfg = config.criteria_config()
    curves: List[Tuple[str, EvalCurve]] = []
    for method in config.methods:
        attributions = {}
        for criterion in config.criteria:
            objective = criterion_objective(method, criterion)
            if objective not in attributions:
                with timed_stage(timings, f"explain:{method}" + (f":{objective}" if objective else "")):
                    attributions[objective] = attributions_for(
                        config, model, ids, examples, context, method, objective
                    )
            logger.info(f"Evaluating method={method} criterion={criterion} on {len(examples)} examples")
            with timed_stage(timings, f"{criterion}:{method}"):
                if criterion in ROBUSTNESS_CRITERIA:
                    curve = robustness_curve(
                        model, examples, attributions[objective], criterion, criteria_cfg, config.jobs, ids
                    )
                else:
                    curve = insertion_deletion_curve(
                        model, examples, attributions[objective], criterion,
                        config.reference, config.fractions, config.jobs, ids,
                    )
            curves.append((method, curve))

    diagnostics = {
        "examples_evaluated": len(examples),
        "skipped_misclassified": passed,
        "capped_attacks": sum(curve.n_capped for _, curve in curves),
    }
    return curves, diagnostics


@click.command("evaluate")
@click.option("--dataset", "dataset_path", default=None, help="Dataset CSV (overrides dataset_path)")
@click.option("--model", "model_path", default=None, help="Model file (overrides model_path)")
@click.option("--methods", default=None, help="Comma-separated method names")
@click.option("--criteria", default=None, help="Comma-separated criteria")
@click.option("--num-examples", type=click.IntRange(min=1), default=None, help="Number of test examples")
@click.option("--target", "target_class", type=click.IntRange(min=0), default=None, help="Targeted evaluation class")
@explainer_options
@attack_options
@click.pass_context
def evaluate(
    ctx, dataset_path, model_path, methods, criteria, num_examples, target_class, explainer_overrides, attack_overrides
):
    """Write curves.csv, per_example.csv, report.json and manifest.json."""
    config = resolve_config(
        ctx,
        dataset_path=dataset_path,
        model_path=model_path,
        methods=methods.split(",") if methods else None,
        criteria=criteria.split(",") if criteria else None,
        num_examples=num_examples,
        target_class=target_class,
        **explainer_overrides,
        **attack_overrides,
    )
    timings: Dict[str, float] = {}
    curves, diagnostics = run_evaluation(config, timings)

    run_dir = config.run_directory()
    with timed_stage(timings, "write"):
        write_curves_csv(run_dir / "curves.csv", curves)
        write_per_example_csv(run_dir / "per_example.csv", curves)
        write_json(run_dir / "report.json", auc_report(curves, config.echo(portable=True)))
    manifest = RunManifest(command="evaluate", config=config.echo(), stage_seconds=timings, diagnostics=diagnostics)
    write_json(run_dir / "manifest.json", manifest.model_dump(mode="json"))

    logger.info(f"Wrote evaluation of {len(config.methods)} method(s) to {run_dir}")
    click.echo(status_payload(
        run_dir=str(run_dir),
        aucs={f"{method}/{curve.criterion}": curve.auc for method, curve in curves},
        **diagnostics,
    ))
