"""
Explain command module.

Contains the explain command writing the attribution of one test example,
optionally as a targeted explanation (why y rather than t).
"""

import logging

import click

from commands.common import (
    attack_options,
    explain_context,
    explainer_options,
    load_run_model,
    load_split,
    resolve_config,
)
from services.attack import top_count
from services.classifier import predict
from services.errors import ConfigError
from services.formatters import status_payload, write_attribution_csv
from services.methods import METHODS, SET_METHODS, explain

logger = logging.getLogger(__name__)

# The cli group will be injected by the main module
cli = None


def init_cli(cli_group):
    """Initialize the cli group for this module"""
    global cli
    cli = cli_group

    cli.add_command(explain_example)


@click.command("explain")
@click.option("--index", type=int, required=True, help="Index into the test split")
@click.option("--method", type=click.Choice(METHODS), default=None, help="Explanation method (default: first configured)")
@click.option("--target", "target_class", type=int, default=None, help="Target class t for a targeted explanation")
@click.option(
    "--objective",
    type=click.Choice(["max_sbar", "min_s"]),
    default="max_sbar",
    show_default=True,
    help="Selection objective of the set methods",
)
@click.option("--dataset", "dataset_path", default=None, help="Dataset CSV (overrides dataset_path)")
@click.option("--model", "model_path", default=None, help="Model file (overrides model_path)")
@explainer_options
@attack_options
@click.pass_context
def explain_example(
    ctx, index, method, target_class, objective, dataset_path, model_path, explainer_overrides, attack_overrides
):
    """Write per-feature scores and ranks for one test example."""
    config = resolve_config(
        ctx,
        dataset_path=dataset_path,
        model_path=model_path,
        target_class=target_class,
        **explainer_overrides,
        **attack_overrides,
    )
    method = method or config.methods[0]
    train_set, test_set = load_split(config)
    model = load_run_model(config, test_set.dim)
    if not 0 <= index < len(test_set):
        raise ConfigError(f"--index {index} out of range for {len(test_set)} test examples")

    example = test_set.examples[index]
    predicted = predict(model, example.x)
    if config.target_class is not None:
        if config.target_class >= model.num_classes:
            raise ConfigError(f"target class {config.target_class} out of range for {model.num_classes} classes")
        if config.target_class == predicted:
            raise ConfigError(f"target class {config.target_class} equals the predicted class")
        if method not in SET_METHODS:
            logger.warning(f"Method {method} ignores the target class")

    attribution = explain(
        method,
        model,
        example.x,
        config.explainer,
        explain_context(config, train_set),
        example_id=index,
        objective=objective,
        target_class=config.target_class,
    )
    suffix = "" if config.target_class is None else f"-t{config.target_class}"
    path = config.run_directory() / f"explain-{method}-{index}{suffix}.csv"
    write_attribution_csv(path, index, attribution)

    k = top_count(config.explainer.target_fraction, attribution.dim)
    logger.info(f"Explained test example {index} (label {example.label}, predicted {predicted}) with {method}")
    click.echo(status_payload(
        path=str(path),
        method=method,
        index=index,
        label=example.label,
        predicted=predicted,
        target=config.target_class,
        top_features=attribution.ranking[:k].tolist(),
    ))
