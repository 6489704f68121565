"""
Train command module.

Contains the train command: split the dataset, fit the network with SGD and
write the model file.
"""

import logging

import click
import numpy as np

from commands.common import load_split, resolve_config
from services.classifier import predict, save_model, train_sgd
from services.errors import ConfigError
from services.formatters import status_payload

logger = logging.getLogger(__name__)

# The cli group will be injected by the main module
cli = None


def init_cli(cli_group):
    """Initialize the cli group for this module"""
    global cli
    cli = cli_group

    cli.add_command(train)


@click.command("train")
@click.option("--dataset", "dataset_path", default=None, help="Dataset CSV (overrides dataset_path)")
@click.option("--model", "model_path", default=None, help="Model file to write (overrides model_path)")
@click.pass_context
def train(ctx, dataset_path, model_path):
    """Train the classifier and report its accuracy."""
    config = resolve_config(ctx, dataset_path=dataset_path, model_path=model_path)
    if not config.model_path:
        raise ConfigError("model_path is not set; pass it in the config file or with --model")
    train_set, test_set = load_split(config)
    sizes = [train_set.dim, *config.train.hidden_sizes, int(max(train_set.num_classes, test_set.num_classes))]
    model = train_sgd(train_set, sizes, config.train.train_config(config.seed))
    test_accuracy = float(np.mean(predict(model, test_set.features) == test_set.labels))
    save_model(model, config.model_path)
    logger.info(f"Saved model to {config.model_path}, test accuracy {test_accuracy:.4f}")
    click.echo(status_payload(
        model_path=config.model_path,
        train_accuracy=model.train_accuracy,
        test_accuracy=test_accuracy,
    ))
