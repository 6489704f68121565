"""
Data command module.

Contains the gen-data command writing one of the bundled datasets as CSV.
"""

import logging

import click

from commands.common import resolve_config
from config import DATA_KINDS
from services.datasets import generate_dataset, save_dataset
from services.formatters import status_payload

logger = logging.getLogger(__name__)

# The cli group will be injected by the main module
cli = None


def init_cli(cli_group):
    """Initialize the cli group for this module"""
    global cli
    cli = cli_group

    cli.add_command(gen_data)


@click.command("gen-data")
@click.option("--kind", type=click.Choice(DATA_KINDS), required=True, help="Dataset to generate")
@click.option("--n", "n", type=int, required=True, help="Number of examples (at least 10)")
@click.option("--output", type=click.Path(dir_okay=False), required=True, help="Destination CSV file")
@click.pass_context
def gen_data(ctx, kind, n, output):
    """Generate a dataset CSV (label first, then the features)."""
    config = resolve_config(ctx)
    dataset = generate_dataset(kind, n, config.seed)
    save_dataset(dataset, output)
    logger.info(f"Wrote {len(dataset)} {kind} examples with {dataset.dim} features to {output}")
    click.echo(status_payload(
        path=str(output),
        kind=kind,
        n=len(dataset),
        dim=dataset.dim,
        num_classes=dataset.num_classes,
    ))
