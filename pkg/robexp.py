"""
robexp - Main Entry Point

Command-line harness for robustness-based evaluation of feature explanations.
This lightweight entry point builds the click group and initializes all
command modules.
"""

import logging
import sys

import click

from config import JOBS, LOG_LEVEL, VERSION
from services.errors import RobexpError
from services.logger import setup_logging

# Import command modules (they will register themselves)
import commands.data
import commands.diagnostics
import commands.evaluate
import commands.explain
import commands.train

logger = logging.getLogger("robexp")

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


@click.group()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="Run config JSON file")
@click.option("--seed", type=int, default=None, help="Global seed (overrides the config file)")
@click.option("--jobs", type=click.IntRange(min=1), default=None, help=f"Worker threads [default: {JOBS}]")
@click.option("--out", "output_dir", default=None, help="Output directory (overrides output_dir)")
@click.option("--log-level", type=click.Choice(LOG_LEVELS, case_sensitive=False), default=LOG_LEVEL, show_default=True)
@click.version_option(VERSION, prog_name="robexp")
@click.pass_context
def cli(ctx, config_path, seed, jobs, output_dir, log_level):
    """Evaluate and extract feature explanations by adversarial robustness."""
    setup_logging(log_level)
    ctx.obj = {
        "config_path": config_path,
        "overrides": {"seed": seed, "jobs": jobs, "output_dir": output_dir},
    }


# Initialize all command modules by passing them the cli group
commands.data.init_cli(cli)
commands.train.init_cli(cli)
commands.evaluate.init_cli(cli)
commands.explain.init_cli(cli)
commands.diagnostics.init_cli(cli)


def main(argv=None) -> int:
    """Run the CLI and map failures to exit codes."""
    try:
        result = cli.main(args=argv, prog_name="robexp", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.Abort:
        click.echo("Aborted!", err=True)
        return 1
    except RobexpError as e:
        logger.error(str(e))
        return e.exit_code
    return result if isinstance(result, int) else 0


if __name__ == "__main__":
    sys.exit(main())
