import json
import logging
from functools import wraps
from typing import Callable

import click
from pydantic import ValidationError

from heisenberg_psido.exceptions import EngineException

logger = logging.getLogger(__name__)


def exit_on_error(func: Callable) -> Callable:
    """Map engine and validation errors to a JSON message on stderr and the command's exit status."""

    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ValidationError as e:
            payload = {"error": "ValidationError", "message": "Invalid configuration", "data": e.errors(), "exit_status": 2}
            click.echo(json.dumps(payload, sort_keys=True, default=str), err=True)
            raise click.exceptions.Exit(2)
        except EngineException as e:
            logger.error("%s: %s", type(e).__name__, e.message)
            click.echo(json.dumps(e.dict(), sort_keys=True, default=str), err=True)
            raise click.exceptions.Exit(e.exit_status)

    return wrapper


def run_options(func: Callable) -> Callable:
    """Options shared by every experiment command."""
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Sectioned ini run configuration."),
        click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="Output directory."),
        click.option("--symbol", "symbol_spec", default=None, help="NAME[:k=v,...] of a built-in symbol."),
        click.option("--orders", default=None, help="Derivative orders a,b,c."),
        click.option("--tol", "tolerances", multiple=True, help="Tolerance override NAME=VAL, repeatable."),
        click.option("--seed", type=int, default=None, help="Seed of the sample functions."),
    ]
    for option in reversed(options):
        func = option(func)
    return func
