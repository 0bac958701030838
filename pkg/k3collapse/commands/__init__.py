import json
import logging
from typing import Annotated, Callable, Optional

import typer

from k3collapse.errors import ConfigError
from k3collapse.pipeline import JobContext, execute, load_config

logger = logging.getLogger(__name__)

# Options shared by every command; each mirrors a K3C_* environment variable
ConfigOption = Annotated[Optional[str], typer.Option("--config", envvar="K3C_CONFIG", help="Job configuration JSON file.")]
OutOption = Annotated[Optional[str], typer.Option("--out", envvar="K3C_OUT", help="Output directory.")]
CacheOption = Annotated[Optional[str], typer.Option("--cache", envvar="K3C_CACHE", help="Period cache path, or 'off'.")]
SeedOption = Annotated[Optional[int], typer.Option("--seed", envvar="K3C_SEED", min=0, help="Seed for randomized sampling.")]
JobsOption = Annotated[Optional[int], typer.Option("--jobs", envvar="K3C_JOBS", min=1, help="Worker threads.")]


def run_command(
    runner: Callable[[JobContext], dict],
    config: Optional[str],
    out: Optional[str],
    cache: Optional[str],
    seed: Optional[int],
    jobs: Optional[int],
) -> None:
    """Exit 0 when every contract passed, 1 on contract failures, 2 on configuration errors."""
    try:
        job = load_config(config, out=out, cache=cache, seed=seed, jobs=jobs)
        code = execute(runner, job)
    except ConfigError as exc:
        logger.error(f"[config] {exc}")
        typer.echo(json.dumps(exc.to_dict(), sort_keys=True, default=str), err=True)
        raise typer.Exit(code=2)
    raise typer.Exit(code=code)
