import typer

from k3collapse.commands import CacheOption, ConfigOption, JobsOption, OutOption, SeedOption, run_command
from k3collapse.pipeline import run_scaling, run_semiflat_check

app = typer.Typer(help="Semi-flat hyperkähler tensors.", no_args_is_help=True)


@app.command("check")
def check(config: ConfigOption = None, out: OutOption = None, cache: CacheOption = None,
          seed: SeedOption = None, jobs: JobsOption = None):
    """Complex structure, hyperkähler triple and volume identity on random samples."""
    run_command(run_semiflat_check, config, out, cache, seed, jobs)


@app.command("scaling")
def scaling(config: ConfigOption = None, out: OutOption = None, cache: CacheOption = None,
            seed: SeedOption = None, jobs: JobsOption = None):
    """Rate at which the rescaled holomorphic symplectic form approaches its limit."""
    run_command(run_scaling, config, out, cache, seed, jobs)
