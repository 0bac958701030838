import typer

from k3collapse.commands import CacheOption, ConfigOption, JobsOption, OutOption, SeedOption, run_command
from k3collapse.pipeline import (
    run_completion,
    run_length_bound,
    run_metric_build,
    run_metric_diameter,
    run_metric_distance,
)

app = typer.Typer(help="The limit metric on the punctured base.", no_args_is_help=True)


@app.command("build")
def build(config: ConfigOption = None, out: OutOption = None, cache: CacheOption = None,
          seed: SeedOption = None, jobs: JobsOption = None):
    """Mesh, normalize and refine; checks area convergence and density proportionality."""
    run_command(run_metric_build, config, out, cache, seed, jobs)


@app.command("distance")
def distance(config: ConfigOption = None, out: OutOption = None, cache: CacheOption = None,
             seed: SeedOption = None, jobs: JobsOption = None):
    """Distances between the configured point pairs at every refinement level."""
    run_command(run_metric_distance, config, out, cache, seed, jobs)


@app.command("diameter")
def diameter(config: ConfigOption = None, out: OutOption = None, cache: CacheOption = None,
             seed: SeedOption = None, jobs: JobsOption = None):
    run_command(run_metric_diameter, config, out, cache, seed, jobs)


@app.command("completion")
def completion(config: ConfigOption = None, out: OutOption = None, cache: CacheOption = None,
               seed: SeedOption = None, jobs: JobsOption = None):
    """Completion points, their pairwise distances and distances to each puncture."""
    run_command(run_completion, config, out, cache, seed, jobs)


@app.command("bound")
def bound(config: ConfigOption = None, out: OutOption = None, cache: CacheOption = None,
          seed: SeedOption = None, jobs: JobsOption = None):
    """Connecting-curve length bound near every finite fiber."""
    run_command(run_length_bound, config, out, cache, seed, jobs)
