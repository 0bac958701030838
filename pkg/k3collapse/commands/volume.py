import typer

from k3collapse.commands import CacheOption, ConfigOption, JobsOption, OutOption, SeedOption, run_command
from k3collapse.pipeline import run_volume

app = typer.Typer(help="Fiber volume asymptotics.", no_args_is_help=True)


@app.command("fit")
def fit(config: ConfigOption = None, out: OutOption = None, cache: CacheOption = None,
        seed: SeedOption = None, jobs: JobsOption = None):
    """Fit (alpha, d) at every singular fiber and compare with the Kodaira prediction."""
    run_command(run_volume, config, out, cache, seed, jobs)
