import typer

from k3collapse.commands import CacheOption, ConfigOption, JobsOption, OutOption, SeedOption, run_command
from k3collapse.pipeline import run_classify

app = typer.Typer(help="Singular fibers of a Weierstrass model.", no_args_is_help=True)


@app.command("classify")
def classify(config: ConfigOption = None, out: OutOption = None, cache: CacheOption = None,
             seed: SeedOption = None, jobs: JobsOption = None):
    """Locate the discriminant, classify every fiber and write fibers_<label>.csv."""
    run_command(run_classify, config, out, cache, seed, jobs)
