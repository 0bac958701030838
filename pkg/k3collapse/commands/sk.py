import typer

from k3collapse.commands import CacheOption, ConfigOption, JobsOption, OutOption, SeedOption, run_command
from k3collapse.pipeline import run_sk_check, run_sk_transitions

app = typer.Typer(help="Special Kähler charts and their integral affine structure.", no_args_is_help=True)


@app.command("check")
def check(config: ConfigOption = None, out: OutOption = None, cache: CacheOption = None,
          seed: SeedOption = None, jobs: JobsOption = None):
    """Hessian, Monge-Ampère and Darboux checks on every configured chart."""
    run_command(run_sk_check, config, out, cache, seed, jobs)


@app.command("transitions")
def transitions(config: ConfigOption = None, out: OutOption = None, cache: CacheOption = None,
                seed: SeedOption = None, jobs: JobsOption = None):
    """Affine transitions, the cocycle condition and affine monodromy."""
    run_command(run_sk_transitions, config, out, cache, seed, jobs)
