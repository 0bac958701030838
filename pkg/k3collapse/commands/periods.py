import typer

from k3collapse.commands import CacheOption, ConfigOption, JobsOption, OutOption, SeedOption, run_command
from k3collapse.pipeline import run_monodromy, run_period_samples, run_untwist

app = typer.Typer(help="Period lattices, monodromy and untwisting.", no_args_is_help=True)


@app.command("sample")
def sample(config: ConfigOption = None, out: OutOption = None, cache: CacheOption = None,
           seed: SeedOption = None, jobs: JobsOption = None):
    """Periods at random regular fibers, checked against the lattice invariants."""
    run_command(run_period_samples, config, out, cache, seed, jobs)


@app.command("monodromy")
def monodromy(config: ConfigOption = None, out: OutOption = None, cache: CacheOption = None,
              seed: SeedOption = None, jobs: JobsOption = None):
    """Local monodromy of every singular fiber and the global product."""
    run_command(run_monodromy, config, out, cache, seed, jobs)


@app.command("untwist")
def untwist(config: ConfigOption = None, out: OutOption = None, cache: CacheOption = None,
            seed: SeedOption = None, jobs: JobsOption = None):
    """Single-valuedness of the untwisted period sections after base change."""
    run_command(run_untwist, config, out, cache, seed, jobs)
