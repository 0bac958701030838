import logging

import typer

from k3collapse import __version__
from k3collapse.commands import CacheOption, ConfigOption, JobsOption, OutOption, SeedOption, run_command
from k3collapse.commands import fibration, metric, periods, semiflat, sk, volume
from k3collapse.pipeline import run_report

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
)
logger = logging.getLogger(__name__)

app = typer.Typer(
    help="Collapsing geometry of elliptic K3 surfaces: fibers, periods, volume asymptotics, "
         "the limit metric, special Kähler and semi-flat checks.",
    no_args_is_help=True,
)

app.add_typer(fibration.app, name="fibration")
app.add_typer(periods.app, name="periods")
app.add_typer(volume.app, name="volume")
app.add_typer(metric.app, name="metric")
app.add_typer(sk.app, name="sk")
app.add_typer(semiflat.app, name="semiflat")


@app.command("report")
def report(config: ConfigOption = None, out: OutOption = None, cache: CacheOption = None,
           seed: SeedOption = None, jobs: JobsOption = None):
    """Aggregate every JSON summary in the output directory into report.json."""
    run_command(run_report, config, out, cache, seed, jobs)


@app.command("version")
def version():
    typer.echo(__version__)


if __name__ == "__main__":
    app()
