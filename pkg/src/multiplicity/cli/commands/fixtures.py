import typer

from multiplicity.sheets.fixtures import get_fixture, list_fixtures

app = typer.Typer(help="Bundled published multiplicity tables.", no_args_is_help=True)


@app.command("list")
def list_command() -> None:
    """Print the fixture names with their dataset and metric."""
    for name in list_fixtures():
        fixture = get_fixture(name)
        typer.echo(f"{name:<24}{fixture.dataset:<12}{fixture.metric}")
