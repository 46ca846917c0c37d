"""
Console Tool: stage-prefixed progress lines and tables on one shared rich console.
"""

from rich.console import Console
from rich.table import Table

from config.settings import settings

# stderr keeps stdout free for reports piped by callers
console = Console(stderr=True, highlight=False)


def log(stage: str, message: str) -> None:
    """Print a `[Stage] message` progress line."""
    console.print(f"[bold cyan]\\[{stage}][/] {message}")


def debug(stage: str, message: str) -> None:
    if settings.verbose:
        console.print(f"[dim]\\[{stage}] {message}[/]")


def warn(stage: str, message: str) -> None:
    console.print(f"[bold yellow]\\[{stage}][/] ⚠️  {message}")


def error(message: str) -> None:
    console.print(f"[bold red]❌ {message}[/]")


def table(title: str, columns: list[str], rows: list[list]) -> None:
    """Render a simple table; None cells print as '-'."""
    t = Table(title=title)
    for col in columns:
        t.add_column(col)
    for row in rows:
        t.add_row(*("-" if v is None else str(v) for v in row))
    console.print(t)
