"""
Rich console, theme and logging setup shared by the services.
"""

import logging
from typing import Dict, Iterable, List, Optional, Sequence

try:
    from rich.console import Console
    from rich.panel import Panel
    from rich.table import Table
    from rich.progress import Progress, SpinnerColumn, TextColumn, BarColumn, TaskProgressColumn, TimeElapsedColumn
    from rich.logging import RichHandler
    from rich.theme import Theme
    from rich import box
    RICH_AVAILABLE = True
except ImportError:
    RICH_AVAILABLE = False

# Custom Theme
if RICH_AVAILABLE:
    custom_theme = Theme({
        "info": "cyan",
        "warning": "yellow",
        "error": "bold red",
        "success": "bold green",
        "highlight": "bold magenta",
    })
    console = Console(theme=custom_theme, stderr=True)
else:
    console = None


def setup_logging(level: str = "INFO") -> None:
    """
    Install the root log handler.

    Args:
        level: Logging level name
    """
    if RICH_AVAILABLE:
        logging.basicConfig(
            level=level,
            format="%(message)s",
            datefmt="[%X]",
            handlers=[RichHandler(rich_tracebacks=True, console=console, markup=True)],
            force=True,
        )
    else:
        logging.basicConfig(level=level, force=True)


def log_banner(command: str) -> None:
    """Display the run banner."""
    if not RICH_AVAILABLE:
        logging.getLogger("ousb").info("=== OU SCHRODINGER BRIDGE :: %s ===", command)
        return

    banner = Panel(
        f"""[bold highlight]OU SCHRODINGER BRIDGE[/bold highlight]
[info]Ornstein-Uhlenbeck reference bridges, flows and refitting[/info]

[white]command:[/white] [bold]{command}[/bold]""",
        box=box.DOUBLE,
        border_style="highlight",
        subtitle="[success]v1.0[/success]",
        subtitle_align="right",
    )
    console.print(banner)


def print_table(title: str, columns: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    """Render a summary table (falls back to log lines)."""
    rows = [[str(v) for v in row] for row in rows]
    if not RICH_AVAILABLE:
        log = logging.getLogger("ousb")
        log.info(title)
        for row in rows:
            log.info("  " + " | ".join(row))
        return

    table = Table(
        title=f"[bold highlight]{title}[/bold highlight]",
        box=box.ROUNDED,
        header_style="bold cyan",
        border_style="highlight",
    )
    for i, name in enumerate(columns):
        table.add_column(name, justify="left" if i == 0 else "right")
    for row in rows:
        table.add_row(*row)
    console.print(table)


def print_status(title: str, lines: Dict[str, object], ok: bool = True) -> None:
    """Final status panel listing key/value lines."""
    if not RICH_AVAILABLE:
        log = logging.getLogger("ousb")
        for key, value in lines.items():
            log.info("%s: %s", key, value)
        return
    body = "\n".join(f"[highlight]{k}:[/highlight] {v}" for k, v in lines.items())
    console.print(Panel(body, title=f"[bold]{title}[/bold]", border_style="success" if ok else "warning"))


class _NullProgress:
    """Stand-in used when rich is missing or progress is disabled."""

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False

    def add_task(self, description: str, total: Optional[float] = None) -> int:
        return 0

    def advance(self, task: int, advance: float = 1) -> None:
        pass

    def update(self, task: int, **kwargs) -> None:
        pass


def progress(enabled: bool = True):
    """
    Progress bar context for long loops.

    Args:
        enabled: Disable to get a silent no-op context

    Returns:
        rich Progress or a no-op object with the same interface
    """
    if not (enabled and RICH_AVAILABLE):
        return _NullProgress()
    return Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(bar_width=40),
        TaskProgressColumn(),
        TimeElapsedColumn(),
        console=console,
        transient=True,
    )
