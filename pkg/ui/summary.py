"""
Console summary of simulation reports.
Values are rounded to 3 significant digits here only; files keep full precision.
"""
import math
from typing import List, Optional, Sequence

from rich.console import Console
from rich.table import Table
from rich.text import Text

from models.radio import BenchPoint
from models.report import SimulationReport


def sig3(value: Optional[float]) -> str:
    """3 significant digits, '-' for missing values"""
    if value is None:
        return "-"
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return f"{value:.3g}"


def link_table(report: SimulationReport) -> Table:
    table = Table(title=f"{report.name} (seed {report.seed})", title_style="bold cyan")
    table.add_column("link", style="bold")
    for name in ("tx", "delivered", "weak", "overdrive", "collided", "malformed", "PER"):
        table.add_column(name, justify="right")
    for (tx_id, rx_id), stats in sorted(report.links.items()):
        style = "red" if stats.per > 0.1 else None
        table.add_row(f"{tx_id}->{rx_id}", str(stats.transmissions), str(stats.delivered), str(stats.weak),
                      str(stats.overdrive), str(stats.collided), str(stats.malformed), sig3(stats.per), style=style)
    totals = report.totals
    table.add_row("total", str(totals.transmissions), str(totals.delivered), str(totals.weak),
                  str(totals.overdrive), str(totals.collided), str(totals.malformed), sig3(totals.per),
                  style="bold", end_section=True)
    return table


def metrics_text(report: SimulationReport) -> Text:
    tesla = report.tesla_counts()
    text = Text()
    text.append("min separation: ", style="dim")
    text.append(f"{sig3(report.min_separation)} m")
    if report.min_separation_t is not None:
        text.append(f" at t={sig3(report.min_separation_t)} s", style="dim")
    text.append("\nCA events: ", style="dim")
    text.append(str(len(report.ca_events)))
    text.append("   MAC collision rate: ", style="dim")
    text.append(sig3(report.mac_collision_rate))
    text.append("\nTESLA accept/reject: ", style="dim")
    text.append(f"{tesla['ACCEPT']}/{tesla['REJECT']}", style="green" if tesla["REJECT"] == 0 else "yellow")
    if report.tracker_availability is not None:
        text.append("\ntracker availability: ", style="dim")
        text.append(sig3(report.tracker_availability))
    ages = report.summary()["beacon_age_s"]
    if ages is not None:
        text.append("\nbeacon age p50/p95/max: ", style="dim")
        text.append(f"{sig3(ages['p50'])}/{sig3(ages['p95'])}/{sig3(ages['max'])} s")
    if report.backup_deliveries or report.emergencies_at_ground:
        text.append("\nbackup deliveries: ", style="dim")
        text.append(str(report.backup_deliveries))
        text.append("   emergencies at ground: ", style="dim")
        text.append(str(report.emergencies_at_ground))
    return text


def print_reports(reports: Sequence[SimulationReport], console: Optional[Console] = None):
    console = console or Console()
    for report in reports:
        console.print(link_table(report))
        console.print(metrics_text(report))
    if len(reports) > 1:
        pers: List[float] = [r.per for r in reports]
        console.print(Text(f"PER over {len(reports)} seeds: mean {sig3(sum(pers) / len(pers))} "
                           f"min {sig3(min(pers))} max {sig3(max(pers))}", style="bold"))


def print_bench(points: Sequence[BenchPoint], title: str, console: Optional[Console] = None):
    console = console or Console()
    table = Table(title=title, title_style="bold cyan")
    for name in ("attenuation dB", "SNR dB", "P(success)", "sent", "weak", "overdrive", "PER"):
        table.add_column(name, justify="right")
    for p in points:
        table.add_row(sig3(p.attenuation_db), sig3(p.snr), sig3(p.success_probability), str(p.sent),
                      str(p.weak), str(p.overdrive), sig3(p.per))
    console.print(table)
