"""
DroneCAST command line

    run       <scenario.toml>                 simulate a scenario file
    mission   --id {1,2,3} --radio {...}      replicate a flight mission
    density   --n N --area-km2 A --duration S density requirement scenario
    validate  <scenario.toml>                 check a scenario file, print OK
    bench     --amp-gain G                    cabled calibration sweep

Exit codes: 0 success, 1 invalid input, 2 runtime error.
"""
import argparse
import os
import sys
from typing import List, Optional, Sequence

from rich.console import Console

from config import resolve_out_dir
from core.missions import density_scenario, mission_scenario, run_lab_bench
from core.output import write_bench, write_outputs
from core.scenario import ScenarioError, build_scene, load_scenario
from core.simulation import run_seeds
from models.radio import LAB
from models.report import SimulationReport
from models.scenario import Scenario
from ui.summary import print_bench, print_reports
from utils.logger import get_logger
from utils.telemetry import get_tracer

logger = get_logger()

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    """Unknown flag or bad argument value"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="Base seed (default 0)")
    common.add_argument("--out", default=None, help="Output directory (DRONECAST_SIM_OUT overrides)")
    common.add_argument("--repeat", type=_positive_int, default=1, help="Run seeds seed..seed+N-1")
    common.add_argument("--jobs", type=_positive_int, default=1, help="Worker processes for multi-seed runs")
    common.add_argument("--trace", default=None, metavar="FILE", help="Export telemetry spans as JSON")
    common.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ERROR")

    parser = _Parser(prog="dronecast", description="Drone-to-drone communication simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", parents=[common], help="Simulate a scenario file")
    p.add_argument("scenario", help="Scenario TOML file")

    p = sub.add_parser("mission", parents=[common], help="Replicate flight mission 1, 2 or 3")
    p.add_argument("--id", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--radio", choices=("experimental", "cots"), default="experimental")
    p.add_argument("--jitter", type=float, default=0.0, help="Navigation jitter sigma in m")

    p = sub.add_parser("density", parents=[common], help="Density requirement scenario")
    p.add_argument("--n", type=_positive_int, default=100, help="Number of drones")
    p.add_argument("--area-km2", type=_positive_float, default=1.0)
    p.add_argument("--duration", type=_positive_float, default=60.0, help="Seconds")

    p = sub.add_parser("validate", parents=[common], help="Check a scenario file")
    p.add_argument("scenario", help="Scenario TOML file")

    p = sub.add_parser("bench", parents=[common], help="Cabled lab calibration sweep")
    p.add_argument("--amp-gain", type=float, default=0.0, help="External amplifier gain in dB")
    p.add_argument("--packets", type=_positive_int, default=None, help="Packets per attenuation point")
    return parser


def _scenario_for(args) -> Scenario:
    if args.command == "run":
        return load_scenario(args.scenario)
    if args.command == "mission":
        return mission_scenario(args.id, args.radio, args.seed, jitter_sigma=args.jitter)
    try:
        return density_scenario(args.n, args.area_km2, args.duration, args.seed)
    except ValueError as e:
        raise ScenarioError([("density", str(e))], "density") from e


def _simulate(args, console: Console) -> int:
    scenario = _scenario_for(args)
    seeds = [args.seed + k for k in range(args.repeat)]
    reports: List[SimulationReport] = run_seeds(scenario, seeds, args.jobs)
    out_dir = resolve_out_dir(args.out)
    for report in reports:
        target = out_dir if len(reports) == 1 else os.path.join(out_dir, f"seed-{report.seed}")
        write_outputs(report, target, scenario.output)
    print_reports(reports, console)
    console.print(f"[dim]results: {out_dir}[/dim]")
    return EXIT_OK


def _validate(args, console: Console) -> int:
    scenario = load_scenario(args.scenario)
    build_scene(scenario, args.seed)
    console.print("OK")
    return EXIT_OK


def _bench(args, console: Console) -> int:
    points = run_lab_bench(args.amp_gain, packets_per_point=args.packets, seed=args.seed, profile=LAB)
    path = write_bench(points, resolve_out_dir(args.out), f"bench_amp{args.amp_gain:g}.csv")
    print_bench(points, f"lab bench, amp {args.amp_gain:g} dB", console)
    console.print(f"[dim]results: {path}[/dim]")
    return EXIT_OK


COMMANDS = {"run": _simulate, "mission": _simulate, "density": _simulate, "validate": _validate, "bench": _bench}


def main(argv: Optional[Sequence[str]] = None, console: Optional[Console] = None) -> int:
    console = console or Console()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        console.print(f"[red]error:[/red] {e}")
        return EXIT_INVALID
    except SystemExit as e:
        # --help
        return EXIT_OK if e.code in (0, None) else EXIT_INVALID

    if args.log_level:
        logger.configure(level=args.log_level)

    tracer = get_tracer()
    try:
        with tracer.trace_span(f"cli.{args.command}"):
            code = COMMANDS[args.command](args, console)
    except ScenarioError as e:
        console.print(f"[red]invalid scenario[/red] {e.source}")
        for location, message in e.problems:
            console.print(f"  {location}: {message}")
        code = EXIT_INVALID
    except Exception as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        console.print(f"[red]error:[/red] {e}")
        code = EXIT_RUNTIME
    if args.trace:
        tracer.export_trace(args.trace)
    return code


if __name__ == "__main__":
    sys.exit(main())
