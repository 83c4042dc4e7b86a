"""
Result files. Floats are written with repr so files carry full precision;
identical reports produce byte-identical files.
"""
import csv
import json
import os
from typing import Dict, Iterable, List, Optional, Sequence

from config import OutputConfig
from models.report import CA_COLUMNS, PACKET_COLUMNS, SNR_COLUMNS, TESLA_COLUMNS, SimulationReport
from utils.logger import get_logger, log_execution
from utils.telemetry import get_tracer

logger = get_logger()

BUILDING_COLUMNS = ("xmin", "ymin", "xmax", "ymax", "height")
ELEMENT_COLUMNS = ("type", "x", "y", "z", "nx", "ny", "nz", "opening_angle_rad", "loss_db", "half_u", "half_v")


def _write_csv(path: str, columns: Sequence[str], rows: Iterable[tuple]):
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])


@log_execution
def write_outputs(report: SimulationReport, out_dir: str, output: Optional[OutputConfig] = None) -> Dict[str, str]:
    """Write the result files of one run; returns name -> path"""
    output = output or OutputConfig()
    os.makedirs(out_dir, exist_ok=True)
    written: Dict[str, str] = {}

    def target(name: str) -> str:
        path = os.path.join(out_dir, name)
        written[name] = path
        return path

    with get_tracer().trace_span("write_outputs", {"out_dir": out_dir}):
        if output.packet_log:
            _write_csv(target("packets.csv"), PACKET_COLUMNS, (p.to_row() for p in report.packets))
        if output.snr_trace:
            _write_csv(target("snr.csv"), SNR_COLUMNS, (s.to_row() for s in report.snr_trace))
        _write_csv(target("ca_events.csv"), CA_COLUMNS, (e.to_row() for e in report.ca_events))
        _write_csv(target("tesla_events.csv"), TESLA_COLUMNS, (e.to_row() for e in report.tesla_events))
        with open(target("tracks.jsonl"), "w", encoding="utf-8", newline="\n") as f:
            for snapshot in report.tracks:
                f.write(json.dumps(snapshot, sort_keys=True) + "\n")
        if report.buildings:
            _write_csv(target("buildings.csv"), BUILDING_COLUMNS, report.buildings)
        if report.elements:
            _write_csv(target("elements.csv"), ELEMENT_COLUMNS, report.elements)
        with open(target("report.json"), "w", encoding="utf-8", newline="\n") as f:
            json.dump(report.summary(), f, indent=2, sort_keys=True)
            f.write("\n")

    logger.info(f"Wrote {len(written)} files to {out_dir}")
    return written


def write_bench(points: List, out_dir: str, name: str = "bench.csv") -> str:
    """Per-point lab bench results"""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    _write_csv(path, ("attenuation_db", "snr_db", "success_probability", "sent", "delivered", "weak", "overdrive",
                      "per"),
               ((p.attenuation_db, p.snr, p.success_probability, p.sent, p.delivered, p.weak, p.overdrive, p.per)
                for p in points))
    return path
