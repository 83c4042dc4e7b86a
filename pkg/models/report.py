"""
Report Models
Per-packet records, SNR samples, per-link counters and the run summary.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from models.protocol import CATransition
from models.radio import LossReason
from models.tesla import VerificationEvent, VerifyStatus

PACKET_COLUMNS = ("t", "tx_id", "rx_id", "seq", "kind", "snr_db", "outcome", "reason",
                  "distance_m", "tx_azimuth_deg", "rx_azimuth_deg")
SNR_COLUMNS = ("t", "tx_id", "rx_id", "channel_db", "snr_db", "distance_m")
CA_COLUMNS = ("t", "drone_id", "transition", "partner", "d_min_pred")
TESLA_COLUMNS = ("t", "receiver", "sender", "interval", "status", "reason")


def _f(value: float) -> str:
    return repr(float(value))


@dataclass(frozen=True)
class PacketRecord:
    t: float
    tx_id: int
    rx_id: int
    seq: int
    kind: str
    snr: float
    reason: LossReason
    distance: float
    tx_azimuth: float  # deg, bearing of rx relative to tx heading
    rx_azimuth: float

    @property
    def delivered(self) -> bool:
        return self.reason == LossReason.NONE

    def to_row(self) -> tuple:
        return (_f(self.t), self.tx_id, self.rx_id, self.seq, self.kind, _f(self.snr),
                "DELIVERED" if self.delivered else "LOST", self.reason.value,
                _f(self.distance), _f(self.tx_azimuth), _f(self.rx_azimuth))


@dataclass(frozen=True)
class SnrSample:
    t: float
    tx_id: int
    rx_id: int
    channel_db: float
    snr: float
    distance: float

    def to_row(self) -> tuple:
        return (_f(self.t), self.tx_id, self.rx_id, _f(self.channel_db), _f(self.snr), _f(self.distance))


@dataclass
class LinkStats:
    """Counters of one directed link; transmissions equals the sum of outcomes"""
    transmissions: int = 0
    delivered: int = 0
    weak: int = 0
    overdrive: int = 0
    collided: int = 0
    malformed: int = 0

    def add(self, reason: LossReason):
        self.transmissions += 1
        if reason == LossReason.NONE:
            self.delivered += 1
        elif reason == LossReason.WEAK_SIGNAL:
            self.weak += 1
        elif reason == LossReason.OVERDRIVE:
            self.overdrive += 1
        elif reason == LossReason.MAC_COLLISION:
            self.collided += 1
        else:
            self.malformed += 1

    def merge(self, other: "LinkStats"):
        self.transmissions += other.transmissions
        self.delivered += other.delivered
        self.weak += other.weak
        self.overdrive += other.overdrive
        self.collided += other.collided
        self.malformed += other.malformed

    @property
    def losses(self) -> int:
        return self.transmissions - self.delivered

    @property
    def per(self) -> float:
        return self.losses / self.transmissions if self.transmissions else 0.0

    @property
    def conserved(self) -> bool:
        return self.transmissions == self.delivered + self.weak + self.overdrive + self.collided + self.malformed

    def to_dict(self) -> dict:
        return {
            "transmissions": self.transmissions,
            "delivered": self.delivered,
            "weak_signal": self.weak,
            "overdrive": self.overdrive,
            "mac_collision": self.collided,
            "malformed": self.malformed,
            "per": self.per,
        }


def distribution(values: List[float]) -> Optional[dict]:
    if not values:
        return None
    arr = np.asarray(values, dtype=float)
    return {"p50": float(np.percentile(arr, 50)), "p95": float(np.percentile(arr, 95)),
            "max": float(arr.max()), "count": int(arr.size)}


@dataclass
class SimulationReport:
    """Result of one run; every series shares the run's time base"""
    name: str
    seed: int
    duration: float
    time_step: float
    links: Dict[Tuple[int, int], LinkStats] = field(default_factory=dict)
    packets: List[PacketRecord] = field(default_factory=list)
    snr_trace: List[SnrSample] = field(default_factory=list)
    ca_events: List[CATransition] = field(default_factory=list)
    tracks: List[dict] = field(default_factory=list)
    tesla_events: List[VerificationEvent] = field(default_factory=list)
    min_separation: Optional[float] = None
    min_separation_t: Optional[float] = None
    tracker_availability: Optional[float] = None
    beacon_gaps: List[float] = field(default_factory=list)
    backup_deliveries: int = 0
    emergencies_at_ground: int = 0
    buildings: List[tuple] = field(default_factory=list)
    elements: List[tuple] = field(default_factory=list)

    @property
    def totals(self) -> LinkStats:
        total = LinkStats()
        for stats in self.links.values():
            total.merge(stats)
        return total

    @property
    def per(self) -> float:
        return self.totals.per

    @property
    def mac_collision_rate(self) -> float:
        total = self.totals
        return total.collided / total.transmissions if total.transmissions else 0.0

    def tesla_counts(self) -> Dict[str, int]:
        counts = {s.value: 0 for s in VerifyStatus}
        for event in self.tesla_events:
            counts[event.status.value] += 1
        return counts

    def losses(self, reason: Optional[LossReason] = None) -> List[PacketRecord]:
        return [p for p in self.packets if not p.delivered and (reason is None or p.reason == reason)]

    def snr_span(self) -> float:
        finite = [s.snr for s in self.snr_trace if math.isfinite(s.snr)]
        return max(finite) - min(finite) if finite else 0.0

    def summary(self) -> dict:
        """Content of report.json (full precision)"""
        totals = self.totals
        return {
            "name": self.name,
            "seed": self.seed,
            "duration": self.duration,
            "time_step": self.time_step,
            "per": totals.per,
            "totals": totals.to_dict(),
            "links": [
                {"tx_id": tx, "rx_id": rx, **stats.to_dict()}
                for (tx, rx), stats in sorted(self.links.items())
            ],
            "mac_collision_rate": self.mac_collision_rate,
            "min_separation_m": self.min_separation,
            "min_separation_t": self.min_separation_t,
            "ca_events": len(self.ca_events),
            "tracker_availability": self.tracker_availability,
            "beacon_age_s": distribution(self.beacon_gaps),
            "tesla": self.tesla_counts(),
            "backup_deliveries": self.backup_deliveries,
            "emergencies_at_ground": self.emergencies_at_ground,
        }
