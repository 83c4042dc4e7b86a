"""
Medium access: CSMA scheduling with random backoff, and per-receiver
collision/capture arbitration of overlapping frames.
"""
import heapq
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from config import RadioConfig, config
from utils.logger import get_logger
from utils.telemetry import get_performance_monitor

logger = get_logger()
perf = get_performance_monitor()

MAX_DEFERRALS = 64

PowerFn = Callable[[int, int], float]  # (tx_id, rx_id) -> received power dBm


class MacVerdict(str, Enum):
    CLEAR = "CLEAR"
    COLLIDED = "COLLIDED"


@dataclass(frozen=True)
class TxRequest:
    """A frame handed to the MAC at ready_time"""
    tx_id: int
    ready_time: float
    duration: float
    frame: object = None


@dataclass(frozen=True)
class Transmission:
    tx_id: int
    start: float
    duration: float
    frame: object = field(default=None, compare=False)

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("transmission duration must be > 0")

    @property
    def end(self) -> float:
        return self.start + self.duration

    def overlaps(self, other: "Transmission") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass
class MacContext:
    """Channel view the MAC needs: received power between any two nodes"""
    power_dbm: PowerFn
    cfg: RadioConfig = field(default_factory=lambda: config.radio)

    def backoff(self, rng: np.random.Generator) -> float:
        slots = int(rng.integers(0, self.cfg.contention_window + 1))
        return self.cfg.difs_s + slots * self.cfg.slot_time_s

    def senses(self, tx: Transmission, node_id: int, at: float) -> bool:
        """A node hears its own frames; others only once a full slot has elapsed and above threshold"""
        if tx.tx_id == node_id:
            return True
        if at - tx.start < self.cfg.slot_time_s:
            return False
        return self.power_dbm(tx.tx_id, node_id) >= self.cfg.carrier_sense_dbm


def csma_schedule(requests: Sequence[TxRequest], ctx: MacContext, rngs: Dict[int, np.random.Generator],
                  ongoing: Sequence[Transmission] = ()) -> List[Transmission]:
    """
    Event-driven carrier sensing. Each frame waits DIFS plus a random backoff;
    at its start instant the sender defers while it hears an ongoing frame
    above the carrier-sense threshold or is itself transmitting.
    Returns the scheduled transmissions in start order.
    """
    active: List[Transmission] = list(ongoing)
    heap = []
    for k, req in enumerate(sorted(requests, key=lambda r: (r.ready_time, r.tx_id))):
        heapq.heappush(heap, (req.ready_time + ctx.backoff(rngs[req.tx_id]), req.tx_id, k, req, 0))

    scheduled: List[Transmission] = []
    while heap:
        start, tx_id, k, req, deferrals = heapq.heappop(heap)
        busy_until = max((tx.end for tx in active if tx.start <= start < tx.end and ctx.senses(tx, tx_id, start)),
                         default=None)
        if busy_until is not None and deferrals < MAX_DEFERRALS:
            retry = busy_until + ctx.backoff(rngs[tx_id])
            heapq.heappush(heap, (retry, tx_id, k, req, deferrals + 1))
            perf.increment_counter("mac_deferrals")
            continue
        tx = Transmission(tx_id, start, req.duration, req.frame)
        active.append(tx)
        scheduled.append(tx)
    return scheduled


def mac_arbitrate(transmissions: Sequence[Transmission], receiver_id: int, rx_power_dbm: Dict[int, float],
                  capture_margin_db: Optional[float] = None) -> List[Optional[MacVerdict]]:
    """
    Verdict per transmission at one receiver (None for the receiver's own frames).

    A frame overlapped by others is CLEAR only when it exceeds the summed
    interference by the capture margin. A receiver transmitting during the
    frame cannot hear it.
    """
    margin = config.radio.capture_margin_db if capture_margin_db is None else capture_margin_db
    own = [tx for tx in transmissions if tx.tx_id == receiver_id]
    verdicts: List[Optional[MacVerdict]] = []
    for i, tx in enumerate(transmissions):
        if tx.tx_id == receiver_id:
            verdicts.append(None)
            continue
        if any(o.overlaps(tx) for o in own):
            verdicts.append(MacVerdict.COLLIDED)
            continue
        interference_mw = sum(
            10.0 ** (rx_power_dbm[other.tx_id] / 10.0)
            for j, other in enumerate(transmissions)
            if j != i and other.tx_id != receiver_id and other.overlaps(tx)
        )
        if interference_mw == 0.0:
            verdicts.append(MacVerdict.CLEAR)
            continue
        signal = rx_power_dbm[tx.tx_id]
        sir = signal - 10.0 * math.log10(interference_mw) if signal > -math.inf else -math.inf
        verdicts.append(MacVerdict.CLEAR if sir >= margin else MacVerdict.COLLIDED)
    return verdicts
