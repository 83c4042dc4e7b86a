"""
Protocol Models
Beacon message, collision-avoidance state and ground-station tracks.
"""
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from typing import Dict, Optional, Tuple

MAX_BEACON_WAYPOINTS = 7
HEADER_SIZE = 36
WAYPOINT_SIZE = 12

U32_MAX = 2 ** 32 - 1
U64_MAX = 2 ** 64 - 1
I32_RANGE = (-2 ** 31, 2 ** 31 - 1)
I16_RANGE = (-2 ** 15, 2 ** 15 - 1)

GeoPoint = Tuple[int, int, int]  # lat 1e-7 deg, lon 1e-7 deg, alt mm


class BeaconStatus(IntEnum):
    CRUISE = 0
    HOLDING = 1
    EMERGENCY = 2


def _in_range(value: int, bounds: Tuple[int, int]) -> bool:
    return bounds[0] <= value <= bounds[1]


@dataclass(frozen=True)
class BeaconMessage:
    """Position/intent broadcast; integer fields exactly as carried on the wire"""
    drone_id: int
    seq: int
    time_ms: int
    position: GeoPoint
    velocity: Tuple[int, int, int]  # cm/s
    status: BeaconStatus = BeaconStatus.CRUISE
    waypoints: Tuple[GeoPoint, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(int(v) for v in self.position))
        object.__setattr__(self, "velocity", tuple(int(v) for v in self.velocity))
        object.__setattr__(self, "waypoints", tuple(tuple(int(v) for v in wp) for wp in self.waypoints))
        object.__setattr__(self, "status", BeaconStatus(self.status))
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))

    def problems(self) -> list:
        problems = []
        if not 0 <= self.drone_id <= U32_MAX:
            problems.append(f"drone_id {self.drone_id} out of u32 range")
        if not 0 <= self.seq <= U32_MAX:
            problems.append(f"seq {self.seq} out of u32 range")
        if not 0 <= self.time_ms <= U64_MAX:
            problems.append(f"time_ms {self.time_ms} out of u64 range")
        if len(self.position) != 3 or not all(_in_range(v, I32_RANGE) for v in self.position):
            problems.append("position must be 3 x i32")
        if len(self.velocity) != 3 or not all(_in_range(v, I16_RANGE) for v in self.velocity):
            problems.append("velocity must be 3 x i16")
        if len(self.waypoints) > MAX_BEACON_WAYPOINTS:
            problems.append(f"{len(self.waypoints)} waypoints exceed {MAX_BEACON_WAYPOINTS}")
        for wp in self.waypoints:
            if len(wp) != 3 or not all(_in_range(v, I32_RANGE) for v in wp):
                problems.append("waypoints must be 3 x i32")
                break
        return problems

    @property
    def n_waypoints(self) -> int:
        return len(self.waypoints)

    @property
    def encoded_size(self) -> int:
        return HEADER_SIZE + WAYPOINT_SIZE * self.n_waypoints

    @property
    def time_s(self) -> float:
        return self.time_ms / 1000.0


class CAMode(str, Enum):
    CRUISE = "CRUISE"
    CONFLICT = "CONFLICT"
    HOLDING = "HOLDING"
    RESUME = "RESUME"


class HoldPolicy(str, Enum):
    HOLD_BOTH = "hold_both"
    LOWER_ID_FIRST = "lower_id_first"


@dataclass(frozen=True)
class CAState:
    mode: CAMode = CAMode.CRUISE
    conflict_partner: Optional[int] = None
    hold_since: Optional[float] = None
    conflict_since: Optional[float] = None
    clear_since: Optional[float] = None
    d_min_pred: Optional[float] = None

    def __post_init__(self):
        engaged = self.mode in (CAMode.CONFLICT, CAMode.HOLDING)
        if engaged != (self.conflict_partner is not None):
            raise ValueError(f"conflict_partner must be set iff mode is CONFLICT or HOLDING (mode={self.mode})")

    def evolve(self, **changes) -> "CAState":
        return replace(self, **changes)


class CommandKind(str, Enum):
    HOLD = "HOLD"
    RESUME = "RESUME"
    EMERGENCY = "EMERGENCY"


@dataclass(frozen=True)
class CACommand:
    kind: CommandKind
    partner: Optional[int] = None


@dataclass(frozen=True)
class CATransition:
    """One row of the CA event log"""
    t: float
    drone_id: int
    source: CAMode
    target: CAMode
    partner: Optional[int]
    d_min_pred: Optional[float]

    @property
    def label(self) -> str:
        return f"{self.source.value}->{self.target.value}"

    def to_row(self) -> tuple:
        partner = "" if self.partner is None else self.partner
        d_min = "" if self.d_min_pred is None else repr(float(self.d_min_pred))
        return (repr(float(self.t)), self.drone_id, self.label, partner, d_min)


class TrackStatus(str, Enum):
    LIVE = "LIVE"
    STALE = "STALE"
    LOST = "LOST"


@dataclass(frozen=True)
class Track:
    beacon: BeaconMessage
    last_heard: float
    status: TrackStatus = TrackStatus.LIVE

    def age(self, t: float) -> float:
        return t - self.last_heard


@dataclass(frozen=True)
class TrackTable:
    """Ground-station view of every drone heard so far"""
    tracks: Dict[int, Track] = field(default_factory=dict)

    def get(self, drone_id: int) -> Optional[Track]:
        return self.tracks.get(drone_id)

    def __len__(self) -> int:
        return len(self.tracks)

    def __contains__(self, drone_id: int) -> bool:
        return drone_id in self.tracks
