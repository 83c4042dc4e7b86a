"""
Scenario Models
TOML file schema (pydantic) and the compiled, immutable scenario.
"""
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from config import ChannelConfig, MultilinkConfig, OutputConfig, ProtocolConfig, TeslaConfig
from models.channel import AirframeShadowMask
from models.radio import RadioProfile
from models.scene import Area, Building, P1410Params, Trajectory

Vec2List = List[float]
Vec3List = List[float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ---------------------------------------------------------------------------
# File schema
# ---------------------------------------------------------------------------

class WaypointSpec(_Strict):
    position: Vec3List = Field(min_length=3, max_length=3)
    speed: float = Field(default=5.0, ge=0)
    hold: float = Field(default=0.0, ge=0)
    arc_center: Optional[Vec2List] = Field(default=None, min_length=2, max_length=2)
    arc_ccw: bool = True


class RadioProfileSpec(_Strict):
    """Preset name plus any field overrides"""
    preset: Optional[str] = None
    tx_power: Optional[float] = None
    amp_gain: Optional[float] = None
    noise_figure: Optional[float] = None
    bandwidth: Optional[float] = Field(default=None, gt=0)
    snr_decode_min: Optional[float] = None
    snr_overdrive_start: Optional[float] = None
    edge_steepness: Optional[float] = Field(default=None, gt=0)
    agc: Optional[bool] = None
    beacon_payload: Optional[int] = Field(default=None, gt=0, le=125)
    beacon_rate: Optional[float] = Field(default=None, gt=0)

    def overrides(self) -> dict:
        return self.model_dump(exclude_none=True, exclude={"preset"})


class MaskSpec(_Strict):
    lobe_count: int = Field(default=6, ge=1)
    lobe_depth_db: float = Field(default=0.0, ge=0)
    cap_elevation_deg: float = Field(default=90.0, ge=0, le=90)
    cap_depth_db: float = Field(default=0.0, ge=0)


class DroneSpec(_Strict):
    id: int = Field(ge=0, le=2 ** 32 - 1)
    radio: str = "experimental"
    mask: Optional[str] = None
    beacon: bool = True
    collision_avoidance: bool = False
    yaw_deg: Optional[float] = None
    loop: bool = False
    jitter_sigma_m: float = Field(default=0.0, ge=0)
    waypoints: List[WaypointSpec] = Field(min_length=1)


class GroundStationSpec(_Strict):
    id: int = Field(ge=0, le=2 ** 32 - 1)
    position: Vec3List = Field(min_length=3, max_length=3)
    role: Literal["MONITOR", "GBAS", "VERTIPORT"] = "MONITOR"
    radio: str = "cots"


class BuildingSpec(_Strict):
    min: Vec2List = Field(min_length=2, max_length=2)
    max: Vec2List = Field(min_length=2, max_length=2)
    height: float = Field(gt=0)


class P1410Spec(_Strict):
    alpha: float = Field(gt=0, lt=1)
    beta: float = Field(ge=0)
    gamma: float = Field(gt=0)


class SceneSpec(_Strict):
    area: Optional[List[float]] = Field(default=None, min_length=4, max_length=4)
    buildings: List[BuildingSpec] = Field(default_factory=list)
    p1410: Optional[P1410Spec] = None
    elements: bool = True
    scatterer_density: Optional[float] = Field(default=None, ge=0)
    ground_scatterer_density: Optional[float] = Field(default=None, ge=0)
    ground_reflection: Optional[bool] = None
    ground_reflection_loss_db: Optional[float] = Field(default=None, ge=0)
    diffraction: Optional[bool] = None

    @model_validator(mode="after")
    def _layout_source(self):
        if self.p1410 is not None and self.buildings:
            raise ValueError("give either explicit buildings or p1410, not both")
        if self.p1410 is not None and self.area is None:
            raise ValueError("p1410 layout needs an area")
        return self


class ProtocolSpec(_Strict):
    threshold_m: Optional[float] = Field(default=None, gt=0)
    horizon_s: Optional[float] = Field(default=None, gt=0)
    dt_s: Optional[float] = Field(default=None, gt=0)
    hysteresis_m: Optional[float] = Field(default=None, ge=0)
    dwell_s: Optional[float] = Field(default=None, ge=0)
    hold_policy: Optional[Literal["hold_both", "lower_id_first"]] = None
    beacon_timeout_s: Optional[float] = Field(default=None, gt=0)
    stale_after_s: Optional[float] = Field(default=None, gt=0)
    lost_after_s: Optional[float] = Field(default=None, gt=0)
    malformed_rate: Optional[float] = Field(default=None, ge=0, le=1)
    origin_lat: Optional[float] = Field(default=None, ge=-90, le=90)
    origin_lon: Optional[float] = Field(default=None, ge=-180, le=180)
    origin_alt: Optional[float] = None


class TeslaSpec(_Strict):
    interval_s: Optional[float] = Field(default=None, gt=0)
    disclosure_delay: Optional[int] = Field(default=None, ge=1)
    chain_length: Optional[int] = Field(default=None, ge=1)
    max_clock_skew_s: Optional[float] = Field(default=None, ge=0)
    clock_skew_s: Optional[float] = Field(default=None, ge=0)
    broadcast_rate_hz: Optional[float] = Field(default=None, gt=0)
    payload_bytes: Optional[int] = Field(default=None, ge=1, le=71)


class MultilinkSpec(_Strict):
    enabled: Optional[bool] = None
    latency_s: Optional[float] = Field(default=None, ge=0)
    availability: Optional[float] = Field(default=None, ge=0, le=1)


class OutputSpec(_Strict):
    packet_log: Optional[bool] = None
    snr_trace: Optional[bool] = None


class ScenarioFile(_Strict):
    """Top-level layout of a scenario TOML file"""
    name: str = "scenario"
    seed: int = Field(default=0, ge=0)
    duration: float = Field(ge=0)
    time_step: float = Field(default=0.01, gt=0)
    scene: SceneSpec = Field(default_factory=SceneSpec)
    radio_profiles: Dict[str, RadioProfileSpec] = Field(default_factory=dict)
    masks: Dict[str, MaskSpec] = Field(default_factory=dict)
    drones: List[DroneSpec] = Field(default_factory=list)
    ground_stations: List[GroundStationSpec] = Field(default_factory=list)
    protocol: ProtocolSpec = Field(default_factory=ProtocolSpec)
    tesla: TeslaSpec = Field(default_factory=TeslaSpec)
    multilink: MultilinkSpec = Field(default_factory=MultilinkSpec)
    output: OutputSpec = Field(default_factory=OutputSpec)


def merge_section(defaults, spec: BaseModel):
    """Config dataclass with the file's explicitly set values applied"""
    return replace(defaults, **spec.model_dump(exclude_none=True))


# ---------------------------------------------------------------------------
# Compiled scenario
# ---------------------------------------------------------------------------

class StationRole(str, Enum):
    MONITOR = "MONITOR"
    GBAS = "GBAS"
    VERTIPORT = "VERTIPORT"

    @property
    def broadcasts(self) -> bool:
        return self in (StationRole.GBAS, StationRole.VERTIPORT)


@dataclass(frozen=True)
class DroneConfig:
    id: int
    trajectory: Trajectory
    radio: RadioProfile
    mask: Optional[AirframeShadowMask] = None
    beacon: bool = True
    collision_avoidance: bool = False
    jitter_sigma: float = 0.0


@dataclass(frozen=True, eq=False)
class GroundStation:
    id: int
    position: np.ndarray
    role: StationRole = StationRole.MONITOR
    radio: Optional[RadioProfile] = None

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))


@dataclass(frozen=True)
class Scenario:
    """Everything a run needs; a run is a pure function of (scenario, seed)"""
    drones: Tuple[DroneConfig, ...]
    duration: float
    name: str = "scenario"
    ground_stations: Tuple[GroundStation, ...] = ()
    buildings: Tuple[Building, ...] = ()
    layout: Optional[P1410Params] = None
    area: Optional[Area] = None
    place_elements: bool = True
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    tesla: TeslaConfig = field(default_factory=TeslaConfig)
    multilink: MultilinkConfig = field(default_factory=MultilinkConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    time_step: float = 0.01
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "drones", tuple(self.drones))
        object.__setattr__(self, "ground_stations", tuple(self.ground_stations))
        object.__setattr__(self, "buildings", tuple(self.buildings))

    @property
    def node_ids(self) -> List[int]:
        return [d.id for d in self.drones] + [g.id for g in self.ground_stations]

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed)
