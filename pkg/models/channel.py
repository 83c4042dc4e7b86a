"""
Channel Models
Stochastic channel elements, multipath components and airframe shadowing.
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from models.scene import DroneState


def _unit(vector) -> np.ndarray:
    v = np.asarray(vector, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("zero-length direction")
    return v / norm


@dataclass(frozen=True, eq=False)
class PointScatterer:
    """Scatters into a cone of half-angle opening_angle about the surface normal"""
    position: np.ndarray
    surface_normal: np.ndarray
    opening_angle: float
    scattering_loss: float

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "surface_normal", _unit(self.surface_normal))
        if not 0.0 < self.opening_angle <= math.pi / 2:
            raise ValueError(f"opening_angle must be in (0, pi/2], got {self.opening_angle}")
        if self.scattering_loss < 0:
            raise ValueError("scattering_loss must be >= 0")

    def to_row(self) -> tuple:
        return ("SCATTERER", *self.position.tolist(), *self.surface_normal.tolist(),
                self.opening_angle, self.scattering_loss, "", "")


@dataclass(frozen=True, eq=False)
class ReflectionSurface:
    """Finite specular reflector; half_extents along the two in-plane axes"""
    center: np.ndarray
    normal: np.ndarray
    half_extents: Tuple[float, float]
    reflection_loss: float
    axis_u: np.ndarray = field(init=False, repr=False)
    axis_v: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        normal = _unit(self.normal)
        object.__setattr__(self, "normal", normal)
        if not (self.half_extents[0] > 0 and self.half_extents[1] > 0):
            raise ValueError("half_extents must be > 0")
        if self.reflection_loss < 0:
            raise ValueError("reflection_loss must be >= 0")
        up = np.array([0.0, 0.0, 1.0]) if abs(normal[2]) < 0.9 else np.array([0.0, 1.0, 0.0])
        axis_u = _unit(np.cross(up, normal))
        object.__setattr__(self, "axis_u", axis_u)
        object.__setattr__(self, "axis_v", np.cross(normal, axis_u))

    def to_row(self) -> tuple:
        return ("REFLECTOR", *self.center.tolist(), *self.normal.tolist(),
                "", self.reflection_loss, self.half_extents[0], self.half_extents[1])


class PathType(str, Enum):
    LOS = "LOS"
    SCATTER = "SCATTER"
    REFLECT = "REFLECT"


@dataclass(frozen=True, eq=False)
class MultipathComponent:
    delay: float
    amplitude: complex
    path_type: PathType
    departure_dir: np.ndarray
    arrival_dir: np.ndarray


@dataclass(frozen=True)
class ChannelSnapshot:
    """Quasi-static multipath set between one TX/RX pair, sorted by delay"""
    t: float
    components: Tuple[MultipathComponent, ...]
    tx_id: int
    rx_id: int

    def __post_init__(self):
        ordered = tuple(sorted(self.components, key=lambda c: c.delay))
        object.__setattr__(self, "components", ordered)
        if sum(1 for c in ordered if c.path_type == PathType.LOS) > 1:
            raise ValueError("at most one LOS component per snapshot")

    @property
    def has_los(self) -> bool:
        return any(c.path_type == PathType.LOS for c in self.components)


@dataclass(frozen=True)
class AirframeShadowMask:
    """Arm lobes in azimuth plus a body cap above cap_elevation"""
    lobe_count: int = 6
    lobe_depth: float = 0.0
    cap_elevation: float = math.pi / 2
    cap_depth: float = 0.0

    def __post_init__(self):
        if self.lobe_count < 1:
            raise ValueError("lobe_count must be >= 1")
        if self.lobe_depth < 0 or self.cap_depth < 0:
            raise ValueError("mask depths must be >= 0")


@dataclass(frozen=True, eq=False)
class LinkEnd:
    """A radio endpoint: kinematic state plus optional airframe mask"""
    state: DroneState
    mask: Optional[AirframeShadowMask] = None
    node_id: int = 0

    @property
    def position(self) -> np.ndarray:
        return self.state.position
