"""
Scene Models
Buildings, building statistics, waypoints, trajectories and drone kinematic state.
All types are immutable after construction.
"""
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

Vec2 = Tuple[float, float]
Vec3 = Tuple[float, float, float]


@dataclass(frozen=True)
class Building:
    """Axis-aligned extruded rectangle standing on the ground"""
    footprint_min: Vec2
    footprint_max: Vec2
    height: float

    def __post_init__(self):
        if not (self.footprint_min[0] < self.footprint_max[0] and self.footprint_min[1] < self.footprint_max[1]):
            raise ValueError(f"footprint_min {self.footprint_min} must be < footprint_max {self.footprint_max}")
        if not self.height > 0:
            raise ValueError(f"building height must be > 0, got {self.height}")

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.footprint_min[0], self.footprint_min[1], 0.0])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.footprint_max[0], self.footprint_max[1], self.height])

    @property
    def footprint_area(self) -> float:
        return (self.footprint_max[0] - self.footprint_min[0]) * (self.footprint_max[1] - self.footprint_min[1])

    def to_row(self) -> tuple:
        return (self.footprint_min[0], self.footprint_min[1], self.footprint_max[0], self.footprint_max[1], self.height)


@dataclass(frozen=True)
class P1410Params:
    """Statistical urban layout: built fraction, density per km², Rayleigh height scale"""
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0,1), got {self.alpha}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")

    @property
    def footprint_side(self) -> float:
        """Square footprint side in metres so that alpha/beta holds in expectation"""
        return math.sqrt(self.alpha / (self.beta / 1e6)) if self.beta > 0 else 0.0


@dataclass(frozen=True)
class Area:
    """Rectangular 2D extent in metres"""
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError("area must have positive extent")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def depth(self) -> float:
        return self.ymax - self.ymin

    @property
    def km2(self) -> float:
        return self.width * self.depth / 1e6

    @classmethod
    def square_km2(cls, area_km2: float) -> "Area":
        side = math.sqrt(area_km2) * 1000.0
        return cls(0.0, 0.0, side, side)


@dataclass(frozen=True)
class Waypoint:
    """
    Mission point in local ENU metres.
    With arc_center set, the segment to the next waypoint follows a horizontal
    circle (helix when heights differ) about that centre.
    """
    position: Vec3
    speed_to_next: float = 5.0
    hold_duration: float = 0.0
    arc_center: Optional[Vec2] = None
    arc_ccw: bool = True

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        if self.arc_center is not None:
            object.__setattr__(self, "arc_center", (float(self.arc_center[0]), float(self.arc_center[1])))
        if len(self.position) != 3:
            raise ValueError(f"waypoint position must be a 3-vector, got {self.position}")
        if self.speed_to_next < 0:
            raise ValueError(f"speed_to_next must be >= 0, got {self.speed_to_next}")
        if self.hold_duration < 0:
            raise ValueError(f"hold_duration must be >= 0, got {self.hold_duration}")


@dataclass(frozen=True)
class Trajectory:
    """Ordered waypoints; loop closes the polyline back to the first waypoint"""
    waypoints: Tuple[Waypoint, ...]
    loop: bool = False
    yaw: Optional[float] = None  # fixed heading, rad

    def __post_init__(self):
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        if not self.waypoints:
            raise ValueError("trajectory needs at least one waypoint")
        pairs = list(zip(self.waypoints, self.waypoints[1:]))
        if self.loop and len(self.waypoints) > 1:
            pairs.append((self.waypoints[-1], self.waypoints[0]))
        for a, b in pairs:
            if np.allclose(a.position, b.position, atol=1e-9, rtol=0) and a.hold_duration <= 0:
                raise ValueError(f"duplicate consecutive position {a.position} needs hold_duration > 0")


@dataclass(frozen=True, eq=False)
class DroneState:
    """Kinematic state sampled from a trajectory"""
    position: np.ndarray
    velocity: np.ndarray
    heading: float

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.velocity))

    @classmethod
    def fixed(cls, position, heading: float = 0.0) -> "DroneState":
        return cls(np.asarray(position, dtype=float), np.zeros(3), heading % (2 * math.pi))


@dataclass(frozen=True, eq=False)
class UrbanScene:
    """Buildings plus cached bound arrays for vectorised slab tests"""
    buildings: Tuple[Building, ...] = ()
    area: Optional[Area] = None
    lower: np.ndarray = field(init=False, repr=False)
    upper: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "buildings", tuple(self.buildings))
        if self.buildings:
            lower = np.array([b.lower for b in self.buildings])
            upper = np.array([b.upper for b in self.buildings])
        else:
            lower = np.zeros((0, 3))
            upper = np.zeros((0, 3))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def is_empty(self) -> bool:
        return not self.buildings
