"""
Beacon wire format and ENU/geodetic conversion.

Layout (little-endian): u32 drone_id | u32 seq | u64 time_ms |
3 x i32 position (lat/lon 1e-7 deg, alt mm) | 3 x i16 velocity cm/s |
u8 status | u8 n_waypoints | n x 3 x i32 waypoints.
"""
import math
import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from config import config
from core.environment import TimedPath
from models.protocol import (HEADER_SIZE, I16_RANGE, MAX_BEACON_WAYPOINTS, WAYPOINT_SIZE, BeaconMessage,
                             BeaconStatus, GeoPoint)
from models.scene import DroneState, Trajectory, Waypoint

EARTH_RADIUS = 6378137.0  # m, WGS-84 equatorial

_HEADER = struct.Struct("<IIQiiihhhBB")
_WAYPOINT = struct.Struct("<iii")


class BeaconDecodeError(ValueError):
    """Wire bytes do not form a valid beacon (MALFORMED)"""


@dataclass(frozen=True)
class GeodeticOrigin:
    """Local tangent plane anchor; x east, y north, z up"""
    lat: float = 52.3192
    lon: float = 10.5597
    alt: float = 80.0

    def to_geo(self, enu) -> GeoPoint:
        x, y, z = (float(v) for v in enu)
        lat = self.lat + math.degrees(y / EARTH_RADIUS)
        lon = self.lon + math.degrees(x / (EARTH_RADIUS * math.cos(math.radians(self.lat))))
        return round(lat * 1e7), round(lon * 1e7), round((self.alt + z) * 1000.0)

    def to_enu(self, geo: GeoPoint) -> np.ndarray:
        lat_e7, lon_e7, alt_mm = geo
        y = math.radians(lat_e7 / 1e7 - self.lat) * EARTH_RADIUS
        x = math.radians(lon_e7 / 1e7 - self.lon) * EARTH_RADIUS * math.cos(math.radians(self.lat))
        return np.array([x, y, alt_mm / 1000.0 - self.alt])

    @classmethod
    def from_config(cls) -> "GeodeticOrigin":
        p = config.protocol
        return cls(p.origin_lat, p.origin_lon, p.origin_alt)


def encode_beacon(msg: BeaconMessage) -> bytes:
    head = _HEADER.pack(msg.drone_id, msg.seq, msg.time_ms, *msg.position, *msg.velocity,
                        int(msg.status), msg.n_waypoints)
    return head + b"".join(_WAYPOINT.pack(*wp) for wp in msg.waypoints)


def decode_beacon(data: bytes) -> BeaconMessage:
    """Inverse of encode_beacon; raises BeaconDecodeError on any size or range violation"""
    if len(data) < HEADER_SIZE:
        raise BeaconDecodeError(f"beacon too short: {len(data)} bytes")
    fields = _HEADER.unpack_from(data, 0)
    n = fields[-1]
    if n > MAX_BEACON_WAYPOINTS:
        raise BeaconDecodeError(f"n_waypoints {n} exceeds {MAX_BEACON_WAYPOINTS}")
    if len(data) != HEADER_SIZE + WAYPOINT_SIZE * n:
        raise BeaconDecodeError(f"size {len(data)} does not match {n} waypoints")
    try:
        status = BeaconStatus(fields[9])
    except ValueError as e:
        raise BeaconDecodeError(f"unknown status {fields[9]}") from e
    waypoints = tuple(_WAYPOINT.unpack_from(data, HEADER_SIZE + k * WAYPOINT_SIZE) for k in range(n))
    return BeaconMessage(drone_id=fields[0], seq=fields[1], time_ms=fields[2], position=fields[3:6],
                         velocity=fields[6:9], status=status, waypoints=waypoints)


def build_beacon(drone_id: int, seq: int, t: float, state: DroneState, waypoints: Sequence,
                 origin: GeodeticOrigin, status: BeaconStatus = BeaconStatus.CRUISE) -> BeaconMessage:
    """Beacon from a kinematic state and the upcoming waypoints (truncated to the first 7)"""
    lo, hi = I16_RANGE
    velocity = tuple(int(np.clip(round(v * 100.0), lo, hi)) for v in state.velocity)
    return BeaconMessage(
        drone_id=drone_id,
        seq=seq,
        time_ms=int(round(t * 1000.0)),
        position=origin.to_geo(state.position),
        velocity=velocity,
        status=status,
        waypoints=tuple(origin.to_geo(wp) for wp in list(waypoints)[:MAX_BEACON_WAYPOINTS]),
    )


@lru_cache(maxsize=4096)
def reconstruct_path(beacon: BeaconMessage, origin: GeodeticOrigin,
                     min_speed: float = 0.05) -> TimedPath:
    """
    Partner path as seen by a receiver: the beaconed position, then the beaconed
    waypoints flown at the beaconed speed. Holding, emergency and hovering
    senders are taken as stationary.
    """
    start = origin.to_enu(beacon.position)
    speed = float(np.linalg.norm(beacon.velocity)) / 100.0
    points = [start]
    if beacon.status == BeaconStatus.CRUISE and speed > min_speed:
        for geo in beacon.waypoints:
            p = origin.to_enu(geo)
            if np.linalg.norm(p - points[-1]) > 1e-3:
                points.append(p)
    waypoints = tuple(Waypoint(tuple(p), speed_to_next=speed) for p in points)
    return TimedPath(Trajectory(waypoints), beacon.time_s)

