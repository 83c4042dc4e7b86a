"""
Urban environment: building layout, trajectory kinematics, mission presets
and line-of-sight occlusion.
"""
import bisect
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from config import MissionConfig, config
from models.scene import Area, Building, DroneState, P1410Params, Trajectory, UrbanScene, Waypoint
from utils.logger import get_logger
from utils.rng import stream

logger = get_logger()

TWO_PI = 2.0 * math.pi


class InfeasibleLayoutError(ValueError):
    """Building density cannot be placed without overlap"""


# ---------------------------------------------------------------------------
# Building layout
# ---------------------------------------------------------------------------

def generate_buildings(params: P1410Params, area: Area, rng_seed: int,
                       max_attempts: Optional[int] = None) -> List[Building]:
    """
    Place non-overlapping square buildings by rejection sampling.

    Count is Poisson(beta * area_km2), footprint side sqrt(alpha/beta),
    heights Rayleigh(gamma). Pure function of (params, area, seed).
    """
    if params.beta == 0:
        return []

    attempts_per_building = max_attempts or config.channel.max_placement_attempts
    rng = stream(rng_seed, "buildings")
    count = int(rng.poisson(params.beta * area.km2))
    side = params.footprint_side
    if side >= min(area.width, area.depth):
        raise InfeasibleLayoutError(f"footprint side {side:.1f} m does not fit the area")

    placed = np.empty((count, 2))
    for k in range(count):
        for _ in range(attempts_per_building):
            x = rng.uniform(area.xmin, area.xmax - side)
            y = rng.uniform(area.ymin, area.ymax - side)
            if k == 0:
                break
            gap = np.abs(placed[:k] - (x, y))
            if not np.any((gap[:, 0] < side) & (gap[:, 1] < side)):
                break
        else:
            raise InfeasibleLayoutError(
                f"alpha={params.alpha} unreachable: building {k + 1}/{count} not placed "
                f"after {attempts_per_building} attempts")
        placed[k] = (x, y)

    heights = np.maximum(rng.rayleigh(params.gamma, size=count), 1e-3)
    buildings = [
        Building((float(x), float(y)), (float(x + side), float(y + side)), float(h))
        for (x, y), h in zip(placed, heights)
    ]
    logger.debug(f"Placed {len(buildings)} buildings, side={side:.1f} m")
    return buildings


# ---------------------------------------------------------------------------
# Trajectory timeline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Phase:
    kind: str  # hold, line, arc
    t0: float
    t1: float
    p0: Tuple[float, float, float]
    p1: Tuple[float, float, float]
    target: int  # index of the next waypoint ahead
    speed: float = 0.0
    center: Optional[Tuple[float, float]] = None
    radius: float = 0.0
    a0: float = 0.0
    sweep: float = 0.0  # signed
    heading: float = 0.0  # resolved heading for hold / line phases


@dataclass(frozen=True)
class _Timeline:
    phases: Tuple[_Phase, ...]
    starts: Tuple[float, ...]
    period: float
    loop: bool
    final: Tuple[float, float, float]
    final_heading: float
    yaw: Optional[float]
    n_waypoints: int


def _arc_geometry(wp: Waypoint, nxt: Waypoint):
    cx, cy = wp.arc_center
    dx0, dy0 = wp.position[0] - cx, wp.position[1] - cy
    dx1, dy1 = nxt.position[0] - cx, nxt.position[1] - cy
    r0, r1 = math.hypot(dx0, dy0), math.hypot(dx1, dy1)
    if r0 <= 0 or abs(r0 - r1) > 1e-6 * max(1.0, r0):
        raise ValueError(f"arc endpoints {wp.position} -> {nxt.position} not on a common circle")
    a0, a1 = math.atan2(dy0, dx0), math.atan2(dy1, dx1)
    if wp.arc_ccw:
        sweep = (a1 - a0) % TWO_PI
    else:
        sweep = -((a0 - a1) % TWO_PI)
    if abs(sweep) < 1e-12:
        sweep = TWO_PI if wp.arc_ccw else -TWO_PI
    dz = nxt.position[2] - wp.position[2]
    length = math.hypot(r0 * abs(sweep), dz)
    return (cx, cy), r0, a0, sweep, length


def _start_heading(phase: _Phase) -> Optional[float]:
    if phase.kind == "arc":
        return (phase.a0 + math.copysign(math.pi / 2, phase.sweep)) % TWO_PI
    if phase.kind == "line":
        dx, dy = phase.p1[0] - phase.p0[0], phase.p1[1] - phase.p0[1]
        if math.hypot(dx, dy) > 1e-9:
            return math.atan2(dy, dx) % TWO_PI
    return None


def _end_heading(phase: _Phase) -> Optional[float]:
    if phase.kind == "arc":
        return (phase.a0 + phase.sweep + math.copysign(math.pi / 2, phase.sweep)) % TWO_PI
    return _start_heading(phase)


@lru_cache(maxsize=4096)
def compile_trajectory(traj: Trajectory) -> _Timeline:
    """Expand waypoints into timed hold / line / arc phases"""
    wps = traj.waypoints
    n = len(wps)
    looped = traj.loop and n > 1
    moves = n if looped else n - 1

    raw: List[_Phase] = []
    t = 0.0
    for i, wp in enumerate(wps):
        if wp.hold_duration > 0 and (i < n - 1 or looped):
            raw.append(_Phase("hold", t, t + wp.hold_duration, wp.position, wp.position,
                              target=(i + 1) % n))
            t += wp.hold_duration
        if i >= moves:
            continue
        nxt = wps[(i + 1) % n]
        if wp.arc_center is not None:
            center, radius, a0, sweep, length = _arc_geometry(wp, nxt)
        else:
            length = math.dist(wp.position, nxt.position)
            center, radius, a0, sweep = None, 0.0, 0.0, 0.0
        if length < 1e-12:
            continue
        if wp.speed_to_next <= 0:
            raise ValueError(f"segment from waypoint {i} needs speed_to_next > 0")
        duration = length / wp.speed_to_next
        raw.append(_Phase("arc" if center else "line", t, t + duration, wp.position, nxt.position,
                          target=(i + 1) % n, speed=wp.speed_to_next, center=center,
                          radius=radius, a0=a0, sweep=sweep))
        t += duration

    # hold and vertical phases inherit a heading: holds look ahead, vertical moves look back
    phases: List[_Phase] = []
    count = len(raw)
    fallback = 0.0 if traj.yaw is None else traj.yaw
    for k, ph in enumerate(raw):
        heading = _start_heading(ph)
        if heading is None:
            forward = [raw[(k + j) % count] for j in range(1, count)] if looped else raw[k + 1:]
            backward = [raw[(k - j) % count] for j in range(1, count)] if looped else raw[:k][::-1]
            ahead = next((h for h in map(_start_heading, forward) if h is not None), None)
            behind = next((h for h in map(_end_heading, backward) if h is not None), None)
            order = (ahead, behind) if ph.kind == "hold" else (behind, ahead)
            heading = next((h for h in order if h is not None), fallback)
        phases.append(_Phase(**{**ph.__dict__, "heading": heading}))

    final_heading = fallback
    if phases:
        end = _end_heading(phases[-1])
        final_heading = end if end is not None else phases[-1].heading

    return _Timeline(
        phases=tuple(phases),
        starts=tuple(ph.t0 for ph in phases),
        period=t,
        loop=looped,
        final=wps[-1].position if not looped else wps[0].position,
        final_heading=final_heading,
        yaw=traj.yaw,
        n_waypoints=n,
    )


def trajectory_period(traj: Trajectory) -> float:
    """Duration of one pass over the waypoints (one lap when looped)"""
    return compile_trajectory(traj).period


def _local_time(tl: _Timeline, t: float) -> Optional[float]:
    if tl.period <= 0:
        return None
    if tl.loop:
        return t % tl.period
    return t if t < tl.period else None


def _phase_state(ph: _Phase, tau: float):
    f = (tau - ph.t0) / (ph.t1 - ph.t0) if ph.t1 > ph.t0 else 1.0
    if ph.kind == "hold":
        return np.array(ph.p0, dtype=float), np.zeros(3), ph.heading
    if ph.kind == "line":
        p0, p1 = np.array(ph.p0), np.array(ph.p1)
        delta = p1 - p0
        velocity = delta / np.linalg.norm(delta) * ph.speed
        return p0 + f * delta, velocity, ph.heading
    ang = ph.a0 + f * ph.sweep
    cx, cy = ph.center
    dz = ph.p1[2] - ph.p0[2]
    position = np.array([cx + ph.radius * math.cos(ang), cy + ph.radius * math.sin(ang), ph.p0[2] + f * dz])
    tangent = np.array([-ph.sweep * ph.radius * math.sin(ang), ph.sweep * ph.radius * math.cos(ang), dz])
    velocity = tangent / np.linalg.norm(tangent) * ph.speed
    heading = math.atan2(velocity[1], velocity[0]) % TWO_PI
    return position, velocity, heading


def trajectory_state(traj: Trajectory, t: float) -> DroneState:
    """Position, velocity and heading on the waypoint polyline at time t >= 0"""
    if t < 0:
        raise ValueError("t must be >= 0")
    tl = compile_trajectory(traj)
    tau = _local_time(tl, t)
    if tau is None:
        position, velocity, heading = np.array(tl.final, dtype=float), np.zeros(3), tl.final_heading
    else:
        k = max(bisect.bisect_right(tl.starts, tau) - 1, 0)
        position, velocity, heading = _phase_state(tl.phases[k], tau)
    if tl.yaw is not None:
        heading = tl.yaw
    return DroneState(position, velocity, heading % TWO_PI)


def trajectory_positions(traj: Trajectory, times: Sequence[float]) -> np.ndarray:
    """Vectorised positions (k, 3) for an array of times >= 0"""
    times = np.asarray(times, dtype=float)
    tl = compile_trajectory(traj)
    out = np.empty((times.size, 3))
    out[:] = tl.final
    if tl.period <= 0:
        return out
    if tl.loop:
        taus = np.mod(times, tl.period)
        active = np.ones(times.size, dtype=bool)
    else:
        taus = times
        active = times < tl.period
    idx = np.clip(np.searchsorted(tl.starts, taus, side="right") - 1, 0, len(tl.phases) - 1)
    for k in np.unique(idx[active]):
        ph = tl.phases[k]
        sel = active & (idx == k)
        span = ph.t1 - ph.t0
        f = (taus[sel] - ph.t0) / span if span > 0 else np.ones(sel.sum())
        if ph.kind == "hold":
            out[sel] = ph.p0
        elif ph.kind == "line":
            p0, p1 = np.array(ph.p0), np.array(ph.p1)
            out[sel] = p0 + f[:, None] * (p1 - p0)
        else:
            ang = ph.a0 + f * ph.sweep
            cx, cy = ph.center
            out[sel, 0] = cx + ph.radius * np.cos(ang)
            out[sel, 1] = cy + ph.radius * np.sin(ang)
            out[sel, 2] = ph.p0[2] + f * (ph.p1[2] - ph.p0[2])
    return out


def upcoming_waypoints(traj: Trajectory, t: float, count: int) -> List[Tuple[float, float, float]]:
    """Positions of the next `count` waypoints ahead of time t"""
    tl = compile_trajectory(traj)
    tau = _local_time(tl, t)
    if tau is None or not tl.phases:
        return []
    k = max(bisect.bisect_right(tl.starts, tau) - 1, 0)
    first = tl.phases[k].target
    wps = traj.waypoints
    result = []
    for j in range(count):
        idx = first + j
        if idx >= len(wps):
            if not tl.loop:
                break
            idx %= len(wps)
        result.append(wps[idx].position)
    return result


@dataclass(frozen=True)
class TimedPath:
    """Trajectory that starts at absolute time t_start"""
    trajectory: Trajectory
    t_start: float = 0.0

    def state_at(self, t: float) -> DroneState:
        return trajectory_state(self.trajectory, max(0.0, t - self.t_start))

    def positions(self, times: Sequence[float]) -> np.ndarray:
        return trajectory_positions(self.trajectory, np.maximum(0.0, np.asarray(times) - self.t_start))


PathLike = Union[Trajectory, TimedPath]


def as_timed_path(path: PathLike) -> TimedPath:
    return path if isinstance(path, TimedPath) else TimedPath(path, 0.0)


def jitter_trajectory(traj: Trajectory, sigma: float, rng: np.random.Generator) -> Trajectory:
    """Zero-mean Gaussian waypoint jitter; arc waypoints move in altitude only"""
    if sigma <= 0:
        return traj
    wps = traj.waypoints
    jittered = []
    for i, wp in enumerate(wps):
        incoming_arc = i > 0 and wps[i - 1].arc_center is not None
        if traj.loop and i == 0:
            incoming_arc = wps[-1].arc_center is not None
        noise = rng.normal(0.0, sigma, size=3)
        if wp.arc_center is not None or incoming_arc:
            noise[:2] = 0.0
        position = tuple(float(v) for v in np.asarray(wp.position) + noise)
        jittered.append(Waypoint(position, wp.speed_to_next, wp.hold_duration, wp.arc_center, wp.arc_ccw))
    return Trajectory(tuple(jittered), traj.loop, traj.yaw)


def validate_speed(traj: Trajectory, max_speed: float) -> None:
    for i, wp in enumerate(traj.waypoints):
        if wp.speed_to_next > max_speed:
            raise ValueError(f"waypoint {i} speed {wp.speed_to_next} exceeds max speed {max_speed}")


# ---------------------------------------------------------------------------
# Mission presets
# ---------------------------------------------------------------------------

def _circle_laps(cfg: MissionConfig) -> Trajectory:
    r = cfg.circle_radius
    waypoints = []
    for h in cfg.circle_heights:
        for q in range(4):
            ang = q * math.pi / 2
            waypoints.append(Waypoint((r * math.cos(ang), r * math.sin(ang), h),
                                      speed_to_next=cfg.rx_speed, arc_center=(0.0, 0.0)))
    return Trajectory(tuple(waypoints), loop=True)


def make_mission_preset(mission_id: int, cfg: Optional[MissionConfig] = None) -> Tuple[Trajectory, Trajectory]:
    """
    Flight geometry of Missions 1-3 as (tx, rx) trajectories.

    1: TX hovers at the circle centre, RX flies r=30 m laps at 10/15/20/15 m.
    2: same laps, TX hovers outside the circles.
    3: both at 20 m on parallel shuttle tracks, separation 10..60 m.
    """
    cfg = cfg or config.mission
    if mission_id == 1:
        tx = Trajectory((Waypoint((0.0, 0.0, cfg.tx_height)),), yaw=0.0)
        return tx, _circle_laps(cfg)
    if mission_id == 2:
        tx = Trajectory((Waypoint((cfg.m2_hover_distance, 0.0, cfg.tx_height)),), yaw=0.0)
        return tx, _circle_laps(cfg)
    if mission_id == 3:
        h, off, v = cfg.m3_height, cfg.m3_lateral_offset, cfg.m3_speed
        leg = (cfg.m3_max_gap - cfg.m3_min_gap) / 2.0
        tx = Trajectory((Waypoint((0.0, 0.0, h), v), Waypoint((leg, 0.0, h), v)), loop=True)
        rx = Trajectory((Waypoint((cfg.m3_max_gap, off, h), v),
                         Waypoint((cfg.m3_max_gap - leg, off, h), v)), loop=True)
        return tx, rx
    raise ValueError(f"unknown mission id {mission_id}; expected 1, 2 or 3")


# ---------------------------------------------------------------------------
# Occlusion
# ---------------------------------------------------------------------------

def _slab_overlap(p1: np.ndarray, p2: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Per box: does the open segment p1->p2 pass through the box interior"""
    if lower.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    d = p2 - p1
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        t_a = (lower - p1) * inv
        t_b = (upper - p1) * inv
    t_near = np.minimum(t_a, t_b)
    t_far = np.maximum(t_a, t_b)
    parallel = d == 0.0
    if np.any(parallel):
        inside = (p1 > lower) & (p1 < upper)
        t_near = np.where(parallel, np.where(inside, -np.inf, np.inf), t_near)
        t_far = np.where(parallel, np.where(inside, np.inf, -np.inf), t_far)
    enter = np.maximum(t_near.max(axis=1), 0.0)
    leave = np.minimum(t_far.min(axis=1), 1.0)
    return enter < leave


def occluding_buildings(p1, p2, scene: UrbanScene, shrink: float = 0.0) -> np.ndarray:
    """Indices of buildings crossed by the segment (boxes shrunk by `shrink` m)"""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    lower, upper = scene.lower, scene.upper
    if shrink > 0 and lower.shape[0]:
        lower = lower + np.array([shrink, shrink, 0.0])
        upper = upper - shrink
    return np.flatnonzero(_slab_overlap(p1, p2, lower, upper))


def segment_occluded(p1, p2, scene: UrbanScene) -> bool:
    """True iff the open segment p1-p2 intersects any building volume"""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if np.array_equal(p1, p2):
        raise ValueError("segment endpoints must differ")
    return bool(np.any(_slab_overlap(p1, p2, scene.lower, scene.upper)))
