"""
Preset experiments: flight Missions 1-3, the density requirement scenario
and the cabled lab bench.
"""
import math
from dataclasses import replace
from typing import List, Optional, Sequence

import numpy as np

from config import MissionConfig, config
from core.environment import make_mission_preset, trajectory_period
from core.radio import lab_bench_sweep
from core.simulation import run
from models.channel import AirframeShadowMask
from models.radio import LAB, PROFILE_PRESETS, BenchPoint, RadioProfile
from models.report import SimulationReport
from models.scenario import DroneConfig, GroundStation, Scenario, StationRole
from models.scene import Area, Trajectory, Waypoint
from utils.logger import get_logger
from utils.rng import stream

logger = get_logger()

TX_ID = 1
RX_ID = 2
MONITOR_ID = 1000

DEFAULT_BENCH_ATTENUATIONS = tuple(float(a) for a in range(60, 142, 2))


def _profile(radio: str) -> RadioProfile:
    try:
        return PROFILE_PRESETS[radio.lower()]
    except KeyError as e:
        raise ValueError(f"unknown radio '{radio}'; expected experimental or cots") from e


def mission_mask(mission_id: int, cfg: Optional[MissionConfig] = None) -> Optional[AirframeShadowMask]:
    """Calibrated airframe mask; Mission 3 was flown without airframe shadowing"""
    cfg = cfg or config.mission
    if mission_id == 3:
        return None
    return AirframeShadowMask(cfg.lobe_count, cfg.lobe_depth_db, cfg.cap_elevation, cfg.cap_depth_db)


def flight_profile(profile: RadioProfile, cfg: Optional[MissionConfig] = None) -> RadioProfile:
    """The flown SDR keeps its link budget but decodes in the flight-calibrated window"""
    cfg = cfg or config.mission
    if profile.agc:
        return profile
    return profile.with_overrides(snr_decode_min=cfg.flight_snr_decode_min,
                                  snr_overdrive_start=cfg.flight_snr_overdrive_start,
                                  edge_steepness=cfg.flight_edge_steepness)


def mission_scenario(mission_id: int, radio: str = "experimental", seed: int = 0,
                     cfg: Optional[MissionConfig] = None, jitter_sigma: float = 0.0) -> Scenario:
    """TX beacons, RX listens; Mission 3 adds the ground reflection of the low shuttle flight"""
    cfg = cfg or config.mission
    tx_traj, rx_traj = make_mission_preset(mission_id, cfg)
    profile = flight_profile(_profile(radio), cfg)
    mask = mission_mask(mission_id, cfg)
    if mission_id == 3:
        duration = cfg.m3_cycles * trajectory_period(tx_traj)
        channel = replace(config.channel, ground_reflection=True)
    else:
        duration = trajectory_period(rx_traj)
        channel = config.channel
    drones = (
        DroneConfig(TX_ID, tx_traj, profile, mask, beacon=True, jitter_sigma=jitter_sigma),
        DroneConfig(RX_ID, rx_traj, profile, mask, beacon=False, jitter_sigma=jitter_sigma),
    )
    return Scenario(drones=drones, duration=duration, name=f"mission{mission_id}-{radio.lower()}",
                    place_elements=False, channel=channel, protocol=config.protocol, tesla=config.tesla,
                    multilink=config.multilink, output=config.output, time_step=config.simulation.time_step,
                    seed=seed)


def replicate_mission(mission_id: int, radio: str = "experimental", seed: int = 0) -> SimulationReport:
    if mission_id not in (1, 2, 3):
        raise ValueError(f"unknown mission id {mission_id}; expected 1, 2 or 3")
    return run(mission_scenario(mission_id, radio, seed), seed)


# ---------------------------------------------------------------------------
# Density requirement scenario
# ---------------------------------------------------------------------------

def _lawnmower(x0: float, y0: float, size: float, altitude: float, speed: float,
               rng: np.random.Generator) -> Trajectory:
    """Closed back-and-forth sweep inside one square cell"""
    margin = min(5.0, size / 10.0)
    lo, hi = margin, size - margin
    rows = 4
    offsets = np.linspace(lo, hi, rows)
    flip_axes = bool(rng.integers(0, 2))
    reverse = bool(rng.integers(0, 2))
    points = []
    for k, off in enumerate(offsets):
        a, b = (lo, hi) if k % 2 == 0 else (hi, lo)
        points.extend([(a, off), (b, off)])
    if reverse:
        points.reverse()
    waypoints = []
    for u, v in points:
        x, y = (v, u) if flip_axes else (u, v)
        waypoints.append(Waypoint((x0 + x, y0 + y, altitude), speed_to_next=speed))
    return Trajectory(tuple(waypoints), loop=True)


def density_scenario(n_drones: int, area_km2: float, duration: float, seed: int = 0,
                     cfg: Optional[MissionConfig] = None) -> Scenario:
    """n drones on disjoint grid cells flying lawnmower sweeps, COTS radios, one monitor station"""
    if n_drones < 1:
        raise ValueError("n_drones must be >= 1")
    if not area_km2 > 0:
        raise ValueError("area_km2 must be > 0")
    cfg = cfg or config.mission
    area = Area.square_km2(area_km2)
    per_side = math.ceil(math.sqrt(n_drones))
    cell = area.width / per_side
    rng = stream(seed, "density-tracks")
    cells = rng.permutation(per_side * per_side)[:n_drones]
    profile = PROFILE_PRESETS["cots"]
    drones = []
    for k, c in enumerate(sorted(int(c) for c in cells)):
        row, col = divmod(c, per_side)
        altitude = cfg.density_altitude + float(rng.uniform(-2.0, 2.0))
        traj = _lawnmower(area.xmin + col * cell, area.ymin + row * cell, cell, altitude, cfg.density_speed, rng)
        drones.append(DroneConfig(k + 1, traj, profile, None, beacon=True))
    monitor = GroundStation(MONITOR_ID, (area.xmin + area.width / 2, area.ymin + area.depth / 2, 2.0),
                            StationRole.MONITOR, profile)
    output = replace(config.output, packet_log=False, snr_trace=False)
    return Scenario(drones=tuple(drones), duration=duration, name=f"density-{n_drones}",
                    ground_stations=(monitor,), area=area, place_elements=False, channel=config.channel,
                    protocol=config.protocol, tesla=config.tesla, multilink=config.multilink, output=output,
                    time_step=config.simulation.time_step, seed=seed)


def density_stress(n_drones: int, area_km2: float = 1.0, duration: float = 60.0, seed: int = 0) -> SimulationReport:
    return run(density_scenario(n_drones, area_km2, duration, seed), seed)


# ---------------------------------------------------------------------------
# Lab bench
# ---------------------------------------------------------------------------

def run_lab_bench(amp_gain: float = 0.0, attenuations_db: Optional[Sequence[float]] = None,
                  packets_per_point: Optional[int] = None, seed: int = 0,
                  profile: RadioProfile = LAB) -> List[BenchPoint]:
    """Cabled sweep of the bench radio with or without the external amplifier"""
    attenuations = DEFAULT_BENCH_ATTENUATIONS if attenuations_db is None else tuple(attenuations_db)
    logger.info(f"Lab bench: amp={amp_gain} dB, {len(attenuations)} points")
    return lab_bench_sweep(profile.with_overrides(amp_gain=amp_gain), attenuations, packets_per_point, seed)
