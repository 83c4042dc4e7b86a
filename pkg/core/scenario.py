"""
Scenario loading, validation and compilation.
All problems are collected and reported together before a run starts.
"""
import math
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Tuple, Union

from pydantic import ValidationError

from config import ChannelConfig, Config, config
from core.environment import InfeasibleLayoutError, generate_buildings, validate_speed
from models.channel import AirframeShadowMask
from models.radio import PROFILE_PRESETS, RadioProfile
from models.scenario import (DroneConfig, GroundStation, Scenario, ScenarioFile, StationRole, merge_section)
from models.scene import Area, Building, P1410Params, Trajectory, UrbanScene, Waypoint
from utils.logger import get_logger

logger = get_logger()

Problem = Tuple[str, str]


class ScenarioError(Exception):
    """Scenario cannot be run; carries (location, message) diagnostics"""

    def __init__(self, problems: List[Problem], source: str = "<scenario>"):
        self.problems = list(problems)
        self.source = source
        super().__init__("; ".join(f"{loc}: {msg}" for loc, msg in self.problems))


def _location(loc: tuple) -> str:
    parts = []
    for item in loc:
        if isinstance(item, int):
            parts[-1] = f"{parts[-1]}[{item}]" if parts else f"[{item}]"
        else:
            parts.append(str(item))
    return ".".join(parts) or "<root>"


def load_scenario(path: Union[str, Path], cfg: Optional[Config] = None) -> Scenario:
    """Read, parse and compile a TOML scenario file"""
    path = Path(path)
    source = str(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError([("<file>", str(e))], source) from e
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ScenarioError([("<toml>", str(e))], source) from e
    return parse_scenario(data, source, cfg)


def parse_scenario(data: dict, source: str = "<scenario>", cfg: Optional[Config] = None) -> Scenario:
    try:
        spec = ScenarioFile.model_validate(data)
    except ValidationError as e:
        problems = [(_location(err["loc"]), err["msg"]) for err in e.errors()]
        raise ScenarioError(problems, source) from e
    return compile_scenario(spec, source, cfg)


def _resolve_profile(name: str, spec: ScenarioFile, problems: List[Problem], where: str) -> Optional[RadioProfile]:
    custom = spec.radio_profiles.get(name)
    if custom is None:
        if name in PROFILE_PRESETS:
            return PROFILE_PRESETS[name]
        problems.append((where, f"unknown radio profile '{name}'"))
        return None
    base_name = custom.preset or "experimental"
    if base_name not in PROFILE_PRESETS:
        problems.append((f"radio_profiles.{name}.preset", f"unknown preset '{base_name}'"))
        return None
    try:
        return PROFILE_PRESETS[base_name].with_overrides(**custom.overrides())
    except ValueError as e:
        problems.append((f"radio_profiles.{name}", str(e)))
        return None


def _resolve_mask(name: Optional[str], spec: ScenarioFile, problems: List[Problem],
                  where: str) -> Optional[AirframeShadowMask]:
    if name is None:
        return None
    m = spec.masks.get(name)
    if m is None:
        problems.append((where, f"unknown mask '{name}'"))
        return None
    return AirframeShadowMask(m.lobe_count, m.lobe_depth_db, math.radians(m.cap_elevation_deg), m.cap_depth_db)


def _trajectory(drone, problems: List[Problem], where: str) -> Optional[Trajectory]:
    try:
        waypoints = tuple(
            Waypoint(tuple(w.position), w.speed, w.hold, tuple(w.arc_center) if w.arc_center else None, w.arc_ccw)
            for w in drone.waypoints
        )
        yaw = math.radians(drone.yaw_deg) if drone.yaw_deg is not None else None
        return Trajectory(waypoints, drone.loop, yaw)
    except ValueError as e:
        problems.append((where, str(e)))
        return None


def compile_scenario(spec: ScenarioFile, source: str = "<scenario>", cfg: Optional[Config] = None) -> Scenario:
    """Semantic checks beyond the schema, then build the immutable Scenario"""
    cfg = cfg or config
    problems: List[Problem] = []

    seen = {}
    for kind, items in (("drones", spec.drones), ("ground_stations", spec.ground_stations)):
        for k, item in enumerate(items):
            if item.id in seen:
                problems.append((f"{kind}[{k}].id", f"duplicate id {item.id} (first used by {seen[item.id]})"))
            else:
                seen[item.id] = f"{kind}[{k}]"

    drones = []
    for k, d in enumerate(spec.drones):
        where = f"drones[{k}]"
        radio = _resolve_profile(d.radio, spec, problems, f"{where}.radio")
        mask = _resolve_mask(d.mask, spec, problems, f"{where}.mask")
        traj = _trajectory(d, problems, f"{where}.waypoints")
        if radio is not None and spec.time_step > 1.0 / radio.beacon_rate + 1e-12:
            problems.append(("time_step", f"{spec.time_step} s exceeds the beacon interval of {where}"))
        if traj is not None:
            try:
                validate_speed(traj, cfg.simulation.max_speed)
            except ValueError as e:
                problems.append((f"{where}.waypoints", str(e)))
        if radio is not None and traj is not None:
            drones.append(DroneConfig(d.id, traj, radio, mask, d.beacon, d.collision_avoidance, d.jitter_sigma_m))

    stations = []
    for k, g in enumerate(spec.ground_stations):
        radio = _resolve_profile(g.radio, spec, problems, f"ground_stations[{k}].radio")
        stations.append(GroundStation(g.id, g.position, StationRole(g.role), radio))

    area, buildings, layout = None, [], None
    scene = spec.scene
    try:
        if scene.area is not None:
            area = Area(*scene.area)
        buildings = [Building(tuple(b.min), tuple(b.max), b.height) for b in scene.buildings]
        if scene.p1410 is not None:
            layout = P1410Params(scene.p1410.alpha, scene.p1410.beta, scene.p1410.gamma)
    except ValueError as e:
        problems.append(("scene", str(e)))

    channel = _channel_section(cfg.channel, scene)
    protocol = merge_section(cfg.protocol, spec.protocol)
    if protocol.stale_after_s >= protocol.lost_after_s:
        problems.append(("protocol.stale_after_s", "must be < lost_after_s"))

    if problems:
        logger.validation_failed(source, problems)
        raise ScenarioError(problems, source)

    scenario = Scenario(
        drones=tuple(drones),
        duration=spec.duration,
        name=spec.name,
        ground_stations=tuple(stations),
        buildings=tuple(buildings),
        layout=layout,
        area=area,
        place_elements=scene.elements,
        channel=channel,
        protocol=protocol,
        tesla=merge_section(cfg.tesla, spec.tesla),
        multilink=merge_section(cfg.multilink, spec.multilink),
        output=merge_section(cfg.output, spec.output),
        time_step=spec.time_step,
        seed=spec.seed,
    )
    build_scene(scenario)
    return scenario


def _channel_section(defaults: ChannelConfig, scene) -> ChannelConfig:
    changes = {
        "scatterer_density": scene.scatterer_density,
        "ground_scatterer_density": scene.ground_scatterer_density,
        "ground_reflection": scene.ground_reflection,
        "ground_reflection_loss_db": scene.ground_reflection_loss_db,
        "diffraction_enabled": scene.diffraction,
    }
    return replace(defaults, **{k: v for k, v in changes.items() if v is not None})


def build_scene(scenario: Scenario, seed: Optional[int] = None) -> UrbanScene:
    """Explicit buildings, or a layout drawn from the statistical parameters with the run seed"""
    seed = scenario.seed if seed is None else seed
    buildings = list(scenario.buildings)
    if scenario.layout is not None:
        try:
            buildings = generate_buildings(scenario.layout, scenario.area, seed,
                                           scenario.channel.max_placement_attempts)
        except InfeasibleLayoutError as e:
            raise ScenarioError([("scene.p1410", str(e))], scenario.name) from e
    return UrbanScene(tuple(buildings), scenario.area)

