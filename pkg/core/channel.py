"""
Geometrical-statistical channel model.

Scatterers and reflectors are drawn once per scenario from the configured
distributions; snapshots are then pure functions of geometry and time.
Arrival directions point from the receiver back toward the last interaction
point, departure directions from the transmitter toward the first one.
"""
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from config import ChannelConfig, config
from core.environment import occluding_buildings, segment_occluded
from models.channel import (AirframeShadowMask, ChannelSnapshot, LinkEnd, MultipathComponent, PathType,
                            PointScatterer, ReflectionSurface)
from models.scene import DroneState, UrbanScene
from utils.logger import get_logger
from utils.rng import stream
from utils.telemetry import get_performance_monitor

logger = get_logger()
perf = get_performance_monitor()

Elements = Tuple[List[PointScatterer], List[ReflectionSurface]]

GROUND_HALF_EXTENT = 1.0e5  # m, flat ground reflector without a scene area


def free_space_loss_db(distance, fc: float):
    """Friis free-space loss 20·log10(4πdf/c)"""
    return 20.0 * np.log10(4.0 * math.pi * np.asarray(distance, dtype=float) * fc / SPEED_OF_LIGHT)


def relative_direction(state: DroneState, vector) -> Tuple[float, float]:
    """Azimuth (relative to heading, in [-pi, pi)) and elevation of a world vector"""
    vx, vy, vz = (float(v) for v in vector)
    az = (math.atan2(vy, vx) - state.heading + math.pi) % (2 * math.pi) - math.pi
    el = math.atan2(vz, math.hypot(vx, vy))
    return az, el


def airframe_attenuation(mask: AirframeShadowMask, az, el):
    """lobe_depth·max(0, cos(n·az))² + cap_depth·[el > cap_elevation], in dB"""
    lobe = np.maximum(0.0, np.cos(mask.lobe_count * np.asarray(az, dtype=float))) ** 2
    cap = np.asarray(el, dtype=float) > mask.cap_elevation
    result = mask.lobe_depth * lobe + mask.cap_depth * cap
    return float(result) if np.ndim(result) == 0 else result


def _mask_loss(end: LinkEnd, vector) -> float:
    if end.mask is None:
        return 0.0
    az, el = relative_direction(end.state, vector)
    return airframe_attenuation(end.mask, az, el)


def _amplitude(loss_db: float, path_length: float, fc: float) -> complex:
    phase = -2.0 * math.pi * fc * path_length / SPEED_OF_LIGHT
    return 10.0 ** (-loss_db / 20.0) * complex(math.cos(phase), math.sin(phase))


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------------------
# Element placement
# ---------------------------------------------------------------------------

def _building_faces(lo: np.ndarray, hi: np.ndarray):
    """(origin, edge_u, edge_v, normal) of the four walls and the roof"""
    (x0, y0, _), (x1, y1, h) = lo, hi
    z = np.array([0.0, 0.0, h])
    return [
        (np.array([x0, y1, 0.0]), np.array([0.0, y0 - y1, 0.0]), z, np.array([-1.0, 0.0, 0.0])),
        (np.array([x1, y0, 0.0]), np.array([0.0, y1 - y0, 0.0]), z, np.array([1.0, 0.0, 0.0])),
        (np.array([x0, y0, 0.0]), np.array([x1 - x0, 0.0, 0.0]), z, np.array([0.0, -1.0, 0.0])),
        (np.array([x1, y1, 0.0]), np.array([x0 - x1, 0.0, 0.0]), z, np.array([0.0, 1.0, 0.0])),
        (np.array([x0, y0, h]), np.array([x1 - x0, 0.0, 0.0]), np.array([0.0, y1 - y0, 0.0]),
         np.array([0.0, 0.0, 1.0])),
    ]


def _draw_scatterers(rng, origin, edge_u, edge_v, normal, density, cfg: ChannelConfig):
    area = float(np.linalg.norm(edge_u) * np.linalg.norm(edge_v))
    count = int(rng.poisson(density * area))
    scatterers = []
    for _ in range(count):
        a, b = rng.random(2)
        angle = math.radians(rng.uniform(*cfg.opening_angle_deg))
        loss = rng.uniform(*cfg.scattering_loss_db)
        scatterers.append(PointScatterer(origin + a * edge_u + b * edge_v, normal, angle, loss))
    return scatterers


def place_channel_elements(scene: UrbanScene, cfg: Optional[ChannelConfig] = None,
                           rng_seed: int = 0) -> Elements:
    """Draw scatterers on faces and ground, one reflector per wall, optional ground reflector"""
    cfg = cfg or config.channel
    rng = stream(rng_seed, "channel-elements")
    scatterers: List[PointScatterer] = []
    reflectors: List[ReflectionSurface] = []

    for lo, hi in zip(scene.lower, scene.upper):
        for k, (origin, edge_u, edge_v, normal) in enumerate(_building_faces(lo, hi)):
            scatterers.extend(_draw_scatterers(rng, origin, edge_u, edge_v, normal, cfg.scatterer_density, cfg))
            if k == 4:
                continue
            width, height = np.linalg.norm(edge_u), np.linalg.norm(edge_v)
            fu, fv = rng.uniform(*cfg.reflection_size_fraction, size=2)
            half_u, half_v = fu * width / 2.0, fv * height / 2.0
            su = rng.uniform(half_u, width - half_u) if width > 2 * half_u else width / 2.0
            sv = rng.uniform(half_v, height - half_v) if height > 2 * half_v else height / 2.0
            center = origin + edge_u / width * su + edge_v / height * sv
            loss = rng.uniform(*cfg.reflection_loss_db)
            reflectors.append(ReflectionSurface(center, normal, (half_u, half_v), loss))

    if scene.area is not None and cfg.ground_scatterer_density > 0:
        a = scene.area
        scatterers.extend(_draw_scatterers(
            rng, np.array([a.xmin, a.ymin, 0.0]), np.array([a.width, 0.0, 0.0]),
            np.array([0.0, a.depth, 0.0]), np.array([0.0, 0.0, 1.0]), cfg.ground_scatterer_density, cfg))

    if cfg.ground_reflection:
        if scene.area is not None:
            a = scene.area
            center = ((a.xmin + a.xmax) / 2, (a.ymin + a.ymax) / 2, 0.0)
            half = (a.width / 2, a.depth / 2)
        else:
            center, half = (0.0, 0.0, 0.0), (GROUND_HALF_EXTENT, GROUND_HALF_EXTENT)
        reflectors.append(ReflectionSurface(center, (0.0, 0.0, 1.0), half, cfg.ground_reflection_loss_db))

    logger.debug(f"Placed {len(scatterers)} scatterers and {len(reflectors)} reflectors")
    return scatterers, reflectors


# ---------------------------------------------------------------------------
# Multipath components
# ---------------------------------------------------------------------------

def los_component(tx: LinkEnd, rx: LinkEnd, scene: UrbanScene, fc: float,
                  cfg: Optional[ChannelConfig] = None) -> Optional[MultipathComponent]:
    """Direct path; absent when a building blocks it (unless knife-edge diffraction applies)"""
    cfg = cfg or config.channel
    vector = rx.position - tx.position
    d = float(np.linalg.norm(vector))
    if d == 0:
        raise ValueError("tx and rx positions must differ")
    penalty = 0.0
    blocking = occluding_buildings(tx.position, rx.position, scene)
    if blocking.size:
        if not (cfg.diffraction_enabled and blocking.size == 1 and
                occluding_buildings(tx.position, rx.position, scene, shrink=cfg.diffraction_clearance).size == 0):
            return None
        penalty = cfg.diffraction_penalty_db
    loss = float(free_space_loss_db(d, fc)) + _mask_loss(tx, vector) + _mask_loss(rx, -vector) + penalty
    direction = vector / d
    return MultipathComponent(d / SPEED_OF_LIGHT, _amplitude(loss, d, fc), PathType.LOS, direction, -direction)


def scatter_component(s: PointScatterer, tx: LinkEnd, rx: LinkEnd, scene: UrbanScene, fc: float,
                      cfg: Optional[ChannelConfig] = None) -> Optional[MultipathComponent]:
    """Single-bounce path via a point scatterer inside its opening cone"""
    cfg = cfg or config.channel
    to_tx = tx.position - s.position
    to_rx = rx.position - s.position
    d1, d2 = float(np.linalg.norm(to_tx)), float(np.linalg.norm(to_rx))
    if d1 == 0 or d2 == 0:
        return None
    edge = math.cos(s.opening_angle) - 1e-12
    if np.dot(to_tx, s.surface_normal) / d1 < edge or np.dot(to_rx, s.surface_normal) / d2 < edge:
        return None
    lifted = s.position + s.surface_normal * cfg.surface_offset
    if segment_occluded(tx.position, lifted, scene) or segment_occluded(lifted, rx.position, scene):
        return None
    loss = (float(free_space_loss_db(d1 + d2, fc)) + s.scattering_loss
            + _mask_loss(tx, -to_tx) + _mask_loss(rx, -to_rx))
    return MultipathComponent((d1 + d2) / SPEED_OF_LIGHT, _amplitude(loss, d1 + d2, fc), PathType.SCATTER,
                              -to_tx / d1, -to_rx / d2)


def reflection_component(r: ReflectionSurface, tx: LinkEnd, rx: LinkEnd, scene: UrbanScene, fc: float,
                         cfg: Optional[ChannelConfig] = None) -> Optional[MultipathComponent]:
    """Image-method specular path off a finite surface"""
    cfg = cfg or config.channel
    h_tx = float(np.dot(tx.position - r.center, r.normal))
    h_rx = float(np.dot(rx.position - r.center, r.normal))
    if h_tx <= 0 or h_rx <= 0:
        return None
    image = tx.position - 2.0 * h_tx * r.normal
    point = image + (h_tx / (h_tx + h_rx)) * (rx.position - image)
    local = point - r.center
    if abs(np.dot(local, r.axis_u)) > r.half_extents[0] or abs(np.dot(local, r.axis_v)) > r.half_extents[1]:
        return None
    lifted = point + r.normal * cfg.surface_offset
    if segment_occluded(tx.position, lifted, scene) or segment_occluded(lifted, rx.position, scene):
        return None
    total = float(np.linalg.norm(rx.position - image))
    loss = (float(free_space_loss_db(total, fc)) + r.reflection_loss
            + _mask_loss(tx, point - tx.position) + _mask_loss(rx, point - rx.position))
    return MultipathComponent(total / SPEED_OF_LIGHT, _amplitude(loss, total, fc), PathType.REFLECT,
                              _unit(point - tx.position), _unit(point - rx.position))


def channel_snapshot(tx: LinkEnd, rx: LinkEnd, scene: UrbanScene, elements: Elements, t: float,
                     fc: float, cfg: Optional[ChannelConfig] = None) -> ChannelSnapshot:
    """All valid LOS, scatter and reflection components at time t"""
    cfg = cfg or config.channel
    scatterers, reflectors = elements
    components = []
    los = los_component(tx, rx, scene, fc, cfg)
    if los is not None:
        components.append(los)
    for s in scatterers:
        comp = scatter_component(s, tx, rx, scene, fc, cfg)
        if comp is not None:
            components.append(comp)
    for r in reflectors:
        comp = reflection_component(r, tx, rx, scene, fc, cfg)
        if comp is not None:
            components.append(comp)
    perf.increment_counter("channel_snapshots")
    return ChannelSnapshot(t, tuple(components), tx.node_id, rx.node_id)


def narrowband_gain(snapshot: ChannelSnapshot) -> Tuple[complex, float]:
    """Superposed complex gain and its power in dB (-inf when nothing arrives)"""
    gain = sum((c.amplitude for c in snapshot.components), 0j)
    magnitude = abs(gain)
    return gain, 20.0 * math.log10(magnitude) if magnitude > 0 else -math.inf


# ---------------------------------------------------------------------------
# Batch evaluation for open airspace
# ---------------------------------------------------------------------------

def _mask_matrix(ends: Sequence[LinkEnd], vectors: np.ndarray) -> np.ndarray:
    """Attenuation of each end (rows) toward per-row vectors (rows, cols, 3)"""
    out = np.zeros(vectors.shape[:2])
    for i, end in enumerate(ends):
        if end.mask is None:
            continue
        v = vectors[i]
        az = np.arctan2(v[:, 1], v[:, 0]) - end.state.heading
        el = np.arctan2(v[:, 2], np.hypot(v[:, 0], v[:, 1]))
        out[i] = airframe_attenuation(end.mask, az, el)
    return out


def link_power_matrix(sources: Sequence[LinkEnd], sinks: Sequence[LinkEnd], fc: float) -> np.ndarray:
    """
    LOS-only channel power (dB) for every source/sink pair in a scene without
    buildings or elements; -inf where source and sink are the same node.
    """
    src = np.array([e.position for e in sources], dtype=float).reshape(-1, 3)
    dst = np.array([e.position for e in sinks], dtype=float).reshape(-1, 3)
    vectors = dst[None, :, :] - src[:, None, :]
    dist = np.linalg.norm(vectors, axis=2)
    same = np.array([[a.node_id == b.node_id for b in sinks] for a in sources]).reshape(dist.shape)
    safe = np.where(dist > 0, dist, 1.0)
    loss = free_space_loss_db(safe, fc)
    loss = loss + _mask_matrix(sources, vectors)
    loss = loss + _mask_matrix(sinks, -np.transpose(vectors, (1, 0, 2))).T
    power = -loss
    power[same | (dist == 0)] = -np.inf
    perf.increment_counter("batch_links", int(dist.size))
    return power
