"""
Tactical collision avoidance: conflict prediction against beaconed partner
paths and the CRUISE/CONFLICT/HOLDING/RESUME state machine.
"""
import math
from dataclasses import dataclass
from typing import List, Mapping, Optional, Tuple

import numpy as np

from config import ProtocolConfig, config
from core.beacon import GeodeticOrigin, reconstruct_path
from core.environment import PathLike, as_timed_path
from models.protocol import (BeaconMessage, BeaconStatus, CACommand, CAMode, CAState, CATransition, CommandKind,
                             HoldPolicy)
from utils.logger import get_logger

logger = get_logger()


def prediction_times(t0: float, horizon: float, dt: float) -> np.ndarray:
    if not horizon > 0 or not dt > 0:
        raise ValueError("horizon and dt must be > 0")
    steps = int(math.floor(horizon / dt + 1e-9))
    times = t0 + dt * np.arange(steps + 1)
    if times[-1] < t0 + horizon - 1e-9:
        times = np.append(times, t0 + horizon)
    return times


def predict_min_separation(path_a: PathLike, path_b: PathLike, t0: float, horizon: float,
                           dt: float) -> Tuple[float, float]:
    """Minimum sampled 3D distance over [t0, t0 + horizon]; ties resolve to the earliest time"""
    times = prediction_times(t0, horizon, dt)
    a = as_timed_path(path_a).positions(times)
    b = as_timed_path(path_b).positions(times)
    distances = np.linalg.norm(a - b, axis=1)
    k = int(np.argmin(distances))
    return float(distances[k]), float(times[k])


@dataclass(frozen=True)
class _Prediction:
    partner: int
    d_min: float
    t_at_min: float
    status: BeaconStatus


def _predict_all(own_path: PathLike, beacons: Mapping[int, BeaconMessage], own_id: int, t: float,
                 origin: GeodeticOrigin, cfg: ProtocolConfig) -> List[_Prediction]:
    predictions = []
    for pid in sorted(beacons):
        beacon = beacons[pid]
        if pid == own_id or t - beacon.time_s > cfg.beacon_timeout_s:
            continue
        d_min, t_at = predict_min_separation(own_path, reconstruct_path(beacon, origin), t, cfg.horizon_s, cfg.dt_s)
        predictions.append(_Prediction(pid, d_min, t_at, beacon.status))
    return predictions


def ca_step(state: CAState, own_path: PathLike, beacons: Mapping[int, BeaconMessage], t: float,
            own_id: int, origin: Optional[GeodeticOrigin] = None,
            cfg: Optional[ProtocolConfig] = None) -> Tuple[CAState, List[CACommand], List[CATransition]]:
    """
    Advance one drone's CA state.

    own_path is the drone's own plan as if flown from now; while holding it is
    the plan resumed. Beacons older than the beacon timeout are ignored.
    Returns the new state, the commands to execute and the transitions taken.
    """
    cfg = cfg or config.protocol
    origin = origin or GeodeticOrigin.from_config()
    policy = HoldPolicy(cfg.hold_policy)
    predictions = _predict_all(own_path, beacons, own_id, t, origin, cfg)
    worst = min(predictions, key=lambda p: (p.d_min, p.partner), default=None)
    d_pred = worst.d_min if worst else None
    commands: List[CACommand] = []
    transitions: List[CATransition] = []

    def move(target: CAMode, **changes):
        nonlocal state
        partner = changes.get("conflict_partner")
        if partner is None:
            partner = state.conflict_partner
        transitions.append(CATransition(t, own_id, state.mode, target, partner, d_pred))
        state = state.evolve(mode=target, d_min_pred=d_pred, **changes)
        logger.ca_transition(t, own_id, transitions[-1].label, partner)

    if state.mode == CAMode.RESUME:
        move(CAMode.CRUISE)

    if state.mode == CAMode.CRUISE:
        if worst is not None and worst.d_min < cfg.threshold_m:
            move(CAMode.CONFLICT, conflict_partner=worst.partner, conflict_since=t)
        else:
            return state.evolve(d_min_pred=d_pred), commands, transitions

    if state.mode == CAMode.CONFLICT:
        conflicting = [p for p in predictions if p.d_min < cfg.threshold_m]
        if not conflicting:
            move(CAMode.CRUISE, conflict_partner=None, conflict_since=None)
            return state, commands, transitions
        partner = min(conflicting, key=lambda p: (p.d_min, p.partner))
        if _should_hold(policy, own_id, partner, state, t, cfg):
            move(CAMode.HOLDING, conflict_partner=partner.partner, hold_since=t, clear_since=None)
            commands.append(CACommand(CommandKind.HOLD, partner.partner))
            commands.append(CACommand(CommandKind.EMERGENCY, partner.partner))
        else:
            state = state.evolve(conflict_partner=partner.partner, d_min_pred=d_pred)
        return state, commands, transitions

    # HOLDING
    clear = worst is None or worst.d_min > cfg.threshold_m + cfg.hysteresis_m
    if not clear:
        return state.evolve(clear_since=None, d_min_pred=d_pred), commands, transitions
    clear_since = state.clear_since if state.clear_since is not None else t
    if t - clear_since >= cfg.dwell_s - 1e-9:
        partner = state.conflict_partner
        move(CAMode.RESUME, conflict_partner=None, hold_since=None, conflict_since=None, clear_since=None)
        commands.append(CACommand(CommandKind.RESUME, partner))
    else:
        state = state.evolve(clear_since=clear_since, d_min_pred=d_pred)
    return state, commands, transitions


def _should_hold(policy: HoldPolicy, own_id: int, partner: _Prediction, state: CAState, t: float,
                 cfg: ProtocolConfig) -> bool:
    """hold_both always holds; lower_id_first lets the lower id yield and the other wait for it"""
    if policy == HoldPolicy.HOLD_BOTH or own_id < partner.partner:
        return True
    if partner.status != BeaconStatus.CRUISE:
        return True
    waited = t - (state.conflict_since if state.conflict_since is not None else t)
    return waited >= cfg.beacon_timeout_s
