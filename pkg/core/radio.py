"""
Radio link: link budget, SNR and calibrated per-packet delivery.
"""
import math
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import expit

from config import config
from models.radio import BenchPoint, LossReason, PacketOutcome, RadioProfile
from utils.logger import get_logger
from utils.rng import stream
from utils.telemetry import timed_operation

logger = get_logger()

THERMAL_NOISE_DBM_HZ = -174.0


def received_power(profile: RadioProfile, channel_power_db: float) -> float:
    """tx_power + amp_gain + channel power; -inf stays -inf"""
    return profile.tx_power + profile.amp_gain + channel_power_db


def noise_floor_dbm(profile: RadioProfile) -> float:
    return THERMAL_NOISE_DBM_HZ + 10.0 * math.log10(profile.bandwidth) + profile.noise_figure


def snr(rx_power_dbm: float, profile: RadioProfile) -> float:
    return rx_power_dbm - noise_floor_dbm(profile)


def packet_success_probability(profile: RadioProfile, snr_db):
    """Logistic lower edge, times a mirrored upper edge when the radio has no AGC"""
    x = np.asarray(snr_db, dtype=float)
    with np.errstate(invalid="ignore"):
        p = expit((x - profile.snr_decode_min) / profile.edge_steepness)
        if not profile.agc:
            p = p * expit((profile.snr_overdrive_start - x) / profile.edge_steepness)
    p = np.nan_to_num(p, nan=0.0)
    return float(p) if p.ndim == 0 else p


def loss_reason_for(profile: RadioProfile, snr_db: float) -> LossReason:
    return LossReason.OVERDRIVE if snr_db > profile.window_midpoint else LossReason.WEAK_SIGNAL


def packet_outcome(profile: RadioProfile, snr_db: float, rng: np.random.Generator) -> PacketOutcome:
    """One Bernoulli draw; consumes exactly one uniform from rng"""
    p = packet_success_probability(profile, snr_db)
    if rng.random() < p:
        return PacketOutcome(True, LossReason.NONE, snr_db)
    return PacketOutcome(False, loss_reason_for(profile, snr_db), snr_db)


def airtime_s(payload_bytes: int) -> float:
    """Frame duration: preamble plus payload at the PHY rate"""
    return config.radio.preamble_s + 8.0 * payload_bytes / config.radio.phy_rate_bps


@timed_operation("lab_bench_sweep")
def lab_bench_sweep(profile: RadioProfile, attenuations_db: Sequence[float],
                    packets_per_point: Optional[int] = None, seed: int = 0) -> List[BenchPoint]:
    """
    Cabled bench: a fixed attenuator replaces the channel. Point k draws from
    its own stream keyed by k, so two sweeps whose link budgets differ by a
    constant shift compare draw-for-draw.
    """
    n = packets_per_point or config.radio.bench_packets
    points = []
    for k, attenuation in enumerate(attenuations_db):
        value = snr(received_power(profile, -float(attenuation)), profile)
        p = packet_success_probability(profile, value)
        delivered = int(np.count_nonzero(stream(seed, "bench", k).random(n) < p))
        lost = n - delivered
        overdrive = lost if value > profile.window_midpoint else 0
        points.append(BenchPoint(float(attenuation), value, p, n, delivered, lost - overdrive, overdrive))
    logger.debug(f"Bench sweep: {len(points)} points x {n} packets, amp {profile.amp_gain} dB")
    return points
