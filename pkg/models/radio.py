"""
Radio Models
Radio profiles, per-packet outcomes and bench results.
"""
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict

MAX_PAYLOAD = 125  # bytes


class LossReason(str, Enum):
    NONE = "NONE"
    WEAK_SIGNAL = "WEAK_SIGNAL"
    OVERDRIVE = "OVERDRIVE"
    MAC_COLLISION = "MAC_COLLISION"
    MALFORMED = "MALFORMED"


@dataclass(frozen=True)
class RadioProfile:
    """
    Link budget and decode window of one radio.

    Without AGC the receiver decodes inside [snr_decode_min, snr_overdrive_start]
    with logistic edges of width edge_steepness; with AGC only the lower edge applies.
    """
    tx_power: float  # dBm
    amp_gain: float = 0.0  # dB
    noise_figure: float = 7.0  # dB
    bandwidth: float = 5e6  # Hz
    snr_decode_min: float = 8.0  # dB
    snr_overdrive_start: float = 38.0  # dB
    edge_steepness: float = 1.5  # dB
    agc: bool = False
    beacon_payload: int = 125  # bytes
    beacon_rate: float = 10.0  # Hz

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be > 0, got {self.bandwidth}")
        if not self.agc and not self.snr_decode_min < self.snr_overdrive_start:
            raise ValueError("snr_decode_min must be < snr_overdrive_start without AGC")
        if not self.edge_steepness > 0:
            raise ValueError("edge_steepness must be > 0")
        if not 0 < self.beacon_payload <= MAX_PAYLOAD:
            raise ValueError(f"beacon_payload must be in (0, {MAX_PAYLOAD}], got {self.beacon_payload}")
        if not self.beacon_rate > 0:
            raise ValueError("beacon_rate must be > 0")

    @property
    def window_midpoint(self) -> float:
        """SNR above which a loss counts as overdrive; +inf with AGC"""
        if self.agc:
            return math.inf
        return (self.snr_decode_min + self.snr_overdrive_start) / 2.0

    def with_overrides(self, **changes) -> "RadioProfile":
        return replace(self, **changes)


@dataclass(frozen=True)
class PacketOutcome:
    delivered: bool
    loss_reason: LossReason
    snr: float

    def __post_init__(self):
        if self.delivered != (self.loss_reason == LossReason.NONE):
            raise ValueError("delivered iff loss_reason is NONE")


@dataclass(frozen=True)
class BenchPoint:
    """One attenuation setting of the cabled calibration bench"""
    attenuation_db: float
    snr: float
    success_probability: float
    sent: int
    delivered: int
    weak: int
    overdrive: int

    @property
    def per(self) -> float:
        return 1.0 - self.delivered / self.sent if self.sent else 0.0


# Experimental SDR: -16 dBm drive into a 21 dB amplifier, no AGC, 5 MHz.
EXPERIMENTAL = RadioProfile(tx_power=-16.0, amp_gain=21.0, noise_figure=7.0, bandwidth=5e6,
                            snr_decode_min=8.0, snr_overdrive_start=38.0, edge_steepness=1.5, agc=False)

# Commercial 802.11p unit with AGC.
COTS = RadioProfile(tx_power=23.0, amp_gain=0.0, noise_figure=4.0, bandwidth=5e6,
                    snr_decode_min=5.0, snr_overdrive_start=math.inf, edge_steepness=1.0, agc=True)

# Bench SDR at its maximum output, amplifier switched in by the bench sweep.
LAB = replace(EXPERIMENTAL, tx_power=10.0, amp_gain=0.0)

PROFILE_PRESETS: Dict[str, RadioProfile] = {
    "experimental": EXPERIMENTAL,
    "cots": COTS,
    "lab": LAB,
}
