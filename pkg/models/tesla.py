"""
TESLA Models
Key chains, authenticated broadcast messages and verification events.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

DIGEST_SIZE = 32
TAG_SIZE = 16


class TeslaError(ValueError):
    """Base error for broadcast authentication"""


class ChainExhaustedError(TeslaError):
    """Signing time lies beyond the last interval of the chain"""


class TooEarlyError(TeslaError):
    """Interval index below the disclosure delay; no key can be disclosed yet"""


class TeslaDecodeError(TeslaError):
    """Authenticated frame bytes are malformed"""


class VerifyStatus(str, Enum):
    ACCEPT = "ACCEPT"
    BUFFERED = "BUFFERED"
    REJECT = "REJECT"


@dataclass(frozen=True)
class ChainAnchor:
    """Public chain parameters a receiver is provisioned with"""
    anchor: bytes
    length: int
    interval_duration: float
    disclosure_delay: int
    start_time: float = 0.0

    def __post_init__(self):
        if len(self.anchor) != DIGEST_SIZE:
            raise ValueError(f"anchor must be {DIGEST_SIZE} bytes")
        if self.length < 1:
            raise ValueError("chain length must be >= 1")
        if not self.interval_duration > 0:
            raise ValueError("interval_duration must be > 0")
        if self.disclosure_delay < 1:
            raise ValueError("disclosure_delay must be >= 1")


@dataclass(frozen=True)
class KeyChain(ChainAnchor):
    """Sender-side chain; keys[i] is K_i, keys[0] the anchor"""
    keys: Tuple[bytes, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        super().__post_init__()
        if len(self.keys) != self.length + 1:
            raise ValueError("keys must hold K_0..K_N")
        if self.keys[0] != self.anchor:
            raise ValueError("keys[0] must equal the anchor")

    def key(self, index: int) -> bytes:
        return self.keys[index]

    def public(self) -> ChainAnchor:
        return ChainAnchor(self.anchor, self.length, self.interval_duration, self.disclosure_delay, self.start_time)


@dataclass(frozen=True)
class AuthenticatedMessage:
    payload: bytes
    interval_index: int
    mac_tag: bytes
    disclosed_key: bytes

    def __post_init__(self):
        if self.interval_index < 0:
            raise ValueError("interval_index must be >= 0")
        if len(self.mac_tag) != TAG_SIZE:
            raise ValueError(f"mac_tag must be {TAG_SIZE} bytes")
        if len(self.disclosed_key) != DIGEST_SIZE:
            raise ValueError(f"disclosed_key must be {DIGEST_SIZE} bytes")


@dataclass(frozen=True)
class VerificationEvent:
    """One row of the TESLA event log"""
    t: float
    receiver: int
    sender: int
    interval_index: Optional[int]
    status: VerifyStatus
    reason: str = ""

    def to_row(self) -> tuple:
        index = "" if self.interval_index is None else self.interval_index
        return (repr(float(self.t)), self.receiver, self.sender, index, self.status.value, self.reason)
