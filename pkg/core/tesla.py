"""
TESLA broadcast authentication with delayed key disclosure.

Wire format (little-endian): u16 payload_len | payload | u32 i | 16 B tag | 32 B key.
"""
import hashlib
import hmac
import math
import struct
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

from config import TeslaConfig, config
from models.tesla import (DIGEST_SIZE, TAG_SIZE, AuthenticatedMessage, ChainAnchor, ChainExhaustedError, KeyChain,
                          TeslaDecodeError, TooEarlyError, VerifyStatus)
from utils.rng import derive_key

MAC_KEY_LABEL = b"tesla-mac-key"
_LEN = struct.Struct("<H")
_INDEX = struct.Struct("<I")


def _hash(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def hash_iterate(key: bytes, count: int) -> bytes:
    for _ in range(count):
        key = _hash(key)
    return key


def mac_key(chain_key: bytes) -> bytes:
    """Domain-separated MAC key derived from a chain key"""
    return _hash(MAC_KEY_LABEL + chain_key)


def compute_tag(chain_key: bytes, payload: bytes, index: int) -> bytes:
    digest = hmac.new(mac_key(chain_key), payload + _INDEX.pack(index), hashlib.sha256).digest()
    return digest[:TAG_SIZE]


def interval_index(t: float, start_time: float, interval_duration: float) -> int:
    return math.floor((t - start_time) / interval_duration)


def keychain_generate(seed: Union[bytes, int], length: int, interval_duration: float = 1.0,
                      disclosure_delay: int = 2, start_time: float = 0.0) -> KeyChain:
    """K_N = H(seed), K_i = H(K_{i+1}); the anchor K_0 is public"""
    if length < 1:
        raise ValueError("chain length must be >= 1")
    if isinstance(seed, int):
        seed = seed.to_bytes(32, "little", signed=False)
    keys = [b""] * (length + 1)
    keys[length] = _hash(seed)
    for i in range(length - 1, -1, -1):
        keys[i] = _hash(keys[i + 1])
    return KeyChain(keys[0], length, interval_duration, disclosure_delay, start_time, tuple(keys))


def sign_message(payload: bytes, t: float, chain: KeyChain) -> AuthenticatedMessage:
    """MAC with the key of the current interval, disclosing the key of interval i - d"""
    i = interval_index(t, chain.start_time, chain.interval_duration)
    if i < chain.disclosure_delay:
        raise TooEarlyError(f"interval {i} < disclosure delay {chain.disclosure_delay}")
    if i > chain.length:
        raise ChainExhaustedError(f"interval {i} beyond chain length {chain.length}")
    return AuthenticatedMessage(bytes(payload), i, compute_tag(chain.key(i), payload, i),
                                chain.key(i - chain.disclosure_delay))


def encode_authenticated(msg: AuthenticatedMessage) -> bytes:
    return _LEN.pack(len(msg.payload)) + msg.payload + _INDEX.pack(msg.interval_index) + msg.mac_tag + msg.disclosed_key


def decode_authenticated(data: bytes) -> AuthenticatedMessage:
    if len(data) < _LEN.size:
        raise TeslaDecodeError("frame too short")
    (n,) = _LEN.unpack_from(data, 0)
    expected = _LEN.size + n + _INDEX.size + TAG_SIZE + DIGEST_SIZE
    if len(data) != expected:
        raise TeslaDecodeError(f"frame is {len(data)} bytes, expected {expected}")
    payload = data[2:2 + n]
    (i,) = _INDEX.unpack_from(data, 2 + n)
    tag_at = 2 + n + _INDEX.size
    return AuthenticatedMessage(payload, i, data[tag_at:tag_at + TAG_SIZE], data[tag_at + TAG_SIZE:])


@dataclass
class TeslaVerifier:
    """
    Receiver state for one sender chain. The newest authenticated chain key only
    moves forward; buffered messages are released once their interval key is known.
    """
    anchor: ChainAnchor
    max_clock_skew: float = field(default_factory=lambda: config.tesla.max_clock_skew_s)
    latest_index: int = 0
    latest_key: bytes = b""
    buffer: List[AuthenticatedMessage] = field(default_factory=list)
    hashes: int = 0

    def __post_init__(self):
        if not self.latest_key:
            self.latest_key = self.anchor.anchor

    def _chain_key(self, index: int) -> bytes:
        """Key of an already-authenticated interval index <= latest_index"""
        self.hashes += self.latest_index - index
        return hash_iterate(self.latest_key, self.latest_index - index)

    def _accept_key(self, index: int, key: bytes) -> bool:
        if index <= self.latest_index:
            return hmac.compare_digest(self._chain_key(index), key)
        self.hashes += index - self.latest_index
        if not hmac.compare_digest(hash_iterate(key, index - self.latest_index), self.latest_key):
            return False
        self.latest_index, self.latest_key = index, key
        return True

    def is_safe(self, msg: AuthenticatedMessage, t_rx: float) -> bool:
        """The key of msg's interval cannot have been disclosed at the sender yet"""
        a = self.anchor
        latest_sender_interval = interval_index(t_rx + self.max_clock_skew, a.start_time, a.interval_duration)
        return latest_sender_interval < msg.interval_index + a.disclosure_delay

    def verify_message(self, msg: AuthenticatedMessage,
                       t_rx: float) -> Tuple[VerifyStatus, List[Tuple[AuthenticatedMessage, VerifyStatus]]]:
        """
        Status of msg (BUFFERED or REJECT) plus the earlier messages its key
        disclosure released, each ACCEPT or REJECT.
        """
        a = self.anchor
        disclosed_index = msg.interval_index - a.disclosure_delay
        if disclosed_index < 0 or msg.interval_index > a.length:
            return VerifyStatus.REJECT, []
        if not self.is_safe(msg, t_rx):
            return VerifyStatus.REJECT, []
        if not self._accept_key(disclosed_index, msg.disclosed_key):
            return VerifyStatus.REJECT, []
        self.buffer.append(msg)
        return VerifyStatus.BUFFERED, self._release()

    def _release(self) -> List[Tuple[AuthenticatedMessage, VerifyStatus]]:
        released, pending = [], []
        for held in self.buffer:
            if held.interval_index > self.latest_index:
                pending.append(held)
                continue
            tag = compute_tag(self._chain_key(held.interval_index), held.payload, held.interval_index)
            ok = hmac.compare_digest(tag, held.mac_tag)
            released.append((held, VerifyStatus.ACCEPT if ok else VerifyStatus.REJECT))
        self.buffer = pending
        return released


def verify_message(msg: Optional[AuthenticatedMessage], t_rx: float,
                   verifier: TeslaVerifier) -> Tuple[VerifyStatus, List[Tuple[AuthenticatedMessage, VerifyStatus]]]:
    """Functional entry point; an undecodable frame (None) is rejected"""
    if msg is None:
        return VerifyStatus.REJECT, []
    return verifier.verify_message(msg, t_rx)


def broadcaster_chain(seed: int, station_id: int, cfg: Optional[TeslaConfig] = None) -> KeyChain:
    """Per-station chain whose seed derives from the scenario seed"""
    cfg = cfg or config.tesla
    return keychain_generate(derive_key(seed, "tesla", station_id).to_bytes(16, "little"), cfg.chain_length,
                             cfg.interval_s, cfg.disclosure_delay, 0.0)
