"""One-way secure-direct-communication protocol state machine.

The sender one-time-pad encrypts with preshared key, splits the ciphertext
into frames carrying disclosed check bits, and transmits over the modeled
link. The receiver estimates the bit error rate from the check bits, aborts
the session above threshold, and otherwise distills fresh key that refills
the shared pool. Payload delivery on accepted frames is error-free: residual
errors after forward error correction are treated as zero.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import (
    ArgumentError,
    KeyExhaustionError,
    ProtocolStateError,
    ValidationError,
)
from .link import ChannelParams, binary_entropy, qber_model

# Error rate induced on the intercepted fraction by measure-and-resend.
INTERCEPT_RESEND_ERROR = 0.25

DEFAULT_QBER_THRESHOLD = 0.12
DEFAULT_FRAME_BITS = 65536

# Stream tags keeping the per-session random streams disjoint.
_STREAM_FRAME = 0
_STREAM_TRANSMIT = 1
_STREAM_DISTILL = 2
_STREAM_POOL = 3


def _rng(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, stream, index)))


class Phase(Enum):
    IDLE = "Idle"
    AUTHENTICATED = "Authenticated"
    TRANSMITTING = "Transmitting"
    ABORTED = "Aborted"
    COMPLETED = "Completed"


@dataclass(frozen=True)
class EveModel:
    """Intercept-resend attacker acting on a fraction of the wire bits."""

    intercept_fraction: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.intercept_fraction <= 1.0:
            raise ValidationError(
                f"intercept_fraction must be in [0, 1], got {self.intercept_fraction}"
            )


@dataclass(frozen=True)
class KeyPool:
    """Shared one-time-pad key material with a conservation ledger.

    The pool only grows (distillation appends) and the consumption cursor
    only advances, so consumed segments can never overlap.
    """

    key: np.ndarray
    initial_bits: int
    consumed_bits: int = 0
    distilled_bits: int = 0
    segments: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        key = np.asarray(self.key, dtype=np.uint8)
        key.setflags(write=False)
        object.__setattr__(self, "key", key)
        if self.initial_bits + self.distilled_bits != key.shape[0]:
            raise ValidationError("key length does not match initial + distilled bits")
        if not 0 <= self.consumed_bits <= key.shape[0]:
            raise ValidationError("consumed bits outside the pool")

    @property
    def available_bits(self) -> int:
        return self.initial_bits + self.distilled_bits - self.consumed_bits

    def credit(self, bits: int, fresh: np.ndarray) -> "KeyPool":
        """Append distilled key material."""
        if bits != fresh.shape[0]:
            raise ArgumentError(f"credit of {bits} bits given {fresh.shape[0]} key bits")
        return replace(
            self,
            key=np.concatenate([self.key, fresh.astype(np.uint8)]),
            distilled_bits=self.distilled_bits + bits,
        )


def new_key_pool(bits: int, seed: int) -> KeyPool:
    """Preshared pool of seeded random key bits."""
    if bits < 0:
        raise ArgumentError(f"pool size must be nonnegative, got {bits}")
    key = _rng(seed, _STREAM_POOL, 0).integers(0, 2, size=bits, dtype=np.uint8)
    return KeyPool(key=key, initial_bits=bits)


def otp_encrypt(payload: np.ndarray, pool: KeyPool) -> tuple[np.ndarray, KeyPool]:
    """XOR the payload with the next unused key segment.

    Consumes exactly len(payload) bits; raises KeyExhaustionError rather
    than ever reusing key material.
    """
    bits = np.asarray(payload, dtype=np.uint8)
    if bits.size > pool.available_bits:
        raise KeyExhaustionError(
            f"payload needs {bits.size} key bits, pool has {pool.available_bits}"
        )
    start = pool.consumed_bits
    end = start + bits.size
    cipher = bits ^ pool.key[start:end]
    segments = pool.segments + ((start, end),) if bits.size else pool.segments
    return cipher, replace(pool, consumed_bits=end, segments=segments)


def otp_decrypt(cipher: np.ndarray, pool: KeyPool) -> tuple[np.ndarray, KeyPool]:
    """Inverse of otp_encrypt on the receiver's mirror of the pool."""
    return otp_encrypt(cipher, pool)


@dataclass(frozen=True)
class Frame:
    """One transmission unit: payload plus disclosed check bits.

    check_positions locate the check bits within the wire-order bit stream;
    payload bits fill the remaining slots in order, so the two sets of
    positions are disjoint by construction.
    """

    sequence_no: int
    payload_bits: np.ndarray
    check_bits: np.ndarray
    check_positions: np.ndarray
    encrypted: bool

    def __post_init__(self) -> None:
        payload = np.asarray(self.payload_bits, dtype=np.uint8)
        check = np.asarray(self.check_bits, dtype=np.uint8)
        positions = np.asarray(self.check_positions, dtype=np.int64)
        total = payload.size + check.size
        if positions.shape != (check.size,):
            raise ValidationError("one check position required per check bit")
        if check.size and (positions[0] < 0 or positions[-1] >= total
                           or np.any(np.diff(positions) <= 0)):
            raise ValidationError("check positions must be strictly increasing within the frame")
        for name, arr in (("payload_bits", payload), ("check_bits", check),
                          ("check_positions", positions)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def total_bits(self) -> int:
        return int(self.payload_bits.size + self.check_bits.size)

    def wire_bits(self) -> np.ndarray:
        """Interleave payload and check bits into wire order."""
        wire = np.empty(self.total_bits, dtype=np.uint8)
        mask = np.zeros(self.total_bits, dtype=bool)
        mask[self.check_positions] = True
        wire[mask] = self.check_bits
        wire[~mask] = self.payload_bits
        return wire


def build_frame(sequence_no: int, payload_bits: np.ndarray, check_count: int,
                seed: int) -> Frame:
    """Assemble a frame with seeded check-bit values and positions."""
    if check_count < 1:
        raise ArgumentError(f"check_count must be positive, got {check_count}")
    rng = _rng(seed, _STREAM_FRAME, sequence_no)
    total = int(np.asarray(payload_bits).size) + check_count
    positions = np.sort(rng.choice(total, size=check_count, replace=False))
    check = rng.integers(0, 2, size=check_count, dtype=np.uint8)
    return Frame(sequence_no=sequence_no, payload_bits=payload_bits,
                 check_bits=check, check_positions=positions, encrypted=True)


@dataclass(frozen=True)
class SessionState:
    phase: Phase = Phase.IDLE
    qber_estimates: tuple[float, ...] = ()
    threshold: float = DEFAULT_QBER_THRESHOLD

    def __post_init__(self) -> None:
        if not 0.0 <= self.threshold <= 0.5:
            raise ValidationError(f"threshold must be in [0, 0.5], got {self.threshold}")


def authenticate(state: SessionState) -> SessionState:
    if state.phase is not Phase.IDLE:
        raise ProtocolStateError(f"cannot authenticate from {state.phase.value}")
    return replace(state, phase=Phase.AUTHENTICATED)


def begin_transmitting(state: SessionState) -> SessionState:
    if state.phase is not Phase.AUTHENTICATED:
        raise ProtocolStateError(f"cannot start transmitting from {state.phase.value}")
    return replace(state, phase=Phase.TRANSMITTING)


def complete(state: SessionState) -> SessionState:
    if state.phase is not Phase.TRANSMITTING:
        raise ProtocolStateError(f"cannot complete from {state.phase.value}")
    return replace(state, phase=Phase.COMPLETED)


def transmit_frame(state: SessionState, frame: Frame, link: ChannelParams,
                   eve: EveModel, seed: int) -> tuple[Frame, float]:
    """Send one frame through the noisy link under partial interception.

    Each wire bit flips with the link error rate, or, if intercepted, with
    the rate composed of link errors and the 25% measure-resend disturbance.
    The error estimate comes from the disclosed check bits only.
    """
    if state.phase is not Phase.TRANSMITTING:
        raise ProtocolStateError(f"cannot transmit in phase {state.phase.value}")
    q_link = qber_model(link)
    f = eve.intercept_fraction
    q_eve = (q_link * (1.0 - INTERCEPT_RESEND_ERROR)
             + (1.0 - q_link) * INTERCEPT_RESEND_ERROR)
    rng = _rng(seed, _STREAM_TRANSMIT, frame.sequence_no)
    wire = frame.wire_bits()
    intercepted = rng.random(wire.size) < f
    p_flip = np.where(intercepted, q_eve, q_link)
    flips = rng.random(wire.size) < p_flip
    wire_rx = wire ^ flips.astype(np.uint8)
    mask = np.zeros(wire.size, dtype=bool)
    mask[frame.check_positions] = True
    rx_check = wire_rx[mask]
    rx_payload = wire_rx[~mask]
    qber_hat = float(np.count_nonzero(rx_check != frame.check_bits) / frame.check_bits.size)
    received = Frame(sequence_no=frame.sequence_no, payload_bits=rx_payload,
                     check_bits=rx_check, check_positions=frame.check_positions,
                     encrypted=frame.encrypted)
    return received, qber_hat


def qber_gate(state: SessionState, qber_hat: float) -> SessionState:
    """Accept the frame at or below threshold; abort the session above it."""
    if state.phase is not Phase.TRANSMITTING:
        raise ProtocolStateError(f"cannot gate in phase {state.phase.value}")
    estimates = state.qber_estimates + (qber_hat,)
    phase = Phase.TRANSMITTING if qber_hat <= state.threshold else Phase.ABORTED
    return replace(state, phase=phase, qber_estimates=estimates)


def distill_key(state: SessionState, frame: Frame) -> int:
    """Fresh key bits distilled from an accepted frame.

    The one-way rate with symmetric bit and phase errors is
    1 - 2 h(q); the payload length times that rate, floored, is credited.
    """
    if state.phase is not Phase.TRANSMITTING or not state.qber_estimates:
        raise ProtocolStateError("distillation requires an accepted frame")
    q = state.qber_estimates[-1]
    rate = max(0.0, 1.0 - 2.0 * binary_entropy(q))
    return math.floor(frame.payload_bits.size * rate)


@dataclass(frozen=True)
class SessionConfig:
    channel: ChannelParams = field(default_factory=ChannelParams)
    eve: EveModel = field(default_factory=EveModel)
    threshold: float = DEFAULT_QBER_THRESHOLD
    frame_bits: int = DEFAULT_FRAME_BITS
    check_divisor: int = 16
    initial_key_bits: int = 1 << 16
    authenticated: bool = True

    def __post_init__(self) -> None:
        if self.check_divisor < 2:
            raise ValidationError(f"check_divisor must be >= 2, got {self.check_divisor}")
        if self.frame_bits < self.check_divisor:
            raise ValidationError(
                f"frame_bits must be >= check_divisor, got {self.frame_bits}"
            )
        if not 0.0 <= self.threshold <= 0.5:
            raise ValidationError(f"threshold must be in [0, 0.5], got {self.threshold}")
        if self.initial_key_bits < 0:
            raise ValidationError(
                f"initial_key_bits must be nonnegative, got {self.initial_key_bits}"
            )

    @property
    def check_count(self) -> int:
        return self.frame_bits // self.check_divisor

    @property
    def payload_capacity(self) -> int:
        return self.frame_bits - self.check_count


@dataclass(frozen=True)
class FrameReport:
    seq: int
    qber_hat: float
    accepted: bool
    distilled_bits: int


@dataclass(frozen=True)
class PoolLedger:
    initial: int
    consumed: int
    distilled: int
    available: int


@dataclass(frozen=True)
class SessionReport:
    """Outcome of one session.

    ``paused`` marks a session stopped by key exhaustion; it remains in the
    Transmitting phase and can resume at ``resume_offset_bits`` of the
    payload, unlike an abort, which is terminal.
    """

    phase: Phase
    frames: tuple[FrameReport, ...]
    pool: PoolLedger
    payload_sha256: str
    decrypted_payload: np.ndarray
    paused: bool = False
    resume_offset_bits: int = 0
    pool_segments: tuple[tuple[int, int], ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "phase": self.phase.value,
            "frames": [
                {"seq": f.seq, "qber_hat": f.qber_hat, "accepted": f.accepted,
                 "distilled_bits": f.distilled_bits}
                for f in self.frames
            ],
            "pool": {"initial": self.pool.initial, "consumed": self.pool.consumed,
                     "distilled": self.pool.distilled, "available": self.pool.available},
            "payload_sha256": self.payload_sha256,
            "paused": self.paused,
            "resume_offset_bits": self.resume_offset_bits,
        }


def _sha256_of_bits(bits: np.ndarray) -> str:
    return hashlib.sha256(np.packbits(bits, bitorder="little").tobytes()).hexdigest()


def _ledger(pool: KeyPool) -> PoolLedger:
    return PoolLedger(initial=pool.initial_bits, consumed=pool.consumed_bits,
                      distilled=pool.distilled_bits, available=pool.available_bits)


def run_session(payload: np.ndarray, config: SessionConfig, seed: int) -> SessionReport:
    """Authenticate, frame, encrypt, transmit, gate, and distill.

    Returns the per-frame error trace, final phase, pool ledger, and the
    payload recovered from accepted frames. Key exhaustion pauses the
    session (resumable); a failed error-rate gate aborts it.
    """
    if not config.authenticated:
        raise ProtocolStateError("session requires the pre-authentication gate")
    payload = np.asarray(payload, dtype=np.uint8)
    state = begin_transmitting(authenticate(SessionState(threshold=config.threshold)))
    pool = new_key_pool(config.initial_key_bits, seed)

    frames: list[FrameReport] = []
    recovered: list[np.ndarray] = []
    paused = False
    offset = 0
    seq = 0
    while offset < payload.size:
        chunk = payload[offset:offset + config.payload_capacity]
        if chunk.size > pool.available_bits:
            paused = True
            break
        cipher, pool = otp_encrypt(chunk, pool)
        frame = build_frame(seq, cipher, config.check_count, seed)
        _, qber_hat = transmit_frame(state, frame, config.channel, config.eve, seed)
        state = qber_gate(state, qber_hat)
        if state.phase is Phase.ABORTED:
            frames.append(FrameReport(seq=seq, qber_hat=qber_hat,
                                      accepted=False, distilled_bits=0))
            break
        delta = distill_key(state, frame)
        fresh = _rng(seed, _STREAM_DISTILL, seq).integers(0, 2, size=delta, dtype=np.uint8)
        pool = pool.credit(delta, fresh)
        start, end = pool.segments[-1]
        recovered.append(cipher ^ pool.key[start:end])
        frames.append(FrameReport(seq=seq, qber_hat=qber_hat,
                                  accepted=True, distilled_bits=delta))
        if pool.available_bits != pool.initial_bits + pool.distilled_bits - pool.consumed_bits:
            raise ProtocolStateError("key ledger conservation violated")
        offset += chunk.size
        seq += 1

    if state.phase is Phase.TRANSMITTING and not paused:
        state = complete(state)
    decrypted = np.concatenate(recovered) if recovered else np.zeros(0, dtype=np.uint8)
    return SessionReport(
        phase=state.phase,
        frames=tuple(frames),
        pool=_ledger(pool),
        payload_sha256=_sha256_of_bits(decrypted),
        decrypted_payload=decrypted,
        paused=paused,
        resume_offset_bits=offset,
        pool_segments=pool.segments,
    )
