"""Core CSI domain types and elementary amplitude/phase math.

Everything here is immutable after construction and free of I/O; the
parser, DSP chain, simulator, and classifiers all build on these types.

A CSI measurement for one received packet is a 3x3x30 complex matrix:
3 transmit antennas x 3 receive antennas x 30 OFDM subcarriers.  The
classification feature vector flattens the amplitudes of that matrix in
tx-major order, giving 3*3*30 = 270 real values per packet.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DimensionError

NUM_SUBCARRIERS = 30
FEATURE_LEN = 270  # 3 * 3 * 30


class ActivityLabel(enum.Enum):
    """The nine recognized activity classes (canonical order)."""

    FALLING = "falling"
    THROWING = "throwing"
    PUSHING = "pushing"
    KICKING = "kicking"
    PUNCHING = "punching"
    JUMPING = "jumping"
    DRINKING = "drinking"
    PHONETALK = "phonetalk"
    SEATING = "seating"

    @property
    def index(self) -> int:
        return _ACTIVITY_INDEX[self]

    @classmethod
    def from_name(cls, name: str) -> "ActivityLabel":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise DataError(f"unknown activity label: {name!r}") from None


_ACTIVITY_INDEX = {a: i for i, a in enumerate(ActivityLabel)}

ACTIVITIES = tuple(ActivityLabel)
NUM_CLASSES = len(ACTIVITIES)


class SceneLabel(enum.Enum):
    """Visual occlusion condition of the recording scene."""

    NO_OCCLUSION = "no_occlusion"
    PARTIAL_OCCLUSION = "partial_occlusion"
    FULL_OCCLUSION = "full_occlusion"

    @classmethod
    def from_name(cls, name: str) -> "SceneLabel":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise DataError(f"unknown scene label: {name!r}") from None


SCENES = tuple(SceneLabel)


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CsiMatrix:
    """Complex channel gains indexed [tx][rx][subcarrier]."""

    gains: np.ndarray  # complex128, shape (ntx, nrx, 30)

    def __post_init__(self):
        g = np.asarray(self.gains, dtype=np.complex128)
        if g.ndim != 3 or g.shape[2] != NUM_SUBCARRIERS:
            raise DimensionError(f"CSI matrix must be (ntx, nrx, 30); got {g.shape}")
        if not (1 <= g.shape[0] <= 3 and 1 <= g.shape[1] <= 3):
            raise DimensionError(f"ntx/nrx must be in 1..3; got {g.shape[:2]}")
        if not np.all(np.isfinite(g)):
            raise DataError("CSI matrix contains non-finite gains")
        object.__setattr__(self, "gains", _as_readonly(g))

    @property
    def ntx(self) -> int:
        return self.gains.shape[0]

    @property
    def nrx(self) -> int:
        return self.gains.shape[1]


def _check_permutation(perm, nrx: int):
    if len(perm) != 3:
        raise DataError(f"permutation must have 3 entries; got {len(perm)}")
    head = tuple(perm[:nrx])
    if sorted(head) != list(range(nrx)):
        raise DataError(
            f"first {nrx} permutation entries must be a permutation of 0..{nrx - 1}; got {head}"
        )


@dataclass(frozen=True)
class CsiPacket:
    """One received CSI measurement plus its radio metadata."""

    timestamp_us: int          # unwrapped microseconds, monotone within a sequence
    rssi: tuple                # (a, b, c) in dB above the AGC floor
    noise_dbm: int             # reported noise, -127 is the "unset" sentinel
    agc: int                   # automatic gain control, dB
    permutation: tuple         # rx antenna order as received
    rate: int                  # opaque PHY rate code
    csi: CsiMatrix

    def __post_init__(self):
        if self.timestamp_us < 0:
            raise DataError("timestamp_us must be non-negative")
        if len(self.rssi) != 3:
            raise DataError("rssi must have exactly 3 entries")
        _check_permutation(self.permutation, self.csi.nrx)
        object.__setattr__(self, "rssi", tuple(int(v) for v in self.rssi))
        object.__setattr__(self, "permutation", tuple(int(v) for v in self.permutation))


@dataclass(frozen=True)
class CsiSequence:
    """Time-ordered CSI packets with recording metadata."""

    fs_hz: float
    packets: tuple
    label: ActivityLabel | None = None
    subject: str = ""
    scene: SceneLabel | None = None

    def __post_init__(self):
        if self.fs_hz <= 0:
            raise DataError("fs_hz must be positive")
        pkts = tuple(self.packets)
        if not pkts:
            raise DataError("sequence must contain at least one packet")
        ts = [p.timestamp_us for p in pkts]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise DataError("packet timestamps must be non-decreasing")
        object.__setattr__(self, "packets", pkts)

    def __len__(self) -> int:
        return len(self.packets)


@dataclass(frozen=True)
class CsiSample:
    """A 270-element amplitude feature vector: the unit of classification."""

    values: np.ndarray
    label: ActivityLabel

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (FEATURE_LEN,):
            raise DimensionError(f"sample must have {FEATURE_LEN} values; got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DataError("sample contains non-finite values")
        if np.any(v < 0):
            raise DataError("sample amplitudes must be non-negative")
        object.__setattr__(self, "values", _as_readonly(v))


def amplitude(h: complex) -> float:
    """|h| = sqrt(re^2 + im^2)."""
    return math.hypot(h.real, h.imag)


def phase(h: complex) -> float:
    """Phase of h in (-pi, pi].  Undefined (raises) at exactly zero."""
    if h.real == 0.0 and h.imag == 0.0:
        raise DataError("phase undefined for zero gain")
    return math.atan2(h.imag, h.real)


def to_feature_vector(p: CsiPacket) -> np.ndarray:
    """Flatten packet amplitudes to 270 values; index = tx*90 + rx*30 + sub."""
    m = p.csi
    if m.ntx != 3 or m.nrx != 3:
        raise DimensionError(f"feature vector needs a 3x3 matrix; got {m.ntx}x{m.nrx}")
    # C-order flatten of (3, 3, 30) is exactly the tx-major index layout
    return np.abs(m.gains).reshape(FEATURE_LEN)


def sequence_amplitudes(s: CsiSequence) -> np.ndarray:
    """All 270 amplitude streams of a 3x3 sequence as a (270, n) array."""
    for i, p in enumerate(s.packets):
        if p.csi.ntx != 3 or p.csi.nrx != 3:
            raise DimensionError(f"packet {i} is {p.csi.ntx}x{p.csi.nrx}, need 3x3")
    stacked = np.stack([np.abs(p.csi.gains) for p in s.packets])  # (n, 3, 3, 30)
    return stacked.reshape(len(s.packets), FEATURE_LEN).T


def amplitude_series(s: CsiSequence, tx: int, rx: int, sub: int) -> np.ndarray:
    """Amplitude over time of one (tx, rx, subcarrier) stream."""
    first = s.packets[0].csi
    if not (0 <= tx < first.ntx and 0 <= rx < first.nrx and 0 <= sub < NUM_SUBCARRIERS):
        raise IndexError(
            f"(tx={tx}, rx={rx}, sub={sub}) out of range for "
            f"{first.ntx}x{first.nrx}x{NUM_SUBCARRIERS}"
        )
    out = np.empty(len(s.packets))
    for i, p in enumerate(s.packets):
        m = p.csi
        if tx >= m.ntx or rx >= m.nrx:
            raise IndexError(f"packet {i} is {m.ntx}x{m.nrx}; (tx={tx}, rx={rx}) out of range")
        out[i] = abs(m.gains[tx, rx, sub])
    return out


def stream_index(tx: int, rx: int, sub: int) -> int:
    """Feature-vector index of stream (tx, rx, sub)."""
    return tx * 90 + rx * 30 + sub


def stream_coords(index: int) -> tuple:
    """Inverse of stream_index."""
    if not 0 <= index < FEATURE_LEN:
        raise IndexError(f"stream index {index} out of range")
    return index // 90, (index % 90) // 30, index % 30
