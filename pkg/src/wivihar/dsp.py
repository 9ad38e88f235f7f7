"""Three-stage denoising for CSI amplitude streams.

Per stream: median filter (outlier removal), mean filter (smoothing),
then a zero-phase Butterworth low-pass.  Median/mean use centered
windows truncated at the edges; even window sizes are left-biased, i.e.
a window of w covers indices [i - ceil(w/2) + 1, i + floor(w/2)].

All operations act on the last axis, so a (270, n) stream matrix is
processed in one call per stage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import butter, lfilter, lfilter_zi

from .core import CsiSequence, sequence_amplitudes, stream_coords
from .errors import DataError, TooShortError, WiviError


@dataclass(frozen=True)
class FilterSpec:
    """Parameters of the denoising chain."""

    median_window: int = 40
    mean_window: int = 40
    butter_order: int = 5
    butter_cutoff_hz: float = 10.0
    fs_hz: float = 100.0

    def __post_init__(self):
        if self.median_window < 1 or self.mean_window < 1:
            raise DataError("filter windows must be >= 1")
        if self.butter_order < 1:
            raise DataError("butterworth order must be >= 1")
        if not 0 < self.butter_cutoff_hz < self.fs_hz / 2:
            raise DataError(
                f"cutoff must be in (0, fs/2); got {self.butter_cutoff_hz} at fs={self.fs_hz}"
            )


@dataclass(frozen=True)
class IirCoefficients:
    """Normalized IIR transfer function: b (feedforward), a (feedback)."""

    b: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b, dtype=np.float64)
        a = np.asarray(self.a, dtype=np.float64)
        if a.ndim != 1 or b.ndim != 1 or len(a) != len(b):
            raise DataError("b and a must be 1-D and of equal length")
        if a[0] == 0:
            raise DataError("a[0] must be nonzero")
        if a[0] != 1.0:
            b = b / a[0]
            a = a / a[0]
        poles = np.roots(a)
        if len(poles) and np.max(np.abs(poles)) >= 1.0 - 1e-9:
            raise DataError("unstable filter: pole modulus >= 1 - 1e-9")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "a", a)

    @property
    def order(self) -> int:
        return len(self.a) - 1


def _window_offsets(window: int) -> tuple:
    """(left, right) inclusive reach of a centered, left-biased window."""
    left = (window + 1) // 2 - 1  # ceil(w/2) - 1
    right = window // 2
    return left, right


def _windowed(x: np.ndarray, window: int, reducer) -> np.ndarray:
    """Apply reducer over centered truncated windows along the last axis."""
    n = x.shape[-1]
    if n == 0:
        raise DataError("empty input series")
    if window == 1:
        return x.copy()
    left, right = _window_offsets(window)
    out = np.empty_like(x, dtype=np.float64)
    lo = left                 # first index with a full window
    hi = n - 1 - right        # last index with a full window
    if lo <= hi:
        full = sliding_window_view(x, window, axis=-1)
        out[..., lo : hi + 1] = reducer(full, axis=-1)
    for i in range(min(lo, n)):
        out[..., i] = reducer(x[..., max(0, i - left) : min(n, i + right + 1)], axis=-1)
    for i in range(max(hi + 1, min(lo, n)), n):
        out[..., i] = reducer(x[..., max(0, i - left) : min(n, i + right + 1)], axis=-1)
    return out


def median_filter(series, window: int) -> np.ndarray:
    """Centered median over `window` samples, truncated at the edges."""
    x = np.asarray(series, dtype=np.float64)
    if window < 1:
        raise DataError("window must be >= 1")
    return _windowed(x, window, np.median)


def mean_filter(series, window: int) -> np.ndarray:
    """Centered arithmetic mean over `window` samples, truncated at the edges."""
    x = np.asarray(series, dtype=np.float64)
    if window < 1:
        raise DataError("window must be >= 1")
    return _windowed(x, window, np.mean)


def butterworth_lowpass(spec: FilterSpec) -> IirCoefficients:
    """Digital Butterworth low-pass (bilinear transform, prewarped cutoff)."""
    b, a = butter(spec.butter_order, spec.butter_cutoff_hz, btype="low", fs=spec.fs_hz)
    # pin DC gain to exactly 1 after normalization
    b = b * (np.sum(a) / np.sum(b))
    return IirCoefficients(b=b, a=a)


def freq_response(coeffs: IirCoefficients, f_hz, fs_hz: float) -> np.ndarray:
    """|H| of the filter at the given frequencies."""
    u = np.exp(-2j * np.pi * np.asarray(f_hz, dtype=np.float64) / fs_hz)
    num = np.polyval(coeffs.b[::-1], u)
    den = np.polyval(coeffs.a[::-1], u)
    return np.abs(num / den)


def filter_zero_phase(coeffs: IirCoefficients, series) -> np.ndarray:
    """Forward-backward IIR filtering (zero phase), length preserving.

    Edges are padded with an odd reflection of length 3*(order+1) before
    the forward pass, so the input must be longer than that.
    """
    x = np.asarray(series, dtype=np.float64)
    b, a = coeffs.b, coeffs.a
    padlen = 3 * (coeffs.order + 1)
    n = x.shape[-1]
    if n <= padlen:
        raise TooShortError(f"need more than {padlen} samples for zero-phase filtering; got {n}")
    left = 2 * x[..., :1] - x[..., padlen:0:-1]
    right = 2 * x[..., -1:] - x[..., -2 : -padlen - 2 : -1]
    ext = np.concatenate([left, x, right], axis=-1)
    zi = lfilter_zi(b, a)
    zi_shape = x.shape[:-1] + (len(zi),)
    y, _ = lfilter(b, a, ext, axis=-1, zi=np.broadcast_to(zi, zi_shape) * ext[..., :1])
    y = y[..., ::-1]
    y, _ = lfilter(b, a, y, axis=-1, zi=np.broadcast_to(zi, zi_shape) * y[..., :1])
    y = y[..., ::-1]
    return np.ascontiguousarray(y[..., padlen:-padlen])


_CHUNK_ROWS = 32  # bounds sliding-window scratch memory in preprocess


def preprocess(seq: CsiSequence, spec: FilterSpec | None = None) -> np.ndarray:
    """Clean all 270 amplitude streams of a sequence; returns (270, n).

    Stage order per stream: median filter, mean filter, zero-phase
    Butterworth low-pass.
    """
    if spec is None:
        spec = FilterSpec(fs_hz=seq.fs_hz)
    streams = sequence_amplitudes(seq)
    n = streams.shape[1]
    if n <= 3 * (spec.butter_order + 1):
        raise TooShortError(
            f"sequence of {n} packets is too short for order-{spec.butter_order} zero-phase filtering"
        )
    coeffs = butterworth_lowpass(spec)
    out = np.empty_like(streams)
    for start in range(0, streams.shape[0], _CHUNK_ROWS):
        block = streams[start : start + _CHUNK_ROWS]
        try:
            block = median_filter(block, spec.median_window)
            block = mean_filter(block, spec.mean_window)
            block = filter_zero_phase(coeffs, block)
        except WiviError as e:
            raise type(e)(f"streams {start}..{start + len(block) - 1}: {e}") from e
        out[start : start + _CHUNK_ROWS] = block
    return out


def stream_names() -> list:
    """CSV column names in stream-index order."""
    return [f"tx{t}_rx{r}_sc{s}" for t, r, s in map(stream_coords, range(270))]


def write_streams_csv(path, streams: np.ndarray):
    """Export cleaned streams as CSV: one column per stream, one row per packet."""
    if streams.ndim != 2 or streams.shape[0] != 270:
        raise DataError(f"expected a (270, n) stream matrix; got {streams.shape}")
    np.savetxt(
        path,
        streams.T,
        fmt="%.10g",
        delimiter=",",
        header=",".join(stream_names()),
        comments="",
    )
