"""Action segmentation, 10-package averaging, augmentation, and splits.

A labeled sequence is cut into fixed-duration windows (1/2/3 s).  Within
each window, every run of 10 packets spaced floor(N/10) apart is averaged
into one 270-dim CsiSample; sliding the run start by 1 yields
N - 9*floor(N/10) samples per window.  Training sets are augmented with
centered moving averages of the sample stream (k = 3, 5, 7, 9).

The sample file format (magic WIVISMP1) is:
    8-byte magic, u32le sample count,
    then per sample: u8 label id + 270 float32le amplitudes.
A plain-text manifest (<file>.manifest.txt) names the label ids and
records the segmentation seconds.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ACTIVITIES, ActivityLabel, CsiSample, CsiSequence, FEATURE_LEN
from .errors import DataError, FormatError, TooShortError, VersionError

SMP_MAGIC = b"WIVISMP1"

SEGMENT_DURATIONS = (1, 2, 3)


@dataclass(frozen=True)
class Segment:
    """Half-open packet range of one fixed-duration action window."""

    start: int
    end: int
    duration_s: int
    label: ActivityLabel

    def __len__(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class AugmentConfig:
    """Moving-average window sizes used for training-set augmentation."""

    ks: tuple = (3, 5, 7, 9)

    def __post_init__(self):
        ks = tuple(sorted(int(k) for k in self.ks))
        if any(k < 3 or k % 2 == 0 for k in ks):
            raise DataError(f"augmentation windows must be odd and >= 3; got {ks}")
        object.__setattr__(self, "ks", ks)


@dataclass(frozen=True)
class Dataset:
    """Samples plus the parameters of their train/test split."""

    samples: tuple
    split_seed: int = 0
    train_fraction: float = 0.7

    def __post_init__(self):
        samples = tuple(self.samples)
        if not samples:
            raise DataError("dataset must contain at least one sample")
        if not 0 < self.train_fraction < 1:
            raise DataError("train_fraction must be in (0, 1)")
        object.__setattr__(self, "samples", samples)


def segment_by_time(seq: CsiSequence, duration_s: int) -> list:
    """Consecutive non-overlapping windows; a short trailing remainder is dropped."""
    if duration_s not in SEGMENT_DURATIONS:
        raise DataError(f"segmentation duration must be one of {SEGMENT_DURATIONS}")
    if seq.label is None:
        raise DataError("sequence has no activity label")
    length = round(duration_s * seq.fs_hz)
    n = len(seq)
    if n < length:
        raise TooShortError(
            f"sequence of {n} packets is shorter than one {duration_s}s segment ({length})"
        )
    return [
        Segment(start=k * length, end=(k + 1) * length, duration_s=duration_s, label=seq.label)
        for k in range(n // length)
    ]


def sample_starts(n_packets: int) -> tuple:
    """(interval, starts) of the 10-package averaging scheme for a segment."""
    if n_packets < 10:
        raise TooShortError(f"segment of {n_packets} packets is too short to average (need 10)")
    d = n_packets // 10
    return d, np.arange(n_packets - 9 * d)


def average_matrix(segment_data: np.ndarray) -> np.ndarray:
    """Average every stride-1 run of 10 equally spaced rows; (N, F) -> (M, F)."""
    x = np.asarray(segment_data, dtype=np.float64)
    if x.ndim != 2:
        raise DataError(f"segment data must be 2-D; got shape {x.shape}")
    d, starts = sample_starts(x.shape[0])
    idx = starts[:, None] + d * np.arange(10)[None, :]
    return x[idx].mean(axis=1)


def sample_centers(n_packets: int) -> np.ndarray:
    """Center packet offset (within the segment) of each averaged sample."""
    d, starts = sample_starts(n_packets)
    return np.rint(starts + 4.5 * d).astype(int)


def average_into_samples(segment_data: np.ndarray, label: ActivityLabel) -> list:
    """average_matrix wrapped into labeled CsiSamples."""
    return [CsiSample(values=row, label=label) for row in average_matrix(segment_data)]


def _label_runs(labels) -> list:
    """Half-open index ranges of contiguous identical labels."""
    runs = []
    start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[start]:
            runs.append((start, i))
            start = i
    return runs


def moving_average_runs(x: np.ndarray, labels, k: int) -> np.ndarray:
    """Centered moving average (window k, truncated edges) within label runs."""
    out = np.empty_like(x, dtype=np.float64)
    half = k // 2
    for start, end in _label_runs(labels):
        block = x[start:end]
        n = end - start
        csum = np.concatenate([[np.zeros(x.shape[1])], np.cumsum(block, axis=0)])
        idx = np.arange(n)
        lo = np.maximum(idx - half, 0)
        hi = np.minimum(idx + half, n - 1)
        out[start:end] = (csum[hi + 1] - csum[lo]) / (hi + 1 - lo)[:, None]
    return out


def augment(samples, cfg: AugmentConfig = AugmentConfig()) -> list:
    """Originals plus one moving-average copy of the stream per k, ascending."""
    samples = list(samples)
    if not samples:
        raise DataError("nothing to augment")
    labels = [s.label for s in samples]
    x = np.stack([s.values for s in samples])
    shortest = min(end - start for start, end in _label_runs(labels))
    if shortest < max(cfg.ks):
        raise TooShortError(
            f"label run of {shortest} samples is shorter than the largest window {max(cfg.ks)}"
        )
    out = list(samples)
    for k in cfg.ks:
        smoothed = moving_average_runs(x, labels, k)
        out.extend(CsiSample(values=row, label=lab) for row, lab in zip(smoothed, labels))
    return out


def split_indices(labels, split_seed: int, train_fraction: float = 0.7) -> tuple:
    """Stratified train/test index split, deterministic in split_seed.

    Per class: shuffle that class's indices, send the first
    ceil(train_fraction * n_c) to train.  Returned index arrays are
    sorted, so downstream order matches the original stream order.
    """
    labels = list(labels)
    rng = np.random.default_rng(split_seed)
    train, test = [], []
    by_class = {}
    for i, lab in enumerate(labels):
        by_class.setdefault(lab, []).append(i)
    for lab in sorted(by_class, key=lambda a: a.index):
        idx = np.array(by_class[lab])
        if len(idx) < 2:
            raise DataError(f"class {lab.value} has {len(idx)} samples; need at least 2 to split")
        order = rng.permutation(len(idx))
        n_train = int(np.ceil(train_fraction * len(idx)))
        train.extend(idx[order[:n_train]])
        test.extend(idx[order[n_train:]])
    return np.sort(np.array(train)), np.sort(np.array(test))


def split(ds: Dataset) -> tuple:
    """Stratified 70-30 split of a Dataset into (train, test) sample lists."""
    labels = [s.label for s in ds.samples]
    train_idx, test_idx = split_indices(labels, ds.split_seed, ds.train_fraction)
    return (
        [ds.samples[i] for i in train_idx],
        [ds.samples[i] for i in test_idx],
    )


# ---------------------------------------------------------------------------
# sample file I/O (WIVISMP1)
# ---------------------------------------------------------------------------


def write_samples(path, samples, segmentation_s: int | None = None):
    """Write samples as a WIVISMP1 file plus its manifest."""
    samples = list(samples)
    with open(path, "wb") as f:
        f.write(SMP_MAGIC)
        f.write(struct.pack("<I", len(samples)))
        for s in samples:
            f.write(struct.pack("<B", s.label.index))
            f.write(s.values.astype("<f4").tobytes())
    write_manifest(manifest_path_for(path), segmentation_s)


def manifest_path_for(path) -> Path:
    return Path(str(path) + ".manifest.txt")


def write_manifest(path, segmentation_s: int | None):
    lines = ["format=WIVISMP1"]
    if segmentation_s is not None:
        lines.append(f"segmentation_s={segmentation_s}")
    for a in ACTIVITIES:
        lines.append(f"label {a.index} {a.value}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path) -> dict:
    meta = {}
    for line in Path(path).read_text().splitlines():
        if line.startswith("label "):
            _, idx, name = line.split()
            if ACTIVITIES[int(idx)].value != name:
                raise FormatError(f"manifest label id {idx} maps to {name}, expected "
                                  f"{ACTIVITIES[int(idx)].value}")
        elif "=" in line:
            key, val = line.split("=", 1)
            meta[key] = val
    return meta


def read_samples(path) -> tuple:
    """Read a WIVISMP1 file; returns (samples, manifest dict)."""
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise FormatError(f"{path}: too short for a sample file")
    if data[:8] != SMP_MAGIC:
        raise VersionError(f"{path}: bad magic {data[:8]!r}, expected {SMP_MAGIC!r}")
    (count,) = struct.unpack_from("<I", data, 8)
    rec = 1 + 4 * FEATURE_LEN
    if len(data) != 12 + count * rec:
        raise FormatError(f"{path}: expected {12 + count * rec} bytes for {count} samples, "
                          f"found {len(data)}")
    samples = []
    pos = 12
    for _ in range(count):
        label_id = data[pos]
        if label_id >= len(ACTIVITIES):
            raise FormatError(f"{path}: label id {label_id} out of range")
        vals = np.frombuffer(data, dtype="<f4", count=FEATURE_LEN, offset=pos + 1)
        samples.append(CsiSample(values=vals.astype(np.float64), label=ACTIVITIES[label_id]))
        pos += rec
    manifest = manifest_path_for(path)
    meta = read_manifest(manifest) if manifest.exists() else {}
    return samples, meta
