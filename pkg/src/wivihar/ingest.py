"""Reader and writer for the `.dat` CSI capture format.

Framing: each record is a 2-byte big-endian field length, a 1-byte code,
then (field_length - 1) payload bytes.  Code 0xBB marks a beamforming
(CSI) record; any other code is carried through opaquely and skipped by
the sequence loader.

A 0xBB payload starts with a 20-byte little-endian header:

    offset  field
    0..3    timestamp_low   u32, microseconds (wraps at 2^32)
    4..5    bfee_count      u16
    6..7    reserved        zero on write
    8       nrx             u8
    9       ntx             u8
    10..12  rssi_a, b, c    u8 each
    13      noise           i8, dBm (-127 = unset)
    14      agc             u8
    15      antenna_sel     u8, three 2-bit rx-permutation fields
    16..17  len             u16, CSI payload bytes (must match the formula)
    18..19  rate            u16

followed by `len` bytes of bit-packed CSI: for each of the 30
subcarriers, 3 bits are skipped, then for each rx chain (outer) and tx
antenna (inner) one signed 8-bit real and one signed 8-bit imaginary
component.  Bits within a byte are consumed least-significant-first, so
an 8-bit field may straddle a byte boundary.

The writer quantizes each complex component to the nearest integer,
silently clamped to [-127, 127]; packets whose components are already
integers in that range round-trip exactly.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    ActivityLabel,
    CsiMatrix,
    CsiPacket,
    CsiSequence,
    SceneLabel,
    _check_permutation,
)
from .errors import (
    DataError,
    DimensionError,
    FormatError,
    TruncatedRecordError,
)

BFEE_CODE = 0xBB
_HEADER_LEN = 20
_TS_WRAP = 1 << 32


@dataclass(frozen=True)
class RawRecord:
    """One framed record: a code byte and its opaque payload."""

    code: int
    payload: bytes


def expected_csi_len(ntx: int, nrx: int) -> int:
    """Byte length of the bit-packed CSI blob for given antenna counts."""
    return (30 * (nrx * ntx * 8 * 2 + 3) + 7) // 8


def read_records(stream):
    """Iterate RawRecords from a binary stream; stops cleanly at EOF.

    Raises TruncatedRecordError when the stream ends mid-record and
    FormatError for a zero field length.
    """
    offset = 0
    while True:
        head = stream.read(2)
        if len(head) == 0:
            return
        if len(head) < 2:
            raise TruncatedRecordError("EOF inside record length prefix", offset)
        field_len = int.from_bytes(head, "big")
        if field_len == 0:
            raise FormatError(f"record at byte offset {offset} has field length 0")
        body = stream.read(field_len)
        if len(body) < field_len:
            raise TruncatedRecordError("EOF inside record body", offset)
        yield RawRecord(code=body[0], payload=bytes(body[1:]))
        offset += 2 + field_len


def _bit_positions(ntx: int, nrx: int) -> np.ndarray:
    """Bit offsets of every 8-bit CSI component, in read order."""
    npairs = nrx * ntx
    block = 3 + 16 * npairs  # bits per subcarrier
    sub = np.arange(30)[:, None]
    within = 3 + 8 * np.arange(2 * npairs)[None, :]
    return (sub * block + within).reshape(-1)


_POS_CACHE = {}


def _positions(ntx: int, nrx: int) -> np.ndarray:
    key = (ntx, nrx)
    if key not in _POS_CACHE:
        _POS_CACHE[key] = _bit_positions(ntx, nrx)
    return _POS_CACHE[key]


def unpack_csi_payload(data: bytes, ntx: int, nrx: int) -> np.ndarray:
    """Decode the bit-packed CSI blob into a wire-order (ntx, nrx, 30) array.

    "Wire order" means the rx axis is still in RF-chain order; apply the
    antenna permutation afterwards to restore physical antenna order.
    """
    need = expected_csi_len(ntx, nrx)
    if len(data) < need:
        raise FormatError(f"CSI payload underflow: need {need} bytes, have {len(data)}")
    pos = _positions(ntx, nrx)
    buf = np.frombuffer(data, dtype=np.uint8, count=need)
    buf = np.concatenate([buf, np.zeros(1, dtype=np.uint8)])  # guard for straddling reads
    byte_idx = pos >> 3
    shift = pos & 7
    words = buf[byte_idx].astype(np.uint16) | (buf[byte_idx + 1].astype(np.uint16) << 8)
    vals = ((words >> shift) & 0xFF).astype(np.uint8).view(np.int8).astype(np.float64)
    re = vals[0::2]
    im = vals[1::2]
    # read order: subcarrier outer, then rx chain, then tx
    gains = (re + 1j * im).reshape(30, nrx, ntx)
    return gains.transpose(2, 1, 0).copy()


def decode_antenna_sel(antenna_sel: int) -> tuple:
    return (antenna_sel & 3, (antenna_sel >> 2) & 3, (antenna_sel >> 4) & 3)


def encode_antenna_sel(perm) -> int:
    return (perm[0] & 3) | ((perm[1] & 3) << 2) | ((perm[2] & 3) << 4)


def apply_antenna_permutation(gains: np.ndarray, antenna_sel: int) -> np.ndarray:
    """Reorder the rx axis from RF-chain order back to physical antennas.

    Chain j carries physical antenna perm[j], so physical[perm[j]] = wire[j].
    """
    nrx = gains.shape[1]
    perm = decode_antenna_sel(antenna_sel)
    _check_permutation(perm, nrx)
    out = np.empty_like(gains)
    for j in range(nrx):
        out[:, perm[j], :] = gains[:, j, :]
    return out


def parse_bfee(record: RawRecord) -> CsiPacket:
    """Decode a 0xBB record into a CsiPacket (timestamp still wrapped)."""
    if record.code != BFEE_CODE:
        raise FormatError(f"not a beamforming record (code 0x{record.code:02X})")
    p = record.payload
    if len(p) < _HEADER_LEN:
        raise FormatError(f"bfee payload too short: {len(p)} bytes")
    timestamp = int.from_bytes(p[0:4], "little")
    nrx = p[8]
    ntx = p[9]
    rssi = (p[10], p[11], p[12])
    noise = int.from_bytes(p[13:14], "little", signed=True)
    agc = p[14]
    antenna_sel = p[15]
    length = int.from_bytes(p[16:18], "little")
    rate = int.from_bytes(p[18:20], "little")
    if not (1 <= ntx <= 3 and 1 <= nrx <= 3):
        raise DimensionError(f"unsupported antenna counts ntx={ntx}, nrx={nrx}")
    expected = expected_csi_len(ntx, nrx)
    if length != expected:
        raise FormatError(
            f"CSI length field {length} does not match {expected} for {ntx}x{nrx}"
        )
    if len(p) < _HEADER_LEN + length:
        raise FormatError(
            f"bfee payload holds {len(p) - _HEADER_LEN} CSI bytes, header declares {length}"
        )
    wire = unpack_csi_payload(p[_HEADER_LEN : _HEADER_LEN + length], ntx, nrx)
    gains = apply_antenna_permutation(wire, antenna_sel)
    return CsiPacket(
        timestamp_us=timestamp,
        rssi=rssi,
        noise_dbm=noise,
        agc=agc,
        permutation=decode_antenna_sel(antenna_sel),
        rate=rate,
        csi=CsiMatrix(gains),
    )


def quantize_gains(gains: np.ndarray) -> np.ndarray:
    """The writer's quantization: round to nearest int, clamp to [-127, 127]."""
    q = np.round(gains.real).clip(-127, 127) + 1j * np.round(gains.imag).clip(-127, 127)
    return q


def pack_csi_payload(gains: np.ndarray) -> bytes:
    """Bit-pack a wire-order (ntx, nrx, 30) integer-valued matrix."""
    ntx, nrx, _ = gains.shape
    comps = gains.transpose(2, 1, 0)  # (30, nrx, ntx), matches read order
    vals = np.empty((30, nrx * ntx * 2), dtype=np.int64)
    vals[:, 0::2] = comps.real.reshape(30, -1)
    vals[:, 1::2] = comps.imag.reshape(30, -1)
    vals = vals.reshape(-1) & 0xFF
    pos = _positions(ntx, nrx)
    nbytes = expected_csi_len(ntx, nrx)
    acc = np.zeros(nbytes + 1, dtype=np.uint32)
    byte_idx = pos >> 3
    shift = (pos & 7).astype(np.uint32)
    lo = (vals << shift) & 0xFF
    hi = (vals >> (8 - shift)) & 0xFF
    np.add.at(acc, byte_idx, lo)
    np.add.at(acc, byte_idx + 1, hi)
    # the 3 skipped bits per subcarrier stay zero, so fields never collide
    return acc[:nbytes].astype(np.uint8).tobytes()


def write_bfee_record(p: CsiPacket, bfee_count: int = 0) -> bytes:
    """Serialize one packet as a framed 0xBB record."""
    m = p.csi
    q = quantize_gains(m.gains)
    perm = p.permutation
    # wire[:, j, :] must hold the gains of physical antenna perm[j]
    wire = np.empty_like(q)
    for j in range(m.nrx):
        wire[:, j, :] = q[:, perm[j], :]
    blob = pack_csi_payload(wire)
    header = bytearray(_HEADER_LEN)
    header[0:4] = (p.timestamp_us % _TS_WRAP).to_bytes(4, "little")
    header[4:6] = (bfee_count & 0xFFFF).to_bytes(2, "little")
    header[8] = m.nrx
    header[9] = m.ntx
    header[10], header[11], header[12] = p.rssi
    header[13:14] = int(p.noise_dbm).to_bytes(1, "little", signed=True)
    header[14] = p.agc
    header[15] = encode_antenna_sel(perm)
    header[16:18] = len(blob).to_bytes(2, "little")
    header[18:20] = (p.rate & 0xFFFF).to_bytes(2, "little")
    body = bytes([BFEE_CODE]) + bytes(header) + blob
    return len(body).to_bytes(2, "big") + body


def write_records(seq: CsiSequence) -> bytes:
    """Serialize a whole sequence; parse(write(x)) == quantize(x) per packet."""
    out = io.BytesIO()
    for i, pkt in enumerate(seq.packets):
        out.write(write_bfee_record(pkt, bfee_count=i & 0xFFFF))
    return out.getvalue()


def read_packets(stream) -> list:
    """All CSI packets from a capture stream, timestamps unwrapped.

    Non-0xBB records are skipped.  Timestamps gain 2^32 us whenever the
    raw counter decreases, so the result is monotone.
    """
    packets = []
    offset = 0
    last_raw = None
    for rec in read_records(stream):
        if rec.code != BFEE_CODE:
            continue
        pkt = parse_bfee(rec)
        raw = pkt.timestamp_us
        if last_raw is not None and raw < last_raw:
            offset += _TS_WRAP
        last_raw = raw
        if offset:
            pkt = CsiPacket(
                timestamp_us=raw + offset,
                rssi=pkt.rssi,
                noise_dbm=pkt.noise_dbm,
                agc=pkt.agc,
                permutation=pkt.permutation,
                rate=pkt.rate,
                csi=pkt.csi,
            )
        packets.append(pkt)
    return packets


def scale_csi(p: CsiPacket) -> np.ndarray:
    """Rescale raw CSI so total power matches the reported link SNR.

    Returns gains * sqrt(snr_linear * nrx*ntx*30 / sum|gain|^2), where the
    SNR combines the three per-antenna RSSI fields (each rssi - 44 - agc,
    summed in linear power) against the reported noise floor (-92 dBm when
    the noise field is the -127 sentinel).
    """
    g = p.csi.gains
    total_sq = float(np.sum(np.abs(g) ** 2))
    if total_sq == 0.0:
        raise DataError("cannot scale an all-zero CSI matrix")
    rssi_lin = sum(10.0 ** ((r - 44.0 - p.agc) / 10.0) for r in p.rssi)
    total_rssi_dbm = 10.0 * np.log10(rssi_lin)
    noise_floor = -92.0 if p.noise_dbm == -127 else float(p.noise_dbm)
    snr_lin = 10.0 ** ((total_rssi_dbm - noise_floor) / 10.0)
    ncells = p.csi.ntx * p.csi.nrx * 30
    return g * np.sqrt(snr_lin * ncells / total_sq)


# ---------------------------------------------------------------------------
# label sidecar (<capture>.labels.csv)
# ---------------------------------------------------------------------------

_LABEL_FIELDS = ["start_packet", "end_packet", "activity", "subject", "scene"]


@dataclass(frozen=True)
class LabelRow:
    start_packet: int
    end_packet: int  # exclusive
    activity: ActivityLabel
    subject: str
    scene: SceneLabel


def labels_path_for(dat_path) -> Path:
    return Path(str(dat_path) + ".labels.csv")


def write_labels_csv(path, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(_LABEL_FIELDS)
        for r in rows:
            w.writerow([r.start_packet, r.end_packet, r.activity.value, r.subject, r.scene.value])


def read_labels_csv(path) -> list:
    rows = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != _LABEL_FIELDS:
            raise FormatError(f"bad label sidecar header in {path}: {reader.fieldnames}")
        for line in reader:
            rows.append(
                LabelRow(
                    start_packet=int(line["start_packet"]),
                    end_packet=int(line["end_packet"]),
                    activity=ActivityLabel.from_name(line["activity"]),
                    subject=line["subject"],
                    scene=SceneLabel.from_name(line["scene"]),
                )
            )
    return rows


def load_sequences(dat_path, labels_path=None, fs_hz: float = 100.0) -> list:
    """Load a capture plus its label sidecar as labeled CsiSequences."""
    with open(dat_path, "rb") as f:
        packets = read_packets(f)
    if labels_path is None:
        labels_path = labels_path_for(dat_path)
    rows = read_labels_csv(labels_path)
    sequences = []
    for r in rows:
        if not (0 <= r.start_packet < r.end_packet <= len(packets)):
            raise DataError(
                f"label range [{r.start_packet}, {r.end_packet}) outside capture "
                f"of {len(packets)} packets"
            )
        sequences.append(
            CsiSequence(
                fs_hz=fs_hz,
                packets=packets[r.start_packet : r.end_packet],
                label=r.activity,
                subject=r.subject,
                scene=r.scene,
            )
        )
    return sequences
