"""WAV decoding, channel handling, duration trimming and dataset manifests.

Only RIFF/WAVE containers with 16-bit PCM or 32-bit float payloads and one
or two channels are admitted.  Clips keep their native sample rate; nothing
here resamples.
"""

import csv
import io
import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DecodeError, ManifestError, UnsupportedFormat


class ClassLabel(Enum):
    """Speech source classes: one human class, three synthesis engines."""

    HUMAN = "Human"
    NATURAL_READER = "NaturalReader"
    SPIK_AI = "SpikAI"
    REPLICA = "Replica"

    @property
    def is_human(self):
        return self is ClassLabel.HUMAN

    def binary(self):
        """Project onto the two-class task: Human vs Synthetic."""
        return "Human" if self.is_human else "Synthetic"


LABELS_BY_NAME = {label.value: label for label in ClassLabel}
BINARY_CLASSES = ("Human", "Synthetic")
VALID_SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class AudioClip:
    """Immutable decoded audio: samples in [-1, 1] plus the sample rate.

    samples is (n,) for mono or (n, 2) for stereo awaiting downmix.
    """

    samples: np.ndarray
    sample_rate: int
    source_id: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.size == 0:
            raise DecodeError("clip has no samples")
        if samples.ndim == 2 and samples.shape[1] == 1:
            samples = samples[:, 0]
        if samples.ndim not in (1, 2):
            raise UnsupportedFormat("samples must be 1-D or (n, channels)")
        if self.sample_rate <= 0:
            raise DecodeError("sample rate must be positive")
        if np.abs(samples).max() > 1.0 + 1e-12:
            raise DecodeError("amplitudes exceed [-1, 1]")
        samples = samples.copy()
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    @property
    def channels(self):
        return 1 if self.samples.ndim == 1 else self.samples.shape[1]

    @property
    def duration_s(self):
        return self.samples.shape[0] / self.sample_rate


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: ClassLabel
    split_hint: str | None = None


# ---------------------------------------------------------------------------
# WAV container
# ---------------------------------------------------------------------------

_FMT_PCM = 1
_FMT_FLOAT = 3


def decode_wav(data, source_id="<bytes>"):
    """Decode RIFF/WAVE bytes into an AudioClip.

    Accepts 16-bit PCM and 32-bit IEEE float, 1 or 2 channels.  PCM samples
    are scaled by 1/32768; float samples are clipped into [-1, 1].  Stereo
    is retained as an (n, 2) array for `to_mono`.
    """
    if len(data) < 12 or data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise DecodeError("not a RIFF/WAVE container")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise DecodeError("fmt chunk truncated")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            if len(body) < chunk_size:
                raise DecodeError("data chunk truncated")
            payload = body
        pos += 8 + chunk_size + (chunk_size & 1)  # chunks are word-aligned

    if fmt is None:
        raise DecodeError("missing fmt chunk")
    if payload is None:
        raise DecodeError("missing data chunk")
    if len(payload) == 0:
        raise DecodeError("empty data chunk")

    audio_format, channels, sample_rate, _, block_align, bits = fmt
    if channels not in (1, 2):
        raise UnsupportedFormat(f"{channels} channels (only mono/stereo)")
    if audio_format == _FMT_PCM and bits == 16:
        dtype, scale = np.dtype("<i2"), 1.0 / 32768.0
    elif audio_format == _FMT_FLOAT and bits == 32:
        dtype, scale = np.dtype("<f4"), 1.0
    else:
        raise UnsupportedFormat(
            f"format tag {audio_format} at {bits} bits (PCM16 or float32 only)"
        )
    if block_align != channels * dtype.itemsize:
        raise DecodeError("block alignment inconsistent with format")
    if len(payload) % block_align:
        raise DecodeError("data chunk is not a whole number of frames")

    raw = np.frombuffer(payload, dtype=dtype).astype(np.float64) * scale
    if audio_format == _FMT_FLOAT:
        raw = np.clip(raw, -1.0, 1.0)
    if channels == 2:
        raw = raw.reshape(-1, 2)
    return AudioClip(raw, sample_rate, source_id)


def read_wav(path):
    with open(path, "rb") as fh:
        return decode_wav(fh.read(), source_id=str(path))


def encode_wav(clip, fmt="pcm16"):
    """Serialize a clip back to WAV bytes (used by the fixture generator)."""
    channels = clip.channels
    interleaved = np.asarray(clip.samples).reshape(-1)  # row-major interleave
    if fmt == "pcm16":
        audio_format, bits = _FMT_PCM, 16
        ints = np.clip(np.rint(interleaved * 32768.0), -32768, 32767)
        payload = ints.astype("<i2").tobytes()
    elif fmt == "float32":
        audio_format, bits = _FMT_FLOAT, 32
        payload = interleaved.astype("<f4").tobytes()
    else:
        raise UnsupportedFormat(f"unknown encode format {fmt!r}")
    block_align = channels * bits // 8
    byte_rate = clip.sample_rate * block_align
    buf = io.BytesIO()
    buf.write(b"RIFF")
    buf.write(struct.pack("<I", 36 + len(payload)))
    buf.write(b"WAVE")
    buf.write(b"fmt ")
    buf.write(
        struct.pack(
            "<IHHIIHH", 16, audio_format, channels, clip.sample_rate,
            byte_rate, block_align, bits,
        )
    )
    buf.write(b"data")
    buf.write(struct.pack("<I", len(payload)))
    buf.write(payload)
    return buf.getvalue()


def write_wav(path, clip, fmt="pcm16"):
    with open(path, "wb") as fh:
        fh.write(encode_wav(clip, fmt=fmt))


# ---------------------------------------------------------------------------
# Channel layout and duration policy
# ---------------------------------------------------------------------------


def to_mono(clip):
    """Downmix stereo to mono by per-sample channel mean; mono passes through."""
    if clip.channels == 1:
        return clip
    if clip.channels != 2:
        raise UnsupportedFormat(f"{clip.channels} channels (only mono/stereo)")
    mixed = clip.samples.mean(axis=1)
    return AudioClip(mixed, clip.sample_rate, clip.source_id)


def trim_segments(clip, min_s=4.0, max_s=5.0):
    """Cut a mono clip into consecutive slots of max_s seconds.

    A trailing remainder of at least min_s is kept as a shorter final
    segment; anything shorter is discarded.  A clip below min_s yields no
    segments at all.
    """
    if min_s > max_s:
        raise ValueError("min_s must not exceed max_s")
    if clip.channels != 1:
        raise UnsupportedFormat("trim_segments requires a mono clip")
    n = clip.samples.shape[0]
    seg_len = int(round(max_s * clip.sample_rate))
    min_len = int(round(min_s * clip.sample_rate))
    segments = []
    start = 0
    while n - start >= seg_len:
        piece = clip.samples[start : start + seg_len]
        segments.append(
            AudioClip(piece, clip.sample_rate, f"{clip.source_id}#{len(segments)}")
        )
        start += seg_len
    if n - start >= min_len:
        piece = clip.samples[start:]
        segments.append(
            AudioClip(piece, clip.sample_rate, f"{clip.source_id}#{len(segments)}")
        )
    return segments


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------


def read_manifest(path):
    """Parse a `path,label[,split]` CSV manifest, preserving record order.

    Lines starting with `#` and blank lines are skipped.  Unknown labels or
    split hints raise ManifestError with the physical line number.
    """
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = next(csv.reader([line]))
            fields = [f.strip() for f in fields]
            if len(fields) not in (2, 3):
                raise ManifestError(line_no, f"expected 2 or 3 fields, got {len(fields)}")
            file_path, label_name = fields[0], fields[1]
            if label_name not in LABELS_BY_NAME:
                raise ManifestError(line_no, f"unknown label {label_name!r}")
            split = None
            if len(fields) == 3 and fields[2]:
                if fields[2] not in VALID_SPLITS:
                    raise ManifestError(line_no, f"unknown split {fields[2]!r}")
                split = fields[2]
            entries.append(ManifestEntry(file_path, LABELS_BY_NAME[label_name], split))
    return entries
