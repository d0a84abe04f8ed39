"""Audio and annotation loading, sample normalization, buffer segmentation."""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

logger = logging.getLogger(__name__)

# Below this rate the 2-24 kHz analysis band no longer fits under Nyquist.
MIN_RECOMMENDED_RATE_HZ = 48_000.0


class AudioFormatError(ValueError):
    """Raised for unreadable, unsupported, or empty audio files."""


@dataclass(frozen=True)
class AudioClip:
    """Normalized mono samples with their rate and absolute time origin.

    Samples are dimensionless, scaled to [-1, 1] on load; origin_time is
    seconds since the start of the parent stream.
    """

    samples: np.ndarray
    sample_rate: float
    origin_time: float = 0.0

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("audio samples must be finite")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def times(self) -> np.ndarray:
        """Absolute time of every sample, in seconds."""
        return self.origin_time + np.arange(len(self.samples)) / self.sample_rate

    def slice_seconds(self, t_start: float, t_end: float) -> "AudioClip":
        """Sub-clip covering [t_start, t_end] in absolute time, clamped to bounds."""
        i0 = max(0, int(round((t_start - self.origin_time) * self.sample_rate)))
        i1 = min(len(self.samples), int(round((t_end - self.origin_time) * self.sample_rate)) + 1)
        if i0 >= i1:
            raise ValueError(f"window [{t_start}, {t_end}] outside clip")
        return AudioClip(
            self.samples[i0:i1],
            self.sample_rate,
            self.origin_time + i0 / self.sample_rate,
        )


@dataclass(frozen=True)
class TimeBuffer:
    """One fixed-length analysis window cut from a longer clip."""

    clip: AudioClip
    index: int
    duration: float

    @property
    def t_start(self) -> float:
        return self.clip.origin_time


@dataclass(frozen=True)
class Annotation:
    """Ground-truth transient times sharing one label and source.

    ``click_times`` is strictly increasing; a single-event annotation is
    a one-element tuple.
    """

    click_times: tuple
    label: str
    source_id: str | None = None

    def __post_init__(self):
        t = self.click_times
        if any(t[i] >= t[i + 1] for i in range(len(t) - 1)):
            raise ValueError("click_times must be strictly increasing")


def load_audio(path, channel: int = 0) -> AudioClip:
    """Load a RIFF/WAVE file as a normalized mono clip.

    Accepts 16/24-bit integer and 32-bit float PCM. Integer samples are
    scaled by 1 / 2**(bits-1); multi-channel input is reduced to
    ``channel``.
    """
    path = Path(path)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # scipy chirps about non-data chunks
            rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise AudioFormatError(f"cannot read {path}: {exc}") from exc

    if data.size == 0:
        raise AudioFormatError(f"{path}: empty audio stream")
    if data.ndim == 2:
        if not 0 <= channel < data.shape[1]:
            raise AudioFormatError(
                f"{path}: channel {channel} out of range ({data.shape[1]} channels)"
            )
        data = data[:, channel]

    if data.dtype == np.float32 or data.dtype == np.float64:
        samples = data.astype(np.float64)
    elif data.dtype == np.int16 or data.dtype == np.int32:
        # scipy left-justifies 24-bit PCM into int32, so full-width
        # scaling is correct for 16-, 24- and 32-bit integer data alike.
        samples = data.astype(np.float64) / float(2 ** (8 * data.dtype.itemsize - 1))
    elif data.dtype == np.uint8:
        raise AudioFormatError(f"{path}: 8-bit PCM is not supported (16/24-bit int or 32-bit float)")
    else:
        raise AudioFormatError(f"{path}: unsupported sample encoding {data.dtype}")

    if float(rate) < MIN_RECOMMENDED_RATE_HZ:
        logger.warning(
            "%s: sample rate %d Hz < 48 kHz; the 2-24 kHz band needs Nyquist >= 24 kHz",
            path,
            rate,
        )
    return AudioClip(np.clip(samples, -1.0, 1.0), float(rate), 0.0)


def segment_buffers(clip: AudioClip, buffer_len: float, hop: float | None = None) -> list[TimeBuffer]:
    """Cut ``clip`` into analysis buffers of ``buffer_len`` seconds.

    Buffer i starts at i*hop (hop defaults to buffer_len, i.e. no
    overlap). A trailing partial buffer is kept only if it is at least
    half a buffer long and contains samples not already covered by a
    full buffer.
    """
    if hop is None:
        hop = buffer_len
    if not 0 < hop <= buffer_len:
        raise ValueError(f"hop must satisfy 0 < hop <= buffer_len, got hop={hop}")

    n = len(clip.samples)
    rate = clip.sample_rate
    len_n = int(round(buffer_len * rate))
    hop_n = int(round(hop * rate))
    buffers: list[TimeBuffer] = []
    index = 0
    start = 0
    while start + len_n <= n:
        buffers.append(
            TimeBuffer(
                AudioClip(clip.samples[start : start + len_n], rate, clip.origin_time + start / rate),
                index,
                buffer_len,
            )
        )
        index += 1
        start += hop_n

    remaining = n - start
    covered_to = (start - hop_n) + len_n if buffers else 0
    if remaining >= 0.5 * len_n and n > covered_to:
        buffers.append(
            TimeBuffer(
                AudioClip(clip.samples[start:], rate, clip.origin_time + start / rate),
                index,
                remaining / rate,
            )
        )
    return buffers


def load_annotations(path) -> list[Annotation]:
    """Read an annotation CSV (``time_s,label,source_id``), sorted by time."""
    path = Path(path)
    rows: list[tuple[float, str, str | None]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        expected = ["time_s", "label", "source_id"]
        if [h.strip() for h in header[: len(expected)]] != expected[: len(header)]:
            raise ValueError(f"{path}:1: expected header time_s,label,source_id")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                t = float(row[0])
                label = row[1].strip()
            except (IndexError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed row {row!r}") from exc
            if label not in ("click", "noise"):
                raise ValueError(f"{path}:{lineno}: label must be 'click' or 'noise', got {label!r}")
            source = row[2].strip() if len(row) > 2 and row[2].strip() else None
            rows.append((t, label, source))
    rows.sort(key=lambda r: r[0])
    return [Annotation((t,), label, source) for t, label, source in rows]


def write_annotations(annotations, path) -> None:
    """Write annotations as the flat CSV read back by :func:`load_annotations`."""
    rows = []
    for ann in annotations:
        for t in ann.click_times:
            rows.append((t, ann.label, ann.source_id or ""))
    rows.sort(key=lambda r: r[0])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", "label", "source_id"])
        writer.writerows(rows)
