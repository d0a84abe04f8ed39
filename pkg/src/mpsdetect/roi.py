"""Transient detection on the enhanced signal and ROI extraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from mpsdetect.dsp import EnhancedSignal
from mpsdetect.ingest import AudioClip, TimeBuffer


@dataclass(frozen=True)
class TransientEvent:
    """One detected transient: its peak, intensity, SNR and ROI window."""

    peak_time: float  # seconds, absolute
    peak_intensity: float  # amplitude^2 (enhanced-signal peak)
    snr_db: float
    window: tuple  # (t_start, t_end) seconds, absolute

    def __post_init__(self):
        if not self.window[0] <= self.peak_time <= self.window[1]:
            raise ValueError("peak_time must lie inside the ROI window")
        if self.peak_intensity <= 0:
            raise ValueError("peak_intensity must be positive")


@dataclass(frozen=True)
class RoiSegment:
    """Raw and enhanced slices covering one event's window."""

    enhanced: EnhancedSignal
    raw: AudioClip
    event: TransientEvent


def estimate_noise_floor(enh: EnhancedSignal) -> float:
    """Median of the enhanced signal: robust to sparse strong transients."""
    if len(enh.values) == 0:
        raise ValueError("enhanced signal is empty")
    return float(np.median(enh.values))


def detect_transients(
    enh: EnhancedSignal,
    snr_threshold_db: float = 23.0,
    max_count: int = 45,
    min_separation: float = 0.050,
    roi_pre: float = 0.005,
    roi_post: float = 0.045,
    edge_exclusion: float = 0.001,
) -> list[TransientEvent]:
    """Pick the dominant local maxima of the enhanced signal.

    Peaks above the SNR threshold (relative to the median floor) are
    accepted greedily in descending intensity subject to a mutual
    separation of ``min_separation`` seconds, capped at ``max_count``,
    and returned sorted by time. Peaks within ``edge_exclusion`` of the
    buffer edges are ignored so ROI windows never hinge on boundary
    samples. Detection is scale-invariant: SNR is a ratio.
    """
    s = enh.values
    if len(s) == 0:
        raise ValueError("enhanced signal is empty")
    floor = estimate_noise_floor(enh)
    rate = enh.sample_rate

    candidates, _ = find_peaks(s)
    edge_n = int(np.ceil(edge_exclusion * rate))
    candidates = candidates[(candidates >= edge_n) & (candidates < len(s) - edge_n)]
    candidates = candidates[s[candidates] > 0]  # TKEO output can dip negative in noise
    if floor > 0:
        snr = 10.0 * np.log10(s[candidates] / floor)
        candidates = candidates[snr >= snr_threshold_db]

    # Greedy selection, strongest first; ties broken toward earlier time.
    order = np.lexsort((candidates, -s[candidates]))
    min_sep_n = min_separation * rate
    taken: list[int] = []
    for idx in candidates[order]:
        if len(taken) >= max_count:
            break
        if all(abs(idx - j) >= min_sep_n for j in taken):
            taken.append(int(idx))

    events = []
    for idx in sorted(taken):
        t_peak = enh.origin_time + idx / rate
        snr_db = 10.0 * np.log10(s[idx] / floor) if floor > 0 else np.inf
        events.append(
            TransientEvent(
                peak_time=t_peak,
                peak_intensity=float(s[idx]),
                snr_db=float(snr_db),
                window=(t_peak - roi_pre, t_peak + roi_post),
            )
        )
    return events


def extract_roi(buffer: TimeBuffer, enh: EnhancedSignal, event: TransientEvent) -> RoiSegment:
    """Slice raw and enhanced signals over the event window (edge-clamped)."""
    t0, t1 = event.window
    buf_start = buffer.clip.origin_time
    buf_end = buf_start + buffer.clip.duration
    if t1 <= buf_start or t0 >= buf_end:
        raise ValueError(f"ROI window [{t0}, {t1}] lies outside the buffer")
    t0 = max(t0, buf_start)
    t1 = min(t1, buf_end)
    return RoiSegment(
        enhanced=enh.slice_seconds(t0, t1),
        raw=buffer.clip.slice_seconds(t0, t1),
        event=event,
    )
