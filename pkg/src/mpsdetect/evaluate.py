"""Synthetic ground-truth generation and the metrics harness.

The generator builds click trains whose pulse-pair delays, intervals and
intensities are known exactly, which makes it the oracle for end-to-end
tests: detection quality is measured against construction, not against
another detector.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from mpsdetect import dsp
from mpsdetect.ingest import Annotation, AudioClip
from mpsdetect.mps import MpsSeries

# Anchor transients are kept at least this far apart so each lands in its
# own ROI (detector default separation is 50 ms).
MIN_EVENT_SPACING_S = 0.060
_EDGE_MARGIN_S = 0.3


class OvercrowdedSpecError(ValueError):
    """Requested events cannot respect the minimum spacing."""


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic clip; identical specs yield identical audio."""

    n_trains: int = 1
    # default gap range keeps |ln(gap ratio)| under the 0.15 consistency bound
    ici_lo_s: float = 0.95
    ici_hi_s: float = 1.10
    mps_base_lo_s: float = 0.002  # per-train base pulse delay drawn from this range
    mps_base_hi_s: float = 0.008
    mps_jitter_s: float = 0.0  # per-click jitter sigma around the train's base
    mps_random: bool = False  # per-click delay uniform in (1, 39) ms instead
    snr_lo_db: float = 30.0
    snr_hi_db: float = 35.0
    n_noise_transients: int = 0
    noise_kind: str = "white-band"  # or "impulsive"
    seed: int = 0
    duration_s: float = 10.0
    sample_rate_hz: float = 96000.0
    clicks_per_train: int = 0  # 0 = fill the clip
    # noise transients mimic clicks in time structure but carry the wider
    # envelope/spectrum spread of real transient noise; the duration and
    # frequency verification limits exist precisely to catch that spread
    noise_carrier_lo_hz: float = 4000.0
    noise_carrier_hi_hz: float = 22000.0
    noise_width_lo_s: float = 0.0002
    noise_width_hi_s: float = 0.0025

    def __post_init__(self):
        if self.noise_kind not in ("white-band", "impulsive"):
            raise ValueError(f"unknown noise_kind {self.noise_kind!r}")
        if not 0 < self.ici_lo_s <= self.ici_hi_s:
            raise ValueError("need 0 < ici_lo_s <= ici_hi_s")


def _gaussian_pulse(t_grid, center, amplitude, carrier_hz, sigma_s):
    envelope = np.exp(-0.5 * ((t_grid - center) / sigma_s) ** 2)
    return amplitude * envelope * np.cos(2.0 * np.pi * carrier_hz * (t_grid - center))


def _add_pulse(samples, rate, center_s, amplitude, carrier_hz, sigma_s):
    half = 4.0 * sigma_s
    i0 = max(0, int((center_s - half) * rate))
    i1 = min(len(samples), int((center_s + half) * rate) + 1)
    if i0 >= i1:
        return
    t = np.arange(i0, i1) / rate
    samples[i0:i1] += _gaussian_pulse(t, center_s, amplitude, carrier_hz, sigma_s)


def _amplitude_for_snr(snr_db, tkeo_floor, carrier_hz, rate):
    """Peak amplitude so the enhanced-signal peak sits snr_db above the floor."""
    omega = 2.0 * np.pi * carrier_hz / rate
    return float(np.sqrt(tkeo_floor * 10.0 ** (snr_db / 10.0)) / abs(np.sin(omega)))


def synth_click_train(spec: SynthSpec):
    """Generate (AudioClip, annotations) for the given recipe.

    Each click is 2-3 Gaussian-windowed pulses on a per-train carrier in
    4-16 kHz (3 dB pulse widths 200-500 us); the second pulse trails the
    first by the train's base delay plus jitter, so the intended
    pulse-pair delay of every click is known. Noise transients are
    single pulses or pulse pairs with a random delay: lookalikes that
    only the delay-stability logic can reject.
    """
    rng = np.random.default_rng(spec.seed)
    rate = spec.sample_rate_hz
    n = int(round(spec.duration_s * rate))
    if n < 3:
        raise ValueError("duration too short")

    band_hi = min(24000.0, 0.45 * rate)
    noise = rng.standard_normal(n) * 0.02
    noise_clip = dsp.bandpass(AudioClip(np.clip(noise, -1, 1), rate), 2000.0, band_hi)
    samples = noise_clip.samples.copy()
    if spec.noise_kind == "impulsive":
        sigma_band = float(samples.std())
        n_impulses = int(200 * spec.duration_s)
        positions = rng.integers(0, n, size=n_impulses)
        samples[positions] += rng.uniform(2.0, 6.0, size=n_impulses) * sigma_band * rng.choice(
            [-1.0, 1.0], size=n_impulses
        )
    tkeo_floor = float(np.median(dsp.tkeo(AudioClip(np.clip(samples, -1, 1), rate)).values))

    anchors: list[float] = []

    def spaced(t: float) -> bool:
        return all(abs(t - a) >= MIN_EVENT_SPACING_S for a in anchors)

    annotations: list[Annotation] = []
    t_max = spec.duration_s - _EDGE_MARGIN_S

    for k in range(spec.n_trains):
        carrier = rng.uniform(4000.0, 16000.0)
        base_delay = rng.uniform(spec.mps_base_lo_s, spec.mps_base_hi_s)
        snr_db = rng.uniform(spec.snr_lo_db, spec.snr_hi_db)
        amplitude = _amplitude_for_snr(snr_db, tkeo_floor, carrier, rate)

        click_times: list[float] = []
        t = None
        while True:
            if spec.clicks_per_train and len(click_times) >= spec.clicks_per_train:
                break
            # Re-draw the gap when another event sits too close; the gap
            # range is narrow enough that consistency is preserved.
            placed = False
            for _ in range(50):
                if t is None:
                    candidate = rng.uniform(_EDGE_MARGIN_S, _EDGE_MARGIN_S + spec.ici_hi_s)
                else:
                    candidate = t + rng.uniform(spec.ici_lo_s, spec.ici_hi_s)
                if candidate >= t_max:
                    break
                if spaced(candidate):
                    placed = True
                    break
            if not placed:
                if t is not None and t + spec.ici_lo_s >= t_max:
                    break  # clean end of clip
                if spec.clicks_per_train or t is None:
                    raise OvercrowdedSpecError(
                        f"train {k}: cannot place click {len(click_times)} with "
                        f"{MIN_EVENT_SPACING_S}s spacing"
                    )
                break
            t = candidate
            click_times.append(t)
            anchors.append(t)
        if spec.clicks_per_train and len(click_times) < spec.clicks_per_train:
            raise OvercrowdedSpecError(
                f"train {k}: only {len(click_times)} of {spec.clicks_per_train} clicks fit"
            )
        if not click_times:
            continue

        for t_click in click_times:
            if spec.mps_random:
                delay = rng.uniform(0.001, 0.039)
            else:
                delay = base_delay + (rng.normal(0.0, spec.mps_jitter_s) if spec.mps_jitter_s else 0.0)
            width_1 = rng.uniform(200e-6, 500e-6) / (2.0 * np.sqrt(np.log(2.0)))
            width_2 = rng.uniform(200e-6, 500e-6) / (2.0 * np.sqrt(np.log(2.0)))
            _add_pulse(samples, rate, t_click, amplitude, carrier, width_1)
            _add_pulse(samples, rate, t_click + delay, 0.7 * amplitude, carrier, width_2)
            if rng.random() < 0.5:  # occasional weak early pulse
                width_3 = rng.uniform(200e-6, 500e-6) / (2.0 * np.sqrt(np.log(2.0)))
                _add_pulse(samples, rate, t_click - rng.uniform(0.002, 0.004), 0.4 * amplitude, carrier, width_3)
        annotations.append(Annotation(tuple(click_times), "click", f"train{k}"))

    for k in range(spec.n_noise_transients):
        placed = False
        for _ in range(200):
            t = rng.uniform(_EDGE_MARGIN_S, t_max)
            if spaced(t):
                placed = True
                break
        if not placed:
            raise OvercrowdedSpecError(
                f"could not place noise transient {k} with {MIN_EVENT_SPACING_S}s spacing"
            )
        anchors.append(t)
        carrier = rng.uniform(spec.noise_carrier_lo_hz, spec.noise_carrier_hi_hz)
        snr_db = rng.uniform(spec.snr_lo_db, spec.snr_hi_db)
        amplitude = _amplitude_for_snr(snr_db, tkeo_floor, carrier, rate)
        width = rng.uniform(spec.noise_width_lo_s, spec.noise_width_hi_s) / (2.0 * np.sqrt(np.log(2.0)))
        _add_pulse(samples, rate, t, amplitude, carrier, width)
        if rng.random() < 0.5:  # double pulse with an arbitrary delay
            width_2 = rng.uniform(spec.noise_width_lo_s, spec.noise_width_hi_s) / (2.0 * np.sqrt(np.log(2.0)))
            _add_pulse(samples, rate, t + rng.uniform(0.001, 0.039), 0.7 * amplitude, carrier, width_2)
        annotations.append(Annotation((t,), "noise", f"noise{k}"))

    peak = float(np.max(np.abs(samples)))
    if peak > 0.98:
        samples *= 0.98 / peak
    annotations.sort(key=lambda a: a.click_times[0])
    return AudioClip(samples, rate, 0.0), annotations


def write_audio(clip: AudioClip, path) -> None:
    """Write 24-bit PCM RIFF/WAVE; round-trips with load_audio within one step."""
    rate = int(round(clip.sample_rate))
    q = np.round(np.clip(clip.samples, -1.0, 1.0) * 2.0**23)
    q = np.clip(q, -(2**23), 2**23 - 1).astype(np.int32)  # saturate only at +1.0
    # Little-endian int32 view of q << 8: bytes 1:4 are the 3-byte samples
    # that loaders restore left-justified.
    frames = (q << 8).astype("<i4").view(np.uint8).reshape(-1, 4)[:, 1:4].tobytes()
    with open(path, "wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", 36 + len(frames)) + b"WAVE")
        fh.write(b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, rate, rate * 3, 3, 24))
        fh.write(b"data" + struct.pack("<I", len(frames)) + frames)


def mps_stability_histogram(series, group: int = 5) -> np.ndarray:
    """Population sigma over sliding groups of consecutive delay measurements."""
    values = series.values() if isinstance(series, MpsSeries) else np.asarray(series, dtype=np.float64)
    if len(values) < group:
        raise ValueError(f"need at least {group} measurements, got {len(values)}")
    windows = np.lib.stride_tricks.sliding_window_view(values, group)
    return windows.std(axis=1)


@dataclass(frozen=True)
class PRCurve:
    """Precision-recall sweep over the decision threshold."""

    points: tuple  # (u_t, precision, recall)
    counts: tuple  # (tp, fp, fn)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("u_t,tp,fp,fn,precision,recall\n")
            for (u_t, precision, recall), (tp, fp, fn) in zip(self.points, self.counts):
                fh.write(f"{u_t},{tp},{fp},{fn},{precision},{recall}\n")


def pr_sweep(utilities, labels, thresholds) -> PRCurve:
    """Recompute decisions from stored utilities over a threshold grid.

    ``utilities`` holds one value (or None) per buffer; ``labels`` are
    the matching ground-truth booleans (True = clicks present). With no
    detections precision is defined as 1; with no positive buffers
    recall is likewise 1.
    """
    if len(utilities) != len(labels):
        raise ValueError("every buffer needs a label")
    points = []
    counts = []
    for u_t in thresholds:
        tp = fp = fn = 0
        for utility, positive in zip(utilities, labels):
            detected = utility is not None and utility < u_t
            if detected and positive:
                tp += 1
            elif detected and not positive:
                fp += 1
            elif not detected and positive:
                fn += 1
        precision = tp / (tp + fp) if tp + fp else 1.0
        recall = tp / (tp + fn) if tp + fn else 1.0
        points.append((float(u_t), precision, recall))
        counts.append((tp, fp, fn))
    return PRCurve(tuple(points), tuple(counts))


def false_alarms_per_hour(reports, total_hours: float) -> float:
    """Signal decisions per hour over noise-only material."""
    if total_hours <= 0:
        raise ValueError("total_hours must be positive")
    n = sum(1 for r in reports if _decision_of(r) == "H1_signal")
    return n / total_hours


def _decision_of(report) -> str:
    if isinstance(report, str):
        return report
    if isinstance(report, dict):
        return report["decision"]
    return report.decision


def buffer_is_positive(annotations, t_start: float, t_end: float, min_clicks: int = 3) -> bool:
    """Ground-truth label: at least min_clicks of one train fall in the window.

    Fewer clicks can never satisfy the minimum cluster size, so a buffer
    holding only a train fragment below that is not counted positive.
    """
    for ann in annotations:
        if ann.label != "click":
            continue
        inside = sum(1 for t in ann.click_times if t_start <= t < t_end)
        if inside >= min_clicks:
            return True
    return False
