"""Per-pulse feature checks, threshold calibration, cluster pruning.

Verification runs after clustering: a wrongly rejected click then only
shrinks the sample behind the final stability decision instead of
splitting a train's gap sequence in two.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from mpsdetect.cluster import (
    ClusterAssignment,
    ClusteringConfig,
    ClusterSolution,
    cluster_utility,
    is_time_feasible,
)
from mpsdetect.dsp import superlet_spectrogram
from mpsdetect.mps import MpsMeasurement
from mpsdetect.roi import RoiSegment

logger = logging.getLogger(__name__)


class DegeneratePulseError(ValueError):
    """The pulse slice has no usable spectral structure."""


@dataclass(frozen=True)
class PulseFeatures:
    """Duration and dominant frequency of a single pulse."""

    duration_s: float  # 3 dB width of the power profile at the dominant frequency
    dominant_freq_hz: float

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        if self.dominant_freq_hz <= 0:
            raise ValueError("dominant_freq_hz must be positive")


@dataclass(frozen=True)
class VerificationThresholds:
    """Acceptance limits for a click's pulse pair (comparisons are inclusive)."""

    mps_max_s: float = 0.040  # channel delay-spread ceiling
    duration_max_s: float = 0.001  # uncalibrated placeholder
    freq_max_hz: float = 20000.0  # uncalibrated placeholder
    target_p: float = 0.05

    def __post_init__(self):
        if min(self.mps_max_s, self.duration_max_s, self.freq_max_hz) <= 0:
            raise ValueError("thresholds must be positive")
        if not 0 < self.target_p < 1:
            raise ValueError("target_p must lie in (0, 1)")


@dataclass(frozen=True)
class CalibrationResult:
    duration_max_s: float
    freq_max_hz: float
    quantile: float
    achieved_p: float
    n_samples: int


def extract_pulse_features(
    roi: RoiSegment,
    pulse_time: float,
    freqs,
    base_cycles: int = 3,
    order_range: tuple = (1, 16),
    half_window_s: float = 0.003,
    single_precision: bool = True,
) -> PulseFeatures:
    """Measure one pulse's dominant frequency and 3 dB duration.

    A +-half_window_s slice around the pulse (clamped to the ROI) is run
    through the superlet transform; the dominant frequency is the grid
    row holding the global power maximum and the duration is the width
    of the contiguous half-power interval around that maximum along the
    row. Note the measured width includes the analysing wavelets'
    own envelope, so very short pulses read slightly wide.
    """
    t0 = max(roi.raw.origin_time, pulse_time - half_window_s)
    t1 = min(roi.raw.origin_time + roi.raw.duration, pulse_time + half_window_s)
    clip = roi.raw.slice_seconds(t0, t1)
    if len(clip.samples) < 16:
        raise DegeneratePulseError("pulse slice too short for spectral analysis")

    spec = superlet_spectrogram(
        clip,
        freqs,
        base_cycles=base_cycles,
        order_range=order_range,
        single_precision=single_precision,
    )
    flat_peak = int(np.argmax(spec.power))
    t_idx, f_idx = np.unravel_index(flat_peak, spec.power.shape)
    peak = spec.power[t_idx, f_idx]
    if not np.isfinite(peak) or peak <= 1e-30:
        raise DegeneratePulseError("flat spectrogram: unusable pulse")

    row = spec.power[:, f_idx]
    half = 0.5 * peak
    lo = t_idx
    while lo > 0 and row[lo - 1] >= half:
        lo -= 1
    hi = t_idx
    while hi < len(row) - 1 and row[hi + 1] >= half:
        hi += 1
    duration = (hi - lo + 1) / clip.sample_rate
    return PulseFeatures(duration_s=duration, dominant_freq_hz=float(spec.freq_axis[f_idx]))


def verify_click(
    m: MpsMeasurement,
    f1: PulseFeatures,
    f2: PulseFeatures,
    th: VerificationThresholds,
) -> bool:
    """Accept a click when delay, pulse durations and frequencies all stay in bounds."""
    return (
        m.mps_s <= th.mps_max_s
        and max(f1.duration_s, f2.duration_s) <= th.duration_max_s
        and max(f1.dominant_freq_hz, f2.dominant_freq_hz) <= th.freq_max_hz
    )


def calibrate_thresholds(features, target_p: float) -> CalibrationResult:
    """Pick duration/frequency limits so valid clicks exceed both with rate target_p.

    One equation in two unknowns: the freedom is resolved by tying both
    limits to a common quantile level q >= 0.5 of the calibration
    features and bisecting q until the empirical joint tail
    P(duration > d_max and frequency > f_max) meets target_p.
    """
    if not 0 < target_p < 1:
        raise ValueError("target_p must lie in (0, 1)")
    durations = np.array([f.duration_s for f in features], dtype=np.float64)
    freqs = np.array([f.dominant_freq_hz for f in features], dtype=np.float64)
    n = len(durations)
    if n < 2:
        raise ValueError("calibration needs at least 2 feature samples")
    if n < 100:
        logger.warning("calibrating from only %d samples; thresholds will be noisy", n)

    def joint_tail(q):
        d_max = np.quantile(durations, q)
        f_max = np.quantile(freqs, q)
        return float(np.mean((durations > d_max) & (freqs > f_max))), d_max, f_max

    max_tail, _, _ = joint_tail(0.5)
    if max_tail < target_p:
        raise ValueError(
            f"target_p={target_p} unattainable: achievable joint-tail range is "
            f"(0, {max_tail:.4f}] for quantiles >= 0.5"
        )

    lo, hi = 0.5, 1.0 - 1.0 / n
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        tail, _, _ = joint_tail(mid)
        if tail > target_p:
            lo = mid
        else:
            hi = mid
    q = 0.5 * (lo + hi)
    achieved, d_max, f_max = joint_tail(q)
    return CalibrationResult(
        duration_max_s=float(d_max),
        freq_max_hz=float(f_max),
        quantile=q,
        achieved_p=achieved,
        n_samples=n,
    )


def prune_clusters(
    solution: ClusterSolution,
    verdicts,
    series,
    intensities,
    cfg: ClusteringConfig,
) -> ClusterSolution:
    """Drop rejected members and dissolve clusters that stop being viable.

    ``verdicts`` maps series index -> bool for every cluster member.
    Clusters falling below the minimum size, or whose surviving gap
    sequence violates the time constraints, dissolve into the unassigned
    pool (the pipeline is single-pass: no re-clustering). The utility is
    recomputed on what survives.
    """
    surviving = []
    freed: list[int] = []
    for cluster in solution.clusters:
        kept = [i for i in cluster.members if verdicts[i]]
        dropped = [i for i in cluster.members if not verdicts[i]]
        freed.extend(dropped)
        if len(kept) < cfg.min_cluster_size:
            freed.extend(kept)
            continue
        times = [cluster.times[cluster.members.index(i)] for i in kept]
        if not is_time_feasible(times, cfg):
            freed.extend(kept)
            continue
        surviving.append((tuple(kept), tuple(times)))

    clusters = tuple(ClusterAssignment(members, times) for members, times in surviving)
    if clusters:
        utility = cluster_utility(clusters, series, intensities, cfg)
    else:
        utility = None
    unassigned = tuple(sorted(set(solution.unassigned) | set(freed)))
    return ClusterSolution(clusters, utility, unassigned)
