"""Per-buffer pipeline and the final noise/signal decision."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from mpsdetect import dsp, mps, roi, verify
from mpsdetect.cluster import ClusterSolution, solve_clustering
from mpsdetect.config import Config
from mpsdetect.ingest import TimeBuffer

logger = logging.getLogger(__name__)

H0_NOISE = "H0_noise"
H1_SIGNAL = "H1_signal"


@dataclass(frozen=True)
class DetectionReport:
    """Everything the decision rested on, for auditability."""

    buffer_index: int
    t_start_s: float
    duration_s: float
    decision: str
    utility: float | None
    n_transients: int
    n_mps: int
    events: tuple
    solution: ClusterSolution  # pruned (verified) clusters
    cluster_mps: tuple  # per surviving cluster: member delays, aligned with members
    raw_utility: float | None  # utility before verification pruning
    config_hash: str

    def to_json_dict(self) -> dict:
        """Wire form: one JSON object per buffer."""
        clusters = [
            {"members_t_s": list(c.times), "mps_s": list(values), "size": c.size}
            for c, values in zip(self.solution.clusters, self.cluster_mps)
        ]
        return {
            "buffer_index": self.buffer_index,
            "t_start_s": self.t_start_s,
            "duration_s": self.duration_s,
            "decision": self.decision,
            "utility": self.utility,
            "n_transients": self.n_transients,
            "n_mps": self.n_mps,
            "clusters": clusters,
            "config_hash": self.config_hash,
        }


def threshold_decision(utility: float | None, u_t: float) -> str:
    """Signal iff a verified grouping exists and its utility beats the threshold."""
    if u_t <= 0:
        raise ValueError("utility threshold must be positive")
    if utility is not None and utility < u_t:
        return H1_SIGNAL
    return H0_NOISE


def _superlet_grid(cfg: Config, sample_rate: float) -> np.ndarray:
    d = cfg.dsp
    freqs = np.arange(
        d.superlet_freq_lo_hz,
        d.superlet_freq_hi_hz + 0.5 * d.superlet_freq_step_hz,
        d.superlet_freq_step_hz,
    )
    return freqs[freqs < 0.98 * sample_rate / 2.0]


def detect_buffer(buffer: TimeBuffer, cfg: Config, buffer_index: int | None = None) -> DetectionReport:
    """Run the full chain on one buffer: filter, enhance, detect, measure,
    cluster, verify, threshold. Empty intermediate stages yield a noise
    decision, never an error."""
    index = buffer.index if buffer_index is None else buffer_index
    rate = buffer.clip.sample_rate
    band_hi = min(cfg.dsp.band_hi_hz, 0.98 * rate / 2.0)
    if band_hi < cfg.dsp.band_hi_hz:
        logger.warning(
            "band edge clamped to %.0f Hz for %.0f Hz sample rate", band_hi, rate
        )

    filtered = dsp.bandpass(buffer.clip, cfg.dsp.band_lo_hz, band_hi, order=cfg.dsp.filter_order)
    enhanced = dsp.tkeo(filtered)
    events = roi.detect_transients(
        enhanced,
        snr_threshold_db=cfg.roi.snr_threshold_db,
        max_count=cfg.roi.max_events,
        min_separation=cfg.roi.min_separation_s,
        roi_pre=cfg.roi.pre_s,
        roi_post=cfg.roi.post_s,
        edge_exclusion=cfg.roi.edge_exclusion_s,
    )

    filtered_buffer = TimeBuffer(filtered, buffer.index, buffer.duration)
    rois = [roi.extract_roi(filtered_buffer, enhanced, ev) for ev in events]
    roi_by_event = {id(r.event): r for r in rois}
    series = mps.build_series(rois, intra_min_sep=cfg.mps.intra_min_sep_s)
    intensities = np.array([m.event.peak_intensity for m in series.measurements])

    solution = solve_clustering(series, intensities, cfg.cluster)
    raw_utility = solution.utility

    pruned = solution
    if solution.clusters:
        grid = _superlet_grid(cfg, rate)
        thresholds = verify.VerificationThresholds(
            mps_max_s=cfg.verify.mps_max_s,
            duration_max_s=cfg.verify.duration_max_s,
            freq_max_hz=cfg.verify.freq_max_hz,
            target_p=cfg.verify.target_p,
        )
        verdicts = {}
        for cluster in solution.clusters:
            for i in cluster.members:
                measurement = series.measurements[i]
                verdicts[i] = _verify_measurement(
                    measurement, roi_by_event[id(measurement.event)], grid, thresholds, cfg
                )
        pruned = verify.prune_clusters(solution, verdicts, series, intensities, cfg.cluster)

    decision = threshold_decision(pruned.utility, cfg.decide.utility_threshold)
    cluster_mps = tuple(
        tuple(series.measurements[i].mps_s for i in c.members) for c in pruned.clusters
    )
    return DetectionReport(
        buffer_index=index,
        t_start_s=buffer.t_start,
        duration_s=buffer.duration,
        decision=decision,
        utility=pruned.utility,
        n_transients=len(events),
        n_mps=len(series),
        events=tuple(events),
        solution=pruned,
        cluster_mps=cluster_mps,
        raw_utility=raw_utility,
        config_hash=cfg.config_hash(),
    )


def _verify_measurement(measurement, roi_segment, grid, thresholds, cfg: Config) -> bool:
    """Feature-check both pulses of one measurement; unusable pulses reject it."""
    try:
        features = [
            verify.extract_pulse_features(
                roi_segment,
                t,
                grid,
                base_cycles=cfg.dsp.superlet_base_cycles,
                order_range=(cfg.dsp.superlet_order_min, cfg.dsp.superlet_order_max),
                half_window_s=cfg.verify.feature_half_window_s,
                single_precision=cfg.verify.single_precision,
            )
            for t in (measurement.t_primary_s, measurement.t_secondary_s)
        ]
    except verify.DegeneratePulseError:
        return False
    return verify.verify_click(measurement, features[0], features[1], thresholds)
