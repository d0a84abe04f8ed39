"""Multi-pulse-structure measurement: delay between a ROI's two strongest pulses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from mpsdetect.roi import RoiSegment, TransientEvent


@dataclass(frozen=True)
class MpsMeasurement:
    """Delay between the two most intense pulses of one transient.

    No attempt is made to decide which pulse is the primary one: only
    the absolute delay (and its stability across a click train) is used
    downstream, so the measure may capture either the inter-pulse
    interval or a multipath delay.
    """

    mps_s: float  # |t_primary - t_secondary|
    t_primary_s: float  # strongest pulse
    t_secondary_s: float  # second strongest
    event: TransientEvent

    def __post_init__(self):
        if self.mps_s <= 0:
            raise ValueError("mps_s must be positive")


@dataclass(frozen=True)
class MpsSeries:
    """Time-ordered multi-pulse measurements of one buffer."""

    measurements: tuple

    def __post_init__(self):
        times = [m.event.peak_time for m in self.measurements]
        if any(times[i] >= times[i + 1] for i in range(len(times) - 1)):
            raise ValueError("measurements must be strictly increasing in event time")

    def __len__(self) -> int:
        return len(self.measurements)

    def event_times(self) -> np.ndarray:
        return np.array([m.event.peak_time for m in self.measurements])

    def values(self) -> np.ndarray:
        return np.array([m.mps_s for m in self.measurements])


def measure_mps(roi: RoiSegment, intra_min_sep: float = 0.0005) -> MpsMeasurement | None:
    """Measure the pulse delay of one ROI, or None when < 2 pulses qualify.

    Local maxima of the enhanced slice are accepted strongest-first with
    a mutual separation of ``intra_min_sep`` (suppresses ripple peaks of
    a single pulse while resolving genuine inter-pulse delays on the
    millisecond scale). Amplitude ties break toward the earlier peak.
    """
    s = roi.enhanced.values
    if len(s) < 3:
        return None
    peaks, _ = find_peaks(s)
    if len(peaks) < 2:
        return None

    order = np.lexsort((peaks, -s[peaks]))
    sep_n = intra_min_sep * roi.enhanced.sample_rate
    primary = peaks[order[0]]
    secondary = None
    for idx in peaks[order[1:]]:
        if abs(idx - primary) >= sep_n:
            secondary = idx
            break
    if secondary is None:
        return None

    rate = roi.enhanced.sample_rate
    t1 = roi.enhanced.origin_time + primary / rate
    t2 = roi.enhanced.origin_time + secondary / rate
    return MpsMeasurement(
        mps_s=abs(t1 - t2),
        t_primary_s=t1,
        t_secondary_s=t2,
        event=roi.event,
    )


def build_series(rois, intra_min_sep: float = 0.0005) -> MpsSeries:
    """Measure every ROI (time-ordered) and keep the non-degenerate results."""
    measurements = []
    for roi in rois:
        m = measure_mps(roi, intra_min_sep=intra_min_sep)
        if m is not None:
            measurements.append(m)
    return MpsSeries(tuple(measurements))
