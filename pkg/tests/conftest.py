import numpy as np
import pytest

from mpsdetect.ingest import AudioClip
from mpsdetect.mps import MpsMeasurement, MpsSeries
from mpsdetect.roi import TransientEvent


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and item.fspath.basename == "test_acceptance.py":
        writer = item.config.pluginmanager.get_plugin("terminalreporter")
        if writer is not None:
            verdict = "PASS" if report.passed else "FAIL"
            writer.write_line(f"ACCEPTANCE {item.name}: {verdict}")


def make_series(times, mps_values, intensities=None):
    """Build an MpsSeries from plain arrays (events get nominal windows)."""
    if intensities is None:
        intensities = np.ones(len(times))
    measurements = []
    for t, v, intensity in zip(times, mps_values, intensities):
        event = TransientEvent(
            peak_time=float(t),
            peak_intensity=float(intensity),
            snr_db=30.0,
            window=(float(t) - 0.005, float(t) + 0.045),
        )
        measurements.append(
            MpsMeasurement(mps_s=float(v), t_primary_s=float(t), t_secondary_s=float(t) + float(v), event=event)
        )
    return MpsSeries(tuple(measurements))


def tone_clip(freq_hz, duration_s=0.02, rate=96000.0, amplitude=1.0, origin=0.0):
    t = np.arange(int(duration_s * rate)) / rate
    return AudioClip(amplitude * np.sin(2 * np.pi * freq_hz * t), rate, origin)
