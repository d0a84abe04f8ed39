import numpy as np
import pytest

from mpsdetect.dsp import EnhancedSignal, tkeo
from mpsdetect.ingest import AudioClip, TimeBuffer
from mpsdetect.roi import detect_transients, estimate_noise_floor, extract_roi

RATE = 96000.0


def _enh(values, rate=RATE, origin=0.0):
    return EnhancedSignal(np.asarray(values, dtype=float), rate, origin)


def _spiky_signal(spike_times, spike_amps, duration=1.0, rate=RATE, floor=1.0, rng=None):
    """Enhanced-domain test signal: constant floor plus triangular spikes."""
    n = int(duration * rate)
    values = np.full(n, floor)
    if rng is not None:
        values += rng.uniform(-0.01, 0.01, size=n) * floor
    for t, a in zip(spike_times, spike_amps):
        i = int(round(t * rate))
        values[i] = a
        values[i - 1] = a * 0.6
        values[i + 1] = a * 0.5
    return _enh(values, rate)


class TestNoiseFloor:
    def test_constant(self):
        assert estimate_noise_floor(_enh(np.full(100, 4.0))) == 4.0

    def test_median_robust_to_spikes(self):
        values = np.zeros(1000)
        values[::100] = 1e9
        assert estimate_noise_floor(_enh(values)) == 0.0

    def test_matches_analytic_median(self, rng):
        # exponential(1) has median ln 2
        values = rng.exponential(1.0, size=200_000)
        assert estimate_noise_floor(_enh(values)) == pytest.approx(np.log(2), rel=0.05)

    def test_empty(self):
        with pytest.raises(ValueError):
            estimate_noise_floor(_enh([]))


class TestDetectTransients:
    def test_single_spike(self, rng):
        enh = _spiky_signal([0.5], [2000.0], rng=rng)
        events = detect_transients(enh, snr_threshold_db=23.0)
        assert len(events) == 1
        assert events[0].peak_time == pytest.approx(0.5, abs=1.0 / RATE)
        assert events[0].snr_db >= 23.0

    def test_separation_keeps_stronger(self, rng):
        enh = _spiky_signal([0.5, 0.502], [2000.0, 5000.0], rng=rng)
        events = detect_transients(enh, min_separation=0.020)
        assert len(events) == 1
        assert events[0].peak_time == pytest.approx(0.502, abs=1.0 / RATE)

    def test_max_count_keeps_most_intense(self, rng):
        times = np.linspace(0.1, 9.9, 60)
        amps = rng.uniform(1e3, 1e6, size=60)
        enh = _spiky_signal(times, amps, duration=10.0, rng=rng)
        events = detect_transients(enh, max_count=45, min_separation=0.05)
        assert len(events) == 45
        # sort oracle over injected amplitudes (injection quantizes to the
        # sample grid, so allow one sample of slack)
        expected = np.sort(times[np.argsort(amps)[-45:]])
        measured = np.array([e.peak_time for e in events])
        np.testing.assert_allclose(measured, expected, atol=1.5 / RATE)

    def test_sorted_and_separated(self, rng):
        times = rng.uniform(0.1, 9.9, size=80)
        amps = rng.uniform(1e3, 1e6, size=80)
        enh = _spiky_signal(times, amps, duration=10.0, rng=rng)
        events = detect_transients(enh, max_count=45, min_separation=0.05)
        assert len(events) <= 45
        peak_times = [e.peak_time for e in events]
        assert peak_times == sorted(peak_times)
        gaps = np.diff(peak_times)
        assert np.all(gaps >= 0.05 - 1e-9)

    def test_scale_invariance(self, rng):
        y = rng.standard_normal(int(RATE)) * 0.01
        y[48000] = 0.9
        enh1 = tkeo(AudioClip(y, RATE))
        enh2 = tkeo(AudioClip(np.clip(3.7 * y, -4, 4), RATE))
        t1 = [e.peak_time for e in detect_transients(enh1)]
        t2 = [e.peak_time for e in detect_transients(enh2)]
        assert t1 == t2

    def test_nothing_above_threshold(self, rng):
        enh = _enh(1.0 + 0.01 * rng.random(10000))
        assert detect_transients(enh) == []

    def test_edge_exclusion(self):
        values = np.full(1000, 1.0)
        values[20] = 1e6  # within 1 ms of the edge at 96 kHz
        values[19] = 0.5e6
        values[21] = 0.4e6
        events = detect_transients(_enh(values))
        assert events == []


class TestExtractRoi:
    def _setup(self):
        clip = AudioClip(np.arange(96000, dtype=float) / 96000.0, RATE)
        buffer = TimeBuffer(clip, 0, 1.0)
        enh = _enh(np.ones(96000))
        return buffer, enh

    def test_slices_cover_window(self):
        buffer, enh = self._setup()
        from mpsdetect.roi import TransientEvent

        event = TransientEvent(0.5, 10.0, 30.0, (0.495, 0.545))
        segment = extract_roi(buffer, enh, event)
        assert segment.raw.origin_time == pytest.approx(0.495)
        assert segment.raw.duration == pytest.approx(0.050, abs=2 / RATE)
        assert len(segment.raw.samples) == len(segment.enhanced.values)

    def test_clamped_at_edges(self):
        buffer, enh = self._setup()
        from mpsdetect.roi import TransientEvent

        event = TransientEvent(0.002, 10.0, 30.0, (-0.003, 0.047))
        segment = extract_roi(buffer, enh, event)
        assert segment.raw.origin_time == 0.0

    def test_outside_buffer(self):
        buffer, enh = self._setup()
        from mpsdetect.roi import TransientEvent

        event = TransientEvent(5.0, 10.0, 30.0, (4.995, 5.045))
        with pytest.raises(ValueError):
            extract_roi(buffer, enh, event)
