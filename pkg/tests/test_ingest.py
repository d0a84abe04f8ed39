import struct

import numpy as np
import pytest
from scipy.io import wavfile

from mpsdetect.evaluate import write_audio
from mpsdetect.ingest import (
    Annotation,
    AudioClip,
    AudioFormatError,
    load_annotations,
    load_audio,
    segment_buffers,
    write_annotations,
)


def _write_pcm16(path, rate, values):
    wavfile.write(path, rate, np.asarray(values, dtype=np.int16))


class TestLoadAudio:
    def test_16bit_scaling_identity(self, tmp_path):
        path = tmp_path / "a.wav"
        _write_pcm16(path, 96000, [16384, -32768, 0])
        clip = load_audio(path)
        assert clip.samples[0] == pytest.approx(0.5, abs=0)
        assert clip.samples[1] == -1.0
        assert clip.sample_rate == 96000.0

    def test_24bit_range_extreme(self, tmp_path):
        path = tmp_path / "b.wav"
        # hand-rolled 24-bit file holding the most negative sample
        data = struct.pack("<i", (-(2**23)) << 8)[1:4] + struct.pack("<i", (2**22) << 8)[1:4]
        with open(path, "wb") as fh:
            fh.write(b"RIFF" + struct.pack("<I", 36 + len(data)) + b"WAVE")
            fh.write(b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, 96000, 96000 * 3, 3, 24))
            fh.write(b"data" + struct.pack("<I", len(data)) + data)
        clip = load_audio(path)
        assert clip.samples[0] == -1.0
        assert clip.samples[1] == pytest.approx(0.5)

    def test_float32_passthrough(self, tmp_path):
        path = tmp_path / "c.wav"
        wavfile.write(path, 96000, np.array([0.25, -0.75], dtype=np.float32))
        clip = load_audio(path)
        assert clip.samples == pytest.approx([0.25, -0.75])

    def test_round_trip_through_writer(self, tmp_path, rng):
        x = rng.uniform(-1.0, 1.0, size=4096)
        clip = AudioClip(x, 96000.0)
        path = tmp_path / "rt.wav"
        write_audio(clip, path)
        loaded = load_audio(path)
        step = 1.0 / 2**23
        assert loaded.sample_rate == 96000.0
        assert np.max(np.abs(loaded.samples - x)) <= step

    def test_channel_selection(self, tmp_path):
        path = tmp_path / "st.wav"
        stereo = np.array([[100, 2000], [200, 3000]], dtype=np.int16)
        wavfile.write(path, 48000, stereo)
        assert load_audio(path, channel=1).samples[0] == pytest.approx(2000 / 32768)

    def test_unsupported_encoding(self, tmp_path):
        path = tmp_path / "u8.wav"
        wavfile.write(path, 48000, np.array([1, 2], dtype=np.uint8))
        with pytest.raises(AudioFormatError, match="8-bit"):
            load_audio(path)

    def test_empty_stream(self, tmp_path):
        path = tmp_path / "e.wav"
        _write_pcm16(path, 48000, [])
        with pytest.raises(AudioFormatError, match="empty"):
            load_audio(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_audio(tmp_path / "nope.wav")

    def test_low_rate_warning(self, tmp_path, caplog):
        path = tmp_path / "lo.wav"
        _write_pcm16(path, 44100, [0, 1, 2])
        with caplog.at_level("WARNING"):
            load_audio(path)
        assert any("48 kHz" in r.message for r in caplog.records)


class TestSegmentBuffers:
    def _clip(self, seconds, rate=1000.0):
        return AudioClip(np.zeros(int(seconds * rate)), rate)

    def test_35s_hop10(self):
        buffers = segment_buffers(self._clip(35), 10.0, 10.0)
        assert len(buffers) == 4
        assert [b.duration for b in buffers] == [10.0, 10.0, 10.0, 5.0]
        assert [b.t_start for b in buffers] == [0.0, 10.0, 20.0, 30.0]

    def test_exactly_one_buffer(self):
        buffers = segment_buffers(self._clip(10), 10.0, 10.0)
        assert len(buffers) == 1
        assert buffers[0].duration == 10.0

    def test_95s_hop5(self):
        # Full buffers start at 0,5,...,85; the 5 s tail starting at 90 is
        # already covered by the buffer at 85 and is dropped.
        buffers = segment_buffers(self._clip(95), 10.0, 5.0)
        assert len(buffers) == 18
        assert buffers[-1].t_start == 85.0

    def test_short_clip_rejected_tail(self):
        assert segment_buffers(self._clip(4), 10.0, 10.0) == []

    def test_short_clip_kept_tail(self):
        buffers = segment_buffers(self._clip(6), 10.0, 10.0)
        assert len(buffers) == 1
        assert buffers[0].duration == 6.0

    def test_non_overlapping_exhaustive(self, rng):
        for seconds in (10, 23, 34.99, 47.5):
            clip = self._clip(seconds)
            buffers = segment_buffers(clip, 10.0, 10.0)
            total = sum(len(b.clip.samples) for b in buffers)
            dropped = len(clip.samples) - total
            assert dropped < 0.5 * 10.0 * clip.sample_rate
            # contiguous tiling
            edges = [b.t_start for b in buffers] + [buffers[-1].t_start + buffers[-1].duration]
            assert edges == sorted(edges)
            for a, b in zip(buffers, buffers[1:]):
                assert b.t_start == pytest.approx(a.t_start + 10.0)

    def test_bad_hop(self):
        with pytest.raises(ValueError):
            segment_buffers(self._clip(20), 10.0, 11.0)


class TestAnnotations:
    def test_single_row(self, tmp_path):
        path = tmp_path / "ann.csv"
        path.write_text("time_s,label,source_id\n12.031,click,w1\n")
        anns = load_annotations(path)
        assert anns == [Annotation((12.031,), "click", "w1")]

    def test_empty_file(self, tmp_path):
        path = tmp_path / "ann.csv"
        path.write_text("time_s,label,source_id\n")
        assert load_annotations(path) == []

    def test_unsorted_input_sorted_output(self, tmp_path):
        path = tmp_path / "ann.csv"
        path.write_text("time_s,label,source_id\n5.0,click,\n1.5,noise,\n3.0,click,w2\n")
        anns = load_annotations(path)
        assert [a.click_times[0] for a in anns] == [1.5, 3.0, 5.0]

    def test_malformed_row_names_line(self, tmp_path):
        path = tmp_path / "ann.csv"
        path.write_text("time_s,label,source_id\n1.0,click,\nbogus,click,\n")
        with pytest.raises(ValueError, match=":3"):
            load_annotations(path)

    def test_bad_label(self, tmp_path):
        path = tmp_path / "ann.csv"
        path.write_text("time_s,label,source_id\n1.0,whale,\n")
        with pytest.raises(ValueError, match="label"):
            load_annotations(path)

    def test_round_trip(self, tmp_path):
        anns = [
            Annotation((1.0, 2.1, 3.2), "click", "t0"),
            Annotation((0.5,), "noise", None),
        ]
        path = tmp_path / "out.csv"
        write_annotations(anns, path)
        loaded = load_annotations(path)
        times = sorted(t for a in anns for t in a.click_times)
        assert [a.click_times[0] for a in loaded] == times

    def test_strictly_increasing_invariant(self):
        with pytest.raises(ValueError):
            Annotation((2.0, 1.0), "click")
