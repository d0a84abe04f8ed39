"""Band-pass filtering, Teager-Kaiser enhancement, superlet spectrograms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
from scipy.signal import butter, sosfiltfilt

from mpsdetect.ingest import AudioClip

# Gaussian-envelope convention: a wavelet with c cycles at frequency f has
# sigma_t = c / (CYCLE_SD * f), i.e. the c cycles span +-2.5 standard
# deviations of the envelope.
CYCLE_SD = 5.0
# Envelope support kept per side, in standard deviations (amplitude < 4e-5
# beyond it, far below every tolerance used here).
SUPPORT_SD = 4.5
# Floor applied before log so the geometric mean survives exact zeros
# (single precision needs a floor its dtype can represent).
LOG_FLOOR = 1e-300
LOG_FLOOR_SINGLE = 1e-37


@dataclass(frozen=True)
class EnhancedSignal:
    """Teager-Kaiser energy of a clip; values are amplitude^2."""

    values: np.ndarray
    sample_rate: float
    origin_time: float = 0.0

    def times(self) -> np.ndarray:
        return self.origin_time + np.arange(len(self.values)) / self.sample_rate

    def slice_seconds(self, t_start: float, t_end: float) -> "EnhancedSignal":
        i0 = max(0, int(round((t_start - self.origin_time) * self.sample_rate)))
        i1 = min(len(self.values), int(round((t_end - self.origin_time) * self.sample_rate)) + 1)
        if i0 >= i1:
            raise ValueError(f"window [{t_start}, {t_end}] outside signal")
        return EnhancedSignal(
            self.values[i0:i1],
            self.sample_rate,
            self.origin_time + i0 / self.sample_rate,
        )


@dataclass(frozen=True)
class Spectrogram:
    """Time-frequency power grid (amplitude^2), axes strictly increasing."""

    power: np.ndarray  # shape (n_times, n_freqs)
    time_axis: np.ndarray  # seconds, absolute
    freq_axis: np.ndarray  # Hz
    superlet_order: tuple  # (order_min, order_max)


def bandpass(clip: AudioClip, f_lo: float, f_hi: float, order: int = 4) -> AudioClip:
    """Zero-phase Butterworth band-pass; length and pulse times preserved.

    The filter is applied forward and backward (squared magnitude
    response, no phase distortion), which matters because downstream
    pulse-delay measurements ride on arrival times.
    """
    nyquist = clip.sample_rate / 2.0
    if not 0 < f_lo < f_hi:
        raise ValueError(f"need 0 < f_lo < f_hi, got ({f_lo}, {f_hi})")
    if f_hi >= nyquist:
        raise ValueError(f"f_hi={f_hi} Hz must lie below Nyquist ({nyquist} Hz)")
    sos = butter(order, [f_lo, f_hi], btype="bandpass", output="sos", fs=clip.sample_rate)
    filtered = sosfiltfilt(sos, clip.samples)
    return AudioClip(filtered, clip.sample_rate, clip.origin_time)


def tkeo(clip: AudioClip) -> EnhancedSignal:
    """Teager-Kaiser energy operator: s_n = y_n^2 - y_{n-1} * y_{n+1}.

    Boundary samples are copied from the nearest interior value; they
    are excluded from peak picking anyway.
    """
    y = clip.samples
    if len(y) < 3:
        raise ValueError(f"tkeo needs at least 3 samples, got {len(y)}")
    s = np.empty_like(y)
    s[1:-1] = y[1:-1] * y[1:-1] - y[:-2] * y[2:]
    s[0] = s[1]
    s[-1] = s[-2]
    return EnhancedSignal(s, clip.sample_rate, clip.origin_time)


def _order_map(freqs: np.ndarray, order_min: int, order_max: int) -> np.ndarray:
    """Per-frequency wavelet count, linear in frequency over the grid."""
    if len(freqs) == 1:
        return np.array([max(1, order_min)], dtype=np.intp)
    span = freqs[-1] - freqs[0]
    orders = np.rint(order_min + (order_max - order_min) * (freqs - freqs[0]) / span)
    return np.maximum(orders.astype(np.intp), 1)


class _WaveletBank:
    """Frequency-domain Gaussian bank for one (grid, rate, fft size) combo.

    Each analytic Morlet-type wavelet is a Gaussian in the frequency
    domain, centred on its target frequency and scaled so a stationary
    unit-amplitude tone yields unit peak power. Responses come from one
    forward FFT of the segment and a single batched inverse FFT.
    """

    def __init__(self, freqs, base_cycles, order_min, order_max, sample_rate, n_fft, dtype):
        self.n_fft = n_fft
        self.dtype = dtype
        orders = _order_map(freqs, order_min, order_max)
        self.orders = orders
        self.row_splits = np.cumsum(orders)[:-1]

        bin_freqs = np.fft.fftfreq(n_fft, d=1.0 / sample_rate)
        centers = np.repeat(freqs, orders)
        cycles = base_cycles * np.concatenate([np.arange(1, o + 1) for o in orders])
        sigma_t = cycles / (CYCLE_SD * centers)
        # FFT of (2 / (sigma sqrt(2 pi) fs)) * gauss(t) * exp(2i pi f t):
        # a real Gaussian of height 2 at the centre frequency.
        gauss = 2.0 * np.exp(
            -2.0 * np.pi**2 * sigma_t[:, None] ** 2 * (bin_freqs[None, :] - centers[:, None]) ** 2
        )
        self.kernels = gauss.astype(np.float32 if dtype == np.complex64 else np.float64)
        self.max_support = int(np.ceil(SUPPORT_SD * sigma_t.max() * sample_rate))

    def power_rows(self, samples: np.ndarray) -> np.ndarray:
        """Geometric-mean power per frequency row, shape (n_freqs, len(samples))."""
        n = len(samples)
        x = samples.astype(np.float32 if self.dtype == np.complex64 else np.float64)
        spectrum = sfft.fft(x, self.n_fft)
        resp = sfft.ifft((self.kernels * spectrum[None, :]).astype(self.dtype), axis=1)
        power = np.ascontiguousarray((resp.real**2 + resp.imag**2)[:, :n])
        floor = LOG_FLOOR_SINGLE if self.dtype == np.complex64 else LOG_FLOOR
        np.log(np.maximum(power, floor, out=power), out=power)
        sums = np.add.reduceat(power, np.r_[0, self.row_splits], axis=0)
        return np.exp(sums / self.orders[:, None], dtype=np.float64)


_BANK_CACHE: dict[tuple, _WaveletBank] = {}


def _get_bank(freqs, base_cycles, order_min, order_max, sample_rate, n_samples, dtype):
    key = (
        round(float(freqs[0]), 6),
        round(float(freqs[-1]), 6),
        len(freqs),
        base_cycles,
        order_min,
        order_max,
        round(float(sample_rate), 6),
        n_samples,
        np.dtype(dtype).name,
    )
    bank = _BANK_CACHE.get(key)
    if bank is None:
        # Worst-case one-sided support (largest sigma_t over the actual
        # kernel set) sets the padding needed to keep the circular
        # correlation linear.
        orders = _order_map(freqs, order_min, order_max)
        sigma_max = float(np.max(base_cycles * orders / (CYCLE_SD * np.asarray(freqs))))
        support = int(np.ceil(SUPPORT_SD * sigma_max * sample_rate))
        n_fft = sfft.next_fast_len(n_samples + support)
        bank = _WaveletBank(freqs, base_cycles, order_min, order_max, sample_rate, n_fft, dtype)
        if len(_BANK_CACHE) > 16:
            _BANK_CACHE.clear()
        _BANK_CACHE[key] = bank
    return bank


def superlet_spectrogram(
    segment: AudioClip,
    freqs,
    base_cycles: int = 3,
    order_range: tuple = (1, 16),
    single_precision: bool = False,
) -> Spectrogram:
    """Super-resolution spectrogram: geometric mean of multi-order wavelets.

    For each grid frequency f, the order o(f) is interpolated linearly
    from order_range over the grid and the power is the geometric mean
    of the magnitude-squared responses of analytic wavelets with
    i*base_cycles cycles, i = 1..o(f). A unit-amplitude stationary tone
    peaks at power 1 (within a few percent from edge effects).

    single_precision trades ~7 significant digits for roughly a 3x
    speed-up of the batched transform; peak locations and 3 dB widths
    are unaffected at the tolerances used downstream.
    """
    freqs = np.asarray(freqs, dtype=np.float64)
    if freqs.size == 0:
        raise ValueError("frequency grid is empty")
    if np.any(np.diff(freqs) <= 0):
        raise ValueError("frequency grid must be strictly increasing")
    nyquist = segment.sample_rate / 2.0
    if freqs[0] <= 0 or freqs[-1] >= nyquist:
        raise ValueError(f"frequencies must lie in (0, {nyquist}) Hz")
    o_min, o_max = int(order_range[0]), int(order_range[1])
    if o_min < 1:
        raise ValueError("minimum superlet order must be >= 1")

    dtype = np.complex64 if single_precision else np.complex128
    bank = _get_bank(freqs, int(base_cycles), o_min, o_max, segment.sample_rate, len(segment.samples), dtype)
    power = bank.power_rows(segment.samples).T  # (n_times, n_freqs)
    return Spectrogram(power, segment.times(), freqs, (o_min, o_max))
