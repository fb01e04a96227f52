"""Sampled echoes, CIT windowing, power spectra and cepstra."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSignal, EmptyWindow

# Highlight time runs in microseconds, so the band integral inside the log
# is taken per MHz; this keeps the log argument O(1).
LOG_FREQ_UNIT_HZ = 1e6
MIN_TRANSFORM_LENGTH = 1024


@dataclass(frozen=True)
class BandConstants:
    f_lo_hz: float = 30_000.0
    f_hi_hz: float = 190_000.0
    cit_us: float = 200.0
    maps_bins: int = 16
    mips_bins: int = 19
    tau_lo_us: float = 75.0
    tau_hi_us: float = 200.0

    @property
    def band_width_hz(self) -> float:
        return (self.f_hi_hz - self.f_lo_hz) / self.maps_bins

    def band_edges_hz(self) -> np.ndarray:
        return self.f_lo_hz + self.band_width_hz * np.arange(self.maps_bins + 1)


BANDS = BandConstants()


@dataclass(frozen=True, eq=False)
class SampledEcho:
    """A digitised echo waveform.

    ``samples`` is stored as a read-only float64 copy, so instances can be
    shared freely between threads.
    """

    samples: np.ndarray
    sample_interval_us: float = 1.0
    label: str | None = None

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64).ravel()
        if arr.size < 2:
            raise ValueError("an echo needs at least 2 samples")
        if not np.all(np.isfinite(arr)):
            raise ValueError("echo samples must be finite")
        if not self.sample_interval_us > 0:
            raise ValueError("sample_interval_us must be positive")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_interval_us", float(self.sample_interval_us))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_us(self) -> float:
        return self.samples.size * self.sample_interval_us

    @property
    def times_us(self) -> np.ndarray:
        return np.arange(self.samples.size) * self.sample_interval_us

    def scaled(self, factor: float) -> SampledEcho:
        return SampledEcho(self.samples * factor, self.sample_interval_us, self.label)

    def is_zero(self) -> bool:
        return not np.any(self.samples)


@dataclass(frozen=True, eq=False)
class PowerSpectrum:
    """Two-sided ``|X[k]|**2`` of a zero-padded echo.

    Bands are measured on the non-negative frequency half only.
    """

    density: np.ndarray
    freq_resolution_hz: float
    band_lo_hz: float = BANDS.f_lo_hz
    band_hi_hz: float = BANDS.f_hi_hz

    def __post_init__(self):
        if np.any(self.density < 0):
            raise ValueError("power density must be non-negative")
        if not self.band_lo_hz < self.band_hi_hz:
            raise ValueError("band_lo_hz must be below band_hi_hz")
        if self.nyquist_hz < self.band_hi_hz:
            raise ValueError(
                f"spectrum reaches only {self.nyquist_hz:.0f} Hz, "
                f"band needs {self.band_hi_hz:.0f} Hz"
            )

    @property
    def transform_length(self) -> int:
        return self.density.shape[-1]

    @property
    def nyquist_hz(self) -> float:
        return self.freq_resolution_hz * (self.transform_length // 2)

    def frequencies_hz(self) -> np.ndarray:
        """Bin-centre frequency of each non-negative-frequency bin."""
        return np.arange(self.transform_length // 2 + 1) * self.freq_resolution_hz

    def band_power(self, lo_hz: float, hi_hz: float) -> float:
        return float(band_powers(self.density, self.freq_resolution_hz, [lo_hz, hi_hz])[0])


@dataclass(frozen=True, eq=False)
class Cepstrum:
    values: np.ndarray
    quefrency_resolution_us: float

    def quefrencies_us(self) -> np.ndarray:
        return np.arange(self.values.shape[-1]) * self.quefrency_resolution_us

    def value_at(self, tau_us: float) -> float:
        return float(self.values[int(round(tau_us / self.quefrency_resolution_us))])


def default_transform_length(n_samples: int) -> int:
    n = max(MIN_TRANSFORM_LENGTH, int(n_samples))
    return 1 << (n - 1).bit_length()


def window_to_cit(echo: SampledEcho, start_us: float = 0.0,
                  length_us: float = BANDS.cit_us) -> SampledEcho:
    """Cut a CIT-long window out of ``echo``, zero-padding past its end."""
    if start_us < 0:
        raise ValueError("start_us must be non-negative")
    dt = echo.sample_interval_us
    i0 = int(round(start_us / dt))
    if i0 >= len(echo):
        raise EmptyWindow(f"window at {start_us} us starts after the echo ends")
    width = max(int(round(length_us / dt)), 2)
    out = np.zeros(width)
    chunk = echo.samples[i0:i0 + width]
    out[:chunk.size] = chunk
    return SampledEcho(out, dt, echo.label)


def power_density(samples: np.ndarray, transform_length: int) -> np.ndarray:
    """``|FFT|**2`` along the last axis; works on one echo or a stack."""
    spectrum = np.fft.fft(samples, n=transform_length, axis=-1)
    return spectrum.real ** 2 + spectrum.imag ** 2


def _band_bin_matrix(transform_length: int, df_hz: float, edges_hz) -> np.ndarray:
    # each bin stands for the cell [f - df/2, f + df/2); a bin straddling a
    # band edge is split by the share of its cell on either side
    freqs = np.arange(transform_length // 2 + 1) * df_hz
    edges = np.asarray(edges_hz, dtype=float)
    lo = np.maximum(freqs[:, None] - df_hz / 2, edges[None, :-1])
    hi = np.minimum(freqs[:, None] + df_hz / 2, edges[None, 1:])
    return np.clip(hi - lo, 0.0, None) / df_hz


def band_powers(density: np.ndarray, df_hz: float, edges_hz) -> np.ndarray:
    """Rectangle-rule band integrals of a (stack of) two-sided densities."""
    n = density.shape[-1]
    member = _band_bin_matrix(n, df_hz, edges_hz)
    return (density[..., : n // 2 + 1] @ member) * df_hz


def compute_psd(echo: SampledEcho, transform_length: int | None = None) -> PowerSpectrum:
    if transform_length is None:
        transform_length = default_transform_length(len(echo))
    if transform_length < len(echo):
        raise ValueError("transform_length shorter than the echo")
    if echo.is_zero():
        raise DegenerateSignal("all echo samples are zero")
    df = 1e6 / (transform_length * echo.sample_interval_us)
    return PowerSpectrum(power_density(echo.samples, transform_length), df)


def log_normalized_spectrum(density: np.ndarray, total_band_power) -> np.ndarray:
    """``ln(|X|^2 / integral + 1)`` with the band integral taken per MHz.

    ``total_band_power`` is the Hz-based band integral (one value per row
    of ``density``).
    """
    total = np.asarray(total_band_power, dtype=float)
    if np.any(total <= 0):
        raise DegenerateSignal("total band power must be positive")
    per_mhz = total / LOG_FREQ_UNIT_HZ
    return np.log1p(density / per_mhz[..., None])


def cepstrum_values(density: np.ndarray, total_band_power) -> np.ndarray:
    return np.fft.ifft(log_normalized_spectrum(density, total_band_power), axis=-1).real


def compute_cepstrum(psd: PowerSpectrum, total_band_power: float) -> Cepstrum:
    values = cepstrum_values(psd.density, total_band_power)
    dq_us = 1e6 / (psd.transform_length * psd.freq_resolution_hz)
    return Cepstrum(values, dq_us)
