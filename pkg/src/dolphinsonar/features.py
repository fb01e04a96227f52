"""Hierarchical echo features: MaPS, MiPS and P.

MaPS (macrostructure of the power spectrum) is the fraction of band energy
in each 10 kHz slice of 30-190 kHz.  MiPS (microstructure) integrates the
cepstrum of the normalised spectrum over 19 quefrency intervals between
75 and 200 us.  P is the band energy itself.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateSignal, EmptySeries
from .signal_core import (
    BANDS,
    Cepstrum,
    PowerSpectrum,
    SampledEcho,
    band_powers,
    cepstrum_values,
    compute_cepstrum,
    compute_psd,
    default_transform_length,
    power_density,
    window_to_cit,
)


@dataclass(frozen=True, eq=False)
class QuefrencyGrid:
    """Edges of the MiPS integration intervals, in microseconds."""

    tau: np.ndarray

    @classmethod
    def default(cls) -> QuefrencyGrid:
        ratio = BANDS.tau_hi_us / BANDS.tau_lo_us
        j = np.arange(BANDS.mips_bins + 1)
        return cls(BANDS.tau_lo_us * ratio ** (j / BANDS.mips_bins))

    @property
    def weights(self) -> np.ndarray:
        return 1.0 / (1.0 + 0.05 * np.arange(len(self.tau) - 1))

    def interval_of(self, tau_us: float) -> int | None:
        """Index of the interval holding ``tau_us`` or None if outside."""
        k = int(np.searchsorted(self.tau, tau_us, side="right")) - 1
        return k if 0 <= k < len(self.tau) - 1 else None


QUEFRENCY_GRID = QuefrencyGrid.default()


@dataclass(frozen=True, eq=False)
class FeatureTriple:
    """One echo image: MaPS 16-vector, MiPS 19-vector and power P."""

    maps: np.ndarray
    mips: np.ndarray
    power: float

    def __post_init__(self):
        object.__setattr__(self, "maps", np.asarray(self.maps, dtype=float))
        object.__setattr__(self, "mips", np.asarray(self.mips, dtype=float))
        object.__setattr__(self, "power", float(self.power))

    def __eq__(self, other):
        if not isinstance(other, FeatureTriple):
            return NotImplemented
        return (np.array_equal(self.maps, other.maps)
                and np.array_equal(self.mips, other.mips)
                and self.power == other.power)

    def __repr__(self):
        return (f"FeatureTriple(maps={np.round(self.maps, 4).tolist()}, "
                f"mips={np.round(self.mips, 6).tolist()}, power={self.power:.6g})")


def extract_power(psd: PowerSpectrum) -> float:
    return float(psd.band_power(BANDS.f_lo_hz, BANDS.f_hi_hz))


def extract_maps(psd: PowerSpectrum) -> np.ndarray:
    bands = band_powers(psd.density, psd.freq_resolution_hz, BANDS.band_edges_hz())
    total = bands.sum()
    if not total > 0:
        raise DegenerateSignal("no energy inside 30-190 kHz")
    return bands / total


@lru_cache(maxsize=32)
def _mips_matrix(n_quefrency: int, dq_us: float, edges: tuple) -> np.ndarray:
    q = np.arange(n_quefrency) * dq_us
    lo = np.asarray(edges[:-1])
    hi = np.asarray(edges[1:])
    member = (q[:, None] >= lo[None, :]) & (q[:, None] < hi[None, :])
    return member.astype(float) * dq_us


def extract_mips(cepstrum: Cepstrum, grid: QuefrencyGrid = QUEFRENCY_GRID) -> np.ndarray:
    values = cepstrum.values
    dq = cepstrum.quefrency_resolution_us
    if values.shape[-1] * dq < grid.tau[-1]:
        raise ValueError("cepstrum does not reach the top of the quefrency grid")
    half = values.shape[-1] // 2 + 1
    integrals = values[..., :half] @ _mips_matrix(half, dq, tuple(grid.tau))
    return grid.weights * integrals


def extract_triple(echo: SampledEcho) -> FeatureTriple:
    if echo.is_zero():
        raise DegenerateSignal("all echo samples are zero")
    windowed = window_to_cit(echo)
    psd = compute_psd(windowed)
    p = extract_power(psd)
    if not p > 0:
        raise DegenerateSignal("no energy inside 30-190 kHz")
    return FeatureTriple(extract_maps(psd), extract_mips(compute_cepstrum(psd, p)), p)


def _feature_block(samples: np.ndarray, dt_us: float):
    nfft = default_transform_length(samples.shape[-1])
    df = 1e6 / (nfft * dt_us)
    density = power_density(samples, nfft)
    bands = band_powers(density, df, BANDS.band_edges_hz())
    power = bands.sum(axis=-1)
    if np.any(power <= 0):
        raise DegenerateSignal("an echo has no energy inside 30-190 kHz")
    maps = bands / power[:, None]
    ceps = Cepstrum(cepstrum_values(density, power), dt_us)
    return maps, extract_mips(ceps), power


def feature_arrays(echoes: Sequence[SampledEcho]):
    """Stacked ``(maps, mips, power)`` arrays for a series of echoes.

    Vectorised equivalent of calling :func:`extract_triple` per echo.
    """
    if len(echoes) == 0:
        raise EmptySeries("no echoes given")
    windows = [window_to_cit(e) for e in echoes]
    if any(w.is_zero() for w in windows):
        raise DegenerateSignal("an echo is all zeros inside the CIT window")
    groups: dict[tuple, list[int]] = {}
    for i, w in enumerate(windows):
        groups.setdefault((w.sample_interval_us, len(w)), []).append(i)
    maps = np.empty((len(echoes), BANDS.maps_bins))
    mips = np.empty((len(echoes), BANDS.mips_bins))
    power = np.empty(len(echoes))
    for (dt, _), idx in groups.items():
        block = np.stack([windows[i].samples for i in idx])
        maps[idx], mips[idx], power[idx] = _feature_block(block, dt)
    return maps, mips, power


def triples_from_arrays(maps, mips, power) -> list[FeatureTriple]:
    return [FeatureTriple(a, b, c) for a, b, c in zip(maps, mips, power)]


def average_features(triples: Iterable[FeatureTriple]) -> FeatureTriple:
    """Componentwise mean of a series of echo images.

    Averaging happens in feature space; averaging waveforms would cancel
    echoes whose highlights do not line up.
    """
    triples = list(triples)
    if not triples:
        raise EmptySeries("cannot average an empty series")
    return FeatureTriple(
        np.mean([t.maps for t in triples], axis=0),
        np.mean([t.mips for t in triples], axis=0),
        float(np.mean([t.power for t in triples])),
    )
