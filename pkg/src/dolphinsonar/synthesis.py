"""Synthetic multi-highlight echoes with jittered delays and white noise.

The base highlight is a damped sinusoid ``exp(-0.1 t) sin(0.875 t)`` with
``t`` in microseconds, which puts its carrier near 139 kHz.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidLevel, InvalidSpec
from .signal_core import SampledEcho


@dataclass(frozen=True)
class HighlightParams:
    decay_per_us: float = 0.1
    omega_rad_per_us: float = 0.875
    duration_us: float = 200.0
    sample_interval_us: float = 1.0

    def __post_init__(self):
        if self.decay_per_us <= 0 or self.omega_rad_per_us <= 0:
            raise InvalidSpec("decay and angular frequency must be positive")
        if self.duration_us <= 0 or self.sample_interval_us <= 0:
            raise InvalidSpec("duration and sample interval must be positive")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_us / self.sample_interval_us))

    def times_us(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.sample_interval_us


DEFAULT_HIGHLIGHT = HighlightParams()


def highlight(t_us, params: HighlightParams = DEFAULT_HIGHLIGHT):
    t = np.asarray(t_us, dtype=float)
    tc = np.maximum(t, 0.0)
    out = np.where(t >= 0, np.exp(-params.decay_per_us * tc) * np.sin(params.omega_rad_per_us * tc), 0.0)
    return float(out) if out.ndim == 0 else out


def highlight_peak(params: HighlightParams = DEFAULT_HIGHLIGHT) -> float:
    """Peak of the sampled highlight on the echo grid."""
    return float(np.max(np.abs(highlight(params.times_us(), params))))


class NoiseReference(str, enum.Enum):
    SNR_WINDOW = "snr"          # dB of signal energy over noise energy in the window
    PEAK_RELATIVE = "peak"      # dB of noise RMS relative to first-highlight peak


@dataclass(frozen=True)
class EchoSpec:
    """Recipe for a series of synthetic echoes.

    One delay gives ``f(t) + a f(t - d)``; two delays give
    ``f(t) + a f(t - d1) + a f(t - d2)`` where only ``d1`` is jittered and
    the spacing ``d2 - d1`` is preserved.
    """

    a: float
    delays_us: tuple[float, ...]
    jitter_fraction: float = 0.2
    noise_db: float | None = None
    noise_reference: NoiseReference = NoiseReference.SNR_WINDOW
    seed: int = 0
    params: HighlightParams = field(default_factory=HighlightParams)

    def __post_init__(self):
        delays = tuple(float(d) for d in np.atleast_1d(self.delays_us))
        object.__setattr__(self, "delays_us", delays)
        object.__setattr__(self, "noise_reference", NoiseReference(self.noise_reference))
        if len(delays) not in (1, 2):
            raise InvalidSpec("one or two delays expected")
        if not 0.0 <= self.jitter_fraction <= 0.5:
            raise InvalidSpec("jitter_fraction must lie in [0, 0.5]")
        if any(d < 0 for d in delays):
            raise InvalidSpec("delays must be non-negative")
        if len(delays) == 1 and delays[0] <= 0:
            raise InvalidSpec("a two-highlight delay must be positive")
        if len(delays) == 2 and not delays[0] < delays[1]:
            raise InvalidSpec("d1 must be smaller than d2")
        if max(delays) >= self.params.duration_us:
            raise InvalidSpec("delays must fall inside the echo duration")
        if self.noise_db is not None and math.isnan(self.noise_db):
            raise InvalidSpec("noise level is NaN")


def jitter_delays(center_us: float, jitter_fraction: float, rng: np.random.Generator,
                  size: int | None = None):
    """Bell-shaped delay draws: normal with sigma = range/3, hard-truncated at +-range."""
    span = jitter_fraction * center_us
    n = 1 if size is None else int(size)
    if span == 0:
        draws = np.full(n, float(center_us))
    else:
        draws = np.empty(0)
        while draws.size < n:
            z = rng.standard_normal(n - draws.size)
            draws = np.concatenate([draws, z[np.abs(z) <= 3.0]])
        draws = center_us + draws * (span / 3.0)
    return float(draws[0]) if size is None else draws


def jitter_interval(center_us: float, jitter_fraction: float) -> tuple[float, float]:
    return center_us * (1 - jitter_fraction), center_us * (1 + jitter_fraction)


def overlap_share(center_a: float, center_b: float, jitter_fraction: float = 0.2) -> float:
    """Fraction of ``center_a``'s variation interval shared with ``center_b``'s."""
    lo_a, hi_a = jitter_interval(center_a, jitter_fraction)
    lo_b, hi_b = jitter_interval(center_b, jitter_fraction)
    width = hi_a - lo_a
    if width == 0:
        return 1.0 if center_a == center_b else 0.0
    return max(0.0, min(hi_a, hi_b) - max(lo_a, lo_b)) / width


def _noise_sigma(samples: np.ndarray, level_db: float, reference: NoiseReference,
                 peak: float | None) -> float:
    if reference is NoiseReference.SNR_WINDOW:
        energy = float(np.sum(samples ** 2))
        if energy <= 0:
            raise InvalidLevel("SNR noise needs a nonzero echo")
        return math.sqrt(energy / 10 ** (level_db / 10) / samples.size)
    if peak is None:
        peak = float(np.max(np.abs(samples)))
    return peak * 10 ** (level_db / 20)


def add_white_noise(echo: SampledEcho, level_db: float,
                    reference: NoiseReference = NoiseReference.SNR_WINDOW,
                    seed: int | np.random.Generator = 0,
                    peak: float | None = None) -> SampledEcho:
    """Add seeded Gaussian white noise.

    With ``SNR_WINDOW`` the expected window energy ratio equals ``level_db``.
    With ``PEAK_RELATIVE`` the noise RMS is ``peak * 10**(level_db/20)``,
    where ``peak`` defaults to the echo's largest absolute sample.
    ``level_db = +inf`` (SNR) or ``-inf`` (peak) returns the echo unchanged.
    """
    reference = NoiseReference(reference)
    if math.isnan(level_db):
        raise InvalidLevel("noise level is NaN")
    if (reference is NoiseReference.SNR_WINDOW and level_db == math.inf) or \
            (reference is NoiseReference.PEAK_RELATIVE and level_db == -math.inf):
        return echo
    if math.isinf(level_db):
        raise InvalidLevel(f"infinite level {level_db} means unbounded noise")
    sigma = _noise_sigma(echo.samples, level_db, reference, peak)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    noisy = echo.samples + rng.normal(0.0, sigma, echo.samples.size)
    return SampledEcho(noisy, echo.sample_interval_us, echo.label)


def _render(spec: EchoSpec, first_delay: float) -> np.ndarray:
    t = spec.params.times_us()
    x = highlight(t, spec.params)
    if spec.a != 0:
        x = x + spec.a * highlight(t - first_delay, spec.params)
        if len(spec.delays_us) == 2:
            spacing = spec.delays_us[1] - spec.delays_us[0]
            x = x + spec.a * highlight(t - first_delay - spacing, spec.params)
    return x


def _synth_one(spec: EchoSpec, rng: np.random.Generator, label: str | None):
    d = float(jitter_delays(spec.delays_us[0], spec.jitter_fraction, rng))
    echo = SampledEcho(_render(spec, d), spec.params.sample_interval_us, label)
    if spec.noise_db is not None:
        peak = highlight_peak(spec.params) if spec.noise_reference is NoiseReference.PEAK_RELATIVE else None
        echo = add_white_noise(echo, spec.noise_db, spec.noise_reference, rng, peak=peak)
    return echo, d


def synth_series(spec: EchoSpec, count: int, label: str | None = None,
                 return_delays: bool = False):
    """``count`` independent echoes; echo ``i`` uses the ``i``-th child seed of ``spec.seed``."""
    if count < 1:
        raise InvalidSpec("count must be positive")
    children = np.random.SeedSequence(spec.seed).spawn(count)
    out = [_synth_one(spec, np.random.default_rng(c), label) for c in children]
    echoes = [e for e, _ in out]
    if return_delays:
        return echoes, np.array([d for _, d in out])
    return echoes


def synth_two_highlight(spec: EchoSpec) -> SampledEcho:
    if len(spec.delays_us) != 1:
        raise InvalidSpec("two-highlight echoes take exactly one delay")
    return synth_series(spec, 1)[0]


def synth_three_component(spec: EchoSpec) -> SampledEcho:
    if len(spec.delays_us) != 2:
        raise InvalidSpec("three-component echoes take two delays")
    return synth_series(spec, 1)[0]
