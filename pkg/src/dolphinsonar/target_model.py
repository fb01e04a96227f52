"""Target images, hierarchical identification and set discrimination.

A target image is three feature standards plus one confidence radius per
feature.  Probes are compared senior to minor (MaPS, then MiPS, then P);
each level only narrows the candidate set left by the level above it.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    DuplicateTarget,
    EmptyDatabase,
    InsufficientEchoes,
    NonPositivePower,
)
from .features import FeatureTriple, feature_arrays
from .signal_core import SampledEcho


class Level(str, enum.Enum):
    MAPS = "MaPS"
    MIPS = "MiPS"
    P = "P"


HIERARCHY = (Level.MAPS, Level.MIPS, Level.P)


@dataclass(frozen=True)
class TrainingConfig:
    N: int = 100
    M: int = 50
    n: int = 50
    radius_sigma: float = 3.0
    radius_floor: float = 1e-12

    def __post_init__(self):
        if self.N < 2 or self.M < 2 or self.n < 1:
            raise ValueError("need N >= 2, M >= 2 and n >= 1")
        if self.n > self.N:
            raise ValueError("n must not exceed N")
        if self.radius_sigma < 0 or not self.radius_floor > 0:
            raise ValueError("radius_sigma must be >= 0 and radius_floor > 0")


def feature_distance_maps(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


def feature_distance_mips(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


def feature_distance_p(a: float, b: float) -> float:
    """``|ln(a / b)|``: relative energy distance, indifferent to units."""
    if not (a > 0 and b > 0):
        raise NonPositivePower(f"power values must be positive, got {a} and {b}")
    return abs(math.log(a) - math.log(b))


def level_distance(level: Level, a: FeatureTriple, b: FeatureTriple) -> float:
    if level is Level.MAPS:
        return feature_distance_maps(a.maps, b.maps)
    if level is Level.MIPS:
        return feature_distance_mips(a.mips, b.mips)
    return feature_distance_p(a.power, b.power)


@dataclass(frozen=True)
class TargetImage:
    name: str
    standard: FeatureTriple
    radius_maps: float
    radius_mips: float
    radius_p: float
    config_used: TrainingConfig = field(default_factory=TrainingConfig)

    def radius(self, level: Level) -> float:
        return {Level.MAPS: self.radius_maps, Level.MIPS: self.radius_mips,
                Level.P: self.radius_p}[Level(level)]

    def admits(self, probe: FeatureTriple, level: Level) -> bool:
        """True if ``probe`` falls inside this image's confidence radius at ``level``."""
        return level_distance(level, probe, self.standard) <= self.radius(level)


class TargetDatabase:
    """Append-only, name-unique collection of target images."""

    def __init__(self, images: Iterable[TargetImage] = ()):
        self._images: list[TargetImage] = []
        for img in images:
            self.add(img)

    def add(self, image: TargetImage) -> None:
        if image.name in self:
            raise DuplicateTarget(f"target {image.name!r} already in database")
        self._images.append(image)

    def merged(self, other: TargetDatabase) -> TargetDatabase:
        return TargetDatabase([*self._images, *other])

    def __contains__(self, name) -> bool:
        return any(img.name == name for img in self._images)

    def __getitem__(self, name: str) -> TargetImage:
        for img in self._images:
            if img.name == name:
                return img
        raise KeyError(name)

    def __iter__(self) -> Iterator[TargetImage]:
        return iter(tuple(self._images))

    def __len__(self) -> int:
        return len(self._images)

    @property
    def names(self) -> list[str]:
        return [img.name for img in self._images]


@dataclass(frozen=True)
class Unknown:
    pass


@dataclass(frozen=True)
class Identified:
    name: str
    level: Level


@dataclass(frozen=True)
class Indistinguishable:
    names: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) < 2:
            raise ValueError("Indistinguishable needs at least two names")


IdentificationResult = Unknown | Identified | Indistinguishable


def _radius(distances: np.ndarray, cfg: TrainingConfig) -> float:
    spread = float(np.std(distances, ddof=1)) if distances.size > 1 else 0.0
    return max(float(np.mean(distances)) + cfg.radius_sigma * spread, cfg.radius_floor)


def train_from_features(name: str, maps: np.ndarray, mips: np.ndarray, power: np.ndarray,
                        cfg: TrainingConfig, rng_seed) -> TargetImage:
    """Train an image from precomputed per-echo feature arrays."""
    total = len(power)
    if total < cfg.N:
        raise InsufficientEchoes(f"{name!r}: {total} echoes, N = {cfg.N} required")
    rng = np.random.default_rng(rng_seed)
    std_idx = rng.choice(total, size=cfg.N, replace=False)
    standard = FeatureTriple(maps[std_idx].mean(axis=0), mips[std_idx].mean(axis=0),
                             power[std_idx].mean())
    if standard.power <= 0:
        raise NonPositivePower(f"{name!r}: standard power is zero")
    d_maps = np.empty(cfg.M)
    d_mips = np.empty(cfg.M)
    d_p = np.empty(cfg.M)
    for k in range(cfg.M):
        idx = rng.choice(total, size=cfg.n, replace=False)
        d_maps[k] = feature_distance_maps(maps[idx].mean(axis=0), standard.maps)
        d_mips[k] = feature_distance_mips(mips[idx].mean(axis=0), standard.mips)
        d_p[k] = feature_distance_p(float(power[idx].mean()), standard.power)
    return TargetImage(name, standard, _radius(d_maps, cfg), _radius(d_mips, cfg),
                       _radius(d_p, cfg), cfg)


def train_target(name: str, echoes: Sequence[SampledEcho], cfg: TrainingConfig,
                 rng_seed) -> TargetImage:
    """Train one target image.

    The standard averages ``cfg.N`` echoes drawn without replacement.  Each
    of ``cfg.M`` random ``cfg.n``-echo subsets gives a training average; the
    radius per feature is mean + ``radius_sigma`` * std of the subset
    distances to the standard, floored at ``radius_floor``.
    """
    if len(echoes) < cfg.N:
        raise InsufficientEchoes(f"{name!r}: {len(echoes)} echoes, N = {cfg.N} required")
    maps, mips, power = feature_arrays(echoes)
    return train_from_features(name, maps, mips, power, cfg, rng_seed)


def probe_average(probe_echoes: Sequence[SampledEcho], n: int) -> FeatureTriple:
    if len(probe_echoes) < n:
        raise InsufficientEchoes(f"probe has {len(probe_echoes)} echoes, n = {n} required")
    maps, mips, power = feature_arrays(list(probe_echoes)[:n])
    return FeatureTriple(maps.mean(axis=0), mips.mean(axis=0), power.mean())


def identify_triple(probe: FeatureTriple, db: TargetDatabase,
                    levels: Sequence[Level] = HIERARCHY) -> IdentificationResult:
    """Senior-to-minor candidate filtering of a probe average."""
    candidates = list(db)
    if not candidates:
        raise EmptyDatabase("cannot identify against an empty database")
    for level in levels:
        candidates = [img for img in candidates if img.admits(probe, level)]
        if not candidates:
            return Unknown()
        if len(candidates) == 1:
            return Identified(candidates[0].name, Level(level))
    return Indistinguishable(tuple(img.name for img in candidates))


def identify(probe_echoes: Sequence[SampledEcho], db: TargetDatabase, n: int,
             levels: Sequence[Level] = HIERARCHY) -> IdentificationResult:
    if len(db) == 0:
        raise EmptyDatabase("cannot identify against an empty database")
    return identify_triple(probe_average(probe_echoes, n), db, levels)


@dataclass(frozen=True)
class Discrimination:
    """Outcome of comparing two trained images; ``level`` is None when indistinguishable."""

    level: Level | None
    distances: tuple[float, ...] = ()
    thresholds: tuple[float, ...] = ()

    @property
    def distinct(self) -> bool:
        return self.level is not None

    def __str__(self):
        return f"DISTINCT at {self.level.value}" if self.distinct else "INDISTINGUISHABLE"


def compare_images(a: TargetImage, b: TargetImage,
                   levels: Sequence[Level] = HIERARCHY) -> Discrimination:
    """First level whose standards are further apart than the sum of radii.

    Levels below the distinctive one are never looked at.
    """
    distances, thresholds = [], []
    for level in levels:
        d = level_distance(level, a.standard, b.standard)
        limit = a.radius(level) + b.radius(level)
        distances.append(d)
        thresholds.append(limit)
        if d > limit:
            return Discrimination(Level(level), tuple(distances), tuple(thresholds))
    return Discrimination(None, tuple(distances), tuple(thresholds))


def discriminate_sets(series_a: Sequence[SampledEcho], series_b: Sequence[SampledEcho],
                      cfg: TrainingConfig, rng_seed: int,
                      levels: Sequence[Level] = HIERARCHY) -> Discrimination:
    seeds = np.random.SeedSequence(rng_seed).spawn(2)
    img_a = train_target("a", series_a, cfg, seeds[0])
    img_b = train_target("b", series_b, cfg, seeds[1])
    return compare_images(img_a, img_b, levels)


def with_features(image: TargetImage, **changes) -> TargetImage:
    """Copy of ``image`` with some standard fields replaced (maps/mips/power)."""
    return replace(image, standard=replace(image.standard, **changes))
