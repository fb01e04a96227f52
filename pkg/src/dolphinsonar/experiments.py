"""Threshold sweeps: delay difference limen (DLT), iso-sensitivity, matching.

Every trial derives its own seed from the run seed plus integer keys
(grid value, step index, repetition), so results do not depend on the
order points are evaluated in or on how many worker processes are used.
"""
from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import InsufficientBudget
from .signal_core import SampledEcho
from .synthesis import EchoSpec, HighlightParams, NoiseReference, synth_series
from .target_model import (
    HIERARCHY,
    Discrimination,
    Identified,
    Level,
    TargetDatabase,
    TrainingConfig,
    Unknown,
    discriminate_sets,
    identify,
    train_target,
)

A_MIN, A_MAX = 0.003, 0.06
DEFAULT_A_GRID = tuple(10 ** (db / 20) for db in range(-50, -24))
# dolphin DLT band, as fractions of the delay
DOLPHIN_DLT_BAND = (0.05, 0.08)


@dataclass(frozen=True)
class ThresholdPoint:
    """One threshold; ``y`` is None when the search never reached Distinct."""

    x: float
    y: float | None
    feature_used: Level | None

    @property
    def reached(self) -> bool:
        return self.y is not None


def _key(value: float) -> int:
    return int(round(value * 1000))


def _seed(*keys) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(k) for k in keys])


def _ordered_map(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _repeated(trial: Callable[[int], Discrimination], repetitions: int) -> Discrimination | None:
    """Run ``trial(rep)`` until one repetition fails; return the first result if all are Distinct."""
    first = None
    for rep in range(repetitions):
        outcome = trial(rep)
        if not outcome.distinct:
            return None
        first = first or outcome
    return first


@dataclass(frozen=True)
class DltRun:
    center_delays_us: tuple[float, ...]
    cfg: TrainingConfig = field(default_factory=TrainingConfig)
    jitter_fraction: float = 0.2
    snr_db: float | None = None
    step_us: float = 0.5
    seed: int = 0
    repetitions: int = 3
    max_fraction: float = 0.5
    a: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center_delays_us", tuple(float(d) for d in self.center_delays_us))
        if any(not 0 < d < 200 for d in self.center_delays_us):
            raise ValueError("center delays must lie in (0, 200) us")
        if self.step_us <= 0:
            raise ValueError("step_us must be positive")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")


def dlt_trial(run: DltRun, center: float, delta: float, step_index: int, rep: int) -> Discrimination:
    """One fresh discrimination of centers ``center`` vs ``center + delta``."""
    ss_a, ss_b, ss_train = _seed(run.seed, _key(center), step_index, rep).spawn(3)
    noise = dict(noise_db=run.snr_db, noise_reference=NoiseReference.SNR_WINDOW)
    spec_a = EchoSpec(run.a, (center,), run.jitter_fraction,
                      seed=int(ss_a.generate_state(1)[0]), **noise)
    spec_b = EchoSpec(run.a, (center + delta,), run.jitter_fraction,
                      seed=int(ss_b.generate_state(1)[0]), **noise)
    series_a = synth_series(spec_a, run.cfg.N)
    series_b = synth_series(spec_b, run.cfg.N)
    return discriminate_sets(series_a, series_b, run.cfg, int(ss_train.generate_state(1)[0]))


def dlt_point(run: DltRun, center: float) -> ThresholdPoint:
    # separations that push the delay out of the echo count as budget exhausted
    budget = min(run.max_fraction * center, HighlightParams().duration_us - center - 1e-6)
    k = 1
    while k * run.step_us <= budget + 1e-9:
        delta = k * run.step_us
        hit = _repeated(lambda rep: dlt_trial(run, center, delta, k, rep), run.repetitions)
        if hit is not None:
            return ThresholdPoint(center, delta, hit.level)
        k += 1
    return ThresholdPoint(center, None, None)


class _DltWorker:
    def __init__(self, run: DltRun):
        self.run = run

    def __call__(self, center: float) -> ThresholdPoint:
        return dlt_point(self.run, center)


def run_dlt(run: DltRun, jobs: int = 1, strict: bool = True) -> list[ThresholdPoint]:
    """Smallest Distinct delay separation for each center delay.

    The separation grows in ``step_us`` increments and is accepted when all
    ``repetitions`` fresh trials come out Distinct.  With ``strict`` a
    center that never separates within ``max_fraction * center`` raises
    :class:`InsufficientBudget`; otherwise it yields a NotReached point.
    """
    points = _ordered_map(_DltWorker(run), sorted(set(run.center_delays_us)), jobs)
    if strict:
        missing = [p.x for p in points if not p.reached]
        if missing:
            raise InsufficientBudget(f"no DLT found within budget at center delays {missing}")
    return sorted(points, key=lambda p: p.x)


def dlt_profile(run: DltRun, center: float, deltas: Sequence[float]) -> list[bool]:
    """Distinct/not for each separation (single repetition); for monotonicity checks."""
    return [dlt_trial(run, center, d, 10_000 + i, 0).distinct for i, d in enumerate(deltas)]


@dataclass(frozen=True)
class IsoRun:
    delta_t_values_us: tuple[float, ...]
    cfg: TrainingConfig = field(default_factory=TrainingConfig)
    a_grid: tuple[float, ...] = DEFAULT_A_GRID
    sub_delays_us: tuple[float, float] = (7.0, 10.0)
    noise_db: float = -40.0
    seed: int = 0
    jitter_fraction: float = 0.0
    repetitions: int = 3
    levels: tuple[Level, ...] = (Level.MAPS, Level.MIPS)
    # the window still covers 200 us; the extra length only lets late components exist
    echo_duration_us: float = 256.0

    def __post_init__(self):
        object.__setattr__(self, "delta_t_values_us", tuple(float(d) for d in self.delta_t_values_us))
        object.__setattr__(self, "a_grid", tuple(sorted(float(a) for a in self.a_grid)))
        object.__setattr__(self, "levels", tuple(Level(lv) for lv in self.levels))
        if any(not 0 <= d <= 190 for d in self.delta_t_values_us):
            raise ValueError("delta T values must lie in [0, 190] us")
        if not self.a_grid or any(not A_MIN - 1e-12 <= a <= A_MAX + 1e-12 for a in self.a_grid):
            raise ValueError(f"a_grid must lie within [{A_MIN}, {A_MAX}]")


def iso_trial(run: IsoRun, delta_t: float, a_index: int, level: Level, rep: int) -> Discrimination:
    level_key = HIERARCHY.index(level)
    ss_a, ss_b, ss_train = _seed(run.seed, _key(delta_t), a_index, level_key, rep).spawn(3)
    a = run.a_grid[a_index]
    params = HighlightParams(duration_us=run.echo_duration_us)
    series = []
    for sub, ss in zip(run.sub_delays_us, (ss_a, ss_b)):
        spec = EchoSpec(a, (delta_t, delta_t + sub), run.jitter_fraction, run.noise_db,
                        NoiseReference.PEAK_RELATIVE, int(ss.generate_state(1)[0]), params)
        series.append(synth_series(spec, run.cfg.N))
    return discriminate_sets(series[0], series[1], run.cfg,
                             int(ss_train.generate_state(1)[0]), levels=(level,))


def iso_point(run: IsoRun, delta_t: float, level: Level) -> ThresholdPoint:
    for i, a in enumerate(run.a_grid):
        if _repeated(lambda rep: iso_trial(run, delta_t, i, level, rep), run.repetitions):
            return ThresholdPoint(delta_t, 20 * math.log10(a), level)
    return ThresholdPoint(delta_t, None, level)


class _IsoWorker:
    def __init__(self, run: IsoRun):
        self.run = run

    def __call__(self, item) -> ThresholdPoint:
        return iso_point(self.run, *item)


def run_iso(run: IsoRun, jobs: int = 1) -> list[ThresholdPoint]:
    """Threshold second-highlight level (dB) per delta T, one curve per forced feature.

    A point with ``y = None`` means no amplitude in ``a_grid`` separated the
    two sub-delay variants.
    """
    items = [(d, lv) for d in sorted(set(run.delta_t_values_us)) for lv in run.levels]
    points = _ordered_map(_IsoWorker(run), items, jobs)
    return sorted(points, key=lambda p: (p.x, HIERARCHY.index(p.feature_used)))


UNKNOWN_COLUMN = "Unknown"
INDISTINGUISHABLE_COLUMN = "Indistinguishable"


@dataclass
class MatchReport:
    """Confusion counts: ``table[true_label][predicted]``."""

    classes: list[str]
    columns: list[str]
    table: dict[str, Counter]
    results: list[tuple[str, object]]

    def diagonal_rate(self, labels: Sequence[str] | None = None) -> float:
        labels = list(labels) if labels is not None else self.classes
        total = sum(sum(self.table[c].values()) for c in labels)
        hits = sum(self.table[c][c] for c in labels)
        return hits / total if total else float("nan")

    def rows(self) -> list[list]:
        return [[c, *[self.table[c][col] for col in self.columns]] for c in self.classes]


def _labelled(sets) -> list[tuple[str, Sequence[SampledEcho]]]:
    return list(sets.items()) if isinstance(sets, Mapping) else [(k, v) for k, v in sets]


def run_matching(db_sets, probe_sets, cfg: TrainingConfig, seed: int = 0,
                 levels: Sequence[Level] = HIERARCHY) -> MatchReport:
    """Train one image per label and identify each probe set once.

    Both arguments are mappings or ``(label, echoes)`` pairs; training sets
    sharing a label are pooled.  A probe set is identified from its first
    ``cfg.n`` echoes.
    """
    pooled: dict[str, list[SampledEcho]] = {}
    for label, echoes in _labelled(db_sets):
        pooled.setdefault(label, []).extend(echoes)
    db = TargetDatabase()
    for i, (name, echoes) in enumerate(pooled.items()):
        db.add(train_target(name, echoes, cfg, _seed(seed, i)))
    probes = _labelled(probe_sets)
    classes = list(dict.fromkeys(label for label, _ in probes))
    columns = [*db.names, UNKNOWN_COLUMN, INDISTINGUISHABLE_COLUMN]
    table = {c: Counter() for c in classes}
    results = []
    for label, echoes in probes:
        outcome = identify(echoes, db, cfg.n, levels)
        if isinstance(outcome, Identified):
            col = outcome.name
        elif isinstance(outcome, Unknown):
            col = UNKNOWN_COLUMN
        else:
            col = INDISTINGUISHABLE_COLUMN
        table[label][col] += 1
        results.append((label, outcome))
    return MatchReport(classes, columns, table, results)


# (second-highlight amplitude, (d1, d2)) per class; the two waters differ
# only in the 7 vs 10 us component spacing
BOTTLE_CLASSES = {
    "air": (0.6, (20.0, 27.0)),
    "kerosene": (0.45, (50.0, 57.0)),
    "glycerol": (0.3, (70.0, 77.0)),
    "fresh_water": (0.2, (140.0, 147.0)),
    "salt_water": (0.2, (140.0, 150.0)),
}


def bottle_standin_specs(seed: int = 0, jitter_fraction: float = 0.05,
                         noise_db: float = -30.0) -> dict[str, EchoSpec]:
    """Five three-component echo classes standing in for fluid-filled bottles."""
    return {
        name: EchoSpec(a, delays, jitter_fraction, noise_db, NoiseReference.PEAK_RELATIVE,
                       int(_seed(seed, i).generate_state(1)[0]))
        for i, (name, (a, delays)) in enumerate(BOTTLE_CLASSES.items())
    }
