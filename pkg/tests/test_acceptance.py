"""Acceptance gate: one test per criterion, each logging a PASS/FAIL line.

The lines are repeated in the pytest terminal summary under
"acceptance criteria".  Run just this file with
``pytest tests/test_acceptance.py -v`` (a few minutes on one core).
"""
import os
import subprocess
import sys

import numpy as np
import pytest

import oracle
from dolphinsonar import SampledEcho
from dolphinsonar.experiments import (
    DOLPHIN_DLT_BAND,
    DltRun,
    IsoRun,
    bottle_standin_specs,
    run_dlt,
    run_iso,
    run_matching,
)
from dolphinsonar.features import QUEFRENCY_GRID, FeatureTriple, feature_arrays
from dolphinsonar.signal_core import compute_cepstrum, compute_psd, window_to_cit
from dolphinsonar.features import extract_power
from dolphinsonar.synthesis import EchoSpec, synth_series, synth_two_highlight
from dolphinsonar.target_model import (
    Identified,
    Level,
    TargetDatabase,
    TargetImage,
    TrainingConfig,
    compare_images,
    identify_triple,
    train_target,
    with_features,
)

SEED = 0
JOBS = os.cpu_count() or 1
DLT_CENTERS = (40.0, 80.0, 120.0, 160.0, 190.0)


@pytest.fixture
def verdict(request):
    def record(name, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        print(line)
        request.node.user_properties.append(("acceptance", line))
        assert ok, line
    return record


def _fmt_points(points):
    return ", ".join(f"{p.x:g}->{'NotReached' if p.y is None else f'{p.y:g}'}"
                     f"{'' if p.feature_used is None else '/' + p.feature_used.value}"
                     for p in points)


@pytest.fixture(scope="module")
def dlt_quiet():
    run = DltRun((20.0, *DLT_CENTERS), TrainingConfig(N=100, M=50, n=50), seed=SEED)
    return {p.x: p for p in run_dlt(run, jobs=JOBS, strict=False)}


@pytest.fixture(scope="module")
def iso_points():
    run = IsoRun((0.0, 5.0, 70.0, 100.0, 130.0, 160.0, 190.0),
                 TrainingConfig(N=100, M=50, n=50), noise_db=-40.0, seed=SEED)
    return run_iso(run, jobs=JOBS)


def test_c1_dlt_reproduction(dlt_quiet, verdict):
    at160 = dlt_quiet[160.0]
    ok160 = at160.reached and at160.y <= 3.0
    ratios = {x: (p.y / x if p.reached else float("inf")) for x, p in dlt_quiet.items()
              if x in DLT_CENTERS}
    ok_band = all(r < DOLPHIN_DLT_BAND[0] for r in ratios.values())
    detail = (f"DLT(160) = {at160.y} us (need <= 3); DLT/dT = "
              + ", ".join(f"{x:g}:{r:.1%}" for x, r in ratios.items()) + " (need < 5%)")
    verdict("C1 DLT reproduction", ok160 and ok_band, detail)


def test_c2_noise_degradation(dlt_quiet, verdict):
    run = DltRun((20.0, *DLT_CENTERS), TrainingConfig(N=200, M=50, n=100), snr_db=12.0, seed=SEED)
    noisy = {p.x: p for p in run_dlt(run, jobs=JOBS, strict=False)}
    inf = float("inf")
    worse = all((noisy[x].y if noisy[x].reached else inf) >= (dlt_quiet[x].y if dlt_quiet[x].reached else inf)
                for x in DLT_CENTERS if x > 40)
    low = all(noisy[x].reached and noisy[x].y <= 2.0 for x in noisy if x <= 40)
    detail = (f"12 dB: {_fmt_points(noisy.values())}; noise-free: {_fmt_points(dlt_quiet.values())}"
              f" (need noisy >= noise-free above 40 us, <= 2 us at or below 40 us)")
    verdict("C2 noise degradation", worse and low, detail)


def _curve(points, level):
    return {p.x: p.y for p in points if p.feature_used is level}


def test_c3a_iso_short_delays(iso_points, verdict):
    maps, mips = _curve(iso_points, Level.MAPS), _curve(iso_points, Level.MIPS)
    best = {x: min((v for v in (maps[x], mips[x]) if v is not None), default=None) for x in (0.0, 5.0)}
    ok = all(v is not None and v <= -40.0 for v in best.values())
    verdict("C3a iso dT in [0,5]", ok, f"thresholds {best} dB (need <= -40)")


def test_c3b_iso_maps_plateau(iso_points, verdict):
    maps = {x: y for x, y in _curve(iso_points, Level.MAPS).items() if x >= 70}
    ok = all(y is not None and -31.0 <= y <= -24.0 for y in maps.values())
    verdict("C3b iso MaPS-only dT in [70,190]", ok, f"thresholds {maps} dB (need within [-31, -24])")


def test_c3c_iso_mips_plateau(iso_points, verdict):
    mips = {x: y for x, y in _curve(iso_points, Level.MIPS).items() if x >= 70}
    ok = all(y is not None and y <= -40.0 for y in mips.values())
    verdict("C3c iso MiPS-only dT in [70,190]", ok, f"thresholds {mips} dB (need <= -40)")


def test_c4_feature_properties(verdict):
    rng = np.random.default_rng(SEED)
    base = []
    for _ in range(1000):
        x = oracle.two_highlight(rng.uniform(0, 1), rng.uniform(1, 100))
        x[150:] = 0.0
        x[:150] += 0.01 * rng.standard_normal(150)
        base.append(x)
    scale = rng.uniform(1e-3, 1e3, 1000)
    shift = rng.integers(1, 50, 1000)
    maps, mips, power = feature_arrays([SampledEcho(x) for x in base])
    worst = {"sum": float(np.abs(maps.sum(axis=1) - 1).max())}
    for name, xs in [("scale", [x * c for x, c in zip(base, scale)]), ("polarity", [-x for x in base]),
                     ("shift", [np.roll(x, s) for x, s in zip(base, shift)])]:
        m2, c2, p2 = feature_arrays([SampledEcho(x) for x in xs])
        worst[name] = float(max(np.abs(m2 - maps).max(), np.abs(c2 - mips).max()))
        if name == "scale":
            worst["P quadratic"] = float(np.abs(p2 / (power * scale ** 2) - 1).max())
    ok = all(v <= 1e-9 for v in worst.values())
    verdict("C4 feature properties", ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + " (need <= 1e-9)")


def test_c5_oracle_equivalence(verdict):
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for n in (2, 16, 100, 200, 333, 512):
        x = rng.standard_normal(n)
        psd = compute_psd(SampledEcho(x))
        ref = oracle.dft_power(x, psd.transform_length)
        worst = max(worst, float(np.max(np.abs(psd.density - ref)) / ref.max()))
    peaks = {}
    for d in (80.0, 120.0, 160.0, 190.0):
        psd = compute_psd(window_to_cit(synth_two_highlight(EchoSpec(1.0, (d,), 0.0))))
        ceps = compute_cepstrum(psd, extract_power(psd))
        q = ceps.quefrencies_us()
        sel = (q >= QUEFRENCY_GRID.tau[0]) & (q < QUEFRENCY_GRID.tau[-1])
        peaks[d] = float(q[sel][np.argmax(ceps.values[sel])])
    located = all(QUEFRENCY_GRID.interval_of(p) == QUEFRENCY_GRID.interval_of(d) for d, p in peaks.items())
    verdict("C5 oracle equivalence", worst < 1e-9 and located,
            f"max PSD rel error {worst:.1e} (need < 1e-9); cepstral peaks {peaks}")


def test_c6_hierarchy_contract(verdict):
    flat = np.full(16, 1 / 16)

    def image(name, maps=flat, power=1.0):
        return TargetImage(name, FeatureTriple(maps, np.zeros(19), power), 0.01, 0.01, 0.01)

    db = TargetDatabase([image("quiet"), image("loud", power=4.0)])
    by_p = identify_triple(FeatureTriple(flat, np.zeros(19), 4.0), db)
    a, b = image("a"), image("b", maps=np.eye(16)[2])
    probe = FeatureTriple(flat, np.zeros(19), 1.0)
    rng = np.random.default_rng(SEED)
    stable = True
    for _ in range(200):
        a2 = with_features(a, mips=rng.normal(0, 10, 19), power=rng.uniform(1e-3, 1e3))
        b2 = with_features(b, mips=rng.normal(0, 10, 19), power=rng.uniform(1e-3, 1e3))
        stable &= compare_images(a2, b2).level is Level.MAPS
        stable &= identify_triple(probe, TargetDatabase([a2, b2])) == Identified("a", Level.MAPS)
    ok = by_p == Identified("loud", Level.P) and stable
    verdict("C6 hierarchy contract", ok, f"P-only pair -> {by_p}; MaPS verdict stable under 200 mutations: {stable}")


def _standin_report(cfg, probe_sets_per_class=5):
    train = {k: synth_series(s, 200, k) for k, s in bottle_standin_specs(SEED).items()}
    probes = []
    for r in range(1, probe_sets_per_class + 1):
        for k, s in bottle_standin_specs(SEED + r).items():
            probes.append((k, synth_series(s, cfg.n, k)))
    return train, run_matching(train, probes, cfg, SEED)


def test_c7_bottle_standin(verdict):
    _, full = _standin_report(TrainingConfig(N=25, M=50, n=15))
    train, small = _standin_report(TrainingConfig(N=10, M=50, n=5))
    # "easy" classes: largest minimum MaPS distance to any other class mean
    means = {k: feature_arrays(v)[0].mean(axis=0) for k, v in train.items()}
    sep = {k: min(np.linalg.norm(means[k] - means[o]) for o in means if o != k) for k in means}
    easy = sorted(sep, key=sep.get, reverse=True)[:3]
    ok = full.diagonal_rate() == 1.0 and small.diagonal_rate(easy) == 1.0
    verdict("C7 bottle stand-in", ok,
            f"N=25/n=15 diagonal {full.diagonal_rate():.0%}; N=10/n=5 on {easy} "
            f"{small.diagonal_rate(easy):.0%} (need 100% both)")


CLI_RUNS = [
    ["synth", "--eq4", "--a", "1", "--d", "160", "--jitter", "0.2", "--count", "100", "--seed", "7", "--out", "a.ech"],
    ["synth", "--eq4", "--a", "1", "--d", "163", "--jitter", "0.2", "--count", "100", "--seed", "8", "--out", "b.ech"],
    ["synth", "--eq5", "--a", "0.2", "--d1", "140", "--d2", "147", "--noise-peak", "-30", "--count", "30",
     "--seed", "9", "--out", "c.csv"],
    ["synth", "--eq4", "--d", "90", "--snr", "12", "--count", "3", "--seed", "4"],
    ["train", "a.ech", "--db", "db.json", "--name", "d160", "--seed", "1"],
    ["identify", "b.ech", "--db", "db.json"],
    ["discriminate", "a.ech", "b.ech", "--N", "100", "--M", "50", "--n", "50", "--seed", "7"],
    ["inspect", "c.csv", "--echo", "3"],
    ["exp-dlt", "--deltas", "30,120", "--N", "20", "--M", "10", "--n", "10", "--step", "2", "--seed", "0",
     "--out", "dlt.csv", "--plot", "dlt.svg", "--jobs", "2"],
    ["exp-iso", "--deltas", "0,100", "--a-grid", "0.003,0.01,0.03,0.06", "--N", "20", "--M", "10", "--n", "10",
     "--seed", "0", "--out", "iso.csv", "--plot", "iso.svg"],
    ["match", "--standin", "--train-count", "40", "--probe-count", "20", "--seed", "0"],
]


def _cli_session(workdir):
    outputs = []
    for argv in CLI_RUNS:
        proc = subprocess.run([sys.executable, "-m", "dolphinsonar", *argv], cwd=workdir,
                              capture_output=True)
        outputs.append((argv[0], proc.returncode, proc.stdout, proc.stderr))
    files = {p.name: p.read_bytes() for p in sorted(workdir.iterdir())}
    return outputs, files


def test_c8_cli_determinism(tmp_path, verdict):
    first, second = tmp_path / "one", tmp_path / "two"
    first.mkdir()
    second.mkdir()
    out1, files1 = _cli_session(first)
    out2, files2 = _cli_session(second)
    usage_errors = [o[0] for o in out1 if o[1] == 2]
    same = out1 == out2 and files1 == files2
    ok = same and not usage_errors
    verdict("C8 CLI determinism", ok,
            f"{len(CLI_RUNS)} invocations, {len(files1)} files, byte-identical: {same}; "
            f"usage errors: {usage_errors or 'none'}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
