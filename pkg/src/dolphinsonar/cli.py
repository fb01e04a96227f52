"""Command-line entry point: ``dolphinsonar <command> ...``.

Exit codes: 0 success, 1 domain outcome failure (unknown target with
``--strict``, threshold not reached), 2 usage or file-format errors.
Results go to stdout (CSV) or ``--out``; diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from . import io_store
from .errors import FormatError, InvalidLevel, InvalidSpec, SonarError
from .experiments import (
    DEFAULT_A_GRID,
    DOLPHIN_DLT_BAND,
    DltRun,
    IsoRun,
    bottle_standin_specs,
    run_dlt,
    run_iso,
    run_matching,
)
from .features import extract_triple
from .synthesis import EchoSpec, NoiseReference, synth_series
from .target_model import (
    HIERARCHY,
    Identified,
    Indistinguishable,
    Level,
    TrainingConfig,
    discriminate_sets,
    identify,
    train_target,
)

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _levels(text: str) -> tuple[Level, ...]:
    try:
        return tuple(Level(v.strip()) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("levels are MaPS, MiPS, P")


def _add_training(p: argparse.ArgumentParser, N=100, M=50, n=50) -> None:
    p.add_argument("--N", type=int, default=N, help="echoes in a feature standard")
    p.add_argument("--M", type=int, default=M, help="training subsets")
    p.add_argument("--n", type=int, default=n, help="echoes per training subset / probe")
    p.add_argument("--radius-sigma", type=float, default=3.0)


def _cfg(args) -> TrainingConfig:
    try:
        return TrainingConfig(args.N, args.M, args.n, args.radius_sigma)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def _add_seed(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, required=True, help="random seed (mandatory)")


def _add_output(p: argparse.ArgumentParser, plot: bool = False) -> None:
    p.add_argument("--out", type=Path, help="write the CSV table here instead of stdout")
    if plot:
        p.add_argument("--plot", type=Path, help="also write an SVG plot")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for the sweep")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dolphinsonar",
                                     description="Dolphin-sonar echo features and experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic echoes")
    kind = p.add_mutually_exclusive_group()
    kind.add_argument("--eq4", action="store_true", help="two highlights f(t) + a f(t-d) (default)")
    kind.add_argument("--eq5", action="store_true", help="three components, spacing d2-d1 kept")
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--d", type=float, help="second-highlight delay, us (two-highlight echoes)")
    p.add_argument("--d1", type=float)
    p.add_argument("--d2", type=float)
    p.add_argument("--jitter", type=float, default=0.2)
    noise = p.add_mutually_exclusive_group()
    noise.add_argument("--snr", type=float, help="white noise at this window SNR, dB")
    noise.add_argument("--noise-peak", type=float, help="noise RMS in dB re first-highlight peak")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--label", default="")
    p.add_argument("--format", choices=["binary", "csv"])
    p.add_argument("--out", type=Path, help="echo file (binary unless .csv); stdout CSV otherwise")
    _add_seed(p)

    p = sub.add_parser("train", help="train a target image and append it to a database")
    p.add_argument("echo_files", nargs="+", type=Path)
    p.add_argument("--db", type=Path, required=True)
    p.add_argument("--name", help="target name (defaults to the first file's label)")
    _add_training(p)
    _add_seed(p)

    p = sub.add_parser("identify", help="identify a probe echo file against a database")
    p.add_argument("echo_file", type=Path)
    p.add_argument("--db", type=Path, required=True)
    p.add_argument("--n", type=int, help="probe echoes averaged (default: the images' n)")
    p.add_argument("--strict", action="store_true", help="exit 1 unless identified")

    p = sub.add_parser("discriminate", help="compare two echo series feature by feature")
    p.add_argument("file_a", type=Path)
    p.add_argument("file_b", type=Path)
    p.add_argument("--levels", type=_levels, default=HIERARCHY)
    _add_training(p)
    _add_seed(p)

    p = sub.add_parser("inspect", help="print the features of one echo")
    p.add_argument("echo_file", type=Path)
    p.add_argument("--echo", type=int, default=0)

    p = sub.add_parser("exp-dlt", help="delay difference-limen sweep")
    p.add_argument("--deltas", type=_floats, default=[20, 40, 80, 120, 160, 190],
                   help="center delays, us")
    p.add_argument("--snr", type=float, help="window SNR in dB (default: noise-free)")
    p.add_argument("--jitter", type=float, default=0.2)
    p.add_argument("--step", type=float, default=0.5)
    p.add_argument("--repetitions", type=int, default=3)
    _add_training(p)
    _add_seed(p)
    _add_output(p, plot=True)

    p = sub.add_parser("exp-iso", help="iso-sensitivity sweep (MaPS-only and MiPS-only)")
    p.add_argument("--deltas", type=_floats, default=[0, 5, 30, 70, 100, 130, 160, 190])
    p.add_argument("--a-grid", type=_floats, default=list(DEFAULT_A_GRID),
                   help="second-highlight amplitudes within [0.003, 0.06]")
    p.add_argument("--noise-db", type=float, default=-40.0)
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--stars", type=Path, help="CSV of x,y reference points drawn on the plot")
    _add_training(p)
    _add_seed(p)
    _add_output(p, plot=True)

    p = sub.add_parser("match", help="train on labelled files, identify probe files")
    p.add_argument("--db-files", nargs="*", type=Path, default=[])
    p.add_argument("--probe-files", nargs="*", type=Path, default=[])
    p.add_argument("--standin", action="store_true",
                   help="use five synthetic bottle classes instead of files")
    p.add_argument("--train-count", type=int, default=200)
    p.add_argument("--probe-count", type=int, default=50)
    p.add_argument("--out", type=Path)
    _add_training(p, N=25, M=50, n=15)
    _add_seed(p)
    return parser


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        io_store.atomic_write(out, text.encode("utf-8"))


def _label_of(echoes, path: Path) -> str:
    return echoes[0].label or path.stem


def cmd_synth(args) -> int:
    if args.eq5:
        if args.d1 is None or args.d2 is None:
            raise FormatError("--eq5 needs --d1 and --d2")
        delays = (args.d1, args.d2)
    else:
        if args.d is None:
            raise FormatError("--eq4 needs --d")
        delays = (args.d,)
    if args.snr is not None:
        noise_db, ref = args.snr, NoiseReference.SNR_WINDOW
    elif args.noise_peak is not None:
        noise_db, ref = args.noise_peak, NoiseReference.PEAK_RELATIVE
    else:
        noise_db, ref = None, NoiseReference.SNR_WINDOW
    spec = EchoSpec(args.a, delays, args.jitter, noise_db, ref, args.seed)
    echoes = synth_series(spec, args.count, label=args.label or None)
    if args.out is None:
        sys.stdout.write(io_store.encode_echoes_csv(echoes, args.label))
    else:
        io_store.write_echoes(args.out, echoes, args.label, fmt=args.format)
    return EXIT_OK


def cmd_train(args) -> int:
    echoes = []
    for path in args.echo_files:
        echoes.extend(io_store.read_echoes(path))
    name = args.name or _label_of(echoes, args.echo_files[0])
    image = train_target(name, echoes, _cfg(args), args.seed)
    io_store.append_to_db(args.db, [image])
    print(f"trained {name}: radius MaPS={image.radius_maps:.6g} "
          f"MiPS={image.radius_mips:.6g} P={image.radius_p:.6g}", file=sys.stderr)
    return EXIT_OK


def _describe(result) -> str:
    if isinstance(result, Identified):
        return f"IDENTIFIED {result.name} at {result.level.value}"
    if isinstance(result, Indistinguishable):
        return "INDISTINGUISHABLE " + ",".join(result.names)
    return "UNKNOWN"


def cmd_identify(args) -> int:
    db = io_store.load_db(args.db)
    n = args.n
    if n is None:
        ns = {img.config_used.n for img in db}
        if len(ns) != 1:
            raise FormatError("database images use different n; pass --n")
        n = ns.pop()
    result = identify(io_store.read_echoes(args.echo_file), db, n)
    print(_describe(result))
    if args.strict and not isinstance(result, Identified):
        return EXIT_DOMAIN
    return EXIT_OK


def cmd_discriminate(args) -> int:
    a = io_store.read_echoes(args.file_a)
    b = io_store.read_echoes(args.file_b)
    print(discriminate_sets(a, b, _cfg(args), args.seed, levels=args.levels))
    return EXIT_OK


def cmd_inspect(args) -> int:
    echoes = io_store.read_echoes(args.echo_file)
    if not 0 <= args.echo < len(echoes):
        raise FormatError(f"file holds {len(echoes)} echoes; --echo {args.echo} is out of range")
    t = extract_triple(echoes[args.echo])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["feature", "index", "value"])
    for i, v in enumerate(t.maps, 1):
        writer.writerow(["MaPS", i, repr(float(v))])
    for i, v in enumerate(t.mips, 1):
        writer.writerow(["MiPS", i, repr(float(v))])
    writer.writerow(["P", 1, repr(t.power)])
    sys.stdout.write(buf.getvalue())
    print(f"MaPS sum = {t.maps.sum():.12f}", file=sys.stderr)
    return EXIT_OK


def _finish_sweep(points, args, overlays, **labels) -> int:
    _emit(io_store.points_csv(points), args.out)
    if args.plot is not None:
        io_store.emit_svg(points, overlays, args.plot, **labels)
    missing = [p.x for p in points if not p.reached]
    if missing:
        print(f"threshold not reached at x = {missing}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


def cmd_exp_dlt(args) -> int:
    run = DltRun(tuple(args.deltas), _cfg(args), args.jitter, args.snr, args.step,
                 args.seed, args.repetitions)
    points = run_dlt(run, jobs=args.jobs, strict=False)
    return _finish_sweep(points, args, {"band": DOLPHIN_DLT_BAND},
                         title="Delay difference limen", x_label="center delay (us)",
                         y_label="DLT (us)")


def cmd_exp_iso(args) -> int:
    run = IsoRun(tuple(args.deltas), _cfg(args), tuple(args.a_grid), noise_db=args.noise_db,
                 seed=args.seed, jitter_fraction=args.jitter, repetitions=args.repetitions)
    points = run_iso(run, jobs=args.jobs)
    overlays = {}
    if args.stars is not None:
        rows = [r for r in csv.reader(args.stars.read_text().splitlines())
                if r and not r[0].lstrip().startswith("#")]
        try:
            overlays["stars"] = [(float(r[0]), float(r[1])) for r in rows]
        except (ValueError, IndexError):
            raise FormatError("--stars file must hold numeric x,y rows") from None
    return _finish_sweep(points, args, overlays, title="Iso-sensitivity",
                         x_label="delta T (us)", y_label="threshold (dB)")


def cmd_match(args) -> int:
    cfg = _cfg(args)
    if args.standin:
        train_specs = bottle_standin_specs(args.seed)
        probe_specs = bottle_standin_specs(args.seed + 1)
        db_sets = {k: synth_series(s, args.train_count, k) for k, s in train_specs.items()}
        probes = {k: synth_series(s, args.probe_count, k) for k, s in probe_specs.items()}
    else:
        if not args.db_files or not args.probe_files:
            raise FormatError("match needs --db-files and --probe-files, or --standin")
        db_sets = []
        for path in args.db_files:
            echoes = io_store.read_echoes(path)
            db_sets.append((_label_of(echoes, path), echoes))
        probes = []
        for path in args.probe_files:
            echoes = io_store.read_echoes(path)
            probes.append((_label_of(echoes, path), echoes))
    report = run_matching(db_sets, probes, cfg, args.seed)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["true", *report.columns])
    writer.writerows(report.rows())
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "identify": cmd_identify,
    "discriminate": cmd_discriminate,
    "inspect": cmd_inspect,
    "exp-dlt": cmd_exp_dlt,
    "exp-iso": cmd_exp_iso,
    "match": cmd_match,
}


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (FormatError, InvalidSpec, InvalidLevel, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SonarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
