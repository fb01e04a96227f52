"""Echo files, target database files, result tables and SVG plots.

Binary echo file (little-endian)::

    magic              4 bytes  b"ECH1"
    sample_interval_us float64
    echo_count         uint32
    samples_per_echo   uint32
    label_length       uint16
    label              label_length bytes, UTF-8
    samples            echo_count * samples_per_echo float64, echo-major

CSV echo file: a header row ``sample_interval_us,<dt>,label,<label>``
followed by one row of samples per echo.

All writers go through a temporary file in the target directory and an
atomic rename.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import struct
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import FormatError, SerializationError, UnsupportedVersion
from .experiments import ThresholdPoint
from .features import FeatureTriple
from .signal_core import SampledEcho
from .target_model import Level, TargetDatabase, TargetImage, TrainingConfig

MAGIC = b"ECH1"
_HEADER = struct.Struct("<4sdIIH")
SCHEMA_VERSION = 1


def atomic_write(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _is_csv(path, fmt: str | None) -> bool:
    if fmt is not None:
        if fmt not in ("binary", "csv"):
            raise ValueError(f"unknown echo format {fmt!r}")
        return fmt == "csv"
    return Path(path).suffix.lower() == ".csv"


def _common_grid(echoes: Sequence[SampledEcho]) -> tuple[float, int]:
    if not echoes:
        raise FormatError("an echo file needs at least one echo")
    dt = echoes[0].sample_interval_us
    length = len(echoes[0])
    for e in echoes:
        if e.sample_interval_us != dt or len(e) != length:
            raise FormatError("all echoes in a file must share sample interval and length")
    return dt, length


def encode_echoes(echoes: Sequence[SampledEcho], label: str | None = None) -> bytes:
    dt, length = _common_grid(echoes)
    label = label if label is not None else (echoes[0].label or "")
    raw_label = label.encode("utf-8")
    if len(raw_label) > 0xFFFF:
        raise FormatError("label too long")
    header = _HEADER.pack(MAGIC, dt, len(echoes), length, len(raw_label))
    body = np.stack([e.samples for e in echoes]).astype("<f8").tobytes()
    return header + raw_label + body


def decode_echoes(data: bytes) -> list[SampledEcho]:
    if len(data) < _HEADER.size:
        raise FormatError("file shorter than the echo header")
    magic, dt, count, length, label_len = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if not dt > 0 or count < 1 or length < 2:
        raise FormatError("header has non-positive interval or counts")
    offset = _HEADER.size + label_len
    expected = offset + count * length * 8
    if len(data) != expected:
        raise FormatError(f"expected {expected} bytes, found {len(data)}")
    label = data[_HEADER.size:offset].decode("utf-8") or None
    samples = np.frombuffer(data, dtype="<f8", offset=offset).reshape(count, length)
    return [SampledEcho(row, dt, label) for row in samples]


def encode_echoes_csv(echoes: Sequence[SampledEcho], label: str | None = None) -> str:
    dt, _ = _common_grid(echoes)
    label = label if label is not None else (echoes[0].label or "")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["sample_interval_us", repr(dt), "label", label])
    for e in echoes:
        writer.writerow([repr(float(v)) for v in e.samples])
    return buf.getvalue()


def write_echoes(path, echoes: Sequence[SampledEcho], label: str | None = None,
                 fmt: str | None = None) -> None:
    """Write echoes as binary (default) or CSV (``.csv`` suffix or ``fmt='csv'``)."""
    if not _is_csv(path, fmt):
        atomic_write(path, encode_echoes(echoes, label))
        return
    atomic_write(path, encode_echoes_csv(echoes, label).encode("utf-8"))


def read_echoes(path, fmt: str | None = None) -> list[SampledEcho]:
    data = Path(path).read_bytes()
    if not _is_csv(path, fmt):
        return decode_echoes(data)
    rows = list(csv.reader(io.StringIO(data.decode("utf-8"))))
    if len(rows) < 2 or len(rows[0]) < 2 or rows[0][0] != "sample_interval_us":
        raise FormatError("CSV echo file needs a sample_interval_us header and data rows")
    try:
        dt = float(rows[0][1])
        body = [[float(v) for v in row] for row in rows[1:] if row]
    except ValueError as exc:
        raise FormatError(f"non-numeric CSV value: {exc}") from None
    label = rows[0][3] if len(rows[0]) > 3 and rows[0][2] == "label" else ""
    if len({len(r) for r in body}) != 1:
        raise FormatError("CSV echo rows differ in length")
    if not dt > 0:
        raise FormatError("sample interval must be positive")
    return [SampledEcho(r, dt, label or None) for r in body]


def _image_record(img: TargetImage) -> dict:
    cfg = img.config_used
    return {
        "name": img.name,
        "maps": [float(v) for v in img.standard.maps],
        "mips": [float(v) for v in img.standard.mips],
        "p": float(img.standard.power),
        "radius_maps": img.radius_maps,
        "radius_mips": img.radius_mips,
        "radius_p": img.radius_p,
        "config": {"N": cfg.N, "M": cfg.M, "n": cfg.n,
                   "radius_sigma": cfg.radius_sigma, "radius_floor": cfg.radius_floor},
    }


def _image_from_record(rec: dict) -> TargetImage:
    try:
        standard = FeatureTriple(np.array(rec["maps"], dtype=float),
                                 np.array(rec["mips"], dtype=float), float(rec["p"]))
        if standard.maps.shape != (16,) or standard.mips.shape != (19,):
            raise FormatError(f"image {rec.get('name')!r} has wrong feature lengths")
        return TargetImage(str(rec["name"]), standard, float(rec["radius_maps"]),
                           float(rec["radius_mips"]), float(rec["radius_p"]),
                           TrainingConfig(**rec["config"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed image record: {exc}") from None


def dumps_db(db: TargetDatabase) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "images": [_image_record(i) for i in db]}
    try:
        return json.dumps(doc, indent=2, allow_nan=False) + "\n"
    except ValueError as exc:
        raise SerializationError(str(exc)) from None


def loads_db(text: str) -> TargetDatabase:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"database is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise FormatError("database lacks schema_version")
    if doc["schema_version"] > SCHEMA_VERSION:
        raise UnsupportedVersion(f"schema {doc['schema_version']} is newer than {SCHEMA_VERSION}")
    return TargetDatabase(_image_from_record(r) for r in doc.get("images", []))


def save_db(path, db: TargetDatabase) -> None:
    atomic_write(path, dumps_db(db).encode("utf-8"))


def load_db(path) -> TargetDatabase:
    return loads_db(Path(path).read_text(encoding="utf-8"))


def append_to_db(path, images: Sequence[TargetImage]) -> TargetDatabase:
    """Add images to the database at ``path`` (created if absent); names must stay unique."""
    db = load_db(path) if Path(path).exists() else TargetDatabase()
    for img in images:
        db.add(img)
    save_db(path, db)
    return db


CSV_HEADER = ("x", "y", "feature_used")
NOT_REACHED = "NotReached"


def _fmt(value: float) -> str:
    if not math.isfinite(value):
        raise SerializationError(f"non-finite value {value!r}")
    return repr(float(value))


def points_csv(points: Sequence[ThresholdPoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for p in points:
        y = NOT_REACHED if p.y is None else _fmt(p.y)
        level = p.feature_used.value if p.feature_used is not None else ""
        writer.writerow([_fmt(p.x), y, level])
    return buf.getvalue()


def emit_csv(points: Sequence[ThresholdPoint], path) -> None:
    atomic_write(path, points_csv(points).encode("utf-8"))


def read_points_csv(path) -> list[ThresholdPoint]:
    rows = list(csv.reader(io.StringIO(Path(path).read_text(encoding="utf-8"))))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise FormatError("threshold table header mismatch")
    out = []
    for x, y, level in rows[1:]:
        out.append(ThresholdPoint(float(x), None if y == NOT_REACHED else float(y),
                                  Level(level) if level else None))
    return out


# SVG -----------------------------------------------------------------------

_W, _H, _PAD = 640, 420, 60
_COLOURS = {Level.MAPS: "#1f77b4", Level.MIPS: "#d62728", Level.P: "#2ca02c", None: "#555555"}
_MARKERS = {Level.MAPS: "circle", Level.MIPS: "triangle", Level.P: "square", None: "circle"}


def _nice_range(lo: float, hi: float) -> tuple[float, float]:
    if lo == hi:
        return lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _marker(kind: str, x: float, y: float, colour: str) -> str:
    if kind == "triangle":
        pts = f"{x:.2f},{y - 5:.2f} {x - 5:.2f},{y + 4:.2f} {x + 5:.2f},{y + 4:.2f}"
        return f'<polygon points="{pts}" fill="{colour}"/>'
    if kind == "square":
        return f'<rect x="{x - 4:.2f}" y="{y - 4:.2f}" width="8" height="8" fill="{colour}"/>'
    if kind == "star":
        return (f'<text x="{x:.2f}" y="{y + 5:.2f}" font-size="16" text-anchor="middle" '
                f'fill="{colour}">*</text>')
    return f'<circle cx="{x:.2f}" cy="{y:.2f}" r="4" fill="{colour}"/>'


def points_svg(points: Sequence[ThresholdPoint], overlays: dict | None = None,
               title: str = "", x_label: str = "x", y_label: str = "y") -> str:
    """Scatter plot of threshold points as a standalone SVG string.

    ``overlays`` may hold ``"band": (lo_slope, hi_slope)``, drawn as dashed
    lines ``y = slope * x``, and ``"stars": [(x, y), ...]`` reference
    markers.  NotReached points are left out.
    """
    overlays = overlays or {}
    for p in points:
        _fmt(p.x)
        if p.y is not None:
            _fmt(p.y)
    shown = [p for p in points if p.y is not None]
    stars = [(float(x), float(y)) for x, y in overlays.get("stars", [])]
    band = overlays.get("band")
    xs = [p.x for p in shown] + [s[0] for s in stars] or [0.0, 1.0]
    ys = [p.y for p in shown] + [s[1] for s in stars] or [0.0, 1.0]
    x0, x1 = _nice_range(min(xs), max(xs))
    if band:
        ys = ys + [band[1] * x1, band[0] * max(x0, 0.0)]
    y0, y1 = _nice_range(min(ys), max(ys))

    def sx(x):
        return _PAD + (x - x0) / (x1 - x0) * (_W - 2 * _PAD)

    def sy(y):
        return _H - _PAD - (y - y0) / (y1 - y0) * (_H - 2 * _PAD)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>',
    ]
    for i in range(6):
        xv = x0 + (x1 - x0) * i / 5
        yv = y0 + (y1 - y0) * i / 5
        out.append(f'<text x="{sx(xv):.2f}" y="{_H - _PAD + 18}" font-size="11" '
                   f'text-anchor="middle">{xv:.4g}</text>')
        out.append(f'<text x="{_PAD - 6}" y="{sy(yv) + 4:.2f}" font-size="11" '
                   f'text-anchor="end">{yv:.4g}</text>')
    out.append(f'<text x="{_W / 2}" y="{_H - 15}" font-size="13" text-anchor="middle">'
               f'{_escape(x_label)}</text>')
    out.append(f'<text x="15" y="{_H / 2}" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 15 {_H / 2})">{_escape(y_label)}</text>')
    if title:
        out.append(f'<text x="{_W / 2}" y="25" font-size="15" text-anchor="middle">'
                   f'{_escape(title)}</text>')
    if band:
        for slope in band:
            xa, xb = max(x0, 0.0), x1
            out.append(f'<line x1="{sx(xa):.2f}" y1="{sy(slope * xa):.2f}" x2="{sx(xb):.2f}" '
                       f'y2="{sy(slope * xb):.2f}" stroke="gray" stroke-dasharray="6,4"/>')
    for x, y in stars:
        out.append(_marker("star", sx(x), sy(y), "black"))
    for p in shown:
        out.append(_marker(_MARKERS[p.feature_used], sx(p.x), sy(p.y), _COLOURS[p.feature_used]))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def emit_svg(points: Sequence[ThresholdPoint], overlays: dict | None, path, **labels) -> None:
    atomic_write(path, points_svg(points, overlays, **labels).encode("utf-8"))
