"""File formats: measurements, curves, analysis tables and speedup heatmaps.

All CSV files use ``\\n`` line endings and ``repr`` float formatting so that
writing and re-reading is lossless and outputs are byte-stable.

Measurement file::

    # device: hikey970          (optional metadata comment lines)
    layer_id,out_channels,run_index,latency_ms
    ResNet.L16,96,0,14.02

Curve file::

    layer_id,out_channels,latency_ms
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, TextIO

from .errors import EmptyCurveError, ParseError, ValidationError
from .model import ConvLayerSpec, LAYER_FIELDS, LatencyCurve, LatencySample
from .staircase import Plateau, RegimeAssignment, SpeedupMap

MEASUREMENT_HEADER = ["layer_id", "out_channels", "run_index", "latency_ms"]
CURVE_HEADER = ["layer_id", "out_channels", "latency_ms"]
PLATEAU_HEADER = ["layer_id", "start_channels", "end_channels", "level_ms", "size"]
OPTIMAL_HEADER = ["layer_id", "out_channels", "latency_ms"]
SPEEDUP_HEADER = ["layer_id", "baseline_channels", "distance", "speedup"]
REGIME_HEADER = ["layer_id", "out_channels", "regime"]

DEFAULT_DISTANCES: tuple[int, ...] = (1, 4, 8, 16, 32, 64, 96, 128, 192, 256, 384, 512)


def _fmt(value: float) -> str:
    return repr(float(value))


def _writer(buf: TextIO):
    return csv.writer(buf, lineterminator="\n")


def _read_text(source: str | Path | TextIO) -> str:
    if hasattr(source, "read"):
        return source.read()  # type: ignore[union-attr]
    return Path(source).read_text()


def _rows(text: str, header: list[str]) -> Iterable[tuple[int, list[str]]]:
    """Yield (line number, fields) of data rows after checking the header.

    Leading ``#`` lines are metadata and skipped; blank lines are ignored.
    """
    seen_header = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if not seen_header:
            if line.startswith("#"):
                continue
            if line.strip() != ",".join(header):
                raise ParseError(f"expected header {','.join(header)!r}, got {line.strip()!r}", lineno)
            seen_header = True
            continue
        fields = next(csv.reader([line]))
        if len(fields) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(fields)}", lineno)
        yield lineno, fields
    if not seen_header:
        raise ParseError("missing header line")


def _int(text: str, what: str, lineno: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"{what} {text!r} is not an integer", lineno) from None


def _float(text: str, what: str, lineno: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"{what} {text!r} is not a number", lineno) from None
    if not math.isfinite(value):
        raise ParseError(f"{what} {text!r} is not finite", lineno)
    return value


# --- measurements -------------------------------------------------------------


@dataclass
class MeasurementFile:
    samples: list[LatencySample] = field(default_factory=list)
    device: str | None = None


def read_measurement_file(source: str | Path | TextIO) -> MeasurementFile:
    text = _read_text(source)
    device = None
    for line in text.splitlines():
        if not line.startswith("#"):
            break
        key, _, value = line[1:].partition(":")
        if key.strip() == "device":
            device = value.strip()
    samples = []
    for lineno, (layer_id, ch, run, lat) in _rows(text, MEASUREMENT_HEADER):
        latency = _float(lat, "latency_ms", lineno)
        if latency <= 0:
            raise ValidationError(f"line {lineno}: latency_ms must be > 0, got {lat}")
        try:
            samples.append(
                LatencySample(layer_id, _int(ch, "out_channels", lineno), _int(run, "run_index", lineno), latency)
            )
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
    return MeasurementFile(samples, device)


def parse_measurements(path: str | Path | TextIO) -> list[LatencySample]:
    """Samples of a measurement CSV, in file order."""
    return read_measurement_file(path).samples


def format_measurements(samples: Iterable[LatencySample], device: str | None = None) -> str:
    buf = io.StringIO()
    if device:
        buf.write(f"# device: {device}\n")
    w = _writer(buf)
    w.writerow(MEASUREMENT_HEADER)
    for s in samples:
        w.writerow([s.layer_id, s.out_channels, s.run_index, _fmt(s.latency_ms)])
    return buf.getvalue()


# --- curves -------------------------------------------------------------------


def read_curves(source: str | Path | TextIO) -> dict[str, LatencyCurve]:
    """Curves keyed by layer, in first-seen order."""
    points: dict[str, dict[int, float]] = {}
    for lineno, (layer_id, ch, lat) in _rows(_read_text(source), CURVE_HEADER):
        channels = _int(ch, "out_channels", lineno)
        latency = _float(lat, "latency_ms", lineno)
        if latency <= 0:
            raise ValidationError(f"line {lineno}: latency_ms must be > 0, got {lat}")
        layer = points.setdefault(layer_id, {})
        if channels in layer:
            raise ParseError(f"duplicate point {layer_id}@{channels}", lineno)
        layer[channels] = latency
    if not points:
        raise EmptyCurveError("curve file holds no points")
    return {layer_id: LatencyCurve(layer_id, pts) for layer_id, pts in points.items()}


def format_curves(curves: Iterable[LatencyCurve]) -> str:
    buf = io.StringIO()
    w = _writer(buf)
    w.writerow(CURVE_HEADER)
    for curve in curves:
        for c, t in curve.points.items():
            w.writerow([curve.layer_id, c, _fmt(t)])
    return buf.getvalue()


# --- layer configs ------------------------------------------------------------


def format_configs(configs: Iterable[ConvLayerSpec]) -> str:
    buf = io.StringIO()
    w = _writer(buf)
    w.writerow(LAYER_FIELDS)
    for spec in configs:
        w.writerow([getattr(spec, name) for name in LAYER_FIELDS])
    return buf.getvalue()


def read_configs(source: str | Path | TextIO) -> list[ConvLayerSpec]:
    configs = []
    for lineno, row in _rows(_read_text(source), list(LAYER_FIELDS)):
        values = {LAYER_FIELDS[0]: row[0]}
        for name, text in zip(LAYER_FIELDS[1:], row[1:]):
            values[name] = _int(text, name, lineno)
        try:
            configs.append(ConvLayerSpec(**values))
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
    return configs


# --- analysis tables ----------------------------------------------------------


def format_plateaus(per_layer: Mapping[str, list[Plateau]]) -> str:
    buf = io.StringIO()
    w = _writer(buf)
    w.writerow(PLATEAU_HEADER)
    for layer_id, plateaus in per_layer.items():
        for p in plateaus:
            w.writerow([layer_id, p.start_channels, p.end_channels, _fmt(p.level_ms), p.size])
    return buf.getvalue()


def read_plateaus(source: str | Path | TextIO) -> dict[str, list[Plateau]]:
    out: dict[str, list[Plateau]] = {}
    for lineno, (layer_id, start, end, level, size) in _rows(_read_text(source), PLATEAU_HEADER):
        out.setdefault(layer_id, []).append(
            Plateau(_int(start, "start_channels", lineno), _int(end, "end_channels", lineno),
                    _float(level, "level_ms", lineno), _int(size, "size", lineno))
        )
    return out


def format_optimal_points(per_layer: Mapping[str, list[tuple[int, float]]]) -> str:
    buf = io.StringIO()
    w = _writer(buf)
    w.writerow(OPTIMAL_HEADER)
    for layer_id, points in per_layer.items():
        for c, t in points:
            w.writerow([layer_id, c, _fmt(t)])
    return buf.getvalue()


def format_speedups(per_layer: Mapping[str, SpeedupMap]) -> str:
    buf = io.StringIO()
    w = _writer(buf)
    w.writerow(SPEEDUP_HEADER)
    for layer_id, smap in per_layer.items():
        for d, s in smap.entries.items():
            w.writerow([layer_id, smap.baseline_channels, d, _fmt(s)])
    return buf.getvalue()


def read_speedups(source: str | Path | TextIO) -> dict[str, SpeedupMap]:
    baselines: dict[str, int] = {}
    entries: dict[str, dict[int, float]] = {}
    for lineno, (layer_id, base, d, s) in _rows(_read_text(source), SPEEDUP_HEADER):
        baseline = _int(base, "baseline_channels", lineno)
        if baselines.setdefault(layer_id, baseline) != baseline:
            raise ParseError(f"{layer_id} has more than one baseline", lineno)
        entries.setdefault(layer_id, {})[_int(d, "distance", lineno)] = _float(s, "speedup", lineno)
    return {lid: SpeedupMap(baselines[lid], entries[lid]) for lid in entries}


def format_regimes(per_layer: Mapping[str, RegimeAssignment]) -> str:
    buf = io.StringIO()
    w = _writer(buf)
    w.writerow(REGIME_HEADER)
    for layer_id, assignment in per_layer.items():
        for c, label in assignment.labels.items():
            w.writerow([layer_id, c, label])
    return buf.getvalue()


# --- heatmap ------------------------------------------------------------------


@dataclass(frozen=True)
class HeatmapGrid:
    """Speedup per (layer, prune distance); missing cells are absent from ``cells``."""

    rows: tuple[str, ...]
    distances: tuple[int, ...]
    cells: Mapping[tuple[str, int], float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "distances", tuple(self.distances))
        for (layer_id, d), value in self.cells.items():
            if layer_id not in self.rows or d not in self.distances:
                raise ValidationError(f"cell ({layer_id}, {d}) outside the grid")
            if not (math.isfinite(value) and value > 0):
                raise ValidationError(f"cell ({layer_id}, {d}) must be a positive speedup")

    def get(self, layer_id: str, distance: int) -> float | None:
        return self.cells.get((layer_id, distance))


def build_heatmap(
    speedups: Mapping[str, SpeedupMap],
    distances: Iterable[int] = DEFAULT_DISTANCES,
    row_order: Iterable[str] | None = None,
) -> HeatmapGrid:
    """Sample each layer's speedup map at the given prune distances.

    Rows follow ``row_order`` (e.g. network order) when given; layers without a
    speedup map are kept as empty rows.
    """
    rows = tuple(row_order) if row_order is not None else tuple(speedups)
    distances = tuple(distances)
    cells = {}
    for layer_id in rows:
        smap = speedups.get(layer_id)
        if smap is None:
            continue
        for d in distances:
            if d in smap:
                cells[(layer_id, d)] = smap[d]
    return HeatmapGrid(rows, distances, cells)


def heatmap_to_csv(grid: HeatmapGrid) -> str:
    buf = io.StringIO()
    w = _writer(buf)
    w.writerow(["layer_id", *grid.distances])
    for layer_id in grid.rows:
        w.writerow([layer_id, *("" if (v := grid.get(layer_id, d)) is None else _fmt(v) for d in grid.distances)])
    return buf.getvalue()


def heatmap_from_csv(text: str) -> HeatmapGrid:
    reader = list(csv.reader(io.StringIO(text)))
    if not reader or not reader[0] or reader[0][0] != "layer_id":
        raise ParseError("heatmap header must start with layer_id", 1)
    distances = tuple(_int(d, "distance", 1) for d in reader[0][1:])
    rows, cells = [], {}
    for lineno, row in enumerate(reader[1:], start=2):
        if not row:
            continue
        if len(row) != len(distances) + 1:
            raise ParseError(f"expected {len(distances) + 1} fields, got {len(row)}", lineno)
        rows.append(row[0])
        for d, text_value in zip(distances, row[1:]):
            if text_value:
                cells[(row[0], d)] = _float(text_value, "speedup", lineno)
    return HeatmapGrid(tuple(rows), distances, cells)


_NEUTRAL = (247, 247, 247)
_FAST = (27, 120, 55)
_SLOW = (178, 24, 43)


def _cell_colour(value: float, span: float) -> str:
    """Diverging colour on a log2 scale; 1.0 maps to the neutral midpoint."""
    x = math.log2(value) / span if span > 0 else 0.0
    x = max(-1.0, min(1.0, x))
    end = _FAST if x > 0 else _SLOW
    a = abs(x)
    rgb = tuple(round(n + (e - n) * a) for n, e in zip(_NEUTRAL, end))
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def heatmap_to_svg(grid: HeatmapGrid, title: str = "Speedup by prune distance") -> str:
    """Self-contained SVG: one rect per filled cell, slowdown cells outlined in red."""
    cell_w, cell_h, left, top = 56, 22, 110, 48
    width = left + cell_w * len(grid.distances) + 10
    height = top + cell_h * len(grid.rows) + 10
    span = max((abs(math.log2(v)) for v in grid.cells.values()), default=0.0)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<text x="{left}" y="16" font-size="13">{_escape(title)}</text>',
    ]
    for j, d in enumerate(grid.distances):
        x = left + j * cell_w + cell_w / 2
        out.append(f'<text x="{x}" y="{top - 8}" text-anchor="middle">{d}</text>')
    for i, layer_id in enumerate(grid.rows):
        y = top + i * cell_h
        out.append(f'<text x="{left - 6}" y="{y + cell_h / 2 + 4}" text-anchor="end">{_escape(layer_id)}</text>')
        for j, d in enumerate(grid.distances):
            value = grid.get(layer_id, d)
            if value is None:
                continue
            x = left + j * cell_w
            slow = value < 1.0
            stroke = 'stroke="#67001f" stroke-width="2"' if slow else 'stroke="#ffffff" stroke-width="1"'
            out.append(
                f'<rect class="{"slowdown" if slow else "cell"}" x="{x}" y="{y}" width="{cell_w}" '
                f'height="{cell_h}" fill="{_cell_colour(value, span)}" {stroke}>'
                f"<title>{_escape(layer_id)} d={d}: {value:.3g}x</title></rect>"
            )
            out.append(f'<text x="{x + cell_w / 2}" y="{y + cell_h / 2 + 4}" text-anchor="middle">{value:.2f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def emit_heatmap(grid: HeatmapGrid, fmt: str = "csv") -> str:
    if not grid.rows or not grid.distances:
        raise ValidationError("heatmap grid is empty")
    if fmt == "csv":
        return heatmap_to_csv(grid)
    if fmt == "svg":
        return heatmap_to_svg(grid)
    raise ValidationError(f"unknown heatmap format {fmt!r}")
