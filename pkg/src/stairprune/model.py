"""Core domain types: layer geometry, networks and latency measurements."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable, Mapping

from .errors import EmptyCurveError, GeometryError, ValidationError


def _check_count(name: str, value: object, minimum: int) -> None:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValidationError(f"{name} must be >= {minimum}, got {value}")


def _output_extent(extent: int, kernel: int, stride: int, padding: int, axis: str) -> int:
    span = extent + 2 * padding - kernel
    if span < 0:
        raise GeometryError(
            f"kernel {kernel} does not fit {axis} extent {extent} with padding {padding}"
        )
    if span % stride:
        raise GeometryError(
            f"({extent} + 2*{padding} - {kernel}) / {stride} is not integral along {axis}"
        )
    return span // stride + 1


@dataclass(frozen=True)
class ConvLayerSpec:
    """Geometry of one convolutional layer.

    ``out_channels`` is the filter count that pruning shrinks. Construction
    validates every count and requires the output spatial size to be an exact
    integer; nothing is silently floored.
    """

    layer_id: str
    in_channels: int
    out_channels: int
    kernel_h: int
    kernel_w: int
    input_h: int
    input_w: int
    stride: int = 1
    padding: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.layer_id, str) or not self.layer_id:
            raise ValidationError("layer_id must be a non-empty string")
        for name in ("in_channels", "out_channels", "kernel_h", "kernel_w",
                     "input_h", "input_w", "stride"):
            _check_count(name, getattr(self, name), 1)
        _check_count("padding", self.padding, 0)
        # raises GeometryError on non-integral output
        self.output_shape

    @property
    def output_h(self) -> int:
        return _output_extent(self.input_h, self.kernel_h, self.stride, self.padding, "height")

    @property
    def output_w(self) -> int:
        return _output_extent(self.input_w, self.kernel_w, self.stride, self.padding, "width")

    @property
    def output_shape(self) -> tuple[int, int]:
        return self.output_h, self.output_w

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> "ConvLayerSpec":
        names = [f.name for f in fields(cls)]
        missing = [n for n in names if n not in data]
        if missing:
            raise ValidationError(f"layer record missing fields: {', '.join(missing)}")
        return cls(**{n: data[n] for n in names})


LAYER_FIELDS: tuple[str, ...] = tuple(f.name for f in fields(ConvLayerSpec))


def make_layer_spec(
    layer_id: str,
    in_channels: int,
    out_channels: int,
    kernel_h: int,
    kernel_w: int | None = None,
    input_h: int = 1,
    input_w: int | None = None,
    stride: int = 1,
    padding: int = 0,
) -> ConvLayerSpec:
    """Build a validated :class:`ConvLayerSpec`.

    ``kernel_w`` and ``input_w`` default to their height counterparts so square
    layers can be written compactly.
    """
    return ConvLayerSpec(
        layer_id=layer_id,
        in_channels=in_channels,
        out_channels=out_channels,
        kernel_h=kernel_h,
        kernel_w=kernel_h if kernel_w is None else kernel_w,
        input_h=input_h,
        input_w=input_h if input_w is None else input_w,
        stride=stride,
        padding=padding,
    )


@dataclass(frozen=True)
class NetworkModel:
    name: str
    layers: tuple[ConvLayerSpec, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "layers", tuple(self.layers))
        seen: set[str] = set()
        for layer in self.layers:
            if not isinstance(layer, ConvLayerSpec):
                raise ValidationError(f"network layers must be ConvLayerSpec, got {layer!r}")
            if layer.layer_id in seen:
                raise ValidationError(f"duplicate layer_id {layer.layer_id!r} in {self.name}")
            seen.add(layer.layer_id)

    @property
    def layer_ids(self) -> list[str]:
        return [layer.layer_id for layer in self.layers]

    def layer(self, layer_id: str) -> ConvLayerSpec:
        for layer in self.layers:
            if layer.layer_id == layer_id:
                return layer
        raise ValidationError(f"network {self.name!r} has no layer {layer_id!r}")

    def to_json(self) -> str:
        payload = {"name": self.name, "layers": [layer.to_dict() for layer in self.layers]}
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "NetworkModel":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"network JSON is malformed: {exc}") from exc
        if not isinstance(payload, dict) or "name" not in payload or "layers" not in payload:
            raise ValidationError("network JSON needs 'name' and 'layers'")
        return cls(payload["name"], tuple(ConvLayerSpec.from_dict(d) for d in payload["layers"]))


@dataclass(frozen=True)
class LatencySample:
    """One timed run of one layer configuration."""

    layer_id: str
    out_channels: int
    run_index: int
    latency_ms: float

    def __post_init__(self) -> None:
        _check_count("out_channels", self.out_channels, 1)
        _check_count("run_index", self.run_index, 0)
        if not (math.isfinite(self.latency_ms) and self.latency_ms > 0):
            raise ValidationError(f"latency_ms must be finite and > 0, got {self.latency_ms}")


@dataclass(frozen=True)
class LatencyCurve:
    """Aggregated latency of one layer as a function of its output channel count.

    ``points`` is normalised to a dict whose keys iterate in increasing order.
    """

    layer_id: str
    points: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.points:
            raise EmptyCurveError(f"curve for {self.layer_id!r} has no points")
        ordered: dict[int, float] = {}
        for channels in sorted(self.points):
            _check_count("out_channels", channels, 1)
            latency = float(self.points[channels])
            if not (math.isfinite(latency) and latency > 0):
                raise ValidationError(
                    f"{self.layer_id}: latency at {channels} channels must be finite and > 0"
                )
            ordered[channels] = latency
        object.__setattr__(self, "points", ordered)

    @classmethod
    def from_pairs(cls, layer_id: str, pairs: Iterable[tuple[int, float]]) -> "LatencyCurve":
        points: dict[int, float] = {}
        for channels, latency in pairs:
            if channels in points:
                raise ValidationError(f"{layer_id}: duplicate channel count {channels}")
            points[channels] = latency
        return cls(layer_id, points)

    @property
    def channels(self) -> list[int]:
        return list(self.points)

    @property
    def latencies(self) -> list[float]:
        return list(self.points.values())

    @property
    def base_channels(self) -> int:
        """Largest channel count present, i.e. the unpruned configuration."""
        return next(reversed(self.points))

    def __getitem__(self, channels: int) -> float:
        return self.points[channels]

    def __contains__(self, channels: object) -> bool:
        return channels in self.points

    def __len__(self) -> int:
        return len(self.points)

    def scaled(self, factor: float) -> "LatencyCurve":
        return LatencyCurve(self.layer_id, {c: t * factor for c, t in self.points.items()})

    def without(self, channels: Iterable[int]) -> "LatencyCurve":
        drop = set(channels)
        return LatencyCurve(self.layer_id, {c: t for c, t in self.points.items() if c not in drop})
