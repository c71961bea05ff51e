"""Analytical model of how GPU libraries dispatch one convolution as kernels.

Covers the GEMM path (im2col, reshape, then one or two ``gemm_mm`` kernels
depending on how the runtime splits the output channels), the direct path (a
single kernel whose work-group shape the library picks per channel count) and
a TVM-like hybrid that routes selected channel counts to the direct path.

Instruction counts are exact integers. Latency synthesis is floating point.
"""

from __future__ import annotations

import configparser
import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field, fields
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .errors import CalibrationError, DegenerateCalibrationError, RangeError, ValidationError
from .model import ConvLayerSpec

IM2COL = "im2col"
RESHAPE = "reshape_to_columns"
GEMM_MM = "gemm_mm"
DIRECT_KERNEL = "direct_convolution"

WorkGroup = tuple[int, int, int]


class Method(str, Enum):
    GEMM = "gemm"
    DIRECT = "direct"
    TVM = "tvm"


@dataclass(frozen=True)
class SplitPolicy:
    """Parameters of the channel-splitting rule for ``gemm_mm`` dispatches."""

    vector_width: int = 4
    main_tile: int = 16
    merge_full_tile_remainder: bool = True

    def __post_init__(self) -> None:
        if self.vector_width < 1 or self.main_tile < 1:
            raise ValidationError("vector_width and main_tile must be positive")
        if self.main_tile % self.vector_width:
            raise ValidationError(
                f"main_tile {self.main_tile} is not a multiple of vector_width {self.vector_width}"
            )


DEFAULT_SPLIT = SplitPolicy()


def split_gemm_channels(c_out: int, policy: SplitPolicy = DEFAULT_SPLIT) -> list[int]:
    """Channel widths of the ``gemm_mm`` kernels dispatched for ``c_out`` channels.

    Whole tiles go to one main kernel. The leftover channels are padded up to
    the vector width and dispatched as a second kernel, unless the padded
    leftover fills exactly one more tile, in which case it is folded into the
    main kernel.

    >>> split_gemm_channels(92), split_gemm_channels(93), split_gemm_channels(97)
    ([80, 12], [96], [96, 4])
    """
    if c_out < 1:
        raise RangeError(f"c_out must be >= 1, got {c_out}")
    tile, vw = policy.main_tile, policy.vector_width
    main = (c_out // tile) * tile
    remainder = -(-(c_out - main) // vw) * vw
    if remainder == 0:
        return [main]
    if policy.merge_full_tile_remainder and remainder == tile:
        return [main + tile]
    if main == 0:
        return [remainder]
    return [main, remainder]


@dataclass(frozen=True)
class GemmCostCoefficients:
    """Per-layer instruction-count coefficients of the GEMM path.

    im2col counts are affine in the output channel count; reshape counts are
    constant; each ``gemm_mm`` kernel costs a fixed number of instructions per
    (padded) output channel it covers. All values are integers.
    """

    im2col_arith_slope: int
    im2col_arith_intercept: int
    im2col_mem_slope: int
    im2col_mem_intercept: int
    reshape_arith_const: int
    reshape_mem_const: int
    gemm_arith_unit: int
    gemm_mem_unit: int

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ValidationError(f"{f.name} must be an integer, got {value!r}")
            if value < 0:
                raise ValidationError(f"{f.name} must be non-negative, got {value}")

    @property
    def is_calibrated(self) -> bool:
        return self.gemm_arith_unit > 0 and self.gemm_mem_unit > 0


@dataclass(frozen=True)
class KernelCost:
    kernel_name: str
    arith_instr: int
    mem_instr: int

    def __post_init__(self) -> None:
        if self.arith_instr < 0 or self.mem_instr < 0:
            raise ValidationError(f"{self.kernel_name}: instruction counts must be >= 0")


@dataclass(frozen=True)
class KernelCostBreakdown:
    """Per-kernel instruction counts of one layer configuration, in dispatch order."""

    out_channels: int
    kernels: tuple[KernelCost, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "kernels", tuple(self.kernels))

    @property
    def gemm_kernels(self) -> list[KernelCost]:
        return [k for k in self.kernels if k.kernel_name == GEMM_MM]

    @property
    def total_arith(self) -> int:
        return sum(k.arith_instr for k in self.kernels)

    @property
    def total_mem(self) -> int:
        return sum(k.mem_instr for k in self.kernels)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["kernel_name", "arith_instr", "mem_instr"])
        for k in self.kernels:
            writer.writerow([k.kernel_name, k.arith_instr, k.mem_instr])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, out_channels: int) -> "KernelCostBreakdown":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["kernel_name", "arith_instr", "mem_instr"]:
            raise ValidationError("kernel table header must be kernel_name,arith_instr,mem_instr")
        kernels = []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValidationError(f"line {lineno}: expected 3 fields, got {len(row)}")
            name, arith, mem = row
            kernels.append(KernelCost(name, int(arith.replace(",", "")), int(mem.replace(",", ""))))
        return cls(out_channels, tuple(kernels))


def im2col_kernel_name(layer: ConvLayerSpec) -> str:
    return f"{IM2COL}{layer.kernel_h}x{layer.kernel_w}_nhwc"


def gemm_cost(
    layer: ConvLayerSpec,
    coeffs: GemmCostCoefficients,
    policy: SplitPolicy = DEFAULT_SPLIT,
) -> KernelCostBreakdown:
    """Instruction counts of every kernel the GEMM path dispatches for ``layer``."""
    if not coeffs.is_calibrated:
        raise CalibrationError("gemm units are zero; calibrate the coefficients first")
    c = layer.out_channels
    kernels = [
        KernelCost(
            im2col_kernel_name(layer),
            coeffs.im2col_arith_intercept + coeffs.im2col_arith_slope * c,
            coeffs.im2col_mem_intercept + coeffs.im2col_mem_slope * c,
        ),
        KernelCost(RESHAPE, coeffs.reshape_arith_const, coeffs.reshape_mem_const),
    ]
    for width in split_gemm_channels(c, policy):
        kernels.append(KernelCost(GEMM_MM, coeffs.gemm_arith_unit * width, coeffs.gemm_mem_unit * width))
    return KernelCostBreakdown(c, tuple(kernels))


def _check_layout(table: KernelCostBreakdown) -> None:
    names = [k.kernel_name for k in table.kernels]
    if (
        len(names) < 3
        or not names[0].startswith(IM2COL)
        or names[1] != RESHAPE
        or any(n != GEMM_MM for n in names[2:])
    ):
        raise CalibrationError(
            f"table at {table.out_channels} channels is not im2col, reshape, gemm_mm...: {names}"
        )


def _exact_div(numerator: int, denominator: int, what: str) -> int:
    quotient, rest = divmod(numerator, denominator)
    if rest:
        raise CalibrationError(f"{what}: {numerator} / {denominator} is not integral")
    return quotient


def calibrate_gemm(
    first: KernelCostBreakdown,
    second: KernelCostBreakdown,
    policy: SplitPolicy = DEFAULT_SPLIT,
) -> GemmCostCoefficients:
    """Recover :class:`GemmCostCoefficients` from kernel tables at two channel counts.

    The im2col line comes from the two points. The gemm units come from a
    table holding a single ``gemm_mm`` kernel, divided by that kernel's split
    width. Both tables must then agree with the split model exactly.
    """
    if first.out_channels == second.out_channels:
        raise DegenerateCalibrationError(
            f"both tables describe {first.out_channels} channels; need two distinct counts"
        )
    for table in (first, second):
        _check_layout(table)

    lo, hi = sorted((first, second), key=lambda t: t.out_channels)
    dc = hi.out_channels - lo.out_channels
    im_lo, im_hi = lo.kernels[0], hi.kernels[0]
    arith_slope = _exact_div(im_hi.arith_instr - im_lo.arith_instr, dc, "im2col arithmetic slope")
    mem_slope = _exact_div(im_hi.mem_instr - im_lo.mem_instr, dc, "im2col memory slope")
    arith_intercept = im_lo.arith_instr - arith_slope * lo.out_channels
    mem_intercept = im_lo.mem_instr - mem_slope * lo.out_channels
    if min(arith_slope, mem_slope, arith_intercept, mem_intercept) < 0:
        raise CalibrationError("im2col counts imply a negative slope or intercept")

    if lo.kernels[1] != hi.kernels[1]:
        raise CalibrationError("reshape_to_columns counts differ between the two tables")
    reshape = lo.kernels[1]

    single = next((t for t in (first, second) if len(t.gemm_kernels) == 1), None)
    if single is None:
        raise CalibrationError("neither table has a single gemm_mm kernel")
    (width,) = split_gemm_channels(single.out_channels, policy)
    gemm = single.gemm_kernels[0]
    arith_unit = _exact_div(gemm.arith_instr, width, "gemm arithmetic unit")
    mem_unit = _exact_div(gemm.mem_instr, width, "gemm memory unit")
    if arith_unit == 0 or mem_unit == 0:
        raise CalibrationError("gemm units must be strictly positive")

    coeffs = GemmCostCoefficients(
        im2col_arith_slope=arith_slope,
        im2col_arith_intercept=arith_intercept,
        im2col_mem_slope=mem_slope,
        im2col_mem_intercept=mem_intercept,
        reshape_arith_const=reshape.arith_instr,
        reshape_mem_const=reshape.mem_instr,
        gemm_arith_unit=arith_unit,
        gemm_mem_unit=mem_unit,
    )
    for table in (first, second):
        predicted = [(k.arith_instr, k.mem_instr) for k in _predict(table, coeffs, policy)]
        observed = [(k.arith_instr, k.mem_instr) for k in table.kernels]
        if predicted != observed:
            raise CalibrationError(
                f"table at {table.out_channels} channels is inconsistent with the split model"
            )
    return coeffs


def _predict(table: KernelCostBreakdown, coeffs: GemmCostCoefficients, policy: SplitPolicy):
    # geometry other than the channel count does not enter the coefficients
    layer = ConvLayerSpec("calibration", 1, table.out_channels, 1, 1, 1, 1)
    return gemm_cost(layer, coeffs, policy).kernels


def direct_cost(layer: ConvLayerSpec, base_instr: int | float, c_ref: int) -> float:
    """Direct-convolution instruction count, proportional to the channel count.

    ``base_instr`` is the count measured at ``c_ref`` channels.
    """
    if c_ref < 1:
        raise RangeError(f"c_ref must be >= 1, got {c_ref}")
    if base_instr < 0:
        raise RangeError(f"base_instr must be >= 0, got {base_instr}")
    if layer.out_channels == c_ref:
        return base_instr
    return base_instr * layer.out_channels / c_ref


def _check_workgroup(shape: Iterable[int]) -> WorkGroup:
    dims = tuple(shape)
    if len(dims) != 3 or any(isinstance(d, bool) or not isinstance(d, int) or d < 1 for d in dims):
        raise ValidationError(f"work group must be three positive integers, got {dims!r}")
    return dims  # type: ignore[return-value]


@dataclass(frozen=True)
class WorkGroupPolicy:
    """Work-group shape chosen per channel count, and the relative cost of each shape.

    Shapes absent from ``penalty`` cost 1.0. When ``penalty`` is non-empty its
    smallest value must be exactly 1.
    """

    mapping: Mapping[int, WorkGroup] = field(default_factory=dict)
    default: WorkGroup = (1, 1, 8)
    penalty: Mapping[WorkGroup, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "default", _check_workgroup(self.default))
        object.__setattr__(
            self, "mapping", {int(c): _check_workgroup(s) for c, s in sorted(self.mapping.items())}
        )
        penalty = {_check_workgroup(s): float(p) for s, p in self.penalty.items()}
        if penalty:
            if any(p < 1 for p in penalty.values()):
                raise ValidationError("work-group penalties must be >= 1")
            if min(penalty.values()) != 1.0:
                raise ValidationError("the fastest work-group shape must have penalty exactly 1")
        object.__setattr__(self, "penalty", penalty)

    def penalty_for(self, shape: WorkGroup) -> float:
        return self.penalty.get(tuple(shape), 1.0)


def select_workgroup(c_out: int, policy: WorkGroupPolicy) -> WorkGroup:
    if c_out < 1:
        raise RangeError(f"c_out must be >= 1, got {c_out}")
    return policy.mapping.get(c_out, policy.default)


def fit_workgroup_penalties(
    observations: Iterable[tuple[int, WorkGroup, float, float]],
) -> dict[WorkGroup, float]:
    """Relative cost of each work-group shape from (channels, shape, relative_instr, ms) rows.

    Runtime is divided by relative instruction count so that only the shape
    effect remains; per-shape means are normalised to the fastest shape.
    """
    per_shape: dict[WorkGroup, list[float]] = defaultdict(list)
    for _, shape, relative_instr, runtime in observations:
        per_shape[_check_workgroup(shape)].append(runtime / relative_instr)
    if not per_shape:
        raise ValidationError("no work-group observations")
    means = {shape: sum(v) / len(v) for shape, v in per_shape.items()}
    fastest = min(means.values())
    return {shape: mean / fastest for shape, mean in sorted(means.items())}


@dataclass(frozen=True)
class DirectReference:
    """Direct-convolution instruction counts measured at ``ref_channels``."""

    base_arith_instr: int
    base_mem_instr: int
    ref_channels: int

    def __post_init__(self) -> None:
        if self.base_arith_instr < 0 or self.base_mem_instr < 0:
            raise ValidationError("direct reference counts must be >= 0")
        if self.ref_channels < 1:
            raise ValidationError("ref_channels must be >= 1")


@dataclass(frozen=True)
class DeviceProfile:
    """Per-instruction time rates, per-job dispatch overhead and routing tables.

    Rates may be zero (a null device) but never negative.
    """

    ns_per_arith_instr: float
    ns_per_mem_instr: float
    job_overhead_ms: float = 0.0
    workgroup_policy: WorkGroupPolicy = field(default_factory=WorkGroupPolicy)
    tvm_direct_channels: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        for name in ("ns_per_arith_instr", "ns_per_mem_instr", "job_overhead_ms"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValidationError(f"{name} must be finite and >= 0, got {value}")
        object.__setattr__(self, "tvm_direct_channels", frozenset(self.tvm_direct_channels))


def resolve_method(method: Method | str, c_out: int, profile: DeviceProfile | None = None) -> Method:
    """Concrete path (GEMM or DIRECT) a configuration runs on."""
    method = Method(method)
    if method is not Method.TVM:
        return method
    if profile is None:
        raise ValidationError("TVM routing needs a device profile")
    return Method.DIRECT if c_out in profile.tvm_direct_channels else Method.GEMM


def count_dispatched_jobs(
    layer: ConvLayerSpec,
    method: Method | str,
    policy: SplitPolicy = DEFAULT_SPLIT,
) -> int:
    """GPU jobs dispatched for one layer: 2 + number of gemm kernels, or 1 for direct."""
    method = Method(method)
    if method is Method.TVM:
        raise ValidationError("resolve TVM to GEMM or DIRECT with resolve_method first")
    if method is Method.DIRECT:
        return 1
    return 2 + len(split_gemm_channels(layer.out_channels, policy))


def emulate_latency(
    layer: ConvLayerSpec,
    method: Method | str,
    coeffs: GemmCostCoefficients | None,
    profile: DeviceProfile,
    direct: DirectReference | None = None,
    policy: SplitPolicy = DEFAULT_SPLIT,
) -> float:
    """Synthetic latency in ms of one layer configuration on ``profile``.

    Instruction time is scaled by the work-group penalty on the direct path;
    every dispatched job adds ``job_overhead_ms``.
    """
    route = resolve_method(method, layer.out_channels, profile)
    if route is Method.GEMM:
        if coeffs is None:
            raise CalibrationError("GEMM emulation needs calibrated coefficients")
        breakdown = gemm_cost(layer, coeffs, policy)
        arith, mem, penalty = breakdown.total_arith, breakdown.total_mem, 1.0
        jobs = len(breakdown.kernels)
    else:
        if direct is None:
            raise CalibrationError("direct emulation needs a DirectReference")
        arith = direct_cost(layer, direct.base_arith_instr, direct.ref_channels)
        mem = direct_cost(layer, direct.base_mem_instr, direct.ref_channels)
        shape = select_workgroup(layer.out_channels, profile.workgroup_policy)
        penalty = profile.workgroup_policy.penalty_for(shape)
        jobs = 1
    instr_ns = (arith * profile.ns_per_arith_instr + mem * profile.ns_per_mem_instr) * penalty
    return instr_ns / 1e6 + profile.job_overhead_ms * jobs


# --- configuration files -------------------------------------------------------


@dataclass(frozen=True)
class EmulatorConfig:
    """Everything needed to synthesise latencies for one calibrated layer."""

    profile: DeviceProfile
    split: SplitPolicy = DEFAULT_SPLIT
    gemm: GemmCostCoefficients | None = None
    direct: DirectReference | None = None

    def latency(self, layer: ConvLayerSpec, method: Method | str) -> float:
        return emulate_latency(layer, method, self.gemm, self.profile, self.direct, self.split)


def _parse_workgroup(text: str) -> WorkGroup:
    try:
        return _check_workgroup(int(part) for part in text.strip().lower().split("x"))
    except ValueError as exc:
        raise ValidationError(f"bad work-group {text!r}; expected XxYxZ") from exc


def _format_workgroup(shape: WorkGroup) -> str:
    return "x".join(str(d) for d in shape)


def _parse_int_list(text: str) -> frozenset[int]:
    return frozenset(int(tok) for tok in text.replace(",", " ").split())


def parse_config(text: str) -> EmulatorConfig:
    """Parse an INI-style emulator config.

    Sections: ``[device]`` (rates, ``job_overhead_ms``, ``tvm_direct_channels``),
    optional ``[split]``, ``[workgroup]`` with nested ``[workgroup.map]``
    (channels = XxYxZ) and ``[workgroup.penalty]`` (XxYxZ = multiplier),
    optional ``[gemm]`` coefficient integers and optional ``[direct]``
    reference counts.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"malformed config: {exc}") from exc
    if not parser.has_section("device"):
        raise ValidationError("config needs a [device] section")
    try:
        dev = parser["device"]
        wg = WorkGroupPolicy(
            mapping={
                int(k): _parse_workgroup(v)
                for k, v in (parser["workgroup.map"].items() if parser.has_section("workgroup.map") else [])
            },
            default=_parse_workgroup(parser.get("workgroup", "default", fallback="1x1x8")),
            penalty={
                _parse_workgroup(k): float(v)
                for k, v in (parser["workgroup.penalty"].items() if parser.has_section("workgroup.penalty") else [])
            },
        )
        profile = DeviceProfile(
            ns_per_arith_instr=dev.getfloat("ns_per_arith_instr"),
            ns_per_mem_instr=dev.getfloat("ns_per_mem_instr"),
            job_overhead_ms=dev.getfloat("job_overhead_ms", fallback=0.0),
            workgroup_policy=wg,
            tvm_direct_channels=_parse_int_list(dev.get("tvm_direct_channels", fallback="")),
        )
        split = DEFAULT_SPLIT
        if parser.has_section("split"):
            s = parser["split"]
            split = SplitPolicy(
                vector_width=s.getint("vector_width", fallback=4),
                main_tile=s.getint("main_tile", fallback=16),
                merge_full_tile_remainder=s.getboolean("merge_full_tile_remainder", fallback=True),
            )
        gemm = None
        if parser.has_section("gemm"):
            g = parser["gemm"]
            gemm = GemmCostCoefficients(**{f.name: g.getint(f.name, fallback=0) for f in fields(GemmCostCoefficients)})
        direct = None
        if parser.has_section("direct"):
            d = parser["direct"]
            direct = DirectReference(
                base_arith_instr=d.getint("base_arith_instr"),
                base_mem_instr=d.getint("base_mem_instr"),
                ref_channels=d.getint("ref_channels"),
            )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad config value: {exc}") from exc
    return EmulatorConfig(profile, split, gemm, direct)


def format_config(config: EmulatorConfig) -> str:
    """Inverse of :func:`parse_config`."""
    p = config.profile
    lines = [
        "[device]",
        f"ns_per_arith_instr = {p.ns_per_arith_instr!r}",
        f"ns_per_mem_instr = {p.ns_per_mem_instr!r}",
        f"job_overhead_ms = {p.job_overhead_ms!r}",
        f"tvm_direct_channels = {', '.join(str(c) for c in sorted(p.tvm_direct_channels))}",
        "",
        "[split]",
        f"vector_width = {config.split.vector_width}",
        f"main_tile = {config.split.main_tile}",
        f"merge_full_tile_remainder = {str(config.split.merge_full_tile_remainder).lower()}",
        "",
        "[workgroup]",
        f"default = {_format_workgroup(p.workgroup_policy.default)}",
        "",
        "[workgroup.map]",
        *(f"{c} = {_format_workgroup(s)}" for c, s in p.workgroup_policy.mapping.items()),
        "",
        "[workgroup.penalty]",
        *(f"{_format_workgroup(s)} = {v!r}" for s, v in p.workgroup_policy.penalty.items()),
    ]
    if config.gemm is not None:
        lines += ["", "[gemm]", *(f"{f.name} = {getattr(config.gemm, f.name)}" for f in fields(config.gemm))]
    if config.direct is not None:
        d = config.direct
        lines += [
            "",
            "[direct]",
            f"base_arith_instr = {d.base_arith_instr}",
            f"base_mem_instr = {d.base_mem_instr}",
            f"ref_channels = {d.ref_channels}",
        ]
    return "\n".join(lines) + "\n"


BUNDLED_PROFILES = {"layer16": "resnet50_l16.ini"}


def load_config(source: str | Path) -> EmulatorConfig:
    """Load a config file, or a bundled profile by name (e.g. ``"layer16"``)."""
    name = str(source)
    if name in BUNDLED_PROFILES:
        text = resources.files("stairprune.data").joinpath(BUNDLED_PROFILES[name]).read_text()
    else:
        text = Path(source).read_text()
    return parse_config(text)
