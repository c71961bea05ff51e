"""Reference measurements used for calibration and regression checks.

``LAYER16_GEMM_COUNTS`` holds simulator instruction counts for ResNet-50 layer
16 run through the Arm Compute Library GEMM path (Bifrost, 32-bit) at four
output-channel counts. ``DIRECT_WORKGROUP_OBSERVATIONS`` holds the work-group
shapes the same library picked for direct convolution at 90-93 channels,
with relative executed instructions and HiKey 970 runtimes in ms.

Quoted latencies are median wall-clock values measured on HiKey 970 and are
kept for seeding curves in tests and demos.
"""

from __future__ import annotations

from .dispatch import KernelCost, KernelCostBreakdown


def _table(out_channels: int, *rows: tuple[str, int, int]) -> KernelCostBreakdown:
    return KernelCostBreakdown(out_channels, tuple(KernelCost(*row) for row in rows))


LAYER16_GEMM_COUNTS: dict[int, KernelCostBreakdown] = {
    92: _table(
        92,
        ("im2col3x3_nhwc", 1_365_198, 212_152),
        ("reshape_to_columns", 44_183_104, 3_615_808),
        ("gemm_mm", 706_713_280, 36_267_840),
        ("gemm_mm", 106_006_992, 5_440_176),
    ),
    93: _table(
        93,
        ("im2col3x3_nhwc", 1_379_034, 214_458),
        ("reshape_to_columns", 44_183_104, 3_615_808),
        ("gemm_mm", 848_055_936, 43_521_408),
    ),
    96: _table(
        96,
        ("im2col3x3_nhwc", 1_420_542, 221_376),
        ("reshape_to_columns", 44_183_104, 3_615_808),
        ("gemm_mm", 848_055_936, 43_521_408),
    ),
    97: _table(
        97,
        ("im2col3x3_nhwc", 1_434_378, 223_682),
        ("reshape_to_columns", 44_183_104, 3_615_808),
        ("gemm_mm", 848_055_936, 43_521_408),
        ("gemm_mm", 35_335_664, 1_813_392),
    ),
}

# (channels, (x, y, z), relative executed instructions, runtime ms)
DIRECT_WORKGROUP_OBSERVATIONS: tuple[tuple[int, tuple[int, int, int], float, float], ...] = (
    (90, (2, 1, 8), 1.0, 167.8716),
    (91, (1, 1, 8), 1.011, 198.0468),
    (92, (4, 1, 1), 1.023, 168.8311),
    (93, (1, 1, 8), 1.034, 202.7299),
)

# (layer_id, wider channel count, its latency ms, narrower channel count, its latency ms)
QUOTED_GEMM_GAPS: tuple[tuple[str, int, float, int, float], ...] = (
    ("ResNet.L16", 78, 10.996, 76, 20.12),
    ("ResNet.L45", 2036, 19.69, 2024, 7.67),
)
