"""Performance-aware channel pruning for embedded-GPU convolution libraries.

Models how libraries split a convolution into GPU kernels as its channel count
changes, finds the latency staircases that result, and recommends channel
counts that sit on the right edge of a stair instead of on a slowdown step.
"""

from .advisor import (
    LinearAccuracyOracle,
    NetworkReport,
    PruneRecommendation,
    Rationale,
    network_report,
    pareto_front,
    recommend_edge,
    recommend_for_budget,
    recommend_with_accuracy,
)
from .dispatch import (
    DeviceProfile,
    DirectReference,
    GemmCostCoefficients,
    KernelCost,
    EmulatorConfig,
    KernelCostBreakdown,
    Method,
    SplitPolicy,
    WorkGroupPolicy,
    calibrate_gemm,
    count_dispatched_jobs,
    direct_cost,
    emulate_latency,
    gemm_cost,
    load_config,
    select_workgroup,
    split_gemm_channels,
)
from .errors import *  # noqa: F401,F403
from .model import ConvLayerSpec, LatencyCurve, LatencySample, NetworkModel, make_layer_spec
from .networks import builtin_network
from .pruning import PruneRequest, prune_channels, reindex_channels, sweep_configs
from .report import HeatmapGrid, build_heatmap, emit_heatmap, parse_measurements
from .staircase import (
    Plateau,
    RegimeAssignment,
    SpeedupMap,
    aggregate_median,
    detect_plateaus,
    optimal_points,
    regime_split,
    slowdown_regions,
    speedup_map,
)

__version__ = "0.1.0"
