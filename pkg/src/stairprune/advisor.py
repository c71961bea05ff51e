"""Pruning recommendations built on latency curves and an optional accuracy oracle."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Mapping, Protocol

from .errors import (
    InfeasibleAccuracyError,
    InfeasibleBudgetError,
    ValidationError,
)
from .model import LatencyCurve, NetworkModel
from .staircase import DEFAULT_REL_TOL, slowdown_regions, speedup_map

# gains inside the plateau flatness tolerance are noise, not a stair
DEFAULT_MIN_SPEEDUP = 1.0 + DEFAULT_REL_TOL


class Rationale(str, Enum):
    PARETO_EDGE = "PARETO_EDGE"
    BUDGET_FIT = "BUDGET_FIT"
    ACCURACY_FLOOR = "ACCURACY_FLOOR"


class AccuracyOracle(Protocol):
    """Estimated accuracy in [0, 1] of a layer pruned to ``target_channels``.

    Must return the same value for the same input during one advisory run.
    """

    def __call__(self, layer_id: str, target_channels: int) -> float: ...


@dataclass(frozen=True)
class LinearAccuracyOracle:
    """Synthetic oracle for demos and tests: accuracy = channels / base, capped at 1.

    It stands in for a real retrain-and-evaluate loop and models nothing.
    """

    base_channels: Mapping[str, int] | int

    def __call__(self, layer_id: str, target_channels: int) -> float:
        base = self.base_channels if isinstance(self.base_channels, int) else self.base_channels[layer_id]
        return min(1.0, target_channels / base)


@dataclass(frozen=True)
class PruneRecommendation:
    layer_id: str
    target_channels: int
    predicted_latency_ms: float
    speedup_vs_base: float
    rationale: Rationale


def pareto_front(curve: LatencyCurve) -> list[tuple[int, float]]:
    """Points no other point beats on both channels (more) and latency (less).

    Sorted by descending channel count.
    """
    front: list[tuple[int, float]] = []
    best = math.inf
    for c in reversed(curve.channels):
        t = curve[c]
        if t < best:
            front.append((c, t))
            best = t
    return front


def _recommend(curve: LatencyCurve, point: tuple[int, float], rationale: Rationale) -> PruneRecommendation:
    c, t = point
    return PruneRecommendation(
        layer_id=curve.layer_id,
        target_channels=c,
        predicted_latency_ms=t,
        speedup_vs_base=curve[curve.base_channels] / t,
        rationale=rationale,
    )


def recommend_edge(curve: LatencyCurve, min_speedup: float = DEFAULT_MIN_SPEEDUP) -> PruneRecommendation:
    """Widest front point, below the base, whose speedup exceeds ``min_speedup``.

    This is the right edge of the first stair below the unpruned layer. If no
    narrower point is fast enough, the base configuration is returned.
    """
    front = pareto_front(curve)
    base_latency = front[0][1]
    for point in front[1:]:
        if base_latency / point[1] > min_speedup:
            return _recommend(curve, point, Rationale.PARETO_EDGE)
    return _recommend(curve, front[0], Rationale.PARETO_EDGE)


def recommend_for_budget(curve: LatencyCurve, latency_budget_ms: float) -> PruneRecommendation:
    """Widest front point whose latency fits the budget."""
    if not latency_budget_ms > 0:
        raise ValidationError(f"latency budget must be > 0, got {latency_budget_ms}")
    for point in pareto_front(curve):
        if point[1] <= latency_budget_ms:
            return _recommend(curve, point, Rationale.BUDGET_FIT)
    raise InfeasibleBudgetError(
        f"{curve.layer_id}: no configuration runs within {latency_budget_ms} ms "
        f"(fastest is {min(curve.latencies)} ms)"
    )


def recommend_with_accuracy(
    curve: LatencyCurve,
    oracle: AccuracyOracle | Callable[[str, int], float],
    min_accuracy: float,
) -> PruneRecommendation:
    """Fastest front point whose estimated accuracy meets ``min_accuracy``.

    Ties in latency go to the wider configuration.
    """
    if min_accuracy < 0:
        raise ValidationError(f"min_accuracy must be >= 0, got {min_accuracy}")
    chosen = None
    for c, t in pareto_front(curve):
        acc = oracle(curve.layer_id, c)
        if not 0.0 <= acc <= 1.0:
            raise ValidationError(f"oracle returned {acc} for {curve.layer_id}@{c}; expected [0, 1]")
        if acc >= min_accuracy and (chosen is None or t < chosen[1]):
            chosen = (c, t)
    if chosen is None:
        raise InfeasibleAccuracyError(
            f"{curve.layer_id}: no configuration reaches accuracy {min_accuracy}"
        )
    return _recommend(curve, chosen, Rationale.ACCURACY_FLOOR)


@dataclass(frozen=True)
class SkippedLayer:
    layer_id: str
    reason: str


@dataclass
class NetworkReport:
    network: str
    recommendations: list[PruneRecommendation] = field(default_factory=list)
    warnings: dict[str, list[tuple[int, int]]] = field(default_factory=dict)
    skipped: list[SkippedLayer] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["layer_id", "target_channels", "predicted_latency_ms", "speedup_vs_base",
             "rationale", "slowdown_regions"]
        )
        for rec in self.recommendations:
            regions = ";".join(f"{a}-{b}" for a, b in self.warnings.get(rec.layer_id, []))
            writer.writerow([
                rec.layer_id, rec.target_channels, repr(rec.predicted_latency_ms),
                repr(rec.speedup_vs_base), rec.rationale.value, regions,
            ])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [f"Pruning report for {self.network}"]
        for rec in self.recommendations:
            lines.append(
                f"  {rec.layer_id}: prune to {rec.target_channels} channels, "
                f"{rec.predicted_latency_ms:.4g} ms, {rec.speedup_vs_base:.3g}x vs unpruned "
                f"[{rec.rationale.value}]"
            )
            for a, b in self.warnings.get(rec.layer_id, []):
                span = f"distance {a}" if a == b else f"distances {a}-{b}"
                lines.append(f"    warning: pruning by {span} runs slower than unpruned")
        for skip in self.skipped:
            lines.append(f"  {skip.layer_id}: skipped ({skip.reason})")
        return "\n".join(lines) + "\n"


def network_report(
    network: NetworkModel,
    curves: Mapping[str, LatencyCurve],
    *,
    latency_budget_ms: float | None = None,
    oracle: AccuracyOracle | Callable[[str, int], float] | None = None,
    min_accuracy: float | None = None,
    min_speedup: float = DEFAULT_MIN_SPEEDUP,
) -> NetworkReport:
    """One recommendation and slowdown warning list per layer of ``network``.

    The budget takes precedence, then the accuracy floor, else the first-stair
    edge. Layers without a curve, or whose constraint cannot be met, are
    recorded as skipped.
    """
    return report_layers(
        network.name, network.layer_ids, curves,
        latency_budget_ms=latency_budget_ms, oracle=oracle,
        min_accuracy=min_accuracy, min_speedup=min_speedup,
    )


def report_layers(
    name: str,
    layer_ids: Iterable[str],
    curves: Mapping[str, LatencyCurve],
    *,
    latency_budget_ms: float | None = None,
    oracle: AccuracyOracle | Callable[[str, int], float] | None = None,
    min_accuracy: float | None = None,
    min_speedup: float = DEFAULT_MIN_SPEEDUP,
    strict: bool = False,
) -> NetworkReport:
    """:func:`network_report` over an explicit list of layer ids.

    With ``strict`` an unmet budget or accuracy floor raises instead of being
    recorded as a skipped layer.
    """
    if min_accuracy is not None and oracle is None:
        oracle = LinearAccuracyOracle({lid: c.base_channels for lid, c in curves.items()})
    report = NetworkReport(name)
    for layer_id in layer_ids:
        curve = curves.get(layer_id)
        if curve is None:
            report.skipped.append(SkippedLayer(layer_id, "no latency curve"))
            continue
        try:
            if latency_budget_ms is not None:
                rec = recommend_for_budget(curve, latency_budget_ms)
            elif min_accuracy is not None:
                rec = recommend_with_accuracy(curve, oracle, min_accuracy)
            else:
                rec = recommend_edge(curve, min_speedup)
        except (InfeasibleBudgetError, InfeasibleAccuracyError) as exc:
            if strict:
                raise
            report.skipped.append(SkippedLayer(layer_id, str(exc)))
            continue
        report.recommendations.append(rec)
        report.warnings[layer_id] = slowdown_regions(speedup_map(curve))
    return report
