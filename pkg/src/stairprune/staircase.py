"""Staircase structure of latency curves.

Plateaus (flat latency runs), their right edges (the channel counts worth
pruning to), speedup maps against the unpruned layer, slowdown regions, and the
split of interleaved curves into parallel staircases.
"""

from __future__ import annotations

import bisect
import statistics
from collections import defaultdict
from dataclasses import dataclass
from itertools import accumulate
from typing import Iterable, Mapping

from .errors import DegenerateClusterError, EmptyCurveError, ValidationError
from .model import LatencyCurve, LatencySample

DEFAULT_REL_TOL = 0.03
DEFAULT_REGIME_WINDOW = 16


@dataclass(frozen=True)
class Plateau:
    start_channels: int
    end_channels: int
    level_ms: float
    size: int = 1

    def __post_init__(self) -> None:
        if self.start_channels > self.end_channels:
            raise ValidationError("plateau start exceeds its end")


@dataclass(frozen=True)
class SpeedupMap:
    """Speedup ``T(baseline) / T(baseline - d)`` keyed by prune distance ``d``."""

    baseline_channels: int
    entries: Mapping[int, float]

    def __getitem__(self, distance: int) -> float:
        return self.entries[distance]

    def __contains__(self, distance: object) -> bool:
        return distance in self.entries

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class RegimeAssignment:
    labels: Mapping[int, int]
    k: int


def aggregate_median(samples: Iterable[LatencySample]) -> LatencyCurve:
    """Collapse repeated runs into one median latency per channel count."""
    samples = list(samples)
    if not samples:
        raise EmptyCurveError("no samples to aggregate")
    layer_ids = {s.layer_id for s in samples}
    if len(layer_ids) > 1:
        raise ValidationError(f"samples mix layers: {sorted(layer_ids)}")
    groups: dict[int, list[float]] = defaultdict(list)
    for s in samples:
        groups[s.out_channels].append(s.latency_ms)
    return LatencyCurve(samples[0].layer_id, {c: statistics.median(v) for c, v in groups.items()})


def aggregate_by_layer(samples: Iterable[LatencySample]) -> dict[str, LatencyCurve]:
    """Group samples by layer (first-seen order) and aggregate each group."""
    per_layer: dict[str, list[LatencySample]] = {}
    for s in samples:
        per_layer.setdefault(s.layer_id, []).append(s)
    return {layer_id: aggregate_median(group) for layer_id, group in per_layer.items()}


def _sorted_median(values: list[float]) -> float:
    n = len(values)
    mid = n // 2
    if n % 2:
        return values[mid]
    return (values[mid - 1] + values[mid]) / 2


def detect_plateaus(curve: LatencyCurve, rel_tol: float = DEFAULT_REL_TOL) -> list[Plateau]:
    """Segment ``curve`` into maximal flat runs, scanning left to right.

    A run keeps growing while every member stays within ``rel_tol`` of the
    run's median. A point that would break the run starts the next one, so a
    boundary point always stays with the plateau on its left.
    """
    if len(curve) < 2:
        raise ValidationError("plateau detection needs at least 2 points")
    if not 0 < rel_tol < 1:
        raise ValidationError(f"rel_tol must lie in (0, 1), got {rel_tol}")
    channels, latencies = curve.channels, curve.latencies
    plateaus: list[Plateau] = []
    i, n = 0, len(channels)
    while i < n:
        members = [latencies[i]]
        j = i + 1
        while j < n:
            bisect.insort(members, latencies[j])
            med = _sorted_median(members)
            if members[0] < med * (1 - rel_tol) or members[-1] > med * (1 + rel_tol):
                members.remove(latencies[j])
                break
            j += 1
        plateaus.append(Plateau(channels[i], channels[j - 1], _sorted_median(members), j - i))
        i = j
    return plateaus


def optimal_points(plateaus: list[Plateau]) -> list[tuple[int, float]]:
    """Right edge of every plateau: the most channels for each latency level."""
    if not plateaus:
        raise ValidationError("optimal_points needs at least one plateau")
    return [(p.end_channels, p.level_ms) for p in plateaus]


def speedup_map(curve: LatencyCurve, baseline_channels: int | None = None) -> SpeedupMap:
    """Speedup of every narrower configuration relative to ``baseline_channels``.

    Defaults to the widest configuration in the curve. Values above 1 mean the
    pruned layer is faster.
    """
    if baseline_channels is None:
        baseline_channels = curve.base_channels
    if baseline_channels not in curve:
        raise ValidationError(f"baseline {baseline_channels} not present in curve {curve.layer_id}")
    base = curve[baseline_channels]
    entries = {0: 1.0}
    for c in reversed(curve.channels):
        if c < baseline_channels:
            entries[baseline_channels - c] = base / curve[c]
    return SpeedupMap(baseline_channels, entries)


def slowdown_regions(smap: SpeedupMap) -> list[tuple[int, int]]:
    """Maximal runs of consecutive prune distances whose speedup is below 1."""
    if not smap.entries:
        raise ValidationError("empty speedup map")
    regions: list[tuple[int, int]] = []
    start = prev = None
    for d in sorted(smap.entries):
        if smap.entries[d] < 1.0:
            if start is None:
                start = d
            prev = d
        elif start is not None:
            regions.append((start, prev))
            start = None
    if start is not None:
        regions.append((start, prev))
    return regions


def _kmedians_1d(values: list[float], weights: list[int], k: int) -> list[int]:
    """Optimal weighted 1-D k-medians over sorted distinct ``values``.

    Returns the cluster index (0 = lowest values) of every value.
    """
    m = len(values)
    cw = [0, *accumulate(weights)]
    cwv = [0.0, *accumulate(w * v for w, v in zip(values, weights))]

    def cost(i: int, j: int) -> float:
        # values[i..j] inclusive; weighted median index via cumulative weight
        half = (cw[j + 1] + cw[i]) / 2
        t = bisect.bisect_left(cw, half, i + 1, j + 2) - 1
        med = values[t]
        left = med * (cw[t + 1] - cw[i]) - (cwv[t + 1] - cwv[i])
        right = (cwv[j + 1] - cwv[t + 1]) - med * (cw[j + 1] - cw[t + 1])
        return left + right

    inf = float("inf")
    best = [[inf] * m for _ in range(k)]
    cut = [[0] * m for _ in range(k)]
    for j in range(m):
        best[0][j] = cost(0, j)
    for c in range(1, k):
        for j in range(c, m):
            for s in range(c, j + 1):
                total = best[c - 1][s - 1] + cost(s, j)
                if total < best[c][j]:
                    best[c][j], cut[c][j] = total, s
    labels = [0] * m
    j = m - 1
    for c in range(k - 1, -1, -1):
        s = cut[c][j] if c else 0
        for t in range(s, j + 1):
            labels[t] = c
        j = s - 1
    return labels


def regime_split(
    curve: LatencyCurve, k: int, window: int = DEFAULT_REGIME_WINDOW
) -> RegimeAssignment:
    """Assign every point to one of ``k`` interleaved latency regimes.

    Each point is clustered together with its neighbours in a window of
    ``window`` channel positions (widened until it holds at least ``k``
    distinct latencies). The point's label is the rank of its cluster, so
    regime 0 is locally the fastest staircase.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    n = len(curve)
    if n < 2 * k:
        raise ValidationError(f"regime_split with k={k} needs at least {2 * k} points, got {n}")
    latencies = curve.latencies
    if len(set(latencies)) < k:
        raise DegenerateClusterError(
            f"curve {curve.layer_id} has {len(set(latencies))} distinct levels, fewer than k={k}"
        )
    window = max(window, 2 * k)
    labels: dict[int, int] = {}
    for idx, c in enumerate(curve.channels):
        if k == 1:
            labels[c] = 0
            continue
        size = min(window, n)
        lo = min(max(0, idx - size // 2), n - size)
        hi = lo + size
        while len(set(latencies[lo:hi])) < k:
            lo, hi = max(0, lo - 1), min(n, hi + 1)
        counts: dict[float, int] = defaultdict(int)
        for t in latencies[lo:hi]:
            counts[t] += 1
        values = sorted(counts)
        cluster = _kmedians_1d(values, [counts[v] for v in values], k)
        labels[c] = cluster[values.index(latencies[idx])]
    return RegimeAssignment(labels, k)


def regime_curves(curve: LatencyCurve, assignment: RegimeAssignment) -> dict[int, LatencyCurve]:
    """Split ``curve`` into one sub-curve per regime that has any points."""
    grouped: dict[int, dict[int, float]] = defaultdict(dict)
    for c, t in curve.points.items():
        grouped[assignment.labels[c]][c] = t
    return {label: LatencyCurve(curve.layer_id, pts) for label, pts in sorted(grouped.items())}
