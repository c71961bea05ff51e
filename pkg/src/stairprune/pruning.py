"""Channel pruning as a shape transform, plus pruning sweeps over one layer."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterable

from .errors import RangeError, ValidationError
from .model import ConvLayerSpec


@dataclass(frozen=True, init=False)
class PruneRequest:
    """A layer and the 1-based indices of the filters to remove.

    Indices are taken with set semantics: a repeated index is rejected rather
    than silently collapsed.
    """

    base: ConvLayerSpec
    pruned_indices: frozenset[int]

    def __init__(self, base: ConvLayerSpec, pruned_indices: Iterable[int] = ()):
        indices = list(pruned_indices)
        unique = frozenset(indices)
        if len(unique) != len(indices):
            raise ValidationError("pruned_indices contains duplicates")
        n = base.out_channels
        for p in indices:
            if isinstance(p, bool) or not isinstance(p, int):
                raise ValidationError(f"channel index must be an integer, got {p!r}")
            if not 1 <= p <= n:
                raise ValidationError(f"channel index {p} outside 1..{n}")
        if len(unique) >= n:
            raise ValidationError(f"cannot prune all {n} channels of {base.layer_id}")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "pruned_indices", unique)


def reindex_channels(n: int, pruned: Iterable[int]) -> dict[int, int]:
    """Map each surviving 1-based channel index to its index after pruning.

    Removing channel ``p`` shifts every later channel down by one; repeating
    that for each pruned index leaves survivors numbered contiguously from 1.
    """
    drop = set(pruned)
    mapping: dict[int, int] = {}
    new_index = 0
    for old_index in range(1, n + 1):
        if old_index in drop:
            continue
        new_index += 1
        mapping[old_index] = new_index
    return mapping


def prune_channels(req: PruneRequest) -> ConvLayerSpec:
    """Return the compact layer left after removing ``req.pruned_indices``.

    Only the count matters for the resulting geometry, so any two requests that
    remove the same number of channels give equal specs.
    """
    if not req.pruned_indices:
        return req.base
    return dataclasses.replace(
        req.base, out_channels=req.base.out_channels - len(req.pruned_indices)
    )


def sweep_configs(base: ConvLayerSpec, min_channels: int = 1, step: int = 1) -> list[ConvLayerSpec]:
    """Configurations from ``base`` down to ``min_channels`` in strides of ``step``.

    The unpruned layer always comes first; the list is strictly decreasing in
    ``out_channels``.
    """
    if min_channels < 1:
        raise RangeError(f"min_channels must be >= 1, got {min_channels}")
    if min_channels > base.out_channels:
        raise RangeError(
            f"min_channels {min_channels} exceeds base out_channels {base.out_channels}"
        )
    if step < 1:
        raise RangeError(f"step must be >= 1, got {step}")
    return [
        dataclasses.replace(base, out_channels=c)
        for c in range(base.out_channels, min_channels - 1, -step)
    ]
