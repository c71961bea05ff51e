"""Built-in layer tables for VGG-16, AlexNet and ResNet-50.

Only unique convolution shapes are listed, each labelled with the index the
layer occupies among all named layers of the network (``VGG.L17``,
``ResNet.L45`` ...).

Spatial sizes assume a 224x224 input. Layers whose stride does not divide the
padded span evenly (for example a 3x3, stride-2 convolution over a 56x56 map)
are listed with the *effective* input extent, the rows and columns the kernel
actually visits: ``(out - 1) * stride + kernel - 2 * padding``. This keeps the
integral-output invariant while describing the same computation.

The ResNet-50 index-to-block mapping is best effort. The layer indices are
known, but not which residual block each index belongs to. The five indices
0-5 are read as the stem plus the first bottleneck stage and each following
run of six as one later stage (1x1 reduce, strided 3x3, 1x1 expand, strided
1x1 projection, 1x1 reduce of the repeated block, unstrided 3x3). Under this
reading L16 is the 128-channel 3x3 convolution and L45 is a 2048-channel 1x1
expansion.
"""

from __future__ import annotations

from typing import Callable

from .errors import UnknownNetworkError
from .model import ConvLayerSpec, NetworkModel

# (index, in, out, kernel, input extent, stride, padding)
_Row = tuple[int, int, int, int, int, int, int]

_VGG16: list[_Row] = [
    (0, 3, 64, 3, 224, 1, 1),
    (2, 64, 64, 3, 224, 1, 1),
    (5, 64, 128, 3, 112, 1, 1),
    (7, 128, 128, 3, 112, 1, 1),
    (10, 128, 256, 3, 56, 1, 1),
    (12, 256, 256, 3, 56, 1, 1),
    (17, 256, 512, 3, 28, 1, 1),
    (19, 512, 512, 3, 28, 1, 1),
    (24, 512, 512, 3, 14, 1, 1),
]

_ALEXNET: list[_Row] = [
    (0, 3, 64, 11, 223, 4, 2),
    (3, 64, 192, 5, 27, 1, 2),
    (6, 192, 384, 3, 13, 1, 1),
    (8, 384, 256, 3, 13, 1, 1),
    (10, 256, 256, 3, 13, 1, 1),
]


def _resnet_stage(first: int, in_ch: int, width: int, extent: int) -> list[_Row]:
    out = extent // 2
    strided = (out - 1) * 2
    return [
        (first, in_ch, width, 1, extent, 1, 0),
        (first + 1, width, width, 3, strided + 3 - 2, 2, 1),
        (first + 2, width, 4 * width, 1, out, 1, 0),
        (first + 3, in_ch, 4 * width, 1, strided + 1, 2, 0),
        (first + 4, 4 * width, width, 1, out, 1, 0),
        (first + 5, width, width, 3, out, 1, 1),
    ]


_RESNET50: list[_Row] = [
    (0, 3, 64, 7, 223, 2, 3),
    (1, 64, 64, 1, 56, 1, 0),
    (2, 64, 64, 3, 56, 1, 1),
    (3, 64, 256, 1, 56, 1, 0),
    (5, 256, 64, 1, 56, 1, 0),
    *_resnet_stage(11, 256, 128, 56),
    *_resnet_stage(24, 512, 256, 28),
    *_resnet_stage(43, 1024, 512, 14),
]


def _build(name: str, prefix: str, rows: list[_Row]) -> NetworkModel:
    layers = [
        ConvLayerSpec(
            layer_id=f"{prefix}.L{index}",
            in_channels=c_in,
            out_channels=c_out,
            kernel_h=k,
            kernel_w=k,
            input_h=extent,
            input_w=extent,
            stride=stride,
            padding=pad,
        )
        for index, c_in, c_out, k, extent, stride, pad in rows
    ]
    return NetworkModel(name, tuple(layers))


_REGISTRY: dict[str, Callable[[], NetworkModel]] = {
    "vgg16": lambda: _build("vgg16", "VGG", _VGG16),
    "alexnet": lambda: _build("alexnet", "AlexNet", _ALEXNET),
    "resnet50": lambda: _build("resnet50", "ResNet", _RESNET50),
}

NETWORK_NAMES: tuple[str, ...] = tuple(_REGISTRY)


def builtin_network(name: str) -> NetworkModel:
    """Return the unique-layer table of a built-in network by name."""
    try:
        factory = _REGISTRY[name.lower()]
    except KeyError:
        raise UnknownNetworkError(
            f"unknown network {name!r}; choose from {', '.join(NETWORK_NAMES)}"
        ) from None
    return factory()
