"""Small CNN crop classifier with an optional spatial attention gate.

Geometry is fixed: 3x64x64 input, three conv blocks (3x3 same-padding conv,
ReLU, 2x2 max pool) widening 8 -> 16 -> 32, which leaves a 32x8x8 feature
map.  The attention gate reduces that map over channels with max and mean,
stacks the two planes, pushes them through a single 7x7 conv, and squashes
with a sigmoid; the resulting 1x8x8 map multiplies the features elementwise.
A global average pool and a dense layer produce one sigmoid probability.

Variants:
  * ``plain``      - no attention gate.
  * ``sam``        - gate present, trained only through the classification loss.
  * ``super_sam``  - same architecture as ``sam``; the training loop adds a
                     supervision loss on the attention map.
"""

from __future__ import annotations

import numpy as np

from .autodiff import (
    Parameter,
    Tensor,
    broadcast_mul,
    channel_reduce,
    conv2d,
    dense,
    global_avg_pool,
    maxpool2,
    stack_channels,
)

__all__ = ["VARIANTS", "SamBlock", "ClassifierModel", "classify_crop",
           "INPUT_SHAPE", "ATTENTION_GRID"]

VARIANTS = ("plain", "sam", "super_sam")

INPUT_SHAPE = (3, 64, 64)
CONV_WIDTHS = (8, 16, 32)
ATTENTION_GRID = (8, 8)
SAM_KERNEL = 7


def _uniform_init(rng: np.random.Generator, shape: tuple, fan_in: int,
                  dtype) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class SamBlock:
    """Spatial attention gate: channel max+mean -> 7x7 conv -> sigmoid -> gate."""

    def __init__(self, weight: Parameter, bias: Parameter):
        self.weight = weight
        self.bias = bias

    @classmethod
    def initialize(cls, rng: np.random.Generator, dtype=np.float32) -> "SamBlock":
        k = SAM_KERNEL
        weight = Parameter(_uniform_init(rng, (1, 2, k, k), fan_in=2 * k * k, dtype=dtype),
                           name="sam.conv7.weight")
        bias = Parameter(np.zeros(1, dtype=dtype), name="sam.conv7.bias")
        return cls(weight, bias)

    def forward(self, features: Tensor) -> tuple[Tensor, Tensor]:
        """Return (gated features, attention map in (0, 1))."""
        reduced_max = channel_reduce(features, "max")
        reduced_mean = channel_reduce(features, "mean")
        stacked = stack_channels(reduced_max, reduced_mean)
        mask = conv2d(stacked, self.weight, self.bias, padding=SAM_KERNEL // 2).sigmoid()
        return broadcast_mul(features, mask), mask

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]


class ClassifierModel:
    """Three conv blocks, optional attention gate, global pool, dense head."""

    def __init__(self, variant: str, params: dict[str, Parameter]):
        self.variant = variant
        self._params = params
        self.sam = None
        if variant != "plain":
            self.sam = SamBlock(params["sam.conv7.weight"], params["sam.conv7.bias"])

    @classmethod
    def initialize(cls, variant: str, seed: int, dtype=np.float32) -> "ClassifierModel":
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
        rng = np.random.default_rng(seed)
        params: dict[str, Parameter] = {}
        c_in = INPUT_SHAPE[0]
        for i, width in enumerate(CONV_WIDTHS, start=1):
            params[f"conv{i}.weight"] = Parameter(
                _uniform_init(rng, (width, c_in, 3, 3), fan_in=c_in * 9, dtype=dtype),
                name=f"conv{i}.weight")
            params[f"conv{i}.bias"] = Parameter(np.zeros(width, dtype=dtype),
                                                name=f"conv{i}.bias")
            c_in = width
        if variant != "plain":
            k = SAM_KERNEL
            params["sam.conv7.weight"] = Parameter(
                _uniform_init(rng, (1, 2, k, k), fan_in=2 * k * k, dtype=dtype),
                name="sam.conv7.weight")
            params["sam.conv7.bias"] = Parameter(np.zeros(1, dtype=dtype),
                                                 name="sam.conv7.bias")
        params["head.weight"] = Parameter(
            _uniform_init(rng, (1, CONV_WIDTHS[-1]), fan_in=CONV_WIDTHS[-1], dtype=dtype),
            name="head.weight")
        params["head.bias"] = Parameter(np.zeros(1, dtype=dtype), name="head.bias")
        return cls(variant, params)

    def parameters(self) -> list[Parameter]:
        return list(self._params.values())

    def param_dict(self) -> dict[str, Parameter]:
        return dict(self._params)

    def forward(self, images: Tensor) -> tuple[Tensor, Tensor | None]:
        """Map a 3x64x64 crop (or a Bx3x64x64 batch) to probabilities.

        Returns ``(probs, mask)`` where probs has shape () for a single crop
        and (B,) for a batch; mask is the attention map ((1, 8, 8) or
        (B, 1, 8, 8)) or None for the plain variant.
        """
        if images.shape[-3:] != INPUT_SHAPE:
            raise ValueError(
                f"classifier expects input shaped {INPUT_SHAPE} (optionally batched), "
                f"got {images.shape}")
        h = images
        for i in range(1, len(CONV_WIDTHS) + 1):
            h = conv2d(h, self._params[f"conv{i}.weight"],
                       self._params[f"conv{i}.bias"], padding=1)
            h = h.relu()
            h = maxpool2(h)
        mask = None
        if self.sam is not None:
            h, mask = self.sam.forward(h)
        pooled = global_avg_pool(h)
        logit = dense(pooled, self._params["head.weight"], self._params["head.bias"])
        if logit.ndim == 2:
            probs = logit.reshape(logit.shape[0]).sigmoid()
        else:
            probs = logit.reshape(()).sigmoid()
        return probs, mask


def classify_crop(model: ClassifierModel, image: Tensor | np.ndarray
                  ) -> tuple[float, np.ndarray | None]:
    """Classify one 3x64x64 crop; returns (probability, attention map or None).

    The attention map comes back as a plain (8, 8) array.
    """
    if not isinstance(image, Tensor):
        image = Tensor(image)
    if image.shape != INPUT_SHAPE:
        raise ValueError(f"classify_crop expects a single {INPUT_SHAPE} crop, got {image.shape}")
    probs, mask = model.forward(image)
    mask_arr = None if mask is None else mask.data.reshape(ATTENTION_GRID).copy()
    return float(probs.data), mask_arr
