"""Pseudo ground truth for the attention map, derived from body keypoints.

A skeleton is a plain dict mapping joint names to (x, y) pixel coordinates;
missing keys mean the joint was not detected.  For a given PPE type we take
the bounding rectangle of its joints of interest, pad it by a margin, clip it
to the crop, and rasterize it onto the attention grid with outward rounding.
Cells inside the rectangle are 1, the rest 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["JOINT_NAMES", "Skeleton", "Rect", "PpeTypeConfig", "PPE_TYPES",
           "NoSupervision", "crop_region", "pseudo_gt_mask"]

JOINT_NAMES = (
    "head", "neck",
    "l_shoulder", "r_shoulder",
    "l_hip", "r_hip",
    "l_ankle", "r_ankle",
)

# type aliases: joints in pixels, rectangles as (x0, y0, x1, y1)
Skeleton = dict
Rect = tuple


class NoSupervision(Exception):
    """Raised when no joint of interest is present, so no mask can be built."""


@dataclass(frozen=True)
class PpeTypeConfig:
    """Where on the person a PPE type lives and which joints pin it down."""

    name: str
    crop_band: tuple[float, float]
    joints_of_interest: tuple[str, ...]
    margin: float = 0.10

    def __post_init__(self):
        top, bottom = self.crop_band
        if not (0.0 <= top < bottom <= 1.0):
            raise ValueError(f"crop band must satisfy 0 <= top < bottom <= 1, got {self.crop_band}")
        if not self.joints_of_interest:
            raise ValueError("joints_of_interest must be non-empty")
        unknown = [j for j in self.joints_of_interest if j not in JOINT_NAMES]
        if unknown:
            raise ValueError(f"unknown joint names {unknown}; known: {list(JOINT_NAMES)}")
        if self.margin < 0:
            raise ValueError(f"margin must be >= 0, got {self.margin}")


PPE_TYPES = {
    "helmet": PpeTypeConfig("helmet", (0.0, 0.40), ("head",)),
    "mask": PpeTypeConfig("mask", (0.0, 0.35), ("head",)),
    "boots": PpeTypeConfig("boots", (0.70, 1.0), ("l_ankle", "r_ankle")),
}


def crop_region(person_box: Rect, config: PpeTypeConfig) -> Rect:
    """Vertical band of the person box where this PPE type is expected.

    The band spans the full box width; its top and bottom are the configured
    fractions of the box height.
    """
    x0, y0, x1, y1 = person_box
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate person box {person_box}")
    top, bottom = config.crop_band
    height = y1 - y0
    return (x0, y0 + top * height, x1, y0 + bottom * height)


def pseudo_gt_mask(skeleton: Skeleton, config: PpeTypeConfig, crop: Rect,
                   grid_h: int, grid_w: int) -> np.ndarray:
    """Rasterize the joints-of-interest rectangle onto a grid_h x grid_w grid.

    Coordinates in ``skeleton`` and ``crop`` share one pixel frame.  The joint
    bounding rectangle grows by ``margin * max(crop_w, crop_h)`` on every
    side, is clipped to the crop, and is then rounded outward (floor the min
    corner, ceil the max corner) onto the grid.  The result is a binary
    float32 array with at least one cell set.

    Raises :class:`NoSupervision` when none of the joints of interest are
    present.
    """
    if grid_h < 1 or grid_w < 1:
        raise ValueError(f"grid must be at least 1x1, got {grid_h}x{grid_w}")
    cx0, cy0, cx1, cy1 = crop
    cw, ch = cx1 - cx0, cy1 - cy0
    if not (cw > 0 and ch > 0):
        raise ValueError(f"degenerate crop {crop}")

    points = []
    for name in config.joints_of_interest:
        if name not in skeleton:
            continue
        x, y = skeleton[name]
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError(f"joint {name!r} has non-finite coordinates ({x}, {y})")
        points.append((x - cx0, y - cy0))
    if not points:
        raise NoSupervision(
            f"none of the joints {config.joints_of_interest} present for {config.name!r}")

    pad = config.margin * max(cw, ch)
    x0 = min(p[0] for p in points) - pad
    y0 = min(p[1] for p in points) - pad
    x1 = max(p[0] for p in points) + pad
    y1 = max(p[1] for p in points) + pad
    # clip to the crop
    x0, x1 = max(x0, 0.0), min(x1, cw)
    y0, y1 = max(y0, 0.0), min(y1, ch)
    x1, y1 = max(x1, x0), max(y1, y0)

    gx0 = math.floor(x0 * grid_w / cw)
    gx1 = math.ceil(x1 * grid_w / cw)
    gy0 = math.floor(y0 * grid_h / ch)
    gy1 = math.ceil(y1 * grid_h / ch)
    # outward rounding can still collapse on grid lines; force one cell
    gx0 = min(max(gx0, 0), grid_w - 1)
    gy0 = min(max(gy0, 0), grid_h - 1)
    gx1 = max(min(gx1, grid_w), gx0 + 1)
    gy1 = max(min(gy1, grid_h), gy0 + 1)

    mask = np.zeros((grid_h, grid_w), dtype=np.float32)
    mask[gy0:gy1, gx0:gx1] = 1.0
    return mask
