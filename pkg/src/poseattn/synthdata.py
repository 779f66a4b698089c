"""Synthetic stick-figure crops for exercising the classifier end to end.

Each sample is a jittered stick figure on a dark background.  Positives get a
saturated-hue patch filling the joints-of-interest rectangle (the same
rectangle the attention supervision uses); with configurable probability a
decoy patch of the same hue and size lands somewhere that does NOT overlap
that rectangle, for positives and negatives alike.  The decoy is what makes
a purely color-based classifier insufficient: only the patch *location*
separates the classes.  Uniform noise is added last and values are clamped
to [0, 1].

Every sample draws from its own seeded stream (SeedSequence spawn), so
generation is order-stable and per-sample reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .supervision import PPE_TYPES, PpeTypeConfig

__all__ = ["SynthConfig", "Sample", "generate_dataset", "render_sample",
           "joint_patch_rect", "hue_mask", "PPE_HUE"]

PPE_HUE = (1.0, 1.0, 0.0)           # saturated yellow
BACKGROUND = (0.10, 0.12, 0.16)
BODY_COLOR = (0.45, 0.47, 0.50)
HUE_TOLERANCE = 0.25                # per-channel window used by the hue oracle

# Anatomical jitter bands, as fractions of the figure's vertical span (or of
# the image size where noted).  The head stays inside the top quarter of the
# figure and the ankles inside its bottom 15%.
FIGURE_TOP = (0.06, 0.12)           # of image size
FIGURE_BOTTOM = (0.88, 0.94)        # of image size
CENTER_X = (0.42, 0.58)             # of image size
HEAD_DROP = (0.02, 0.10)            # below figure top, of span
NECK_DROP = (0.16, 0.22)
HIP_DROP = (0.50, 0.58)
ANKLE_RISE = (0.00, 0.13)           # above figure bottom, of span
SHOULDER_HALF = (0.10, 0.16)        # of image size
HIP_HALF = (0.06, 0.10)             # of image size
ANKLE_SWAY = (-0.04, 0.06)          # of image size
HEAD_RADIUS = (0.055, 0.075)        # of image size
LIMB_RADIUS = 0.018                 # of image size


@dataclass(frozen=True)
class SynthConfig:
    n_samples: int
    positive_fraction: float = 0.5
    image_size: int = 64
    ppe: PpeTypeConfig = field(default_factory=lambda: PPE_TYPES["helmet"])
    distractor_probability: float = 0.5
    noise_amplitude: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if not 0.0 <= self.positive_fraction <= 1.0:
            raise ValueError(f"positive_fraction must lie in [0, 1], got {self.positive_fraction}")
        if self.image_size < 16:
            raise ValueError(f"image_size must be >= 16, got {self.image_size}")
        if not 0.0 <= self.distractor_probability <= 1.0:
            raise ValueError(
                f"distractor_probability must lie in [0, 1], got {self.distractor_probability}")
        if not 0.0 <= self.noise_amplitude < 0.5:
            raise ValueError(f"noise_amplitude must lie in [0, 0.5), got {self.noise_amplitude}")


@dataclass
class Sample:
    id: str
    label: int
    image: np.ndarray          # (3, S, S) float32 in [0, 1]
    skeleton: dict             # joint name -> (x, y) in pixels


def _uniform(rng: np.random.Generator, band: tuple[float, float]) -> float:
    return float(rng.uniform(band[0], band[1]))


def _random_skeleton(rng: np.random.Generator, size: int) -> dict:
    s = float(size)
    y_top = s * _uniform(rng, FIGURE_TOP)
    y_bot = s * _uniform(rng, FIGURE_BOTTOM)
    span = y_bot - y_top
    cx = s * _uniform(rng, CENTER_X)

    head = (cx + s * float(rng.uniform(-0.02, 0.02)), y_top + span * _uniform(rng, HEAD_DROP))
    neck = (cx, y_top + span * _uniform(rng, NECK_DROP))
    sh = s * _uniform(rng, SHOULDER_HALF)
    shoulder_y = neck[1] + span * float(rng.uniform(0.01, 0.04))
    hip_half = s * _uniform(rng, HIP_HALF)
    hip_y = y_top + span * _uniform(rng, HIP_DROP)
    ankles = []
    for _ in range(2):
        ay = y_bot - span * _uniform(rng, ANKLE_RISE)
        ankles.append(ay)
    sway_l = s * _uniform(rng, ANKLE_SWAY)
    sway_r = s * _uniform(rng, ANKLE_SWAY)
    return {
        "head": head,
        "neck": neck,
        "l_shoulder": (cx - sh, shoulder_y),
        "r_shoulder": (cx + sh, shoulder_y),
        "l_hip": (cx - hip_half, hip_y),
        "r_hip": (cx + hip_half, hip_y),
        "l_ankle": (cx - hip_half + sway_l, ankles[0]),
        "r_ankle": (cx + hip_half + sway_r, ankles[1]),
    }


def joint_patch_rect(skeleton: dict, ppe: PpeTypeConfig, size: int) -> tuple:
    """Pixel rectangle of the joints of interest plus margin, clipped to the image.

    This is the same geometry the attention supervision rasterizes, so the
    rendered patch and the pseudo-GT mask line up by construction.
    """
    points = [skeleton[j] for j in ppe.joints_of_interest if j in skeleton]
    if not points:
        raise ValueError(f"skeleton has none of the joints {ppe.joints_of_interest}")
    pad = ppe.margin * size
    x0 = max(min(p[0] for p in points) - pad, 0.0)
    y0 = max(min(p[1] for p in points) - pad, 0.0)
    x1 = min(max(p[0] for p in points) + pad, float(size))
    y1 = min(max(p[1] for p in points) + pad, float(size))
    return (x0, y0, x1, y1)


def _pixel_bounds(rect: tuple, size: int) -> tuple[int, int, int, int]:
    x0, y0, x1, y1 = rect
    return (max(int(math.floor(x0)), 0), max(int(math.floor(y0)), 0),
            min(int(math.ceil(x1)), size), min(int(math.ceil(y1)), size))


def _paint_disk(img: np.ndarray, cx: float, cy: float, radius: float, color) -> None:
    size = img.shape[0]
    x0 = max(int(math.floor(cx - radius)), 0)
    x1 = min(int(math.ceil(cx + radius)) + 1, size)
    y0 = max(int(math.floor(cy - radius)), 0)
    y1 = min(int(math.ceil(cy + radius)) + 1, size)
    if x0 >= x1 or y0 >= y1:
        return
    ys, xs = np.mgrid[y0:y1, x0:x1]
    mask = (xs - cx) ** 2 + (ys - cy) ** 2 <= radius ** 2
    img[y0:y1, x0:x1][mask] = color


def _paint_segment(img: np.ndarray, p0, p1, radius: float, color) -> None:
    size = img.shape[0]
    x0 = max(int(math.floor(min(p0[0], p1[0]) - radius)), 0)
    x1 = min(int(math.ceil(max(p0[0], p1[0]) + radius)) + 1, size)
    y0 = max(int(math.floor(min(p0[1], p1[1]) - radius)), 0)
    y1 = min(int(math.ceil(max(p0[1], p1[1]) + radius)) + 1, size)
    if x0 >= x1 or y0 >= y1:
        return
    ys, xs = np.mgrid[y0:y1, x0:x1]
    dx, dy = p1[0] - p0[0], p1[1] - p0[1]
    length_sq = dx * dx + dy * dy
    if length_sq == 0.0:
        _paint_disk(img, p0[0], p0[1], radius, color)
        return
    t = np.clip(((xs - p0[0]) * dx + (ys - p0[1]) * dy) / length_sq, 0.0, 1.0)
    dist_sq = (xs - (p0[0] + t * dx)) ** 2 + (ys - (p0[1] + t * dy)) ** 2
    img[y0:y1, x0:x1][dist_sq <= radius ** 2] = color


def _paint_figure(img: np.ndarray, skeleton: dict, size: int,
                  head_radius: float) -> None:
    limb = LIMB_RADIUS * size
    hip_mid = ((skeleton["l_hip"][0] + skeleton["r_hip"][0]) / 2.0,
               (skeleton["l_hip"][1] + skeleton["r_hip"][1]) / 2.0)
    segments = [
        (skeleton["neck"], skeleton["head"]),
        (skeleton["l_shoulder"], skeleton["r_shoulder"]),
        (skeleton["neck"], hip_mid),
        (skeleton["l_hip"], skeleton["r_hip"]),
        (skeleton["l_hip"], skeleton["l_ankle"]),
        (skeleton["r_hip"], skeleton["r_ankle"]),
    ]
    for p0, p1 in segments:
        _paint_segment(img, p0, p1, limb, BODY_COLOR)
    _paint_disk(img, skeleton["head"][0], skeleton["head"][1], head_radius, BODY_COLOR)


def _place_distractor(rng: np.random.Generator, rect: tuple, size: int
                      ) -> tuple[int, int, int, int]:
    """Pick pixel bounds for a decoy patch of the same size, disjoint from rect."""
    x0, y0, x1, y1 = _pixel_bounds(rect, size)
    w, h = x1 - x0, y1 - y0
    if w >= size and h >= size:
        raise ValueError("joint rectangle covers the whole image; no room for a decoy")
    for _ in range(100):
        dx0 = int(rng.integers(0, size - w + 1))
        dy0 = int(rng.integers(0, size - h + 1))
        if dx0 >= x1 or dx0 + w <= x0 or dy0 >= y1 or dy0 + h <= y0:
            return (dx0, dy0, dx0 + w, dy0 + h)
    # deterministic fallback: the corner position farthest from the rectangle
    corners = [(0, 0), (size - w, 0), (0, size - h), (size - w, size - h)]
    cx, cy = (x0 + x1) / 2.0, (y0 + y1) / 2.0
    for dx0, dy0 in sorted(corners, key=lambda c: -((c[0] + w / 2 - cx) ** 2
                                                    + (c[1] + h / 2 - cy) ** 2)):
        if dx0 >= x1 or dx0 + w <= x0 or dy0 >= y1 or dy0 + h <= y0:
            return (dx0, dy0, dx0 + w, dy0 + h)
    raise ValueError("could not place a decoy patch disjoint from the joint rectangle")


def render_sample(rng: np.random.Generator, config: SynthConfig, label: int,
                  sample_id: str) -> Sample:
    """Render one sample from the given stream.  Draw order is fixed."""
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label}")
    size = config.image_size
    skeleton = _random_skeleton(rng, size)
    head_radius = HEAD_RADIUS[0] * size + (HEAD_RADIUS[1] - HEAD_RADIUS[0]) * size * float(rng.random())

    img = np.empty((size, size, 3), dtype=np.float32)
    img[...] = BACKGROUND
    _paint_figure(img, skeleton, size, head_radius)

    rect = joint_patch_rect(skeleton, config.ppe, size)
    if label == 1:
        px0, py0, px1, py1 = _pixel_bounds(rect, size)
        img[py0:py1, px0:px1] = PPE_HUE

    if float(rng.random()) < config.distractor_probability:
        dx0, dy0, dx1, dy1 = _place_distractor(rng, rect, size)
        img[dy0:dy1, dx0:dx1] = PPE_HUE

    if config.noise_amplitude > 0:
        img += rng.uniform(-config.noise_amplitude, config.noise_amplitude,
                           img.shape).astype(np.float32)
    np.clip(img, 0.0, 1.0, out=img)
    return Sample(id=sample_id, label=label,
                  image=np.ascontiguousarray(img.transpose(2, 0, 1)),
                  skeleton=skeleton)


def generate_dataset(config: SynthConfig) -> list[Sample]:
    """Render the full dataset: exactly round(n * positive_fraction) positives.

    Labels are assigned up front and shuffled once with the master seed; each
    sample then renders from its own spawned stream, so any sample is
    reproducible independently of the others.
    """
    n = config.n_samples
    n_pos = int(math.floor(n * config.positive_fraction + 0.5))
    labels = np.array([1] * n_pos + [0] * (n - n_pos))
    np.random.default_rng(config.seed).shuffle(labels)
    streams = np.random.SeedSequence(config.seed).spawn(n)
    return [
        render_sample(np.random.default_rng(streams[i]), config, int(labels[i]),
                      f"sample_{i:05d}")
        for i in range(n)
    ]


def hue_mask(image: np.ndarray, tolerance: float = HUE_TOLERANCE) -> np.ndarray:
    """Boolean (H, W) map of pixels within the per-channel window of PPE_HUE."""
    if image.ndim != 3 or image.shape[0] != 3:
        raise ValueError(f"expected a (3, H, W) image, got {image.shape}")
    r, g, b = image[0], image[1], image[2]
    return ((np.abs(r - PPE_HUE[0]) <= tolerance)
            & (np.abs(g - PPE_HUE[1]) <= tolerance)
            & (np.abs(b - PPE_HUE[2]) <= tolerance))
