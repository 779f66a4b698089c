"""Finite-difference verification of the autodiff engine.

Analytic gradients from ``backward()`` are compared against central
differences ``(f(x + h) - f(x - h)) / (2h)`` computed in 64-bit arithmetic.
The check is exhaustive for small tensors and falls back to a seeded random
subsample of elements for large ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

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

__all__ = ["grad_check", "standard_checks", "GradCheckEntry", "GradCheckReport"]

DEFAULT_STEP = 1e-5
DEFAULT_TOLERANCE = 1e-4
# Denominator floor for the relative error so that near-zero analytic and
# numeric gradients (agreeing to within finite-difference noise) do not
# produce a spurious blow-up.
REL_ERROR_FLOOR = 1e-6


@dataclass
class GradCheckEntry:
    name: str
    max_rel_error: float
    n_checked: int

    def passed(self, tolerance: float) -> bool:
        return self.max_rel_error <= tolerance


@dataclass
class GradCheckReport:
    tolerance: float
    entries: list[GradCheckEntry] = field(default_factory=list)

    @property
    def max_rel_error(self) -> float:
        return max((e.max_rel_error for e in self.entries), default=0.0)

    @property
    def passed(self) -> bool:
        return all(e.passed(self.tolerance) for e in self.entries)


def grad_check(forward: Callable[[], Tensor],
               targets: Sequence[tuple[str, Tensor]],
               *,
               tolerance: float = DEFAULT_TOLERANCE,
               step: float = DEFAULT_STEP,
               max_probes: int = 200,
               seed: int = 0) -> GradCheckReport:
    """Check analytic vs. numeric gradients of ``forward`` w.r.t. ``targets``.

    ``forward`` takes no arguments, reads the target tensors, and returns a
    Tensor of any shape; it is reduced to a scalar through a fixed random
    projection so that every output element influences the check.  Each
    target is probed at every element, or at ``max_probes`` seeded random
    elements if it is larger than that.
    """
    rng = np.random.default_rng(seed)
    for _, t in targets:
        t.requires_grad = True
    proj = rng.standard_normal(forward().data.shape)

    out = forward()
    loss = (out * proj).sum()
    for _, t in targets:
        t.grad = np.zeros_like(t.data)
    loss.backward()
    analytic = {name: t.grad.copy() for name, t in targets}

    def objective() -> float:
        return float((forward().data * proj).sum())

    report = GradCheckReport(tolerance=tolerance)
    for name, t in targets:
        flat = t.data.reshape(-1)
        n = flat.size
        if n > max_probes:
            probes = rng.choice(n, size=max_probes, replace=False)
        else:
            probes = np.arange(n)
        a_flat = analytic[name].reshape(-1)
        worst = 0.0
        for i in probes:
            saved = flat[i].copy()
            flat[i] = saved + step
            f_plus = objective()
            flat[i] = saved - step
            f_minus = objective()
            flat[i] = saved
            numeric = (f_plus - f_minus) / (2.0 * step)
            a = a_flat[i]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), REL_ERROR_FLOOR)
            worst = max(worst, rel)
        report.entries.append(GradCheckEntry(name, worst, len(probes)))
        t.grad = np.zeros_like(t.data) if isinstance(t, Parameter) else None
    return report


def _away_from_kinks(arr: np.ndarray, margin: float = 1e-3) -> np.ndarray:
    """Push values off zero so ReLU-style kinks cannot straddle the probe step."""
    arr[np.abs(arr) < margin] += 2 * margin
    return arr


def standard_checks(*, tolerance: float = DEFAULT_TOLERANCE,
                    seed: int = 0) -> GradCheckReport:
    """Run the gradient check over every layer type plus composed blocks.

    Everything runs in float64, per-op on small tensors and end to end on a
    real 3x64x64 input through both classifier variants.
    """
    from .model import ClassifierModel, SamBlock

    rng = np.random.default_rng(seed)
    report = GradCheckReport(tolerance=tolerance)

    def t(*shape) -> Tensor:
        return Tensor(rng.uniform(-1.0, 1.0, shape), dtype=np.float64)

    def run(name: str, forward, targets, max_probes: int = 200) -> None:
        sub = grad_check(forward, targets, tolerance=tolerance, step=DEFAULT_STEP,
                         max_probes=max_probes, seed=seed)
        worst = max(e.max_rel_error for e in sub.entries)
        n = sum(e.n_checked for e in sub.entries)
        report.entries.append(GradCheckEntry(name, worst, n))

    x = t(2, 6, 6); w = t(3, 2, 3, 3); b = t(3)
    run("conv2d 3x3 pad1", lambda: conv2d(x, w, b, padding=1),
        [("x", x), ("w", w), ("b", b)])

    x1 = t(3, 5, 5); w1 = t(2, 3, 1, 1); b1 = t(2)
    run("conv2d 1x1", lambda: conv2d(x1, w1, b1),
        [("x", x1), ("w", w1), ("b", b1)])

    x7 = t(2, 8, 8); w7 = t(1, 2, 7, 7); b7 = t(1)
    run("conv2d 7x7 pad3", lambda: conv2d(x7, w7, b7, padding=3),
        [("x", x7), ("w", w7), ("b", b7)])

    xs = t(4, 2, 9, 9); ws = t(3, 2, 3, 3); bs = t(3)
    run("conv2d 3x3 stride2 batched", lambda: conv2d(xs, ws, bs, stride=2, padding=1),
        [("x", xs), ("w", ws), ("b", bs)])

    xd = t(4, 10); wd = t(3, 10); bd = t(3)
    run("dense", lambda: dense(xd, wd, bd), [("x", xd), ("w", wd), ("b", bd)])

    xm = t(3, 6, 6)
    run("maxpool2", lambda: maxpool2(xm), [("x", xm)])

    xg = t(2, 3, 4, 4)
    run("global_avg_pool", lambda: global_avg_pool(xg), [("x", xg)])

    xc = t(4, 5, 5)
    run("channel_reduce max", lambda: channel_reduce(xc, "max"), [("x", xc)])
    run("channel_reduce mean", lambda: channel_reduce(xc, "mean"), [("x", xc)])

    xe = t(3, 4, 4)
    run("sigmoid", lambda: xe.sigmoid(), [("x", xe)])

    xr = Tensor(_away_from_kinks(rng.uniform(-1.0, 1.0, (5, 5))), dtype=np.float64)
    run("relu", lambda: xr.relu(), [("x", xr)])

    sa = t(1, 4, 4); sb = t(1, 4, 4)
    run("stack_channels", lambda: stack_channels(sa, sb), [("a", sa), ("b", sb)])

    xb = t(3, 4, 4); mb = t(1, 4, 4)
    run("broadcast_mul", lambda: broadcast_mul(xb, mb), [("x", xb), ("m", mb)])

    sam = SamBlock.initialize(np.random.default_rng(seed), dtype=np.float64)
    feats = t(4, 8, 8)
    run("sam block", lambda: sam.forward(feats)[0],
        [("features", feats), ("conv7.weight", sam.weight), ("conv7.bias", sam.bias)])

    for variant in ("plain", "sam"):
        model = ClassifierModel.initialize(variant, seed=seed, dtype=np.float64)
        img = Tensor(rng.uniform(0.0, 1.0, (3, 64, 64)), dtype=np.float64)

        def fwd(model=model):
            prob, mask = model.forward(img)
            return prob if mask is None else prob + mask.mean()

        targets = [("image", img)] + [(p.name, p) for p in model.parameters()]
        run(f"classifier {variant} end-to-end", fwd, targets, max_probes=60)

    return report
