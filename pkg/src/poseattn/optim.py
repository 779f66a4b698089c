"""Adam parameter updates with bias correction."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .autodiff import Parameter

__all__ = ["adam_step"]

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8


def adam_step(params: Iterable[Parameter], learning_rate: float) -> None:
    """Apply one bias-corrected Adam update to every parameter, then clear grads.

    Uses beta1=0.9, beta2=0.999, epsilon=1e-8 (epsilon added after the square
    root of the bias-corrected second moment).  A non-finite gradient aborts
    the run, naming the offending parameter.
    """
    if not learning_rate > 0:
        raise ValueError(f"learning rate must be positive, got {learning_rate}")
    for p in params:
        g = p.grad
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(
                f"non-finite gradient in parameter {p.name!r}; aborting update"
            )
        p.step_count += 1
        t = p.step_count
        p.adam_m *= BETA1
        p.adam_m += (1.0 - BETA1) * g
        p.adam_v *= BETA2
        p.adam_v += (1.0 - BETA2) * np.square(g)
        m_hat = p.adam_m / (1.0 - BETA1 ** t)
        v_hat = p.adam_v / (1.0 - BETA2 ** t)
        p.data -= learning_rate * m_hat / (np.sqrt(v_hat) + EPSILON)
        p.grad[...] = 0.0
