"""Gradient verification against central finite differences."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .tensor import Tape, Tensor, backward, zero_grad

__all__ = ["GradCheckReport", "grad_check"]

# Relative error uses a floored denominator so that near-zero true gradients
# are judged against finite-difference noise on a sensible scale.
_DENOM_FLOOR = 1e-3


@dataclass
class GradCheckReport:
    max_relative_error: float
    per_param: list
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.tolerance


def grad_check(func: Callable[[], Tensor], params: Sequence[Tensor],
               tolerance: float = 1e-4, step: float = 1e-5) -> GradCheckReport:
    """Compare tape gradients of ``func()`` with central finite differences.

    ``func`` must rebuild its forward pass from the current parameter values
    and return a scalar tensor.  Report-only: never raises on mismatch.
    """
    zero_grad(params)
    with Tape() as tape:
        out = func()
    backward(out, tape)
    analytic = [np.array(p.grad if p.grad is not None else np.zeros_like(p.values))
                for p in params]

    per_param = []
    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.values.reshape(-1)
        ga_flat = ga.reshape(-1)
        err = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_plus = func().item()
            flat[i] = orig - step
            f_minus = func().item()
            flat[i] = orig
            fd = (f_plus - f_minus) / (2.0 * step)
            denom = max(abs(ga_flat[i]), abs(fd), _DENOM_FLOOR)
            err = max(err, abs(ga_flat[i] - fd) / denom)
        per_param.append(err)
        worst = max(worst, err)
    return GradCheckReport(max_relative_error=worst, per_param=per_param, tolerance=tolerance)
