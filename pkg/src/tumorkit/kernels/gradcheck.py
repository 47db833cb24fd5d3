"""Central-difference verification of analytic backward passes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

# An op maps keyword array inputs to (output, backward) where
# backward(upstream) returns {input_name: gradient}.
Op = Callable[..., tuple]


@dataclass
class GradCheckReport:
    op: str
    shapes: dict[str, list[int]]
    h: float
    tol: float
    max_rel_err: float
    passed: bool
    worst_input: str = ""

    def to_dict(self) -> dict:
        return {
            "op": self.op,
            "shapes": self.shapes,
            "h": self.h,
            "tol": self.tol,
            "max_rel_err": self.max_rel_err,
            "pass": self.passed,
        }


def grad_check(
    op: Op,
    inputs: dict[str, np.ndarray],
    h: float = 1e-4,
    tol: float = 1e-5,
    seed: int = 0,
    name: Optional[str] = None,
    max_coords: Optional[int] = None,
) -> GradCheckReport:
    """Compare ``op``'s backward against central differences.

    The scalar probe is ``sum(g * op(**inputs)[0])`` for a fixed random
    upstream gradient ``g``.  Every coordinate of every input that the
    backward returns a gradient for is perturbed by ``±h`` (or a random
    subset of ``max_coords`` per input).  The error per coordinate is
    ``|numeric - analytic| / max(1, |analytic|)``.
    """
    rng = np.random.default_rng(seed)
    inputs = {k: np.array(v, dtype=np.float64) for k, v in inputs.items()}
    out, backward = op(**inputs)
    upstream = rng.normal(size=np.shape(out))
    analytic = backward(upstream if np.ndim(out) else float(upstream))

    def probe() -> float:
        return float(np.sum(upstream * op(**inputs)[0]))

    worst, worst_name = 0.0, ""
    for key, grad in analytic.items():
        arr = inputs[key]
        grad = np.asarray(grad).reshape(arr.shape)
        flat = arr.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        gflat = grad.reshape(-1)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + h
            up = probe()
            flat[i] = orig - h
            down = probe()
            flat[i] = orig
            numeric = (up - down) / (2 * h)
            err = abs(numeric - gflat[i]) / max(1.0, abs(gflat[i]))
            if err > worst:
                worst, worst_name = err, key

    return GradCheckReport(
        op=name or getattr(op, "__name__", "op"),
        shapes={k: list(v.shape) for k, v in inputs.items()},
        h=h,
        tol=tol,
        max_rel_err=float(worst),
        passed=bool(worst < tol),
        worst_input=worst_name,
    )
