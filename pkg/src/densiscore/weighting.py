"""Per-sample importance weights from fitted densities."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .density import DensityModel, evaluate
from .errors import NonFiniteWeight

ANCHORS = ("X", "Y", "uniform", "oracle", "external")

Target = Union[None, float, DensityModel, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Unnormalised non-negative weights plus where they came from.

    Metric formulas divide by the weight total, so scaling a WeightVector by
    any positive constant leaves every metric unchanged.
    """

    weights: np.ndarray
    anchor: str = "uniform"
    floor_applied: bool = False
    bandwidth: Optional[tuple] = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if w.size == 0:
            raise ValueError("empty weight vector")
        if not np.all(np.isfinite(w)):
            raise NonFiniteWeight("weights must be finite")
        if np.any(w < 0) or not np.any(w > 0):
            raise NonFiniteWeight("weights must be non-negative with a positive total")
        if self.anchor not in ANCHORS:
            raise ValueError(f"unknown anchor {self.anchor!r}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.weights.size

    @property
    def effective_sample_size(self) -> float:
        w = self.weights
        return math.fsum(w) ** 2 / math.fsum(w * w)

    @property
    def min(self) -> float:
        return float(self.weights.min())

    @property
    def max(self) -> float:
        return float(self.weights.max())

    def scaled(self, c: float) -> "WeightVector":
        return WeightVector(self.weights * c, self.anchor, self.floor_applied, self.bandwidth)

    def __mul__(self, other) -> "WeightVector":
        """Combine with another weighting (cost, priority, ...) by multiplication."""
        other_w = other.weights if isinstance(other, WeightVector) else np.asarray(other, dtype=float)
        return WeightVector(self.weights * other_w, self.anchor, self.floor_applied, self.bandwidth)

    __rmul__ = __mul__


def uniform_weights(n: int) -> WeightVector:
    if n < 1:
        raise ValueError("n must be at least 1")
    return WeightVector(np.ones(n), "uniform")


def as_weights(weights, n: int) -> WeightVector:
    """Accept None, an array, or a WeightVector and check its length."""
    if weights is None:
        return uniform_weights(n)
    if not isinstance(weights, WeightVector):
        weights = WeightVector(np.asarray(weights, dtype=float), "external")
    if len(weights) != n:
        raise ValueError(f"{len(weights)} weights for {n} samples")
    return weights


def _target_values(target: Target, anchors: np.ndarray, n: int) -> np.ndarray:
    if target is None:
        return np.ones(n)
    if isinstance(target, DensityModel):
        return evaluate(target, anchors)
    if callable(target):
        return np.asarray(target(anchors), dtype=float).reshape(n)
    return np.full(n, float(target))


def inverse_density_weights(model: DensityModel, anchors, target: Target = None,
                            floor_ratio: float = 0.0, anchor: str = "Y") -> WeightVector:
    """Weights ``q(t_i) / max(g(t_i), floor_ratio * median_j g(t_j))``.

    ``model`` is the density ``g`` fitted on the anchors (actual values for
    Y-weighting, samples for X-weighting).  ``target`` is the density ``q``
    the evaluation should represent; it defaults to uniform.  A positive
    ``floor_ratio`` caps the weight of points in near-empty regions (1e-3 is
    a reasonable choice for data with steep boundary peaks).
    """
    if not 0.0 <= floor_ratio < 1.0:
        raise ValueError("floor_ratio must lie in [0, 1)")
    t = np.asarray(anchors, dtype=float)
    g = evaluate(model, t)
    n = g.size
    floor_applied = False
    if floor_ratio > 0:
        floor = floor_ratio * float(np.median(g))
        floor_applied = bool(np.any(g < floor))
        g = np.maximum(g, floor)
    if np.any(g <= 0) or not np.all(np.isfinite(g)):
        raise NonFiniteWeight("density is zero at some anchor; set floor_ratio > 0")
    q = _target_values(target, t, n)
    w = q / g
    if not np.all(np.isfinite(w)):
        raise NonFiniteWeight("inverse density overflowed")
    bw = model.bandwidth.h if model.bandwidth is not None else None
    return WeightVector(w, anchor, floor_applied, bw)
