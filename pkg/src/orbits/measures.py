"""Weighted point clouds in polar coordinates and weighted Kolmogorov–Smirnov distances."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

TWO_PI = 2 * math.pi


def weighted_ks(values: np.ndarray, weights: np.ndarray, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """Exact sup-distance between the weighted empirical CDF and ``cdf``.

    The supremum of a step function against a continuous nondecreasing CDF is
    attained at a jump, just before or just after it.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.size == 0:
        return 1.0
    order = np.argsort(values, kind="stable")
    x = values[order]
    w = weights[order]
    total = w.sum()
    if total <= 0:
        raise ValueError("KS distance needs positive total weight")
    cum = np.cumsum(w) / total
    # collapse ties so the empirical CDF is read at the top of each jump
    last = np.r_[x[1:] != x[:-1], True]
    xs = x[last]
    after = cum[last]
    before = np.r_[0.0, after[:-1]]
    F = np.asarray(cdf(xs), dtype=float)
    return float(max(np.max(after - F), np.max(F - before), 0.0))


@dataclass
class EmpiricalMeasure:
    """Finite weighted sum of point masses in the punctured plane, stored in polar form."""

    r: np.ndarray
    theta: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.theta = np.mod(np.asarray(self.theta, dtype=float), TWO_PI)
        self.weight = np.asarray(self.weight, dtype=float)
        if not (self.r.shape == self.theta.shape == self.weight.shape):
            raise ValueError("r, theta and weight must have the same shape")
        if np.any(self.weight < 0):
            raise ValueError("weights must be nonnegative")

    @classmethod
    def from_xy(cls, x, y, weight=None) -> "EmpiricalMeasure":
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if weight is None:
            weight = np.ones_like(x)
        return cls(np.hypot(x, y), np.arctan2(y, x), weight)

    @classmethod
    def empty(cls) -> "EmpiricalMeasure":
        z = np.zeros(0)
        return cls(z, z, z)

    def __len__(self) -> int:
        return self.r.size

    @property
    def total(self) -> float:
        return float(self.weight.sum())

    @property
    def x(self) -> np.ndarray:
        return self.r * np.cos(self.theta)

    @property
    def y(self) -> np.ndarray:
        return self.r * np.sin(self.theta)

    def integrate(self, f: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> float:
        """``sum_j w_j f(r_j, theta_j)`` for a vectorized ``f``."""
        if len(self) == 0:
            return 0.0
        return float(np.dot(self.weight, f(self.r, self.theta)))

    def integrate_xy(self, f: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> float:
        if len(self) == 0:
            return 0.0
        return float(np.dot(self.weight, f(self.x, self.y)))

    def mass(self, mask_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> float:
        return self.integrate(lambda r, t: mask_fn(r, t).astype(float))

    def normalized(self) -> "EmpiricalMeasure":
        t = self.total
        if t <= 0:
            raise ValueError("cannot normalize a zero measure")
        return EmpiricalMeasure(self.r, self.theta, self.weight / t)

    def scaled(self, factor: float) -> "EmpiricalMeasure":
        return EmpiricalMeasure(self.r * factor, self.theta, self.weight)

    def ks_radial(self, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
        return weighted_ks(self.r, self.weight, cdf)

    def ks_angular(self, cdf: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> float:
        """KS distance of the angular marginal, uniform on ``[0, 2 pi)`` by default."""
        if cdf is None:
            cdf = lambda t: t / TWO_PI  # noqa: E731
        return weighted_ks(self.theta, self.weight, cdf)

    def radial_cdf(self, grid: np.ndarray) -> np.ndarray:
        order = np.argsort(self.r)
        cum = np.r_[0.0, np.cumsum(self.weight[order])] / max(self.total, 1e-300)
        idx = np.searchsorted(self.r[order], grid, side="right")
        return cum[idx]

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("r,theta,weight\n")
            for r, t, w in zip(self.r, self.theta, self.weight):
                fh.write(f"{r:.17g},{t:.17g},{w:.17g}\n")

    @classmethod
    def from_csv(cls, path) -> "EmpiricalMeasure":
        with open(path) as fh:
            lines = fh.read().splitlines()[1:]
        if not lines:
            return cls.empty()
        data = np.loadtxt(lines, delimiter=",", ndmin=2)
        return cls(data[:, 0], data[:, 1], data[:, 2])
