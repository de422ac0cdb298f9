"""Reference distributions for checking density-estimate quality.

Each family exposes ``pdf``, ``rvs`` and ``ppf`` so an estimate can be scored
against the analytic density on a grid between two quantiles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize, stats

from .density import fit, grid_cod


@dataclass(frozen=True)
class Mixture:
    components: Sequence
    weights: Sequence[float]

    def pdf(self, x):
        return sum(w * c.pdf(x) for c, w in zip(self.components, self.weights))

    def cdf(self, x):
        return sum(w * c.cdf(x) for c, w in zip(self.components, self.weights))

    def ppf(self, q: float) -> float:
        lo = min(c.ppf(q) for c in self.components)
        hi = max(c.ppf(q) for c in self.components)
        if lo == hi:
            return float(lo)
        return optimize.brentq(lambda x: self.cdf(x) - q, lo, hi, xtol=1e-12)

    def rvs(self, size: int, random_state: np.random.Generator):
        which = random_state.choice(len(self.components), size=size, p=np.asarray(self.weights))
        out = np.empty(size)
        for k, comp in enumerate(self.components):
            idx = which == k
            out[idx] = comp.rvs(size=int(idx.sum()), random_state=random_state)
        return out


FAMILIES = {
    "gaussian": stats.norm(0.0, 1.0),
    "gaussian_mix3": Mixture(
        [stats.norm(-4.0, 0.7), stats.norm(0.0, 0.7), stats.norm(4.0, 0.7)], [1 / 3, 1 / 3, 1 / 3]
    ),
    "laplace": stats.laplace(0.0, 1.0),
    "chi_square": stats.chi2(4),
    "uniform_gaussian": Mixture([stats.uniform(-3.0, 6.0), stats.norm(0.0, 0.5)], [0.5, 0.5]),
}


def quality_grid(dist, nodes: int = 512, lo_q: float = 0.001, hi_q: float = 0.999) -> np.ndarray:
    """Equally spaced nodes between the 0.1 % and 99.9 % quantiles."""
    return np.linspace(float(dist.ppf(lo_q)), float(dist.ppf(hi_q)), nodes)


def kde_quality(family: str, n: int, seed: int, method: str = "cv_ls", efficient: bool = False) -> float:
    """Grid COD of a KDE fitted to ``n`` draws from ``family``."""
    dist = FAMILIES[family]
    rng = np.random.default_rng(seed)
    sample = dist.rvs(size=n, random_state=rng)
    model = fit(sample, method, efficient)
    grid = quality_grid(dist)
    return grid_cod(model(grid), dist.pdf(grid))
