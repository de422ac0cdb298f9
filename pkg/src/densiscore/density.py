"""Density estimation: Gaussian KDE with four bandwidth selectors and a
Freedman-Diaconis histogram.

All models are immutable.  Multivariate samples use an axis-aligned product
Gaussian kernel with one bandwidth per dimension; the cross-validated
selectors then search a single scale factor ``c`` with ``h_j = c * s_j``,
where ``s_j`` is the robust spread of axis ``j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateSample, DimensionMismatch, OptimizationFailed

METHODS = ("scott", "silverman", "cv_ml", "cv_ls")
CV_METHODS = ("cv_ml", "cv_ls")

IQR_TO_SIGMA = 1.349
GRID_POINTS = 40
GRID_SPAN = 20.0
GOLDEN_RTOL = 1e-3
BLOCK_CAP = 500
HISTOGRAM_FLOOR = 1e-300
MIN_CV_SIZE = 10

# exp(-x) for x beyond this is below 1e-17 and dropped from the pair sums
_PAIR_CUTOFF = 40.0
# memory budget (entries) for query x training distance blocks
_EVAL_BLOCK = 1 << 22


def as_sample(points, *, min_n: int = 2) -> np.ndarray:
    """Coerce ``points`` to a finite float array of shape (n, d)."""
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DimensionMismatch(f"expected a 1-D or 2-D sample, got shape {x.shape}")
    if x.shape[0] < min_n:
        raise DegenerateSample(f"need at least {min_n} points, got {x.shape[0]}")
    if x.shape[1] < 1:
        raise DimensionMismatch("sample has no columns")
    if not np.all(np.isfinite(x)):
        raise DegenerateSample("sample contains non-finite values")
    return x


def robust_scale(points) -> np.ndarray:
    """Per-axis ``min(std, IQR / 1.349)``.

    Falls back to the standard deviation on axes whose IQR is zero but whose
    values are not all equal (e.g. a point mass plus a few outliers).
    """
    x = as_sample(points)
    std = np.std(x, axis=0, ddof=1)
    q75, q25 = np.percentile(x, [75, 25], axis=0)
    iqr = (q75 - q25) / IQR_TO_SIGMA
    if np.any(std <= 0):
        axes = np.flatnonzero(std <= 0).tolist()
        raise DegenerateSample(f"zero spread along axis {axes}")
    return np.where(iqr > 0, np.minimum(std, iqr), std)


@dataclass(frozen=True)
class Bandwidth:
    """Per-axis kernel bandwidth and the rule that produced it."""

    h: tuple[float, ...]
    method: str
    efficient: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown bandwidth method {self.method!r}")
        if not self.h or not all(math.isfinite(v) and v > 0 for v in self.h):
            raise ValueError(f"bandwidth must be positive and finite, got {self.h}")

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.h, dtype=float)

    @property
    def d(self) -> int:
        return len(self.h)


def _rule_of_thumb(sample, method: str) -> Bandwidth:
    x = as_sample(sample)
    n, d = x.shape
    scale = robust_scale(x)
    if method == "scott":
        factor = n ** (-1.0 / (d + 4))
    else:
        factor = (n * (d + 2) / 4.0) ** (-1.0 / (d + 4))
    return Bandwidth(tuple(float(v) for v in scale * factor), method)


def bandwidth_scott(sample) -> Bandwidth:
    """Scott's rule, ``h_j = s_j * n**(-1/(d+4))``."""
    return _rule_of_thumb(sample, "scott")


def bandwidth_silverman(sample) -> Bandwidth:
    """Silverman's rule, ``h_j = s_j * (n (d+2) / 4)**(-1/(d+4))``."""
    return _rule_of_thumb(sample, "silverman")


# ---------------------------------------------------------------------------
# Cross-validation objectives
# ---------------------------------------------------------------------------


class _PairTable:
    """Sorted scaled squared distances over all pairs i < j.

    Evaluating the least-squares CV objective then only touches the prefix of
    pairs that are within kernel reach of each other.
    """

    def __init__(self, x: np.ndarray, scale: np.ndarray):
        self.n, self.d = x.shape
        z = x / scale
        iu, ju = np.triu_indices(self.n, k=1)
        r2 = np.zeros(iu.size)
        for j in range(self.d):
            r2 += (z[iu, j] - z[ju, j]) ** 2
        r2.sort()
        self.r2 = r2
        self.log_scale = float(np.sum(np.log(scale)))

    def lscv(self, c: float) -> float:
        n, d = self.n, self.d
        log_h = d * math.log(c) + self.log_scale
        cut = np.searchsorted(self.r2, 4.0 * _PAIR_CUTOFF * c * c)
        e4 = np.exp(-self.r2[:cut] / (4.0 * c * c))
        # exp(-r2 / 2c^2) is the square of exp(-r2 / 4c^2)
        s4 = float(np.sum(e4))
        s2 = float(np.sum(e4 * e4))
        integral = (n + 2.0 * s4) / (n * n * (4.0 * math.pi) ** (d / 2.0))
        loo = 4.0 * s2 / (n * (n - 1) * (2.0 * math.pi) ** (d / 2.0))
        return (integral - loo) / math.exp(log_h)


class _DistanceMatrix:
    """Full scaled squared-distance matrix with an infinite diagonal."""

    def __init__(self, x: np.ndarray, scale: np.ndarray):
        self.n, self.d = x.shape
        z = x / scale
        r2 = np.zeros((self.n, self.n))
        for j in range(self.d):
            r2 += (z[:, j, None] - z[None, :, j]) ** 2
        np.fill_diagonal(r2, np.inf)
        self.r2 = r2
        self.log_scale = float(np.sum(np.log(scale)))

    def loo_loglik(self, c: float) -> float:
        n, d = self.n, self.d
        log_h = d * math.log(c) + self.log_scale
        per_point = logsumexp(-self.r2 / (2.0 * c * c), axis=1)
        norm = math.log(n - 1) + 0.5 * d * math.log(2.0 * math.pi) + log_h
        return float(np.sum(per_point) - n * norm)


def _h_vector(h, d: int) -> np.ndarray:
    hv = np.atleast_1d(np.asarray(h, dtype=float))
    if hv.size == 1 and d > 1:
        hv = np.full(d, hv[0])
    if hv.size != d:
        raise DimensionMismatch(f"bandwidth has {hv.size} entries, sample has {d} axes")
    return hv


def loo_log_likelihood(sample, h) -> float:
    """Leave-one-out log-likelihood ``sum_i log g_{-i}(x_i)`` at bandwidth ``h``."""
    x = as_sample(sample)
    hv = _h_vector(h, x.shape[1])
    return _DistanceMatrix(x, hv).loo_loglik(1.0)


def lscv_objective(sample, h) -> float:
    """Least-squares CV score ``int g^2 - (2/n) sum_i g_{-i}(x_i)`` at ``h``."""
    x = as_sample(sample)
    hv = _h_vector(h, x.shape[1])
    return _PairTable(x, hv).lscv(1.0)


def _golden_min(f: Callable[[float], float], lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Golden-section minimisation of ``f`` on ``[lo, hi]``; returns (x, f(x))."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        # ties move toward the larger argument
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def _cv_search(x: np.ndarray, method: str, grid: Optional[Sequence[float]]) -> Bandwidth:
    n, d = x.shape
    if n < MIN_CV_SIZE:
        raise DegenerateSample(f"cross-validation needs at least {MIN_CV_SIZE} points, got {n}")
    scale = robust_scale(x)
    if method == "cv_ls":
        table = _PairTable(x, scale)
        objective = table.lscv
    else:
        dist = _DistanceMatrix(x, scale)
        objective = lambda c: -dist.loo_loglik(c)  # noqa: E731

    def safe(log_c: float) -> float:
        v = objective(math.exp(log_c))
        return v if math.isfinite(v) else math.inf

    if grid is not None:
        cands = np.log(np.asarray(grid, dtype=float) / scale[0])
        refine = False
    else:
        c0 = n ** (-1.0 / (d + 4))
        cands = np.linspace(math.log(c0 / GRID_SPAN), math.log(c0 * GRID_SPAN), GRID_POINTS)
        refine = True
    values = np.array([safe(v) for v in cands])
    if not np.any(np.isfinite(values)):
        raise OptimizationFailed(f"{method}: objective is non-finite at every candidate")
    best = int(np.flatnonzero(values == values.min())[-1])
    log_c, f_best = float(cands[best]), float(values[best])
    if refine:
        lo = cands[max(best - 1, 0)]
        hi = cands[min(best + 1, len(cands) - 1)]
        log_g, f_g = _golden_min(safe, float(lo), float(hi), GOLDEN_RTOL)
        if f_g < f_best:
            log_c = log_g
    c = math.exp(log_c)
    return Bandwidth(tuple(float(v) for v in scale * c), method)


def bandwidth_cv_ml(sample, grid: Optional[Sequence[float]] = None) -> Bandwidth:
    """Bandwidth maximising the leave-one-out log-likelihood.

    Without ``grid`` the search runs a 40-point log-grid over
    ``[h_scott / 20, 20 h_scott]`` and refines the best cell by golden-section
    search to 1e-3 relative.  With ``grid`` (candidate bandwidths of the first
    axis) only those candidates are scored.
    """
    return _cv_search(as_sample(sample), "cv_ml", grid)


def bandwidth_cv_ls(sample, grid: Optional[Sequence[float]] = None) -> Bandwidth:
    """Bandwidth minimising the least-squares (integrated squared error) CV score.

    Search strategy as in :func:`bandwidth_cv_ml`.
    """
    return _cv_search(as_sample(sample), "cv_ls", grid)


_SELECTORS = {
    "scott": bandwidth_scott,
    "silverman": bandwidth_silverman,
    "cv_ml": bandwidth_cv_ml,
    "cv_ls": bandwidth_cv_ls,
}


def select_bandwidth(sample, method: str = "cv_ls", efficient: bool = False,
                     block_cap: int = BLOCK_CAP, seed: int = 0) -> Bandwidth:
    """Dispatch to a selector, optionally on random sub-blocks.

    In efficient mode a CV bandwidth is computed on each of ``ceil(n/block_cap)``
    random blocks, rescaled to the full sample size with the
    ``n**(-1/(d+4))`` rate, and the per-axis median is returned.
    """
    if method not in _SELECTORS:
        raise ValueError(f"unknown bandwidth method {method!r}; choose from {METHODS}")
    x = as_sample(sample)
    n, d = x.shape
    if not (efficient and method in CV_METHODS and n > block_cap):
        bw = _SELECTORS[method](x)
        return Bandwidth(bw.h, method, efficient)
    robust_scale(x)  # zero-spread check on the full sample
    n_blocks = -(-n // block_cap)
    perm = np.random.default_rng(seed).permutation(n)
    hs = []
    for block in np.array_split(perm, n_blocks):
        h_block = _SELECTORS[method](x[block]).values
        hs.append(h_block * (len(block) / n) ** (1.0 / (d + 4)))
    h = np.median(np.vstack(hs), axis=0)
    return Bandwidth(tuple(float(v) for v in h), method, True)


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DensityModel:
    """A fitted density estimate.

    ``kind == "gaussian_kde"`` carries ``points`` and ``bandwidth``;
    ``kind == "histogram"`` carries ``edges`` and ``masses`` and returns
    ``floor`` outside the outermost edges.
    """

    kind: str
    points: Optional[np.ndarray] = None
    bandwidth: Optional[Bandwidth] = None
    edges: Optional[np.ndarray] = None
    masses: Optional[np.ndarray] = None
    floor: float = HISTOGRAM_FLOOR
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("points", "edges", "masses"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.array(arr, dtype=float)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @property
    def d(self) -> int:
        if self.kind == "histogram":
            return 1
        return self.points.shape[1]

    @property
    def n(self) -> int:
        if self.kind == "histogram":
            return int(self.meta.get("n", 0))
        return self.points.shape[0]

    def __call__(self, points) -> np.ndarray:
        return evaluate(self, points)


def fit(sample, method: str = "cv_ls", efficient: bool = False, *,
        block_cap: int = BLOCK_CAP, seed: int = 0) -> DensityModel:
    """Fit a Gaussian KDE with the chosen bandwidth rule."""
    x = as_sample(sample)
    bw = select_bandwidth(x, method, efficient, block_cap=block_cap, seed=seed)
    return DensityModel("gaussian_kde", points=x, bandwidth=bw)


def kde_from_bandwidth(sample, h, method: str = "scott") -> DensityModel:
    """KDE with a caller-supplied bandwidth (``method`` is only a label)."""
    x = as_sample(sample, min_n=1)
    hv = _h_vector(h, x.shape[1])
    return DensityModel("gaussian_kde", points=x, bandwidth=Bandwidth(tuple(map(float, hv)), method))


def _query(model: DensityModel, points) -> np.ndarray:
    t = np.asarray(points, dtype=float)
    if t.ndim == 0:
        t = t.reshape(1, 1)
    elif t.ndim == 1:
        if model.d != 1:
            raise DimensionMismatch(f"model is {model.d}-D; pass an (m, {model.d}) array")
        t = t[:, None]
    if t.ndim != 2 or t.shape[1] != model.d:
        raise DimensionMismatch(f"query has shape {t.shape}, model expects {model.d} columns")
    return t


def evaluate(model: DensityModel, points) -> np.ndarray:
    """Density values at ``points`` (shape (m,) or (m, d)); returns shape (m,)."""
    t = _query(model, points)
    if model.kind == "histogram":
        return _evaluate_histogram(model, t[:, 0])
    x = model.points
    h = model.bandwidth.values
    n, d = x.shape
    zt, zx = t / h, x / h
    norm = n * float(np.prod(h)) * (2.0 * math.pi) ** (d / 2.0)
    out = np.empty(t.shape[0])
    step = max(1, _EVAL_BLOCK // n)
    for start in range(0, t.shape[0], step):
        blk = slice(start, start + step)
        r2 = np.zeros((zt[blk].shape[0], n))
        for j in range(d):
            r2 += (zt[blk, j, None] - zx[None, :, j]) ** 2
        out[blk] = np.exp(-0.5 * r2).sum(axis=1) / norm
    return out


def _evaluate_histogram(model: DensityModel, t: np.ndarray) -> np.ndarray:
    edges, masses = model.edges, model.masses
    widths = np.diff(edges)
    idx = np.searchsorted(edges, t, side="right") - 1
    idx = np.where(t == edges[-1], len(masses) - 1, idx)
    inside = (idx >= 0) & (idx < len(masses))
    out = np.full(t.shape, model.floor)
    out[inside] = masses[idx[inside]] / widths[idx[inside]]
    return out


def histogram_density(sample, floor: float = HISTOGRAM_FLOOR) -> DensityModel:
    """Histogram density with Freedman-Diaconis bin width ``2 IQR n**(-1/3)``.

    The width is clipped below at ``range / 1024`` so a vanishing IQR still
    yields a finite bin count.
    """
    x = as_sample(sample, min_n=4)
    if x.shape[1] != 1:
        raise DimensionMismatch("histogram density is one-dimensional")
    v = x[:, 0]
    n = v.size
    q75, q25 = np.percentile(v, [75, 25])
    lo, hi = float(v.min()), float(v.max())
    span = hi - lo
    iqr = q75 - q25
    if iqr <= 0 and span <= 0:
        raise DegenerateSample("histogram needs a positive IQR or range")
    width = max(2.0 * iqr * n ** (-1.0 / 3.0), span / 1024.0)
    n_bins = max(1, int(math.ceil(span / width)))
    edges = lo + width * np.arange(n_bins + 1)
    if edges[-1] < hi:
        edges = np.append(edges, edges[-1] + width)
    counts, _ = np.histogram(v, bins=edges)
    masses = counts / n
    return DensityModel("histogram", edges=edges, masses=masses, floor=floor,
                        meta={"n": n, "bin_width": width})


def integral_check(model: DensityModel, nodes: int = 4096) -> float:
    """Trapezoid integral of a 1-D model over its support padded by 5 bandwidths."""
    if model.d != 1:
        raise DimensionMismatch("integral check is defined for 1-D models")
    if model.kind == "histogram":
        return float(np.sum(model.masses))
    x = model.points[:, 0]
    h = model.bandwidth.h[0]
    grid = np.linspace(x.min() - 5 * h, x.max() + 5 * h, nodes)
    return float(np.trapezoid(evaluate(model, grid), grid))


def curve(model: DensityModel, nodes: int = 512) -> tuple[np.ndarray, np.ndarray]:
    """Equally spaced ``(t, g(t))`` samples across the model's support."""
    if model.d != 1:
        raise DimensionMismatch("curve sampling is defined for 1-D models")
    if model.kind == "histogram":
        lo, hi = model.edges[0], model.edges[-1]
    else:
        x = model.points[:, 0]
        h = model.bandwidth.h[0]
        lo, hi = x.min() - 3 * h, x.max() + 3 * h
    t = np.linspace(lo, hi, nodes)
    return t, evaluate(model, t)


def grid_cod(estimate, truth) -> float:
    """Coefficient of determination of estimated vs. true density values."""
    est = np.asarray(estimate, dtype=float)
    tru = np.asarray(truth, dtype=float)
    ss_res = np.sum((est - tru) ** 2)
    ss_tot = np.sum((tru - tru.mean()) ** 2)
    return float(1.0 - ss_res / ss_tot)
