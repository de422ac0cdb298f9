"""Classical and density-weighted regression metrics.

Every metric is written as a ratio of weighted sums, so equal weights give
the textbook definitions and integer weights give exactly the metrics of a
dataset in which each row is repeated that many times.  Sums are
accumulated with :func:`math.fsum`.

Two conventions for the reference means ``a_bar`` and ``p_bar`` exist:
``"weighted"`` (``sum w a / sum w``, the default) and ``"plain"`` (``mean(a)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .density import DensityModel, fit
from .errors import DimensionMismatch, ZeroDenominator
from .weighting import WeightVector, as_weights, inverse_density_weights, uniform_weights

METRICS = ("MSE", "RMSE", "MAE", "RSE", "RRSE", "RAE", "PCC", "COD", "EVS")
MODES = ("nw", "yw", "xw")
CONVENTIONS = ("weighted", "plain")


@dataclass(frozen=True, eq=False)
class EvalSet:
    """Actual values, predictions and (optionally) the samples they belong to."""

    actual: np.ndarray
    predicted: np.ndarray
    samples: Optional[np.ndarray] = None

    def __post_init__(self):
        a = np.array(self.actual, dtype=float).ravel()
        p = np.array(self.predicted, dtype=float).ravel()
        if a.size != p.size:
            raise DimensionMismatch(f"{a.size} actual vs {p.size} predicted values")
        if a.size < 2:
            raise ValueError("an EvalSet needs at least 2 rows")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(p))):
            raise ValueError("actual and predicted values must be finite")
        x = None
        if self.samples is not None:
            x = np.array(self.samples, dtype=float)
            if x.ndim == 1:
                x = x[:, None]
            if x.shape[0] != a.size:
                raise DimensionMismatch(f"{x.shape[0]} samples for {a.size} values")
            if not np.all(np.isfinite(x)):
                raise ValueError("samples must be finite")
            x.setflags(write=False)
        a.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "actual", a)
        object.__setattr__(self, "predicted", p)
        object.__setattr__(self, "samples", x)

    def __len__(self) -> int:
        return self.actual.size

    def take(self, idx) -> "EvalSet":
        x = None if self.samples is None else self.samples[idx]
        return EvalSet(self.actual[idx], self.predicted[idx], x)


def _fsum(v) -> float:
    return math.fsum(np.asarray(v).ravel())


def _prepare(eval_set: EvalSet, weights) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    w = as_weights(weights, len(eval_set)).weights
    return eval_set.actual, eval_set.predicted, w, _fsum(w)


def _refined_mean(v, w, total):
    m = _fsum(w * v) / total
    # one correction pass absorbs the rounding of the w * v products
    return m + _fsum(w * (v - m)) / total


def _means(a, p, w, total, mean_convention):
    if mean_convention == "weighted":
        return _refined_mean(a, w, total), _refined_mean(p, w, total)
    if mean_convention == "plain":
        ones = np.ones_like(a)
        return _refined_mean(a, ones, a.size), _refined_mean(p, ones, p.size)
    raise ValueError(f"unknown mean convention {mean_convention!r}")


def _require_spread(v, w, name):
    live = v[w > 0]
    if live.size == 0 or np.all(live == live[0]):
        raise ZeroDenominator(f"{name} values are constant; relative metrics are undefined")


def error_metrics(eval_set: EvalSet, weights=None) -> dict[str, float]:
    """Weighted MSE, RMSE and MAE."""
    a, p, w, total = _prepare(eval_set, weights)
    r = p - a
    mse = _fsum(w * r * r) / total
    return {"MSE": mse, "RMSE": math.sqrt(mse), "MAE": _fsum(w * np.abs(r)) / total}


def relative_metrics(eval_set: EvalSet, weights=None, mean_convention: str = "weighted") -> dict[str, float]:
    """Weighted RSE, RRSE and RAE, normalised by the spread of the actual values."""
    a, p, w, total = _prepare(eval_set, weights)
    _require_spread(a, w, "actual")
    a_bar, _ = _means(a, p, w, total, mean_convention)
    r = p - a
    dev = a - a_bar
    sq_den = _fsum(w * dev * dev)
    abs_den = _fsum(w * np.abs(dev))
    if sq_den <= 0 or abs_den <= 0:
        raise ZeroDenominator("weighted spread of actual values is zero")
    rse = _fsum(w * r * r) / sq_den
    return {"RSE": rse, "RRSE": math.sqrt(rse), "RAE": _fsum(w * np.abs(r)) / abs_den}


def correlation_metric(eval_set: EvalSet, weights=None, mean_convention: str = "weighted") -> float:
    """Weighted Pearson correlation of predictions and actual values."""
    a, p, w, total = _prepare(eval_set, weights)
    _require_spread(a, w, "actual")
    _require_spread(p, w, "predicted")
    a_bar, p_bar = _means(a, p, w, total, mean_convention)
    da, dp = a - a_bar, p - p_bar
    saa = _fsum(w * da * da)
    spp = _fsum(w * dp * dp)
    if saa <= 0 or spp <= 0:
        raise ZeroDenominator("weighted variance of actual or predicted values is zero")
    return _fsum(w * dp * da) / math.sqrt(spp * saa)


def determination_metrics(eval_set: EvalSet, weights=None, mean_convention: str = "weighted") -> dict[str, float]:
    """Weighted coefficient of determination and explained variance score."""
    a, p, w, total = _prepare(eval_set, weights)
    _require_spread(a, w, "actual")
    a_bar, p_bar = _means(a, p, w, total, mean_convention)
    dev = a - a_bar
    den = _fsum(w * dev * dev)
    if den <= 0:
        raise ZeroDenominator("weighted spread of actual values is zero")
    r = p - a
    centered = r - (p_bar - a_bar)
    return {
        "COD": 1.0 - _fsum(w * r * r) / den,
        "EVS": 1.0 - _fsum(w * centered * centered) / den,
    }


def all_metrics(eval_set: EvalSet, weights=None, mean_convention: str = "weighted") -> dict[str, float]:
    """All nine metrics; raises ZeroDenominator if any is undefined."""
    out = error_metrics(eval_set, weights)
    out.update(relative_metrics(eval_set, weights, mean_convention))
    out["PCC"] = correlation_metric(eval_set, weights, mean_convention)
    out.update(determination_metrics(eval_set, weights, mean_convention))
    return {m: out[m] for m in METRICS}


@dataclass
class MetricReport:
    """Nine metrics for one weighting mode, with weight diagnostics.

    Metrics that are undefined for the data have value ``None`` and an entry
    in ``errors``.
    """

    mode: str
    mean_convention: str
    values: dict[str, Optional[float]]
    n: int
    ess: float
    bandwidth: Optional[tuple] = None
    weight_min: float = 1.0
    weight_max: float = 1.0
    errors: dict[str, str] = field(default_factory=dict)

    def __getitem__(self, metric: str) -> Optional[float]:
        return self.values[metric]

    @property
    def complete(self) -> bool:
        return not self.errors

    def to_records(self) -> list[dict]:
        bw = None
        if self.bandwidth is not None:
            bw = self.bandwidth[0] if len(self.bandwidth) == 1 else list(self.bandwidth)
        records = []
        for m in METRICS:
            rec = {
                "metric": m,
                "mode": self.mode,
                "mean_convention": self.mean_convention,
                "value": self.values.get(m),
                "n": self.n,
                "ess": self.ess,
                "bandwidth": bw,
                "weight_min": self.weight_min,
                "weight_max": self.weight_max,
            }
            if m in self.errors:
                rec["error"] = self.errors[m]
            records.append(rec)
        return records

    @classmethod
    def from_records(cls, records: Sequence[dict]) -> "MetricReport":
        first = records[0]
        bw = first.get("bandwidth")
        if bw is not None:
            bw = tuple(bw) if isinstance(bw, list) else (bw,)
        return cls(
            mode=first["mode"],
            mean_convention=first["mean_convention"],
            values={r["metric"]: r["value"] for r in records},
            n=first["n"],
            ess=first["ess"],
            bandwidth=bw,
            weight_min=first.get("weight_min", 1.0),
            weight_max=first.get("weight_max", 1.0),
            errors={r["metric"]: r["error"] for r in records if "error" in r},
        )


_GROUPS = (
    (("MSE", "RMSE", "MAE"), lambda es, w, c: error_metrics(es, w)),
    (("RSE", "RRSE", "RAE"), relative_metrics),
    (("PCC",), lambda es, w, c: {"PCC": correlation_metric(es, w, c)}),
    (("COD", "EVS"), determination_metrics),
)


def compute_report(eval_set: EvalSet, weights=None, mean_convention: str = "weighted",
                   mode: str = "nw") -> MetricReport:
    """Evaluate every metric group, recording undefined ones instead of raising."""
    wv = as_weights(weights, len(eval_set))
    values: dict[str, Optional[float]] = {}
    errors: dict[str, str] = {}
    for names, func in _GROUPS:
        try:
            values.update(func(eval_set, wv, mean_convention))
        except ZeroDenominator:
            for m in names:
                values[m] = None
                errors[m] = "ZeroDenominator"
    return MetricReport(
        mode=mode,
        mean_convention=mean_convention,
        values={m: values[m] for m in METRICS},
        n=len(eval_set),
        ess=wv.effective_sample_size,
        bandwidth=wv.bandwidth,
        weight_min=wv.min,
        weight_max=wv.max,
        errors=errors,
    )


def mode_weights(eval_set: EvalSet, mode: str, y_model: Optional[DensityModel] = None,
                 x_model: Optional[DensityModel] = None, *, floor_ratio: float = 0.0,
                 target_y=None, target_x=None, base_weights=None) -> WeightVector:
    """Weights for one mode; Y-weights use the actual values only, never predictions."""
    n = len(eval_set)
    if mode == "nw":
        w = uniform_weights(n)
    elif mode == "yw":
        if y_model is None:
            raise ValueError("yw mode needs a density model of the actual values")
        w = inverse_density_weights(y_model, eval_set.actual, target_y, floor_ratio, anchor="Y")
    elif mode == "xw":
        if x_model is None or eval_set.samples is None:
            raise ValueError("xw mode needs samples and a density model of them")
        w = inverse_density_weights(x_model, eval_set.samples, target_x, floor_ratio, anchor="X")
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if base_weights is not None:
        w = w * as_weights(base_weights, n)
    return w


def full_report(eval_set: EvalSet, y_model: Optional[DensityModel] = None,
                x_model: Optional[DensityModel] = None, *, modes: Sequence[str] = MODES,
                mean_convention: str = "weighted", floor_ratio: float = 0.0,
                target_y=None, target_x=None, base_weights=None) -> dict[str, MetricReport]:
    """nw / yw / xw reports for one evaluation set."""
    out = {}
    for mode in modes:
        w = mode_weights(eval_set, mode, y_model, x_model, floor_ratio=floor_ratio,
                         target_y=target_y, target_x=target_x, base_weights=base_weights)
        out[mode] = compute_report(eval_set, w, mean_convention, mode)
    return out


@dataclass(frozen=True)
class DensityOptions:
    method: str = "cv_ls"
    efficient: bool = False
    floor_ratio: float = 0.0
    seed: int = 0


def fit_models(eval_set: EvalSet, modes: Sequence[str] = MODES,
               options: DensityOptions = DensityOptions()) -> tuple[Optional[DensityModel], Optional[DensityModel]]:
    """Fit the Y- and X-densities a set of modes needs, on this evaluation set."""
    y_model = x_model = None
    if "yw" in modes:
        y_model = fit(eval_set.actual, options.method, options.efficient, seed=options.seed)
    if "xw" in modes and eval_set.samples is not None:
        x_model = fit(eval_set.samples, options.method, options.efficient, seed=options.seed)
    return y_model, x_model


def score(eval_set: EvalSet, modes: Sequence[str] = MODES, options: DensityOptions = DensityOptions(),
          mean_convention: str = "weighted", base_weights=None) -> dict[str, MetricReport]:
    """Fit the needed densities on ``eval_set`` and report every requested mode."""
    y_model, x_model = fit_models(eval_set, modes, options)
    return full_report(eval_set, y_model, x_model, modes=modes, mean_convention=mean_convention,
                       floor_ratio=options.floor_ratio, base_weights=base_weights)


def reports_differ(r1: MetricReport, r2: MetricReport, tol: float = 1e-9) -> bool:
    for m in METRICS:
        v1, v2 = r1.values[m], r2.values[m]
        if (v1 is None) != (v2 is None):
            return True
        if v1 is not None and abs(v1 - v2) > tol * max(1.0, abs(v1), abs(v2)):
            return True
    return False
