"""Distribution-shift studies: shifted synthetic test sets and chunk augmentation.

Both studies train (or take) one fixed predictor, evaluate it on several
differently distributed datasets and summarise how much each metric moves
with the spread statistic ``(max - min) / |mean|``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import TooFewSamples
from .metrics import (
    METRICS,
    MODES,
    DensityOptions,
    EvalSet,
    MetricReport,
    compute_report,
    score,
)
from .regressor import DEFAULT_GAMMA, krr_fit

FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "f1": lambda x: 2.0 * x,
    "f2": lambda x: x * np.abs(x),
    "f3": lambda x: 10.0 * np.cos(x) ** 2,
}

SHIFT_MEANS = (-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0)
THREADS_ENV = "DENSISCORE_THREADS"
ORACLE_MODE = "ow"


def thread_cap() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        return max(1, int(raw))
    return os.cpu_count() or 1


def _rng(seed: int, index: int) -> np.random.Generator:
    # one independent stream per (seed, dataset) so parallel order is irrelevant
    return np.random.default_rng([seed, index])


@dataclass(frozen=True)
class SyntheticSpec:
    function_id: str = "f1"
    train_uniform_n: int = 300
    train_normal_n: int = 700
    normal_mean: float = -3.0
    normal_sd: float = 0.1
    uniform_low: float = -4.0
    uniform_high: float = 4.0
    noise_high: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.function_id not in FUNCTIONS:
            raise ValueError(f"unknown function {self.function_id!r}; choose from {sorted(FUNCTIONS)}")
        if self.normal_sd <= 0 or self.uniform_high <= self.uniform_low:
            raise ValueError("invalid distribution parameters")
        if self.train_uniform_n < 0 or self.train_normal_n < 0:
            raise ValueError("sample counts must be non-negative")

    @property
    def func(self) -> Callable[[np.ndarray], np.ndarray]:
        return FUNCTIONS[self.function_id]


# Ridge strength playing the role of 1/C for an RBF SVR with C = 0.1 (f1, f3)
# and C = 0.5 (f2): strong shrinkage away from the dense training cluster.
FUNCTION_LAMBDA = {"f1": 10.0, "f2": 2.0, "f3": 10.0}


@dataclass(frozen=True)
class RegressorOptions:
    rbf_gamma: float = DEFAULT_GAMMA
    ridge_lambda: Optional[float] = None

    def resolve(self, function_id: str) -> "RegressorOptions":
        if self.ridge_lambda is not None:
            return self
        return RegressorOptions(self.rbf_gamma, FUNCTION_LAMBDA[function_id])


def _draw(spec: SyntheticSpec, index: int, mean: float, n_uniform: int, n_normal: int):
    rng = _rng(spec.seed, index)
    xu = rng.uniform(spec.uniform_low, spec.uniform_high, n_uniform)
    xn = rng.normal(mean, spec.normal_sd, n_normal)
    x = np.concatenate([xu, xn])
    noise = rng.uniform(0.0, spec.noise_high, x.size) if spec.noise_high > 0 else np.zeros(x.size)
    return x[:, None], spec.func(x) + noise


def gen_synthetic(spec: SyntheticSpec, index: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Training data: uniform part plus a narrow normal cluster, ``y = f(x) + U[0, noise_high)``."""
    return _draw(spec, index, spec.normal_mean, spec.train_uniform_n, spec.train_normal_n)


def _split_counts(spec: SyntheticSpec, n: int) -> tuple[int, int]:
    total = spec.train_uniform_n + spec.train_normal_n
    n_uniform = int(round(n * spec.train_uniform_n / total))
    return n_uniform, n - n_uniform


def gen_shift_testsets(spec: SyntheticSpec, test_n: int = 1000,
                       means: Sequence[float] = SHIFT_MEANS) -> list[tuple[float, np.ndarray, np.ndarray]]:
    """One test set per mean; the normal cluster moves, the uniform part stays."""
    if test_n < 200:
        raise TooFewSamples("test sets need at least 200 points for a reliable density fit")
    n_uniform, n_normal = _split_counts(spec, test_n)
    out = []
    for k, mu in enumerate(means):
        X, y = _draw(spec, k + 1, float(mu), n_uniform, n_normal)
        out.append((float(mu), X, y))
    return out


def spread(values: Sequence[Optional[float]]) -> float:
    """``(max - min) / max(|mean|, 1e-12)``; NaN if any value is undefined."""
    if any(v is None for v in values):
        return float("nan")
    v = np.asarray(values, dtype=float)
    return float((v.max() - v.min()) / max(abs(v.mean()), 1e-12))


@dataclass
class StudyResult:
    """Per-dataset reports for one study plus derived spread statistics."""

    study: str
    labels: list[float]
    reports: list[dict[str, MetricReport]]
    config: dict = field(default_factory=dict)

    @property
    def modes(self) -> list[str]:
        return list(self.reports[0]) if self.reports else []

    def values(self, metric: str, mode: str) -> list[Optional[float]]:
        return [r[mode].values[metric] for r in self.reports]

    def spread(self, metric: str, mode: str) -> float:
        return spread(self.values(metric, mode))

    def spreads(self) -> dict[tuple[str, str], float]:
        return {(m, mode): self.spread(m, mode) for mode in self.modes for m in METRICS}

    def tidy_rows(self) -> list[dict]:
        rows = []
        for i, rep in enumerate(self.reports):
            for mode, r in rep.items():
                for m in METRICS:
                    rows.append({
                        "study": self.study,
                        "dataset_index": i,
                        "metric": m,
                        "mode": mode,
                        "mean_convention": r.mean_convention,
                        "value": r.values[m],
                    })
        return rows

    def to_dict(self) -> dict:
        return {
            "study": self.study,
            "config": self.config,
            "datasets": [
                {
                    "dataset_index": i,
                    "label": label,
                    "reports": [rec for r in rep.values() for rec in r.to_records()],
                }
                for i, (label, rep) in enumerate(zip(self.labels, self.reports))
            ],
            "spreads": [
                {"metric": m, "mode": mode, "spread": s}
                for (m, mode), s in self.spreads().items()
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StudyResult":
        reports = []
        for ds in data["datasets"]:
            by_mode: dict[str, list] = {}
            for rec in ds["reports"]:
                by_mode.setdefault(rec["mode"], []).append(rec)
            reports.append({mode: MetricReport.from_records(recs) for mode, recs in by_mode.items()})
        return cls(data["study"], [ds["label"] for ds in data["datasets"]], reports, data.get("config", {}))


class ShiftStudyResult(StudyResult):
    pass


class ChunkStressResult(StudyResult):
    pass


def _parallel_map(func, items, threads: Optional[int]):
    threads = thread_cap() if threads is None else max(1, threads)
    if threads == 1 or len(items) <= 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def train_regressor(spec: SyntheticSpec, options: RegressorOptions = RegressorOptions()):
    X, y = gen_synthetic(spec)
    options = options.resolve(spec.function_id)
    return krr_fit(X, y, options.rbf_gamma, options.ridge_lambda)


def run_invariance_study(spec: SyntheticSpec, *, test_n: int = 1000,
                         regressor: RegressorOptions = RegressorOptions(),
                         predictor: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                         density: DensityOptions = DensityOptions(),
                         modes: Sequence[str] = MODES, mean_convention: str = "weighted",
                         means: Sequence[float] = SHIFT_MEANS,
                         threads: Optional[int] = None) -> ShiftStudyResult:
    """Evaluate one fixed predictor on the shifted test sets.

    The densities for yw/xw are fitted separately on each test set.  A custom
    ``predictor`` replaces the kernel ridge model trained on ``gen_synthetic``.
    """
    if predictor is None:
        model = train_regressor(spec, regressor)
        predictor = model
        predictor_desc = model.description
    else:
        predictor_desc = getattr(predictor, "description", getattr(predictor, "__name__", "custom"))
    testsets = gen_shift_testsets(spec, test_n, means)

    def evaluate_one(ts):
        _, X, y = ts
        es = EvalSet(y, predictor(X), X)
        return score(es, modes, density, mean_convention)

    reports = _parallel_map(evaluate_one, testsets, threads)
    config = {
        "spec": asdict(spec),
        "test_n": test_n,
        "regressor": predictor_desc,
        "density": asdict(density),
        "mean_convention": mean_convention,
    }
    return ShiftStudyResult("synthetic_shift", [ts[0] for ts in testsets], reports, config)


def chunk_indices(X, k: int = 5) -> list[np.ndarray]:
    """Row indices of ``k`` contiguous chunks of the data sorted by ``x``.

    When ``n`` is not divisible by ``k`` the first ``n mod k`` chunks get one
    extra row.
    """
    X = np.asarray(X, dtype=float)
    x = X if X.ndim == 1 else X[:, 0]
    if X.ndim == 2 and X.shape[1] != 1:
        raise ValueError("chunk augmentation needs one-dimensional samples")
    n = x.size
    if n < k:
        raise TooFewSamples(f"cannot split {n} rows into {k} chunks")
    order = np.argsort(x, kind="stable")
    return [np.asarray(c) for c in np.array_split(order, k)]


def augmented_indices(n: int, chunk: np.ndarray, reps: int) -> np.ndarray:
    return np.concatenate([np.arange(n)] + [chunk] * reps)


def replication_weights(n: int, chunk: np.ndarray, reps: int) -> np.ndarray:
    """Weights on the original rows that reproduce an augmented set exactly."""
    w = np.ones(n)
    w[chunk] += reps
    return w


def chunk_stress(X, a, p, k: int = 5, reps: int = 5) -> list[EvalSet]:
    """Original data plus chunk ``j`` repeated ``reps`` times, for each of ``k`` chunks."""
    base = EvalSet(a, p, X)
    return [base.take(augmented_indices(len(base), c, reps)) for c in chunk_indices(base.samples, k)]


def run_chunk_study(eval_set: EvalSet, *, k: int = 5, reps: int = 5,
                    density: DensityOptions = DensityOptions(), modes: Sequence[str] = MODES,
                    mean_convention: str = "weighted", oracle_weights: bool = False,
                    threads: Optional[int] = None, config: Optional[dict] = None) -> ChunkStressResult:
    """Score each chunk-augmented set; densities are refitted per augmented set.

    With ``oracle_weights`` an extra ``"ow"`` mode weights each augmented row
    by one over its multiplicity, which undoes the augmentation exactly.
    """
    if eval_set.samples is None or eval_set.samples.shape[1] != 1:
        raise ValueError("chunk study needs one-dimensional samples")
    n = len(eval_set)
    chunks = chunk_indices(eval_set.samples, k)

    def evaluate_one(chunk):
        aug = eval_set.take(augmented_indices(n, chunk, reps))
        reports = score(aug, modes, density, mean_convention)
        if oracle_weights:
            mult = replication_weights(n, chunk, reps)
            w = 1.0 / mult[augmented_indices(n, chunk, reps)]
            reports[ORACLE_MODE] = compute_report(aug, w, mean_convention, ORACLE_MODE)
        return reports

    reports = _parallel_map(evaluate_one, chunks, threads)
    cfg = {"k": k, "reps": reps, "n": n, "density": asdict(density), "mean_convention": mean_convention,
           "augmented_sizes": [n + reps * len(c) for c in chunks]}
    cfg.update(config or {})
    return ChunkStressResult("chunk_stress", list(range(k)), reports, cfg)


def synthetic_chunk_data(spec: SyntheticSpec, n: int = 1000,
                         regressor: RegressorOptions = RegressorOptions()) -> EvalSet:
    """``n`` points uniform on ``[uniform_low, uniform_high)``, scored by the trained regressor.

    The chunk protocol creates the imbalance itself, so the base sample is
    balanced.
    """
    model = train_regressor(spec, regressor)
    X, y = _draw(spec, 1000, spec.normal_mean, n, 0)
    return EvalSet(y, model(X), X)
