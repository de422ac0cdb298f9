"""Closed-form RBF kernel ridge regression used as the fixed predictor."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, SingularSystem

DEFAULT_GAMMA = 10.0
DEFAULT_LAMBDA = 10.0


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def rbf_kernel(A, B, gamma: float) -> np.ndarray:
    """``exp(-gamma * ||a - b||^2)`` for every pair of rows."""
    A, B = _as_matrix(A), _as_matrix(B)
    sq = np.zeros((A.shape[0], B.shape[0]))
    for j in range(A.shape[1]):
        sq += (A[:, j, None] - B[None, :, j]) ** 2
    return np.exp(-gamma * sq)


@dataclass(frozen=True, eq=False)
class KernelRidgeModel:
    support: np.ndarray
    coef: np.ndarray
    rbf_gamma: float
    ridge_lambda: float

    def __post_init__(self):
        if self.coef.shape[0] != self.support.shape[0]:
            raise ValueError("one dual coefficient per support point is required")

    @property
    def description(self) -> str:
        return f"kernel_ridge(rbf_gamma={self.rbf_gamma!r}, ridge_lambda={self.ridge_lambda!r})"

    def __call__(self, X) -> np.ndarray:
        return predict(self, X)


def krr_fit(X, y, rbf_gamma: float = DEFAULT_GAMMA, ridge_lambda: float = DEFAULT_LAMBDA) -> KernelRidgeModel:
    """Solve ``(K + lambda I) alpha = y`` by Cholesky factorisation."""
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise DimensionMismatch(f"{X.shape[0]} rows but {y.size} targets")
    if X.shape[0] < 2:
        raise ValueError("kernel ridge needs at least 2 points")
    if rbf_gamma <= 0 or ridge_lambda <= 0:
        raise ValueError("rbf_gamma and ridge_lambda must be positive")
    K = rbf_kernel(X, X, rbf_gamma)
    K[np.diag_indices_from(K)] += ridge_lambda
    try:
        factor = scipy.linalg.cho_factor(K, lower=True, check_finite=False)
        alpha = scipy.linalg.cho_solve(factor, y, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"kernel system is not positive definite ({exc}); increase ridge_lambda") from exc
    if not np.all(np.isfinite(alpha)):
        raise SingularSystem("non-finite dual coefficients; increase ridge_lambda")
    X = X.copy()
    X.setflags(write=False)
    alpha.setflags(write=False)
    return KernelRidgeModel(X, alpha, float(rbf_gamma), float(ridge_lambda))


def predict(model: KernelRidgeModel, X) -> np.ndarray:
    X = _as_matrix(X)
    if X.shape[1] != model.support.shape[1]:
        raise DimensionMismatch(f"query has {X.shape[1]} columns, model has {model.support.shape[1]}")
    terms = rbf_kernel(X, model.support, model.rbf_gamma) * model.coef
    # correctly rounded row sums: identical rows give identical outputs
    return np.array([math.fsum(row) for row in terms])
