"""Base supervised learners: weighted kernel ridge and logistic propensity.

The kernel ridge regressor is the workhorse smoother for every conditional-
expectation fit in the package. It minimizes

    (1/n) sum_i w_i (g(x_i) - y_i)^2 + ridge * ||g||_K^2

over the kernel's function space plus an intercept, solved in closed form:
the intercept is the weighted target mean, and the dual coefficients solve
(K + n * ridge * W^-1) alpha = y - intercept on the strictly-positive-weight
rows. Fitted models are immutable and serialize to JSON documents that
round-trip predictions bitwise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from pmar.kernels import PD_FAMILIES, KernelSpec, gram_matrix, _as_points
from pmar.numerics import DimensionMismatch, solve_spd


class RegressionError(Exception):
    """Base class for learner-contract violations."""


class EmptyData(RegressionError):
    """No training rows supplied."""


class AllZeroWeights(RegressionError):
    """Sample weights must include at least one strictly positive entry."""


class SingleClass(RegressionError):
    """Logistic fitting needs both classes present."""


class Diverged(RegressionError):
    """Logistic coefficients grew without bound (separable data, no ridge)."""


NULL_CONST = "const"
NULL_AFFINE = "affine"


@dataclass(frozen=True)
class KrrModel:
    """Fitted weighted kernel ridge regressor (dual form).

    ``null_coef`` holds the unpenalized part: just the intercept in
    ``const`` mode, or intercept plus one slope per input coordinate in
    ``affine`` mode (the analogue of a spline's polynomial null space,
    giving linear instead of constant extrapolation).
    """

    inputs: np.ndarray
    dual_coef: np.ndarray
    kernel: KernelSpec
    ridge: float
    null_coef: np.ndarray

    @property
    def intercept(self) -> float:
        return float(self.null_coef[0])

    @property
    def null_space(self) -> str:
        return NULL_CONST if self.null_coef.shape[0] == 1 else NULL_AFFINE

    def predict(self, query) -> np.ndarray:
        return predict(self, query)


def _null_basis(x: np.ndarray, null_space: str) -> np.ndarray:
    if null_space == NULL_CONST:
        return np.ones((x.shape[0], 1))
    return np.hstack([np.ones((x.shape[0], 1)), x])


def fit_krr(inputs, targets, weights=None, kernel: KernelSpec = KernelSpec(),
            ridge: float = 1e-2, null_space: str = NULL_CONST) -> KrrModel:
    """Closed-form weighted kernel ridge fit.

    Minimizes sum_i w_i (y_i - b(x_i) - f(x_i))^2 + ridge ||f||_K^2 over
    kernel part f and unpenalized part b; ``ridge`` is the absolute
    penalty (callers wanting a per-row ridge scale it by their row count).
    In ``const`` mode b is the weighted target mean and the dual system
    (K + ridge W^-1) alpha = y - b is solved on the centered targets; in
    ``affine`` mode (b, f) solve the joint first-order system, which adds
    the side condition that the dual coefficients are orthogonal to the
    basis.

    ``weights=None`` means all ones. Rows with zero weight contribute
    nothing to the loss and are dropped from the dual system. Scaling all
    weights and the ridge jointly by the same constant leaves the fit
    unchanged, as does splitting a row's weight across duplicated rows.
    """
    x = _as_points(inputs)
    y = np.asarray(targets, dtype=float).reshape(-1)
    n = x.shape[0]
    if n == 0:
        raise EmptyData("no training rows")
    if y.shape[0] != n:
        raise DimensionMismatch(f"{n} inputs but {y.shape[0]} targets")
    if ridge <= 0:
        raise ValueError("ridge must be positive")
    if null_space not in (NULL_CONST, NULL_AFFINE):
        raise ValueError(f"unknown null space {null_space!r}")
    if weights is None:
        w = np.ones(n)
    else:
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.shape[0] != n:
            raise DimensionMismatch(f"{n} inputs but {w.shape[0]} weights")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
    keep = w > 0
    if not np.any(keep):
        raise AllZeroWeights("at least one weight must be strictly positive")
    x, y, w = x[keep], y[keep], w[keep]
    m = x.shape[0]

    if kernel.family not in PD_FAMILIES and null_space != NULL_AFFINE:
        raise ValueError(f"kernel family {kernel.family!r} needs the affine null space")
    system = gram_matrix(kernel, x) + ridge * np.diag(1.0 / w)
    if null_space == NULL_CONST:
        beta = np.array([np.sum(w * y) / np.sum(w)])
        alpha = solve_spd(system, y - beta[0])
    else:
        # block first-order system; stays valid for conditionally positive
        # definite kernels, where the dual system alone is indefinite
        basis = _null_basis(x, null_space)
        q = basis.shape[1]
        kkt = np.zeros((m + q, m + q))
        kkt[:m, :m] = system
        kkt[:m, m:] = basis
        kkt[m:, :m] = basis.T
        rhs = np.concatenate([y, np.zeros(q)])
        try:
            solution = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            solution, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
        alpha, beta = solution[:m], solution[m:]
    return KrrModel(inputs=x, dual_coef=alpha, kernel=kernel, ridge=ridge, null_coef=beta)


def predict(m: KrrModel, query) -> np.ndarray:
    """Null-space part plus sum_i alpha_i k(q, x_i) for each query q."""
    q = _as_points(query)
    if q.shape[1] != m.inputs.shape[1]:
        raise DimensionMismatch(
            f"query dimension {q.shape[1]} does not match training dimension {m.inputs.shape[1]}"
        )
    null_part = _null_basis(q, m.null_space) @ m.null_coef
    return null_part + gram_matrix(m.kernel, q, m.inputs) @ m.dual_coef


@dataclass(frozen=True)
class PolyModel:
    """Weighted polynomial least-squares fit on a univariate input.

    Used as a deliberately rigid substitute for the smoother in
    misspecification studies.
    """

    coef: np.ndarray  # ascending powers
    degree: int

    def predict(self, query) -> np.ndarray:
        q = _as_points(query)
        if q.shape[1] != 1:
            raise DimensionMismatch("polynomial model expects univariate input")
        return np.polynomial.polynomial.polyval(q[:, 0], self.coef)


def fit_polynomial(inputs, targets, degree: int, weights=None) -> PolyModel:
    x = _as_points(inputs)
    if x.shape[1] != 1:
        raise DimensionMismatch("polynomial fit expects univariate input")
    y = np.asarray(targets, dtype=float).reshape(-1)
    if x.shape[0] == 0:
        raise EmptyData("no training rows")
    w = np.ones(x.shape[0]) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
    design = np.vander(x[:, 0], degree + 1, increasing=True)
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(design * sw[:, None], y * sw, rcond=None)
    return PolyModel(coef=coef, degree=degree)


@dataclass(frozen=True)
class PropensityModel:
    """Logistic model of the selection indicator; intercept is coef[0]."""

    coef: np.ndarray

    @property
    def feature_dim(self) -> int:
        return self.coef.shape[0] - 1

    def predict(self, query) -> np.ndarray:
        return predict_propensity(self, query)


_IRLS_TOL = 1e-8
_IRLS_MAX_ITER = 100
_DIVERGENCE_NORM = 1e2


def fit_propensity(inputs, s, l2: float = 0.0) -> PropensityModel:
    """Penalized logistic regression via iteratively reweighted least squares.

    Maximizes the Bernoulli log-likelihood minus l2 * ||coef||^2 / 2 with
    step halving, stopping when the score's max norm drops below 1e-8 or
    after 100 iterations. Perfectly separable data with l2 = 0 raises
    :class:`Diverged` once the coefficients pass norm 100.
    """
    x = _as_points(inputs)
    sv = np.asarray(s, dtype=float).reshape(-1)
    if x.shape[0] == 0:
        raise EmptyData("no training rows")
    if sv.shape[0] != x.shape[0]:
        raise DimensionMismatch(f"{x.shape[0]} inputs but {sv.shape[0]} labels")
    if not (np.any(sv == 0) and np.any(sv == 1)):
        raise SingleClass("both classes must be present")
    if l2 < 0:
        raise ValueError("l2 must be nonnegative")

    design = np.hstack([np.ones((x.shape[0], 1)), x])
    beta = np.zeros(design.shape[1])

    def penalized_ll(b):
        eta = design @ b
        # log(1 + e^eta) - s*eta, computed stably
        return -(np.sum(np.logaddexp(0.0, eta) - sv * eta) + 0.5 * l2 * b @ b)

    ll = penalized_ll(beta)
    for _ in range(_IRLS_MAX_ITER):
        eta = design @ beta
        mu = expit(eta)
        score = design.T @ (sv - mu) - l2 * beta
        if np.max(np.abs(score)) <= _IRLS_TOL:
            break
        wvar = np.maximum(mu * (1.0 - mu), 1e-12)
        hess = design.T @ (design * wvar[:, None]) + l2 * np.eye(design.shape[1])
        step = np.linalg.solve(hess, score)
        # step halving keeps the penalized log-likelihood non-decreasing
        scale = 1.0
        for _ in range(30):
            candidate = beta + scale * step
            cand_ll = penalized_ll(candidate)
            if cand_ll >= ll:
                beta, ll = candidate, cand_ll
                break
            scale *= 0.5
        if np.max(np.abs(beta)) > _DIVERGENCE_NORM:
            raise Diverged("coefficients grew without bound; add l2 regularization")
    return PropensityModel(coef=beta)


def predict_propensity(m: PropensityModel, query) -> np.ndarray:
    q = _as_points(query)
    if q.shape[1] != m.feature_dim:
        raise DimensionMismatch(
            f"query dimension {q.shape[1]} does not match model dimension {m.feature_dim}"
        )
    return expit(m.coef[0] + q @ m.coef[1:])


MODEL_FORMAT_VERSION = 1


def model_to_dict(model) -> dict:
    """JSON-ready document for any fitted learner in this module."""
    if isinstance(model, KrrModel):
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "model_type": "krr",
            "kernel": {"family": model.kernel.family, "lengthscale": model.kernel.lengthscale},
            "ridge": model.ridge,
            "null_coef": model.null_coef.tolist(),
            "inputs": model.inputs.tolist(),
            "dual_coef": model.dual_coef.tolist(),
        }
    if isinstance(model, PolyModel):
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "model_type": "poly",
            "degree": model.degree,
            "coef": model.coef.tolist(),
        }
    if isinstance(model, PropensityModel):
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "model_type": "propensity",
            "coef": model.coef.tolist(),
        }
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_dict(doc: dict):
    kind = doc.get("model_type")
    if kind == "krr":
        return KrrModel(
            inputs=np.asarray(doc["inputs"], dtype=float),
            dual_coef=np.asarray(doc["dual_coef"], dtype=float),
            kernel=KernelSpec(doc["kernel"]["family"], doc["kernel"]["lengthscale"]),
            ridge=float(doc["ridge"]),
            null_coef=np.asarray(doc["null_coef"], dtype=float),
        )
    if kind == "poly":
        return PolyModel(coef=np.asarray(doc["coef"], dtype=float), degree=int(doc["degree"]))
    if kind == "propensity":
        return PropensityModel(coef=np.asarray(doc["coef"], dtype=float))
    raise ValueError(f"unknown model_type {kind!r}")


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
