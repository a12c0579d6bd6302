"""Error metrics for regression under selection bias.

The oracle mean squared error needs response values for unselected rows,
so it is computable only on simulated or otherwise fully-labeled test
data. The quantities that are computable on a biased test set are the
naive MSE over selected rows, weighted MSEs under true or estimated
importance weights, and the MSE against imputed pseudo-responses. The
interpolation/extrapolation split partitions test rows by whether x falls
inside the selected-training support.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np


class EvaluationError(Exception):
    pass


class LengthMismatch(EvaluationError):
    pass


class EmptyInput(EvaluationError):
    pass


class NoSelectedRows(EvaluationError):
    pass


def _paired(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=float).reshape(-1)
    t = np.asarray(truth, dtype=float).reshape(-1)
    if p.shape[0] != t.shape[0]:
        raise LengthMismatch(f"{p.shape[0]} predictions vs {t.shape[0]} targets")
    return p, t


def mse_oracle(pred, truth) -> float:
    """Mean squared error over every row (needs oracle responses)."""
    p, t = _paired(pred, truth)
    if p.size == 0:
        raise EmptyInput("no rows")
    return float(np.mean((p - t) ** 2))


def mse_selected(pred, truth, s_mask) -> float:
    """Mean squared error over the selected rows only."""
    p, t = _paired(pred, truth)
    mask = np.asarray(s_mask, dtype=float).reshape(-1) == 1.0
    if mask.shape[0] != p.shape[0]:
        raise LengthMismatch("mask length does not match predictions")
    if not mask.any():
        raise NoSelectedRows("no selected rows")
    return float(np.mean((p[mask] - t[mask]) ** 2))


def mse_weighted(pred, truth, s_mask, weights) -> float:
    """Importance-weighted squared error, normalized by the selected count.

    The normalizer is the number of selected rows, not the weight total,
    so exact weights make this an unbiased stand-in for the oracle MSE.
    """
    p, t = _paired(pred, truth)
    mask = np.asarray(s_mask, dtype=float).reshape(-1) == 1.0
    w = np.asarray(weights, dtype=float).reshape(-1)
    if mask.shape[0] != p.shape[0]:
        raise LengthMismatch("mask length does not match predictions")
    if not mask.any():
        raise NoSelectedRows("no selected rows")
    if w.shape[0] == p.shape[0]:
        w = w[mask]
    elif w.shape[0] != int(mask.sum()):
        raise LengthMismatch("weights must cover all rows or exactly the selected rows")
    if np.any(w <= 0):
        raise ValueError("weights must be positive on selected rows")
    return float(np.sum(w * (p[mask] - t[mask]) ** 2) / mask.sum())


def mse_pseudo(pred, pseudo_labels) -> float:
    """Squared error against imputed pseudo-responses, over all rows."""
    p, t = _paired(pred, pseudo_labels)
    if p.size == 0:
        raise EmptyInput("no rows")
    return float(np.mean((p - t) ** 2))


def split_interp_extrap(x_test, x_selected_train) -> tuple[np.ndarray, np.ndarray]:
    """Masks of test rows inside/outside the selected-training support.

    The support is the closed per-coordinate bounding box of the selected
    training x (an interval for univariate x). Returns (interp, extrap)
    boolean masks partitioning the test rows.
    """
    xt = np.asarray(x_test, dtype=float)
    xs = np.asarray(x_selected_train, dtype=float)
    if xt.ndim == 1:
        xt = xt[:, None]
    if xs.ndim == 1:
        xs = xs[:, None]
    if xs.shape[0] == 0:
        raise EmptyInput("no selected training points")
    if xt.shape[1] != xs.shape[1]:
        raise LengthMismatch("test and training x dimensions differ")
    lo, hi = xs.min(axis=0), xs.max(axis=0)
    interp = np.all((xt >= lo) & (xt <= hi), axis=1)
    return interp, ~interp


def interp_masks_from_bounds(x_test, bounds) -> tuple[np.ndarray, np.ndarray]:
    """Same split, but from precomputed (low, high) bounds."""
    xt = np.asarray(x_test, dtype=float)
    if xt.ndim == 1:
        xt = xt[:, None]
    lo, hi = (np.asarray(b, dtype=float).reshape(-1) for b in bounds)
    interp = np.all((xt >= lo) & (xt <= hi), axis=1)
    return interp, ~interp


REPORT_COLUMNS = (
    "method", "mse", "mse_n", "mse_w", "mse_w_hat", "mse_tilde",
    "mse_interp", "mse_extrap", "n", "n_selected",
)


@dataclass
class MetricsReport:
    """All error metrics for one model on one test set.

    Oracle-only fields (mse, mse_interp, mse_extrap) are None when the
    test set lacks responses for unselected rows; mse_w / mse_w_hat /
    mse_tilde are None when the corresponding weights or pseudo-responses
    are unavailable.
    """

    method: str
    n: int
    n_selected: int
    mse: float | None = None
    mse_n: float | None = None
    mse_w: float | None = None
    mse_w_hat: float | None = None
    mse_tilde: float | None = None
    mse_interp: float | None = None
    mse_extrap: float | None = None
    n_interp: int | None = None
    n_extrap: int | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def csv_row(self) -> str:
        cells = []
        for col in REPORT_COLUMNS:
            value = getattr(self, col)
            if value is None:
                cells.append("")
            elif isinstance(value, float):
                cells.append(format(value, ".17g"))
            else:
                cells.append(str(value))
        return ",".join(cells)

    @staticmethod
    def csv_header() -> str:
        return ",".join(REPORT_COLUMNS)


def evaluate_predictions(
    method: str,
    pred,
    test,
    *,
    weights=None,
    weights_hat=None,
    pseudo=None,
    bounds=None,
) -> MetricsReport:
    """Assemble a full report from predictions and precomputed ingredients.

    ``test`` is a Dataset; ``weights``/``weights_hat`` are importance
    weights for the test rows (full-length or selected-only), ``pseudo``
    the imputed responses for all test rows, ``bounds`` the selected-
    training bounds defining the interpolation region. Oracle metrics are
    filled only when the test responses are complete.
    """
    pred = np.asarray(pred, dtype=float).reshape(-1)
    if pred.shape[0] != test.n:
        raise LengthMismatch("predictions do not cover the test rows")
    sel = test.selected
    has_y = test.y is not None
    oracle = has_y and bool(np.all(np.isfinite(test.y)))

    report = MetricsReport(method=method, n=test.n, n_selected=int(sel.sum()))
    if has_y and sel.any() and np.all(np.isfinite(test.y[sel])):
        report.mse_n = mse_selected(pred, np.nan_to_num(test.y), sel)
        if weights is not None:
            report.mse_w = mse_weighted(pred, np.nan_to_num(test.y), sel, weights)
        if weights_hat is not None:
            report.mse_w_hat = mse_weighted(pred, np.nan_to_num(test.y), sel, weights_hat)
    if pseudo is not None:
        report.mse_tilde = mse_pseudo(pred, pseudo)
    if oracle:
        report.mse = mse_oracle(pred, test.y)
        if bounds is not None:
            interp, extrap = interp_masks_from_bounds(test.x, bounds)
            report.n_interp = int(interp.sum())
            report.n_extrap = int(extrap.sum())
            if interp.any():
                report.mse_interp = mse_oracle(pred[interp], test.y[interp])
            if extrap.any():
                report.mse_extrap = mse_oracle(pred[extrap], test.y[extrap])
    return report
