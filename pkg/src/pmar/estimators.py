"""The selection-bias-corrected regression strategies.

Four ways to estimate E[Y|X] when Y is observed only on selected rows and
selection is ignorable given the features X plus privileged columns Z:

* naive: fit Y on X over the selected rows and hope selection is ignorable.
* repeated regression (RR): fit Y on (X, Z) over the selected rows, impute
  pseudo-responses for every row, then fit the pseudo-responses on X.
* importance weighting (IW): fit Y on X over the selected rows under
  weights P(S=1) / P(S=1|x,z), with the probabilities clipped first.
* doubly robust (DR): RR plus an importance-weighted fit of the RR
  residuals on X; consistent when either ingredient is.

Weight variants: "-t" reads the simulator's stored true selection
probabilities, "-e" estimates them by logistic regression of S on (X, Z).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pmar.kernels import KernelSpec, median_lengthscale
from pmar.regression import (
    PropensityModel,
    fit_krr,
    fit_polynomial,
    fit_propensity,
    model_from_dict,
    model_to_dict,
)
from pmar.simulate import Dataset


class EstimatorError(Exception):
    """Base class for estimator-contract violations."""


class EmptyInput(EstimatorError):
    """An input vector that must be nonempty is empty."""


class InvalidProbability(EstimatorError):
    """Probabilities must be finite and lie in [0, 1]."""


class TooFewSelected(EstimatorError):
    """Fewer than two selected rows to fit on."""


class LengthMismatch(EstimatorError):
    """Paired vectors have different lengths."""


CLIP_AFFINE = "affine"
CLIP_FLOOR = "floor"


@dataclass(frozen=True)
class WeightConfig:
    """How selection probabilities become regression weights.

    ``affine`` mode linearly maps the probability array onto
    [clip_low, clip_high] anchored at its min and max; ``floor`` mode
    simply clamps from below at clip_low. ``normalize`` rescales the
    final weights to mean one, restoring the calibration that exact
    importance weights carry (their selected-sample mean tends to one)
    and that clipping otherwise shrinks; disable it to use the raw
    marginal-over-probability ratios.
    """

    source: str = "true"  # "true" | "estimated"
    clip_low: float = 1.0 / 20.0
    clip_high: float = 1.0
    mode: str = CLIP_AFFINE
    normalize: bool = True

    def __post_init__(self):
        if self.source not in ("true", "estimated"):
            raise ValueError(f"unknown weight source {self.source!r}")
        if not 0 < self.clip_low <= self.clip_high <= 1:
            raise ValueError("need 0 < clip_low <= clip_high <= 1")
        if self.mode not in (CLIP_AFFINE, CLIP_FLOOR):
            raise ValueError(f"unknown clip mode {self.mode!r}")


def clip_probabilities(probs, cfg: WeightConfig = WeightConfig()) -> np.ndarray:
    """Map raw selection probabilities onto the clipped range."""
    p = np.asarray(probs, dtype=float).reshape(-1)
    if p.size == 0:
        raise EmptyInput("empty probability vector")
    if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise InvalidProbability("probabilities must be finite and in [0, 1]")
    if cfg.mode == CLIP_FLOOR:
        return np.maximum(p, cfg.clip_low)
    low, high = p.min(), p.max()
    if high == low:
        return np.full_like(p, cfg.clip_high)
    return cfg.clip_low + (cfg.clip_high - cfg.clip_low) * (p - low) / (high - low)


def compute_weights(probs, cfg: WeightConfig = WeightConfig(), marginal: float | None = None) -> np.ndarray:
    """Importance weights marginal / clipped-probability.

    ``marginal`` is the overall selection frequency P(S=1); pass the
    selection-column mean of the full dataset when available. Leaving it
    None uses 1.0, which rescales the weighted loss by a constant and so
    does not move the minimizer.
    """
    clipped = clip_probabilities(probs, cfg)
    m = 1.0 if marginal is None else float(marginal)
    if not 0 < m <= 1:
        raise InvalidProbability("marginal selection probability must be in (0, 1]")
    w = m / clipped
    if cfg.normalize:
        w = w / w.mean()
    return w


@dataclass(frozen=True)
class FitConfig:
    """Smoother and propensity hyperparameters shared by the strategies.

    ``ridge`` is per-row (each fit's absolute penalty is ridge times its
    row count). ``lengthscale=None`` uses the median pairwise distance of
    each fit's own inputs. ``null_space`` is the kernel ridge null space:
    the default ``affine`` extrapolates linearly like the spline smoothers
    these strategies are usually run with, ``const`` levels off at the
    intercept. ``outer_degree`` swaps the RR outer stage for a rigid
    polynomial of that degree (misspecification studies); the DR residual
    stage keeps the standard smoother either way.
    """

    kernel_family: str = "cubic"
    lengthscale: float | None = None
    lengthscale_factor: float = 1.0
    ridge: float = 1e-2
    null_space: str = "affine"
    outer_degree: int | None = None
    propensity_l2: float = 1e-4

    def kernel_for(self, inputs) -> KernelSpec:
        scale = self.lengthscale if self.lengthscale is not None else median_lengthscale(inputs)
        return KernelSpec(self.kernel_family, self.lengthscale_factor * scale)

    def ridge_for(self, inputs) -> float:
        """Absolute penalty for one fit: the per-row ridge times the row count."""
        return self.ridge * np.asarray(inputs).shape[0]


@dataclass
class PmarModel:
    """A fitted bias-correction strategy.

    ``components`` maps stage names to fitted learners: "outer" always
    predicts from x; "inner" (RR, DR) is the pseudo-response imputer on
    (x, z); "residual" (DR) is the weighted residual correction on x.
    ``selected_x_bounds`` records the per-coordinate range of the selected
    training x, which defines the interpolation region at evaluation time.
    RR and DR models keep their training-time pseudo-responses.
    """

    method: str
    components: dict
    weight_config: WeightConfig | None = None
    selected_x_bounds: tuple[np.ndarray, np.ndarray] | None = None
    pseudo_labels: np.ndarray | None = None

    def predict(self, x) -> np.ndarray:
        out = self.components["outer"].predict(x)
        residual = self.components.get("residual")
        if residual is not None:
            out = out + residual.predict(x)
        return np.asarray(out)

    def impute(self, x, z) -> np.ndarray:
        """Pseudo-responses from the inner stage (RR and DR models only)."""
        inner = self.components.get("inner")
        if inner is None:
            raise ValueError(f"{self.method} model has no inner imputation stage")
        return inner.predict(np.hstack([np.asarray(x, dtype=float), np.asarray(z, dtype=float)]))


def _bounds(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return x.min(axis=0), x.max(axis=0)


def _outer_fit(x, targets, cfg: FitConfig):
    if cfg.outer_degree is not None:
        return fit_polynomial(x, targets, cfg.outer_degree)
    return fit_krr(x, targets, kernel=cfg.kernel_for(x), ridge=cfg.ridge_for(x), null_space=cfg.null_space)


def fit_naive(d: Dataset, cfg: FitConfig = FitConfig()) -> PmarModel:
    """Plain fit of y on x over the selected rows only."""
    sel = d.selected
    if int(sel.sum()) < 2:
        raise TooFewSelected("need at least two selected rows")
    x, y = d.x[sel], d.y[sel]
    model = fit_krr(x, y, kernel=cfg.kernel_for(x), ridge=cfg.ridge_for(x), null_space=cfg.null_space)
    return PmarModel("naive", {"outer": model}, selected_x_bounds=_bounds(x))


def fit_true(d: Dataset, cfg: FitConfig = FitConfig()) -> PmarModel:
    """Oracle fit of y on x over all rows (needs oracle responses)."""
    if d.y is None or np.any(~np.isfinite(d.y)):
        raise ValueError("oracle fit needs a complete response column")
    model = fit_krr(d.x, d.y, kernel=cfg.kernel_for(d.x), ridge=cfg.ridge_for(d.x), null_space=cfg.null_space)
    sel = d.selected
    bounds = _bounds(d.x[sel]) if sel.any() else _bounds(d.x)
    return PmarModel("true", {"outer": model}, selected_x_bounds=bounds)


def fit_rr(d_selected: Dataset, d_full: Dataset, cfg: FitConfig = FitConfig()) -> PmarModel:
    """Repeated regression: impute pseudo-responses, then regress them on x.

    The inner stage fits y on (x, z) over the selected rows; the outer
    stage fits the imputed pseudo-responses on x over every row of
    ``d_full``, so the final model is a function of x alone. Imputed
    values are winsorized to the selected-response range (plus a 5%
    margin): a conditional-mean estimate far outside the observed
    responses is an extrapolation artifact of the inner smoother.
    """
    if d_selected.n < 2:
        raise TooFewSelected("need at least two selected rows")
    if d_full.n < 2:
        raise ValueError("need at least two rows with (x, z)")
    xz = d_selected.xz
    inner = fit_krr(xz, d_selected.y, kernel=cfg.kernel_for(xz), ridge=cfg.ridge_for(xz), null_space=cfg.null_space)
    pseudo = inner.predict(d_full.xz)
    lo, hi = float(np.min(d_selected.y)), float(np.max(d_selected.y))
    pad = 0.05 * (hi - lo)
    pseudo = np.clip(pseudo, lo - pad, hi + pad)
    outer = _outer_fit(d_full.x, pseudo, cfg)
    return PmarModel(
        "rr",
        {"inner": inner, "outer": outer},
        selected_x_bounds=_bounds(d_selected.x),
        pseudo_labels=pseudo,
    )


def fit_iw(d_selected: Dataset, weights, cfg: FitConfig = FitConfig(),
           weight_config: WeightConfig | None = None) -> PmarModel:
    """Importance-weighted fit of y on x over the selected rows."""
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != d_selected.n:
        raise LengthMismatch(f"{d_selected.n} rows but {w.shape[0]} weights")
    x = d_selected.x
    model = fit_krr(x, d_selected.y, weights=w, kernel=cfg.kernel_for(x), ridge=cfg.ridge_for(x), null_space=cfg.null_space)
    return PmarModel("iw", {"outer": model}, weight_config=weight_config,
                     selected_x_bounds=_bounds(x))


def fit_dr(d_selected: Dataset, d_full: Dataset, weights, cfg: FitConfig = FitConfig(),
           weight_config: WeightConfig | None = None) -> PmarModel:
    """Doubly robust: RR plus a weighted regression of its residuals on x.

    The residual stage uses the same importance weights as the IW strategy
    and the standard smoother, regardless of any outer-stage
    misspecification requested through ``cfg.outer_degree``.
    """
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != d_selected.n:
        raise LengthMismatch(f"{d_selected.n} rows but {w.shape[0]} weights")
    rr = fit_rr(d_selected, d_full, cfg)
    residuals = d_selected.y - rr.predict(d_selected.x)
    x = d_selected.x
    residual_model = fit_krr(x, residuals, weights=w, kernel=cfg.kernel_for(x), ridge=cfg.ridge_for(x), null_space=cfg.null_space)
    return PmarModel(
        "dr",
        {"inner": rr.components["inner"], "outer": rr.components["outer"], "residual": residual_model},
        weight_config=weight_config,
        selected_x_bounds=rr.selected_x_bounds,
        pseudo_labels=rr.pseudo_labels,
    )


def estimate_propensity(d_full: Dataset, cfg: FitConfig = FitConfig()) -> PropensityModel:
    """Logistic fit of the selection indicator on (x, z) over all rows."""
    if d_full.s is None:
        raise ValueError("dataset has no selection column")
    return fit_propensity(d_full.xz, d_full.s, l2=cfg.propensity_l2)


PMAR_MODEL_FORMAT_VERSION = 1


def pmar_model_to_dict(m: PmarModel) -> dict:
    doc = {
        "format_version": PMAR_MODEL_FORMAT_VERSION,
        "model_type": "pmar",
        "method": m.method,
        "components": {name: model_to_dict(mod) for name, mod in m.components.items()},
    }
    if m.weight_config is not None:
        wc = m.weight_config
        doc["weight_config"] = {
            "source": wc.source, "clip_low": wc.clip_low, "clip_high": wc.clip_high,
            "mode": wc.mode, "normalize": wc.normalize,
        }
    if m.selected_x_bounds is not None:
        lo, hi = m.selected_x_bounds
        doc["selected_x_bounds"] = {"low": np.asarray(lo).tolist(), "high": np.asarray(hi).tolist()}
    return doc


def pmar_model_from_dict(doc: dict) -> PmarModel:
    if doc.get("model_type") != "pmar":
        raise ValueError("not a strategy-model document")
    components = {name: model_from_dict(sub) for name, sub in doc["components"].items()}
    wc = None
    if "weight_config" in doc:
        w = doc["weight_config"]
        wc = WeightConfig(source=w["source"], clip_low=w["clip_low"], clip_high=w["clip_high"],
                          mode=w["mode"], normalize=w["normalize"])
    bounds = None
    if "selected_x_bounds" in doc:
        b = doc["selected_x_bounds"]
        bounds = (np.asarray(b["low"], dtype=float), np.asarray(b["high"], dtype=float))
    return PmarModel(doc["method"], components, weight_config=wc, selected_x_bounds=bounds)
