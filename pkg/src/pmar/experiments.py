"""Experiment pipelines: simulate/bias, fit every strategy, evaluate, aggregate.

Three experiments are provided, each with a fast ``desk`` preset and a
``full`` preset matching the published replication counts:

* ``example1``: one training draw from the sine-wave generator, every
  strategy fitted once, evaluated on many fresh oracle test sets.
* ``admg-sweep``: random graphs from the enumerated pattern family, one
  simulated dataset per (graph, replication) split into train/test halves.
* ``boston``: repeated synthetic biasing of a housing table, even
  train/test split per replication.

Every run writes a manifest sufficient to reproduce its outputs byte for
byte: replication streams are keyed by stable hashes of (experiment,
replication), aggregation order is fixed, and floats are serialized at 17
significant digits.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.stats import norm

from pmar import __version__
from pmar.dataio import load_housing_table
from pmar.estimators import (
    FitConfig,
    WeightConfig,
    compute_weights,
    estimate_propensity,
    fit_dr,
    fit_iw,
    fit_krr,
    fit_naive,
    fit_rr,
    fit_true,
)
from pmar.evaluation import MetricsReport, evaluate_predictions
from pmar.graphs import Admg, enumerate_pmar_admgs
from pmar.numerics import RngStream
from pmar.regression import PropensityModel, SingleClass
from pmar.simulate import (
    EXAMPLE1_NOISE_SCALES,
    Dataset,
    SimConfig,
    bias_dataset,
    simulate_admg,
    simulate_example1,
)

ALL_METHODS = ("naive", "rr", "iw-t", "iw-e", "dr-t", "dr-e", "true")

PRESETS = {
    "example1": {"desk": {"replications": 100}, "full": {"replications": 500}},
    "admg-sweep": {
        "desk": {"replications": 10, "n": 500, "graphs": 10},
        "full": {"replications": 60, "n": 1000, "graphs": 0},  # 0 = every graph
    },
    "boston": {"desk": {"replications": 50}, "full": {"replications": 500}},
}


class ExperimentFailure(Exception):
    """A replication failed and --keep-going was not set."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings for one experiment run."""

    experiment: str  # "example1" | "admg-sweep" | "boston"
    seed: int = 0
    n: int = 400
    replications: int = 100
    methods: tuple[str, ...] = ALL_METHODS
    fit: FitConfig = field(default_factory=FitConfig)
    weights: WeightConfig = field(default_factory=WeightConfig)
    graphs: int = 10              # admg-sweep: how many graphs (0 = all)
    noise_scales: tuple[float, float, float] = EXAMPLE1_NOISE_SCALES  # example1 only
    dataset_path: str | None = None  # boston: housing CSV
    standardize_columns: bool = True
    literal_indicator: bool = False
    min_selected: int = 120
    keep_going: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not self.methods:
            raise ValueError("methods must be nonempty")
        unknown = set(self.methods) - set(ALL_METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")


def apply_preset(cfg: ExperimentConfig, preset: str) -> ExperimentConfig:
    settings = PRESETS[cfg.experiment][preset]
    return replace(cfg, **settings)


def wilcoxon_signed_rank(a, b) -> tuple[float, float]:
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Returns (W+, p). Zero differences are dropped. The null distribution
    is exact (dynamic-programming enumeration over sign assignments) for
    up to 25 tie-free pairs, and a tie-corrected normal approximation
    otherwise.
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise ValueError("paired samples must have equal length")
    d = a - b
    d = d[d != 0.0]
    n = d.size
    if n == 0:
        return 0.0, 1.0
    order = np.argsort(np.abs(d), kind="stable")
    ranks = np.empty(n)
    # midranks for tied absolute differences
    sorted_abs = np.abs(d)[order]
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sorted_abs[j + 1] == sorted_abs[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    w_plus = float(ranks[d > 0].sum())
    has_ties = np.unique(sorted_abs).size != n

    if n <= 25 and not has_ties:
        total = n * (n + 1) // 2
        # counts[w] = number of rank subsets summing to w
        counts = np.zeros(total + 1, dtype=float)
        counts[0] = 1.0
        for r in range(1, n + 1):
            counts[r:] += counts[: total - r + 1].copy()
        cdf_low = counts[: int(w_plus) + 1].sum() / 2.0**n
        cdf_high = counts[int(w_plus) :].sum() / 2.0**n
        p = min(1.0, 2.0 * min(cdf_low, cdf_high))
        return w_plus, p

    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(sorted_abs, return_counts=True)
    var -= float(np.sum(tie_counts**3 - tie_counts)) / 48.0
    if var <= 0:
        return w_plus, 1.0
    zstat = (w_plus - mean) / np.sqrt(var)
    return w_plus, float(min(1.0, 2.0 * norm.sf(abs(zstat))))


@dataclass
class FittedSuite:
    """Every requested strategy fitted on one training dataset."""

    models: dict
    inner: object | None          # shared pseudo-response imputer
    propensity: PropensityModel | None
    bounds: tuple[np.ndarray, np.ndarray]
    weight_config: WeightConfig


def fit_suite(train: Dataset, methods, fit_cfg: FitConfig, weight_cfg: WeightConfig) -> FittedSuite:
    """Fit the requested strategies on one training dataset.

    True-weight variants read the train p column; estimated variants fit a
    logistic propensity on the full training rows. The pseudo-response
    imputer and the propensity model are shared with evaluation.
    """
    sel_mask = train.selected
    d_sel = train.take(sel_mask)
    if d_sel.n < 2:
        raise ExperimentFailure("fewer than two selected training rows")
    marginal = float(sel_mask.mean())

    needs_true_w = any(m in methods for m in ("iw-t", "dr-t"))
    needs_est_w = any(m in methods for m in ("iw-e", "dr-e"))

    w_true = None
    if needs_true_w:
        if train.p is None:
            raise ExperimentFailure("true-weight method requested but no p column")
        w_true = compute_weights(train.p[sel_mask], weight_cfg, marginal=marginal)
    propensity = None
    w_est = None
    if needs_est_w:
        try:
            propensity = estimate_propensity(train, fit_cfg)
        except SingleClass:
            # every training row selected (or none): no selection variation
            # to learn from, so the estimated weights are constant
            level = float(np.clip(marginal, 1e-6, 1.0 - 1e-6))
            propensity = PropensityModel(
                coef=np.concatenate([[np.log(level / (1.0 - level))],
                                     np.zeros(train.xz.shape[1])])
            )
        probs = propensity.predict(d_sel.xz)
        w_est = compute_weights(probs, replace(weight_cfg, source="estimated"), marginal=marginal)

    # fitted unconditionally: the pseudo-response imputer backs the
    # imputed-response metric for every strategy, not just RR/DR
    xz = d_sel.xz
    inner = fit_krr(xz, d_sel.y, kernel=fit_cfg.kernel_for(xz), ridge=fit_cfg.ridge_for(xz), null_space=fit_cfg.null_space)

    models = {}
    for m in methods:
        if m == "naive":
            models[m] = fit_naive(train, cfg=fit_cfg)
        elif m == "true":
            models[m] = fit_true(train, cfg=fit_cfg)
        elif m == "rr":
            models[m] = fit_rr(d_sel, train, cfg=fit_cfg)
        elif m == "iw-t":
            models[m] = fit_iw(d_sel, w_true, cfg=fit_cfg, weight_config=weight_cfg)
        elif m == "iw-e":
            models[m] = fit_iw(d_sel, w_est, cfg=fit_cfg,
                               weight_config=replace(weight_cfg, source="estimated"))
        elif m == "dr-t":
            models[m] = fit_dr(d_sel, train, w_true, cfg=fit_cfg, weight_config=weight_cfg)
        elif m == "dr-e":
            models[m] = fit_dr(d_sel, train, w_est, cfg=fit_cfg,
                               weight_config=replace(weight_cfg, source="estimated"))
    bounds = (d_sel.x.min(axis=0), d_sel.x.max(axis=0))
    return FittedSuite(models=models, inner=inner, propensity=propensity,
                       bounds=bounds, weight_config=weight_cfg)


def evaluate_suite(suite: FittedSuite, test: Dataset) -> dict[str, MetricsReport]:
    """Evaluate every fitted strategy on one test set."""
    marginal = float(test.selected.mean()) if test.s is not None else None
    w_true = None
    if test.p is not None and marginal:
        w_true = compute_weights(test.p, suite.weight_config, marginal=marginal)
    w_est = None
    if suite.propensity is not None and marginal:
        probs = suite.propensity.predict(test.xz)
        w_est = compute_weights(probs, replace(suite.weight_config, source="estimated"),
                                marginal=marginal)
    pseudo = suite.inner.predict(test.xz) if suite.inner is not None and test.z is not None else None
    reports = {}
    for name, model in suite.models.items():
        pred = model.predict(test.x)
        reports[name] = evaluate_predictions(
            name, pred, test, weights=w_true, weights_hat=w_est,
            pseudo=pseudo, bounds=suite.bounds,
        )
    return reports


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    replication_reports: list[dict[str, MetricsReport]]
    failures: list[tuple[int, str]]
    graph_ids: list[int] | None = None

    def metric_matrix(self, method: str, metric: str) -> np.ndarray:
        vals = [
            getattr(reports[method], metric)
            for reports in self.replication_reports
            if method in reports and getattr(reports[method], metric) is not None
        ]
        return np.asarray(vals, dtype=float)

    def summary(self) -> dict:
        methods = list(dict.fromkeys(
            m for reports in self.replication_reports for m in reports
        ))
        metrics = ("mse", "mse_n", "mse_tilde", "mse_w", "mse_w_hat", "mse_interp", "mse_extrap")
        table = {}
        for m in methods:
            table[m] = {}
            for metric in metrics:
                vals = self.metric_matrix(m, metric)
                if vals.size:
                    table[m][metric] = {
                        "mean": float(vals.mean()),
                        "sd": float(vals.std(ddof=1)) if vals.size > 1 else 0.0,
                        "count": int(vals.size),
                    }
        tests = {}
        for first, second in (("rr", "naive"), ("naive", "iw-t")):
            if first in methods and second in methods:
                a = self.metric_matrix(first, "mse")
                b = self.metric_matrix(second, "mse")
                if a.size == b.size and a.size:
                    stat, p = wilcoxon_signed_rank(a, b)
                    tests[f"{first}_vs_{second}"] = {
                        "statistic": stat,
                        "p_two_sided": p,
                        "mean_diff": float(a.mean() - b.mean()),
                        "median_diff": float(np.median(a - b)),
                    }
        return {"methods": table, "wilcoxon": tests, "replications": len(self.replication_reports),
                "failures": self.failures}


def _run_replications(cfg: ExperimentConfig, worker, indices) -> tuple[list, list]:
    """Run worker(i) for every index, sequentially or in a thread pool."""
    reports: dict[int, dict] = {}
    failures: list[tuple[int, str]] = []

    def guarded(i):
        try:
            return i, worker(i), None
        except Exception as exc:  # noqa: BLE001 - recorded per replication
            return i, None, f"{type(exc).__name__}: {exc}"

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            outcomes = list(pool.map(guarded, indices))
    else:
        outcomes = [guarded(i) for i in indices]
    for i, rep, err in sorted(outcomes, key=lambda t: t[0]):
        if err is None:
            reports[i] = rep
        else:
            if not cfg.keep_going:
                raise ExperimentFailure(f"replication {i}: {err}")
            failures.append((i, err))
    return [reports[i] for i in sorted(reports)], failures


def run_example1(cfg: ExperimentConfig) -> ExperimentResult:
    """One training draw, every strategy fitted once, many oracle test sets."""
    master = RngStream(cfg.seed)
    train = simulate_example1(cfg.n, master.split("example1", "train"), cfg.noise_scales)
    suite = fit_suite(train, cfg.methods, cfg.fit, cfg.weights)

    def worker(r: int):
        test = simulate_example1(cfg.n, master.split("example1", "test", r), cfg.noise_scales)
        return evaluate_suite(suite, test)

    reports, failures = _run_replications(cfg, worker, range(cfg.replications))
    return ExperimentResult(cfg, reports, failures)


def run_admg_sweep(cfg: ExperimentConfig, graphs: list[Admg] | None = None) -> ExperimentResult:
    """Simulate (graph, replication) datasets; split, fit, evaluate each."""
    if graphs is None:
        graphs = enumerate_pmar_admgs()
    master = RngStream(cfg.seed)
    if cfg.graphs and cfg.graphs < len(graphs):
        pick_gen = master.split("admg", "select").generator()
        ids = sorted(pick_gen.choice(len(graphs), size=cfg.graphs, replace=False).tolist())
    else:
        ids = list(range(len(graphs)))

    jobs = [(gid, rep) for gid in ids for rep in range(cfg.replications)]

    def worker(job_index: int):
        gid, rep = jobs[job_index]
        sim_cfg = SimConfig(graph=graphs[gid], n=cfg.n)
        data = simulate_admg(sim_cfg, master.split("admg", gid, rep))
        split_gen = master.split("admg", gid, rep, "split").generator()
        perm = split_gen.permutation(data.n)
        half = data.n // 2
        train, test = data.take(perm[:half]), data.take(perm[half:])
        suite = fit_suite(train, cfg.methods, cfg.fit, cfg.weights)
        return evaluate_suite(suite, test)

    reports, failures = _run_replications(cfg, worker, range(len(jobs)))
    return ExperimentResult(cfg, reports, failures, graph_ids=ids)


def run_boston(cfg: ExperimentConfig) -> ExperimentResult:
    """Repeatedly bias and split a housing table; fit and evaluate each time."""
    if cfg.dataset_path is None:
        raise ValueError("boston experiment needs dataset_path")
    base = load_housing_table(cfg.dataset_path, standardize_columns=cfg.standardize_columns)
    master = RngStream(cfg.seed)

    def worker(r: int):
        biased = bias_dataset(
            base, master.split("boston", r, "bias"),
            min_selected=cfg.min_selected, literal_indicator=cfg.literal_indicator,
        )
        split_gen = master.split("boston", r, "split").generator()
        perm = split_gen.permutation(biased.n)
        half = biased.n // 2
        train, test = biased.take(perm[:half]), biased.take(perm[half:])
        suite = fit_suite(train, cfg.methods, cfg.fit, cfg.weights)
        return evaluate_suite(suite, test)

    reports, failures = _run_replications(cfg, worker, range(cfg.replications))
    return ExperimentResult(cfg, reports, failures)


RUNNERS = {"example1": run_example1, "admg-sweep": run_admg_sweep, "boston": run_boston}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    return RUNNERS[cfg.experiment](cfg)


def _fmt(value: float) -> str:
    return format(value, ".17g")


def replications_csv(result: ExperimentResult) -> str:
    """One row per (replication, method), stable order, full precision."""
    lines = ["replication," + MetricsReport.csv_header()]
    for i, reports in enumerate(result.replication_reports):
        for method in sorted(reports):
            lines.append(f"{i},{reports[method].csv_row()}")
    return "\n".join(lines) + "\n"


def summary_csv(result: ExperimentResult) -> str:
    summary = result.summary()
    metrics = ("mse", "mse_n", "mse_tilde", "mse_w", "mse_w_hat", "mse_interp", "mse_extrap")
    lines = ["method," + ",".join(f"{m}_mean,{m}_sd" for m in metrics)]
    for method, cells in summary["methods"].items():
        row = [method]
        for m in metrics:
            if m in cells:
                row += [_fmt(cells[m]["mean"]), _fmt(cells[m]["sd"])]
            else:
                row += ["", ""]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


_DISPLAY_NAMES = {
    "naive": "Naive", "rr": "RR", "iw-t": "IW-t", "iw-e": "IW-e",
    "dr-t": "DR-t", "dr-e": "DR-e", "true": "True",
}


def summary_table(result: ExperimentResult) -> str:
    """Human-readable mean (sd) table, one strategy per row."""
    summary = result.summary()
    metrics = [
        ("mse", "MSE"), ("mse_n", "MSE-n"), ("mse_tilde", "MSE-yt"),
        ("mse_w", "MSE-w"), ("mse_w_hat", "MSE-wh"),
        ("mse_interp", "MSE-int"), ("mse_extrap", "MSE-ext"),
    ]
    present = [(k, h) for k, h in metrics
               if any(k in cells for cells in summary["methods"].values())]
    header = ["method"] + [h for _, h in present]
    rows = [header]
    for method in ALL_METHODS:
        if method not in summary["methods"]:
            continue
        cells = summary["methods"][method]
        row = [_DISPLAY_NAMES.get(method, method)]
        for key, _ in present:
            if key in cells:
                row.append(f"{cells[key]['mean']:.2f} ({cells[key]['sd']:.1f})")
            else:
                row.append("-")
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    out = []
    for r in rows:
        out.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
    for name, t in summary["wilcoxon"].items():
        out.append(
            f"wilcoxon {name}: p={t['p_two_sided']:.3g} "
            f"median_diff={t['median_diff']:.3g} mean_diff={t['mean_diff']:.3g}"
        )
    if summary["failures"]:
        out.append(f"failed replications: {len(summary['failures'])}")
    return "\n".join(out) + "\n"


def manifest_dict(cfg: ExperimentConfig, preset: str | None = None) -> dict:
    doc = {
        "package_version": __version__,
        "experiment": cfg.experiment,
        "preset": preset,
        "config": asdict(cfg),
    }
    return doc


def write_outputs(result: ExperimentResult, out_dir, preset: str | None = None) -> None:
    """Write manifest, per-replication CSV, summary CSV and summary JSON."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(
        json.dumps(manifest_dict(result.config, preset), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    (out / "replications.csv").write_text(replications_csv(result), encoding="utf-8")
    (out / "summary.csv").write_text(summary_csv(result), encoding="utf-8")
    summary = result.summary()
    if result.graph_ids is not None:
        summary["graph_ids"] = result.graph_ids
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
