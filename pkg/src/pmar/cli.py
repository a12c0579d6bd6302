"""Command-line surface.

Subcommands: enumerate, simulate, fit, eval, experiment. Summary output
goes to stdout; diagnostics go to stderr. Exit codes: 2 invalid usage or
graph, 3 simulation/replication failure, 4 missing column or schema
mismatch, 5 fit failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from pmar.dataio import ParseError, SchemaError, load_dataset, write_dataset
from pmar.estimators import (
    EstimatorError,
    FitConfig,
    TooFewSelected,
    WeightConfig,
    compute_weights,
    estimate_propensity,
    fit_dr,
    fit_iw,
    fit_naive,
    fit_rr,
    fit_true,
    pmar_model_from_dict,
    pmar_model_to_dict,
)
from pmar.evaluation import evaluate_predictions
from pmar.experiments import (
    ALL_METHODS,
    ExperimentConfig,
    ExperimentFailure,
    apply_preset,
    run_experiment,
    summary_table,
    write_outputs,
)
from pmar.graphs import (
    enumerate_pmar_admgs,
    format_graphs,
    parse_graph,
    parse_graphs,
)
from pmar.numerics import RngStream, stream_id_for
from pmar.regression import RegressionError
from pmar.simulate import GraphNotPmar, SimConfig, simulate_admg, simulate_example1

EXIT_SIMULATION = 3
EXIT_SCHEMA = 4
EXIT_FIT = 5


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
def main():
    """Bias-corrected regression under privileged selection."""


@main.command("enumerate")
@click.option("--no-coexisting-edges", is_flag=True,
              help="Forbid a directed and a bidirected edge between the same pair.")
@click.option("--require-s-sink", is_flag=True, help="Drop graphs where S has children.")
@click.option("--no-bidirected-at-s", is_flag=True, help="Forbid bidirected edges incident to S.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the graphs to this file (multi-graph text format).")
def cmd_enumerate(no_coexisting_edges, require_s_sink, no_bidirected_at_s, out):
    """Enumerate all graphs matching the selection separation pattern."""
    graphs = enumerate_pmar_admgs(
        coexisting_edges=not no_coexisting_edges,
        require_s_sink=require_s_sink,
        bidirected_at_s=not no_bidirected_at_s,
    )
    if out:
        Path(out).write_text(format_graphs(graphs), encoding="utf-8")
        click.echo(f"wrote {out}", err=True)
    click.echo(str(len(graphs)))


def _resolve_graph(source: str):
    """Graph argument: enumerated index, or a graph text file path."""
    if source.isdigit():
        graphs = enumerate_pmar_admgs()
        idx = int(source)
        if idx >= len(graphs):
            raise click.UsageError(f"graph index {idx} out of range (have {len(graphs)})")
        return graphs[idx], f"admg-{idx}"
    path = Path(source)
    if not path.exists():
        raise click.UsageError(f"graph {source!r} is neither an index nor a file")
    text = path.read_text(encoding="utf-8")
    graphs = parse_graphs(text) if "--- graph" in text else [parse_graph(text)]
    if len(graphs) != 1:
        raise click.UsageError("graph file must contain exactly one graph")
    return graphs[0], path.stem


@main.command("simulate")
@click.argument("source")
@click.option("--n", default=1000, show_default=True, help="Rows per dataset.")
@click.option("--reps", default=1, show_default=True, help="Number of datasets.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="sim-out",
              show_default=True)
@click.option("--oracle", is_flag=True, help="Keep responses of unselected rows in the CSVs.")
def cmd_simulate(source, n, reps, seed, out_dir, oracle):
    """Simulate datasets from EXAMPLE1 or a graph (enumerated index or file)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    builtin = source.lower() == "example1"
    if not builtin:
        graph, graph_id = _resolve_graph(source)
    else:
        graph, graph_id = None, "example1"
    try:
        for rep in range(reps):
            stream = RngStream(seed, stream_id_for(graph_id, rep))
            if builtin:
                data = simulate_example1(n, stream)
            else:
                data = simulate_admg(SimConfig(graph=graph, n=n), stream)
            write_dataset(data, out / f"{graph_id}_rep{rep:04d}.csv", oracle=oracle)
    except GraphNotPmar as exc:
        raise click.UsageError(f"graph rejected: {exc}") from exc
    except Exception as exc:  # simulation failures map to exit 3
        _fail(EXIT_SIMULATION, f"simulation failed: {type(exc).__name__}: {exc}")
    manifest = {
        "source": graph_id, "n": n, "reps": reps, "seed": seed, "oracle": oracle,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                       encoding="utf-8")
    click.echo(f"{reps} dataset(s) written to {out}")


def _weight_config(clip_low, clip_high, normalize_weights) -> WeightConfig:
    return WeightConfig(clip_low=clip_low, clip_high=clip_high, normalize=normalize_weights)


_METHOD_CHOICES = click.Choice(ALL_METHODS, case_sensitive=False)


@main.command("fit")
@click.argument("method", type=_METHOD_CHOICES)
@click.argument("train_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default="model.json", show_default=True)
@click.option("--ridge", default=1e-2, show_default=True)
@click.option("--lengthscale", default=None, type=float,
              help="Kernel lengthscale (default: median pairwise distance).")
@click.option("--clip-low", default=1 / 20, show_default=True)
@click.option("--clip-high", default=1.0, show_default=True)
@click.option("--normalize-weights/--no-normalize-weights", default=True, show_default=True,
              help="Rescale the clipped weights to mean one.")
def cmd_fit(method, train_csv, out, ridge, lengthscale, clip_low, clip_high, normalize_weights):
    """Fit one strategy on a training CSV and persist the model as JSON."""
    method = method.lower()
    try:
        train = load_dataset(train_csv)
    except (ParseError, SchemaError) as exc:
        _fail(EXIT_SCHEMA, str(exc))
    fit_cfg = FitConfig(ridge=ridge, lengthscale=lengthscale)
    weight_cfg = _weight_config(clip_low, clip_high, normalize_weights)

    needs = {"rr": ("y", "s", "z"), "dr-t": ("y", "s", "z", "p"), "dr-e": ("y", "s", "z"),
             "iw-t": ("y", "s", "p"), "iw-e": ("y", "s", "z"), "naive": ("y", "s"),
             "true": ("y",)}
    missing = [c for c in needs[method] if getattr(train, c) is None]
    if missing:
        _fail(EXIT_SCHEMA, f"method {method} needs column(s): {', '.join(missing)}")

    sel = train.selected
    d_sel = train.take(sel)
    marginal = float(sel.mean())
    try:
        if method == "naive":
            model = fit_naive(train, cfg=fit_cfg)
        elif method == "true":
            if np.any(~np.isfinite(train.y)):
                _fail(EXIT_SCHEMA, "true fit needs oracle responses for every row")
            model = fit_true(train, cfg=fit_cfg)
        elif method == "rr":
            model = fit_rr(d_sel, train, cfg=fit_cfg)
        else:
            if method.endswith("-t"):
                probs = train.p[sel]
            else:
                probs = estimate_propensity(train, fit_cfg).predict(d_sel.xz)
            weights = compute_weights(probs, weight_cfg, marginal=marginal)
            if method.startswith("iw"):
                model = fit_iw(d_sel, weights, cfg=fit_cfg, weight_config=weight_cfg)
            else:
                model = fit_dr(d_sel, train, weights, cfg=fit_cfg, weight_config=weight_cfg)
    except (EstimatorError, RegressionError, TooFewSelected) as exc:
        _fail(EXIT_FIT, f"fit failed: {type(exc).__name__}: {exc}")
    Path(out).write_text(json.dumps(pmar_model_to_dict(model), indent=2) + "\n", encoding="utf-8")
    click.echo(f"{method}: fitted on {d_sel.n}/{train.n} selected rows -> {out}")


@main.command("eval")
@click.argument("model_json", type=click.Path(exists=True, dir_okay=False))
@click.argument("test_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the report JSON here instead of stdout.")
@click.option("--curve", type=click.Path(dir_okay=False), default=None,
              help="Also write a plot-ready CSV of predictions on a grid over the test x range.")
@click.option("--clip-low", default=1 / 20, show_default=True)
@click.option("--clip-high", default=1.0, show_default=True)
@click.option("--normalize-weights/--no-normalize-weights", default=True, show_default=True,
              help="Rescale the clipped weights to mean one.")
def cmd_eval(model_json, test_csv, out, curve, clip_low, clip_high, normalize_weights):
    """Evaluate a persisted model on a test CSV."""
    try:
        model = pmar_model_from_dict(json.loads(Path(model_json).read_text(encoding="utf-8")))
    except (ValueError, KeyError) as exc:
        _fail(EXIT_SCHEMA, f"bad model file: {exc}")
    try:
        test = load_dataset(test_csv)
    except (ParseError, SchemaError) as exc:
        _fail(EXIT_SCHEMA, str(exc))
    weight_cfg = _weight_config(clip_low, clip_high, normalize_weights)
    marginal = float(test.selected.mean()) if test.s is not None else None
    weights = None
    if test.p is not None and marginal:
        weights = compute_weights(test.p, weight_cfg, marginal=marginal)
    weights_hat = None
    if test.s is not None and test.z is not None and 0 < marginal < 1:
        probs = estimate_propensity(test).predict(test.xz)
        weights_hat = compute_weights(probs, weight_cfg, marginal=marginal)
    pseudo = None
    if "inner" in model.components and test.z is not None:
        pseudo = model.impute(test.x, test.z)
    try:
        pred = model.predict(test.x)
    except Exception as exc:
        _fail(EXIT_SCHEMA, f"model/test schema mismatch: {exc}")
    report = evaluate_predictions(
        model.method, pred, test, weights=weights, weights_hat=weights_hat,
        pseudo=pseudo, bounds=model.selected_x_bounds,
    )
    if curve:
        if test.x.shape[1] != 1:
            raise click.UsageError("--curve needs univariate x")
        grid = np.linspace(test.x.min(), test.x.max(), 201)
        lines = ["x,yhat"] + [
            f"{format(g, '.17g')},{format(v, '.17g')}"
            for g, v in zip(grid, model.predict(grid[:, None]))
        ]
        Path(curve).write_text("\n".join(lines) + "\n", encoding="utf-8")
        click.echo(f"wrote {curve}", err=True)
    text = report.to_json() + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out}", err=True)
    else:
        click.echo(text, nl=False)


@main.command("experiment")
@click.argument("name", type=click.Choice(["example1", "admg-sweep", "boston"]))
@click.option("--preset", type=click.Choice(["desk", "full"]), default="desk", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Output directory [default: runs/<name>-<preset>].")
@click.option("--n", default=None, type=int, help="Override the per-dataset sample count.")
@click.option("--reps", default=None, type=int, help="Override the replication count.")
@click.option("--graphs", default=None, type=int, help="admg-sweep: number of graphs (0 = all).")
@click.option("--methods", default=",".join(ALL_METHODS), show_default=True,
              help="Comma-separated strategy list.")
@click.option("--data", "dataset_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="boston: housing CSV with rm, lstat, medv columns.")
@click.option("--no-standardize", is_flag=True, help="boston: skip column standardization.")
@click.option("--literal-indicator", is_flag=True,
              help="boston: select when p < u instead of u < p.")
@click.option("--clip-low", default=1 / 20, show_default=True)
@click.option("--clip-high", default=1.0, show_default=True)
@click.option("--normalize-weights/--no-normalize-weights", default=True, show_default=True,
              help="Rescale the clipped weights to mean one.")
@click.option("--ridge", default=1e-2, show_default=True)
@click.option("--threads", default=1, show_default=True)
@click.option("--keep-going", is_flag=True, help="Record replication failures instead of aborting.")
def cmd_experiment(name, preset, seed, out_dir, n, reps, graphs, methods, dataset_path,
                   no_standardize, literal_indicator, clip_low, clip_high, normalize_weights,
                   ridge, threads, keep_going):
    """Run a full experiment pipeline and write result tables."""
    method_list = tuple(m.strip().lower() for m in methods.split(",") if m.strip())
    bad = set(method_list) - set(ALL_METHODS)
    if bad:
        raise click.UsageError(f"unknown methods: {', '.join(sorted(bad))}")
    if name == "boston" and dataset_path is None:
        raise click.UsageError("boston requires --data pointing to the housing CSV")
    cfg = ExperimentConfig(
        experiment=name, seed=seed, methods=method_list,
        fit=FitConfig(ridge=ridge),
        weights=_weight_config(clip_low, clip_high, normalize_weights),
        dataset_path=dataset_path, standardize_columns=not no_standardize,
        literal_indicator=literal_indicator, threads=threads, keep_going=keep_going,
    )
    cfg = apply_preset(cfg, preset)
    overrides = {}
    if n is not None:
        overrides["n"] = n
    if reps is not None:
        overrides["replications"] = reps
    if graphs is not None:
        overrides["graphs"] = graphs
    if overrides:
        from dataclasses import replace
        cfg = replace(cfg, **overrides)
    try:
        result = run_experiment(cfg)
    except ExperimentFailure as exc:
        _fail(EXIT_SIMULATION, str(exc))
    except (ParseError, SchemaError) as exc:
        _fail(EXIT_SCHEMA, str(exc))
    out = Path(out_dir) if out_dir else Path("runs") / f"{name}-{preset}"
    write_outputs(result, out, preset=preset)
    click.echo(f"outputs in {out}", err=True)
    click.echo(summary_table(result), nl=False)


if __name__ == "__main__":
    main()
