"""Planting a synthetic selection mechanism on a real (or real-shaped) table.

The benchmark takes a fully observed housing table with columns rm (rooms
per dwelling -> x), lstat (share of lower-status population -> z) and medv
(home value -> y), draws two random smooth functions f1, f2, selects each
row with probability sigmoid_steep(f1(x)) * sigmoid_steep(f2(z)), redraws
until at least 120 rows are selected, and then runs every strategy on an
even train/test split.

With the real Boston Housing CSV at data/boston_housing.csv (see
scripts/fetch_boston.py) this reproduces the real-data benchmark; without
it the demo falls back to a synthetic table with the same column layout.

Run:  python demos/housing_bias_demo.py [path/to/housing.csv]
"""

import sys
from pathlib import Path

from pmar.experiments import ExperimentConfig, run_experiment, summary_table
from pmar.numerics import RngStream

default_path = Path(__file__).resolve().parent.parent / "data" / "boston_housing.csv"
path = Path(sys.argv[1]) if len(sys.argv) > 1 else default_path

if not path.exists():
    print(f"no housing table at {path}; generating a synthetic stand-in\n")
    gen = RngStream(42).generator()
    n = 506
    lstat = gen.normal(0.0, 1.0, n)
    rm = -0.6 * lstat + 0.8 * gen.normal(0.0, 1.0, n)
    medv = 0.55 * rm - 0.45 * lstat + 0.45 * gen.normal(0.0, 1.0, n)
    path = Path("/tmp/housing_synthetic.csv")
    rows = ["rm,lstat,medv"] + [f"{a:.8f},{b:.8f},{c:.8f}" for a, b, c in zip(rm, lstat, medv)]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")

cfg = ExperimentConfig(experiment="boston", seed=0, replications=50,
                       dataset_path=str(path), keep_going=True)
print(f"50 biased instantiations of {path.name}, even train/test splits:\n")
result = run_experiment(cfg)
print(summary_table(result))
