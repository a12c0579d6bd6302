"""Synthetic data generators for selection-biased regression benchmarks.

Three generators are provided:

* :func:`simulate_admg` draws from a Gaussian-process structural-equation
  model whose structure is an ADMG over {X, Y, Z, S}: every non-selection
  equation is a random smooth function of its parents plus random-
  distribution noise, and the binary selection column S follows a steep
  sigmoid product of its parents.
* :func:`simulate_example1` draws from the fixed sine-wave generating
  process used in the walkthrough demos (X Gaussian, Z = 3 sin X + noise,
  Y = X/2 + Z + noise, selection decreasing in X and Z).
* :func:`bias_dataset` plants a synthetic selection mechanism on an
  existing fully-observed table by thresholding a product of random
  sigmoid-squashed GP draws.

All generators return a :class:`Dataset` and keep the oracle response for
every row; exporters decide whether unselected responses are exposed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from pmar.graphs import Admg, is_pmar_pattern, to_dag_with_latents, topological_order
from pmar.kernels import (
    MATERN52,
    SQUARED_EXPONENTIAL,
    KernelSpec,
    draw_gp,
)
from pmar.numerics import as_generator, sigmoid_ex1, sigmoid_steep, standardize


class GraphNotPmar(Exception):
    """Simulation graph does not satisfy the required separation pattern."""


class ResampleLimitExceeded(Exception):
    """Selection resampling did not reach the minimum count within the cap."""


def _as_column_matrix(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"{name} must be 1- or 2-dimensional")
    return a


@dataclass
class Dataset:
    """Columnar table of (x, z, y, s) observations with selection metadata.

    ``x`` and ``z`` are (n, d) feature blocks; ``y`` is the response with
    NaN marking missing entries; ``s`` is the binary selection column and
    ``p`` the row-wise selection probability, when known. Only ``x`` is
    mandatory. This is the sole data currency between the simulators, the
    estimators and the metrics.
    """

    x: np.ndarray
    z: np.ndarray | None = None
    y: np.ndarray | None = None
    s: np.ndarray | None = None
    p: np.ndarray | None = None

    def __post_init__(self):
        self.x = _as_column_matrix(self.x, "x")
        n = self.x.shape[0]
        if self.z is not None:
            self.z = _as_column_matrix(self.z, "z")
            if self.z.shape[0] != n:
                raise ValueError("z length does not match x")
        for name in ("y", "s", "p"):
            col = getattr(self, name)
            if col is None:
                continue
            col = np.asarray(col, dtype=float).reshape(-1)
            if col.shape[0] != n:
                raise ValueError(f"{name} length does not match x")
            setattr(self, name, col)
        if self.s is not None:
            finite = self.s[np.isfinite(self.s)]
            if not np.all(np.isin(finite, (0.0, 1.0))):
                raise ValueError("s must be binary")
        if self.p is not None and np.any((self.p < 0) | (self.p > 1)):
            raise ValueError("p must lie in [0, 1]")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def selected(self) -> np.ndarray:
        """Boolean mask of rows with s == 1 (all rows if s is absent)."""
        if self.s is None:
            return np.ones(self.n, dtype=bool)
        return self.s == 1.0

    @property
    def xz(self) -> np.ndarray:
        """Features and privileged columns side by side."""
        if self.z is None:
            return self.x
        return np.hstack([self.x, self.z])

    def take(self, idx) -> "Dataset":
        """Row subset (new arrays, same column layout)."""
        pick = lambda col: None if col is None else col[idx]
        return Dataset(x=self.x[idx], z=pick(self.z), y=pick(self.y), s=pick(self.s), p=pick(self.p))

    def select_rows(self) -> "Dataset":
        return self.take(self.selected)


@dataclass(frozen=True)
class SimConfig:
    """Settings for the structural-equation simulator."""

    graph: Admg
    n: int = 1000
    kernel: KernelSpec = field(default_factory=lambda: KernelSpec(MATERN52))
    noise_kernel: KernelSpec = field(default_factory=lambda: KernelSpec(SQUARED_EXPONENTIAL))
    shift_multiplier: float = 3.0
    noise_scale: float = 0.5
    s_root_prob: float = 1.0 / 3.0
    check_pattern: bool = True

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not 0 < self.s_root_prob < 1:
            raise ValueError("s_root_prob must be in (0, 1)")


def draw_rd(n: int, rng, kernel: KernelSpec = KernelSpec(SQUARED_EXPONENTIAL)) -> np.ndarray:
    """Standardized draw from a random distribution.

    Pushes n uniform samples through one random GP function draw and
    standardizes the result, so repeated calls give noise with a fresh,
    generally non-Gaussian shape each time.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    gen = as_generator(rng)
    u = gen.random(n)
    f = draw_gp(u[:, None], kernel, gen)
    return standardize(f)


def simulate_admg(cfg: SimConfig, rng) -> Dataset:
    """Simulate one dataset from the graph-structured additive-noise model.

    Bidirected edges become parentless latents; vertices are visited in
    topological order. A parentless S is Bernoulli(s_root_prob); an S with
    parents is Bernoulli of the product of steep sigmoids of its parent
    values. Any other vertex is a Matern GP draw over its non-S parents
    plus scaled random-distribution noise; if S is one of its parents the
    selected rows are shifted down by shift_multiplier standard deviations
    before the column is standardized.

    Oracle responses are kept for every row; the realized selection
    probabilities are stored in the p column.
    """
    g = cfg.graph
    if cfg.check_pattern and not is_pmar_pattern(g):
        raise GraphNotPmar("graph does not satisfy the selection separation pattern")
    dag = to_dag_with_latents(g)
    order = topological_order(dag)
    gen = as_generator(rng)
    n = cfg.n

    values: dict[str, np.ndarray] = {}
    probs: np.ndarray | None = None
    for v in order:
        parents = dag.parents(v)
        if v == "S":
            if parents:
                p = np.ones(n)
                for u in parents:
                    p = p * sigmoid_steep(values[u])
            else:
                p = np.full(n, cfg.s_root_prob)
            values[v] = (gen.random(n) < p).astype(float)
            probs = p
        else:
            if not parents:
                values[v] = draw_rd(n, gen, cfg.noise_kernel)
                continue
            gp_parents = [u for u in parents if u != "S"]
            pts = (
                np.column_stack([values[u] for u in gp_parents])
                if gp_parents
                else np.empty((n, 0))
            )
            col = draw_gp(pts, cfg.kernel, gen) + cfg.noise_scale * draw_rd(
                n, gen, cfg.noise_kernel
            )
            if "S" in parents:
                shift = cfg.shift_multiplier * col.std(ddof=1)
                col = col - shift * (values["S"] == 1.0)
            values[v] = standardize(col)

    return Dataset(x=values["X"], z=values["Z"], y=values["Y"], s=values["S"], p=probs)


EXAMPLE1_NOISE_SCALES = (1.25, 2.3, 1.0)


def true_regression_example1(x) -> np.ndarray:
    """The target curve E[Y | X = x] = x/2 + 3 sin(x) of the sine generator."""
    x = np.asarray(x, dtype=float)
    return 0.5 * x + 3.0 * np.sin(x)


def simulate_example1(
    n: int,
    rng,
    noise_scales: tuple[float, float, float] = EXAMPLE1_NOISE_SCALES,
) -> Dataset:
    """Draw from the fixed sine-wave generating process.

        X = sx * e_X,   Z = 3 sin(X) + sz * e_Z,   Y = X/2 + Z + sy * e_Y

    with independent Gaussian noises, and selection probability

        p(x, z) = sigmoid(x) * (19/20 * sigmoid(z) + 1/20)

    for the gentle sigmoid 1/(1+e^t), so selection thins out for large X
    and large Z while staying bounded away from zero in the Z direction.
    The defaults (sx, sz, sy) = (1.25, 2.3, 1.0) put the irreducible
    response variance at about 6.3 and select roughly 30% of rows at
    n = 400.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    sx, sz, sy = noise_scales
    gen = as_generator(rng)
    x = sx * gen.standard_normal(n)
    z = 3.0 * np.sin(x) + sz * gen.standard_normal(n)
    y = 0.5 * x + z + sy * gen.standard_normal(n)
    p = sigmoid_ex1(x) * (0.95 * sigmoid_ex1(z) + 0.05)
    s = (gen.random(n) < p).astype(float)
    return Dataset(x=x, z=z, y=y, s=s, p=p)


def bias_dataset(
    d: Dataset,
    rng,
    min_selected: int = 120,
    max_attempts: int = 1000,
    literal_indicator: bool = False,
    kernel: KernelSpec = KernelSpec(SQUARED_EXPONENTIAL),
) -> Dataset:
    """Plant a synthetic selection mechanism on a fully-observed table.

    Draws independent GP functions f1 over x and f2 over z, forms row
    probabilities p_i = sigmoid_steep(f1(x_i)) * sigmoid_steep(f2(z_i)),
    and samples s_i ~ Bernoulli(p_i). The draw is repeated from scratch
    until at least ``min_selected`` rows are selected.

    ``literal_indicator=True`` flips the comparison to s_i = 1{p_i < u_i},
    under which the selection FREQUENCY is 1 - p; the default treats p as
    the selection probability.
    """
    if d.z is None or d.y is None:
        raise ValueError("bias_dataset needs x, z and y columns")
    if not 0 <= min_selected < d.n:
        raise ValueError("min_selected must be smaller than the number of rows")
    gen = as_generator(rng)
    for _ in range(max_attempts):
        f1 = draw_gp(d.x, kernel, gen)
        f2 = draw_gp(d.z, kernel, gen)
        p = sigmoid_steep(f1) * sigmoid_steep(f2)
        u = gen.random(d.n)
        s = (p < u) if literal_indicator else (u < p)
        if int(s.sum()) >= min_selected:
            return replace(d, s=s.astype(float), p=p)
    raise ResampleLimitExceeded(
        f"no draw reached {min_selected} selected rows in {max_attempts} attempts"
    )
