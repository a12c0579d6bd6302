"""Dataset CSV serialization and tabular ingestion.

The dataset schema is a UTF-8 CSV with header columns drawn from
``x, z, y, s, p`` (multi-column blocks spelled ``x1, x2, ...``), decimal
point ``.``, floats written with 17 significant digits so values
round-trip losslessly. A missing response is an empty field; by default
the writer blanks the responses of unselected rows and the ``oracle``
flag keeps them.
"""

from __future__ import annotations

import csv
import io

import numpy as np

from pmar.simulate import Dataset


class ParseError(Exception):
    """Malformed CSV cell; carries the offending line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class SchemaError(Exception):
    """Header or column contents violate the dataset schema."""


def _fmt(value: float) -> str:
    return format(value, ".17g")


def _block_headers(name: str, block: np.ndarray | None) -> list[str]:
    if block is None:
        return []
    if block.shape[1] == 1:
        return [name]
    return [f"{name}{i}" for i in range(1, block.shape[1] + 1)]


def write_dataset(d: Dataset, path, oracle: bool = False) -> None:
    """Write a dataset CSV; blanks unselected responses unless ``oracle``."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dataset_to_csv(d, oracle=oracle))


def dataset_to_csv(d: Dataset, oracle: bool = False) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    header = _block_headers("x", d.x) + _block_headers("z", d.z)
    for name in ("y", "s", "p"):
        if getattr(d, name) is not None:
            header.append(name)
    writer.writerow(header)
    hide_y = d.y is not None and d.s is not None and not oracle
    for i in range(d.n):
        row = [_fmt(v) for v in d.x[i]]
        if d.z is not None:
            row += [_fmt(v) for v in d.z[i]]
        if d.y is not None:
            missing = not np.isfinite(d.y[i]) or (hide_y and d.s[i] == 0.0)
            row.append("" if missing else _fmt(d.y[i]))
        if d.s is not None:
            row.append(str(int(d.s[i])))
        if d.p is not None:
            row.append(_fmt(d.p[i]))
        writer.writerow(row)
    return out.getvalue()


def _column_groups(header: list[str]) -> dict[str, list[int]]:
    groups: dict[str, list[tuple[int, int]]] = {}
    for idx, raw in enumerate(header):
        name = raw.strip().lower()
        base = name.rstrip("0123456789")
        suffix = name[len(base):]
        if base not in ("x", "z", "y", "s", "p"):
            raise SchemaError(f"unknown column {raw!r}")
        groups.setdefault(base, []).append((int(suffix) if suffix else 0, idx))
    return {base: [idx for _, idx in sorted(cols)] for base, cols in groups.items()}


def load_dataset(path) -> Dataset:
    with open(path, encoding="utf-8", newline="") as fh:
        return dataset_from_csv(fh.read())


def dataset_from_csv(text: str) -> Dataset:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise SchemaError("empty file")
    groups = _column_groups(rows[0])
    if "x" not in groups:
        raise SchemaError("missing columns: x")
    for base in ("y", "s", "p"):
        if base in groups and len(groups[base]) > 1:
            raise SchemaError(f"column {base} must be a single column")

    width = len(rows[0])
    data: dict[str, list] = {base: [] for base in groups}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != width:
            raise ParseError(lineno, f"expected {width} fields, got {len(row)}")
        for base, idxs in groups.items():
            cells = []
            for idx in idxs:
                cell = row[idx].strip()
                if cell == "":
                    if base == "y":
                        cells.append(np.nan)
                        continue
                    raise ParseError(lineno, f"empty value in column {rows[0][idx]!r}")
                else:
                    try:
                        cells.append(float(cell))
                    except ValueError:
                        raise ParseError(lineno, f"cannot parse {cell!r} as a number") from None
            data[base].append(cells if len(idxs) > 1 else cells[0])

    def block(base):
        if base not in groups:
            return None
        return np.asarray(data[base], dtype=float)

    s = block("s")
    if s is not None and not np.all(np.isin(s, (0.0, 1.0))):
        raise SchemaError("s column must contain only 0 and 1")
    p = block("p")
    if p is not None and (np.any(p < 0) or np.any(p > 1)):
        raise SchemaError("p column must lie in [0, 1]")
    return Dataset(x=block("x"), z=block("z"), y=block("y"), s=s, p=p)


BOSTON_COLUMNS = {"x": "rm", "z": "lstat", "y": "medv"}


def load_housing_table(path, standardize_columns: bool = True) -> Dataset:
    """Read a housing-style CSV into a Dataset.

    The file must carry columns named rm, lstat and medv (case-
    insensitive; extra columns are ignored), which become x, z and y.
    By default each column is standardized to mean 0 and unit sample
    standard deviation.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError("empty file")
    header = [c.strip().lower() for c in rows[0]]
    missing = [name for name in BOSTON_COLUMNS.values() if name not in header]
    if missing:
        raise SchemaError(f"missing columns: {', '.join(sorted(missing))}")
    idx = {role: header.index(name) for role, name in BOSTON_COLUMNS.items()}
    cols: dict[str, list[float]] = {role: [] for role in idx}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        for role, j in idx.items():
            try:
                cols[role].append(float(row[j]))
            except (ValueError, IndexError):
                raise ParseError(lineno, f"cannot parse column {BOSTON_COLUMNS[role]!r}") from None

    def col(role):
        arr = np.asarray(cols[role], dtype=float)
        if standardize_columns:
            arr = (arr - arr.mean()) / arr.std(ddof=1)
        return arr

    return Dataset(x=col("x"), z=col("z"), y=col("y"))
