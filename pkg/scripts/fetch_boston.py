"""Fetch the Boston Housing data and write data/boston_housing.csv.

The library itself never touches the network; run this once if you want the
real-data benchmark (the boston experiment and acceptance criterion 10).
The source is the classic StatLib archive file, whose records span two
physical lines of fixed-width numbers.

Usage:  python scripts/fetch_boston.py [output.csv]
"""

import sys
import urllib.request
from pathlib import Path

URL = "http://lib.stat.cmu.edu/datasets/boston"
COLUMNS = [
    "crim", "zn", "indus", "chas", "nox", "rm", "age",
    "dis", "rad", "tax", "ptratio", "b", "lstat", "medv",
]
HEADER_LINES = 22  # documentation block before the data


def parse_statlib(text: str) -> list[list[float]]:
    values: list[float] = []
    for line in text.splitlines()[HEADER_LINES:]:
        values.extend(float(tok) for tok in line.split())
    if len(values) % len(COLUMNS) != 0:
        raise ValueError(f"unexpected token count {len(values)}")
    rows = [values[i : i + len(COLUMNS)] for i in range(0, len(values), len(COLUMNS))]
    if len(rows) != 506:
        raise ValueError(f"expected 506 records, got {len(rows)}")
    return rows


def main() -> None:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else (
        Path(__file__).resolve().parent.parent / "data" / "boston_housing.csv"
    )
    print(f"fetching {URL} ...")
    with urllib.request.urlopen(URL, timeout=60) as resp:
        text = resp.read().decode("utf-8", errors="replace")
    rows = parse_statlib(text)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(",".join(COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(format(v, "g") for v in row) + "\n")
    print(f"wrote {len(rows)} records to {out}")


if __name__ == "__main__":
    main()
