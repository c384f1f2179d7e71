"""CSV files for the M + 1 datasets an analyst needs for over-imputation pooling.

``original.csv`` holds the observed data (``unit,x0,..,y,delta`` with ``y``
blank for nonrespondents).  ``imputation_<j>.csv`` holds one completed,
over-imputed dataset with header ``unit,x0,..,y_completed,y_over,delta``.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .datagen import IncompleteDataset
from .errors import SchemaError
from .imputer import ImputationSet

__all__ = ["dump_imputations", "load_imputations", "IMPUTATION_GLOB"]

IMPUTATION_GLOB = "imputation_*.csv"


def _num(x: float) -> str:
    return "" if math.isnan(x) else format(float(x), ".17g")


def dump_imputations(imps: ImputationSet, out_dir) -> list[Path]:
    data = imps.data
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    xcols = [f"x{k}" for k in range(data.p)]
    written = []

    path = out_dir / "original.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit", *xcols, "y", "delta"])
        for i in range(data.n):
            w.writerow([i + 1, *(_num(v) for v in data.x[i]), _num(data.y[i]), int(data.delta[i])])
    written.append(path)

    width = max(3, len(str(imps.M)))
    for j in range(imps.M):
        path = out_dir / f"imputation_{j + 1:0{width}d}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["unit", *xcols, "y_completed", "y_over", "delta"])
            yc, yo = imps.y_completed[j], imps.y_over[j]
            for i in range(data.n):
                w.writerow([i + 1, *(_num(v) for v in data.x[i]), _num(yc[i]), _num(yo[i]),
                            int(data.delta[i])])
        written.append(path)
    return written


def _read(path: Path, required):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        for c in required:
            if c not in cols:
                raise SchemaError(f"{path.name}: missing column {c!r}")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path.name}: no data rows")
    return rows


def load_imputations(paths):
    """Read completed-dataset files into respondents-first ``(M, n)`` arrays.

    Returns ``(y_completed, y_over, r)``.  Files must agree on the unit
    count and on the response indicators.  Directories are expanded to
    their ``imputation_*.csv`` files.
    """
    files = []
    for p in paths:
        p = Path(p)
        files.extend(sorted(p.glob(IMPUTATION_GLOB)) if p.is_dir() else [p])
    if len(files) < 2:
        from .errors import InsufficientImputations
        raise InsufficientImputations(f"need at least 2 imputation files, got {len(files)}")

    yc_rows, yo_rows, delta_ref = [], [], None
    for path in files:
        rows = _read(path, ("unit", "y_completed", "y_over", "delta"))
        try:
            units = np.array([int(r["unit"]) for r in rows])
            yc = np.array([float(r["y_completed"]) for r in rows])
            yo = np.array([float(r["y_over"]) for r in rows])
            delta = np.array([int(r["delta"]) for r in rows])
        except ValueError as exc:
            raise SchemaError(f"{path.name}: unparseable value ({exc})") from None
        order = np.argsort(units, kind="stable")
        units, yc, yo, delta = units[order], yc[order], yo[order], delta[order]
        if delta_ref is None:
            delta_ref, units_ref = delta, units
        elif len(delta) != len(delta_ref) or np.any(units != units_ref):
            raise SchemaError(f"{path.name}: unit count or ids differ from {files[0].name}")
        elif np.any(delta != delta_ref):
            raise SchemaError(f"{path.name}: delta column differs from {files[0].name}")
        yc_rows.append(yc)
        yo_rows.append(yo)

    resp_first = np.argsort(1 - delta_ref, kind="stable")
    y_completed = np.vstack(yc_rows)[:, resp_first]
    y_over = np.vstack(yo_rows)[:, resp_first]
    return y_completed, y_over, int(delta_ref.sum())


def load_original(path) -> IncompleteDataset:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        xcols = [c for c in cols if c.startswith("x")]
        for c in ("unit", "y", "delta"):
            if c not in cols:
                raise SchemaError(f"{path.name}: missing column {c!r}")
        rows = list(reader)
    x = np.array([[float(r[c]) for c in xcols] for r in rows])
    y = np.array([float(r["y"]) if r["y"] != "" else math.nan for r in rows])
    delta = np.array([int(r["delta"]) for r in rows])
    return IncompleteDataset.from_arrays(x, y, delta)
