"""Dataset container, CSV ingestion and structural transforms."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed or inconsistent input data."""


def _labels(values, n, name):
    if values is None:
        return None
    arr = np.asarray(values)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise DataError(f"{name} labels must have length {n}, got shape {arr.shape}")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Covariates ``x`` (n x p), response ``y`` and optional group labels.

    Arrays are copied and made read-only on construction so a dataset can be
    shared freely between workers.
    """

    x: np.ndarray
    y: np.ndarray
    cluster: Optional[np.ndarray] = None
    unit: Optional[np.ndarray] = None
    time: Optional[np.ndarray] = None
    col_names: tuple = field(default=())

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise DataError(f"x must be 2-dimensional, got shape {x.shape}")
        y = np.array(self.y, dtype=float).ravel()
        n = x.shape[0]
        if n < 1:
            raise DataError("dataset must contain at least one row")
        if y.shape[0] != n:
            raise DataError(f"x has {n} rows but y has {y.shape[0]}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DataError("x and y must be finite")
        if (self.unit is None) != (self.time is None):
            raise DataError("panel data needs both unit and time labels")
        names = tuple(self.col_names) or tuple(f"x{j + 1}" for j in range(x.shape[1]))
        if len(names) != x.shape[1]:
            raise DataError(f"{len(names)} column names for {x.shape[1]} columns")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "col_names", names)
        for name in ("cluster", "unit", "time"):
            object.__setattr__(self, name, _labels(getattr(self, name), n, name))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def subset(self, idx) -> "Dataset":
        """Rows ``idx`` as a new dataset (labels follow the rows)."""
        idx = np.asarray(idx)
        pick = lambda a: None if a is None else a[idx]
        return Dataset(self.x[idx], self.y[idx], pick(self.cluster), pick(self.unit),
                       pick(self.time), self.col_names)

    def with_y(self, y) -> "Dataset":
        return replace(self, y=np.asarray(y, dtype=float))

    def groups(self):
        """Cluster membership as integer codes in order of first appearance."""
        if self.cluster is None:
            raise DataError("dataset has no cluster labels")
        return _codes(self.cluster)


def _codes(labels):
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    # relabel so that group 0 is the first label met when scanning rows
    order = np.argsort(first, kind="stable")
    remap = np.empty_like(order)
    remap[order] = np.arange(order.size)
    return remap[inverse.ravel()], order.size


def normalize_columns(d: Dataset) -> Dataset:
    """Divide every covariate by its root-mean-square."""
    rms = np.sqrt(np.mean(d.x ** 2, axis=0))
    if np.any(rms == 0):
        bad = [d.col_names[j] for j in np.flatnonzero(rms == 0)]
        raise DataError(f"cannot normalize all-zero column(s): {', '.join(bad)}")
    return replace(d, x=d.x / rms)


def load_table(path, y: str, x: Optional[Sequence[str]] = None, cluster: Optional[str] = None,
               unit: Optional[str] = None, time: Optional[str] = None,
               normalize: bool = False) -> Dataset:
    """Read a headed CSV file into a :class:`Dataset`.

    ``y`` names the response column.  Covariates are the columns listed in
    ``x``; when omitted, every column not used as a response or label.
    Label columns are kept as strings.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r and any(c.strip() for c in r)]
    if not body:
        raise DataError(f"{path} has a header but no data rows")

    labels = {"cluster": cluster, "unit": unit, "time": time}
    roles = [y] + [v for v in labels.values() if v is not None]
    if x is None:
        x = [h for h in header if h not in roles]
    if not x:
        raise DataError("need at least one covariate column")
    for name in list(x) + roles:
        if name not in header:
            raise DataError(f"unknown column {name!r}; header is {header}")
    col = {h: j for j, h in enumerate(header)}

    def numeric(name):
        j = col[name]
        out = np.empty(len(body))
        for i, r in enumerate(body):
            cell = r[j].strip() if j < len(r) else ""
            try:
                out[i] = float(cell)
            except ValueError:
                raise DataError(f"non-numeric cell at ({i + 1},{j + 1}): {cell!r}") from None
            if not math.isfinite(out[i]):
                raise DataError(f"non-numeric cell at ({i + 1},{j + 1}): {cell!r}")
        return out

    def text(name):
        if name is None:
            return None
        j = col[name]
        vals = [r[j].strip() if j < len(r) else "" for r in body]
        for i, v in enumerate(vals):
            if v == "":
                raise DataError(f"missing label at ({i + 1},{j + 1})")
        return np.array(vals)

    d = Dataset(np.column_stack([numeric(c) for c in x]), numeric(y),
                text(cluster), text(unit), text(time), tuple(x))
    return normalize_columns(d) if normalize else d


def save_table(d: Dataset, path, y_name: str = "y") -> None:
    """Write ``d`` as CSV; floats use ``repr`` so a reload is bit-exact."""
    header = [y_name] + list(d.col_names)
    extra = [(k, getattr(d, k)) for k in ("cluster", "unit", "time") if getattr(d, k) is not None]
    header += [k for k, _ in extra]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(d.n):
            w.writerow([repr(float(d.y[i]))] + [repr(float(v)) for v in d.x[i]]
                       + [str(a[i]) for _, a in extra])


def panel_shape(d: Dataset):
    """Return (unit codes, time codes, N, T) after checking the grid is complete."""
    if d.unit is None:
        raise DataError("dataset has no panel labels")
    ucode, N = _codes(d.unit)
    tcode, T = _codes(d.time)
    if d.n != N * T:
        raise DataError(f"incomplete panel: {d.n} rows for {N} units x {T} periods")
    cells = ucode * T + tcode
    if np.unique(cells).size != d.n:
        raise DataError("incomplete panel: duplicated (unit, time) cells")
    return ucode, tcode, N, T


def within_transform(d: Dataset) -> Dataset:
    """Subtract per-unit time means from y and every covariate.

    The result carries the unit labels as clusters, which is what the panel
    penalty rule sums over.
    """
    ucode, _, N, T = panel_shape(d)
    if T < 2:
        raise DataError("within transform needs at least two time periods")
    counts = np.bincount(ucode, minlength=N).astype(float)
    ybar = np.bincount(ucode, weights=d.y, minlength=N) / counts
    xbar = np.vstack([np.bincount(ucode, weights=d.x[:, j], minlength=N)
                      for j in range(d.p)]).T / counts[:, None]
    return Dataset(d.x - xbar[ucode], d.y - ybar[ucode], cluster=d.unit,
                   unit=d.unit, time=d.time, col_names=d.col_names)
