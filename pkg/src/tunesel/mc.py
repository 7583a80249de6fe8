"""Monte Carlo comparison of series selectors (mean errors by method, basis and metric)."""

from __future__ import annotations

import csv
import io
import logging
import math
import zlib
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from joblib import Parallel, delayed

from ._random import make_rng
from .basis import MONOMIAL, SPLINE
from .dataset import Dataset
from .select_series import (SelectionError, aggregate_predictor, lepski_select,
                            mallows_select, vfold_select)
from .series import METRICS, RankError, error_metrics, pilot_k

log = logging.getLogger(__name__)

TRUTHS = {
    "expexp": lambda x: np.exp(np.exp(x)),
    "sin2pi": lambda x: np.sin(2.0 * np.pi * x),
}
METHODS = ("mallows", "lepski", "cv5", "aggregation")
BASES = (MONOMIAL, SPLINE)
METHOD_LABELS = {"mallows": "Mallows", "lepski": "Lepski", "cv5": "CV", "aggregation": "Aggregation"}
METRIC_LABELS = {"l2": "l2", "prediction": "l2n", "uniform": "linf", "pointwise": "lpw"}
MAX_FAILURE_RATE = 0.01


@dataclass(frozen=True)
class DgpSpec:
    """``Y = f(X) + eps / sqrt(1 + X^2)`` with ``X ~ U[0,1]``, ``eps ~ N(0,1)``."""

    f: str
    n: int

    def __post_init__(self):
        if self.f not in TRUTHS:
            raise ValueError(f"unknown regression function {self.f!r}; choose from {list(TRUTHS)}")
        if self.n < 10:
            raise ValueError("n must be at least 10")

    @property
    def truth(self):
        return TRUTHS[self.f]

    def noise_sd(self, x):
        return 1.0 / np.sqrt(1.0 + np.asarray(x) ** 2)


def simulate_dataset(spec: DgpSpec, seed) -> Dataset:
    rng = make_rng(seed, "dgp", spec.f, spec.n)
    x = rng.uniform(0.0, 1.0, spec.n)
    eps = rng.standard_normal(spec.n)
    return Dataset(x[:, None], spec.truth(x) + eps * spec.noise_sd(x), col_names=("x",))


@dataclass
class McConfig:
    dgps: tuple = (DgpSpec("expexp", 500), DgpSpec("expexp", 1000),
                   DgpSpec("sin2pi", 500), DgpSpec("sin2pi", 1000))
    methods: tuple = METHODS
    bases: tuple = BASES
    reps: int = 1000
    master_seed: int = 1
    x0: float = 0.5
    alpha: float = 0.05
    beta: float = 1.0
    B: int = 1000
    V: int = 5
    jobs: int = 1

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ValueError(f"unknown methods {sorted(bad)}")
        bad = set(self.bases) - set(BASES)
        if bad:
            raise ValueError(f"unknown bases {sorted(bad)}")

    def Kn(self, n):
        return range(1, pilot_k(n) + 1)


@dataclass
class McReport:
    """Mean error per (method, basis, n, f, metric) over the replications."""

    config: McConfig
    mean: dict = field(default_factory=dict)
    se: dict = field(default_factory=dict)
    used: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)

    def cell(self, method, basis, n, f, metric) -> float:
        return self.mean[(method, basis, n, f, metric)]

    def valid(self, method, basis, n, f) -> bool:
        fails = self.failures.get((method, basis, n, f), 0)
        return fails <= MAX_FAILURE_RATE * self.config.reps

    def rows(self):
        for key in sorted(self.mean, key=_cell_order):
            method, basis, n, f, metric = key
            yield {"method": method, "basis": basis, "n": n, "f": f, "metric": metric,
                   "mean": self.mean[key], "se": self.se[key], "reps": self.used[key],
                   "failures": self.failures.get((method, basis, n, f), 0),
                   "valid": self.valid(method, basis, n, f)}

    def to_csv(self, full_precision: bool = False) -> str:
        fmt = repr if full_precision else (lambda v: f"{v:.6g}")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["method", "basis", "n", "f", "metric", "mean", "se", "reps", "failures", "valid"]
        w.writerow(cols)
        for row in self.rows():
            w.writerow([fmt(row[c]) if c in ("mean", "se") else row[c] for c in cols])
        return buf.getvalue()

    def to_text(self) -> str:
        """Aligned tables: one block per (n, f), methods by (metric, basis) columns."""
        cfg = self.config
        cols = [(m, b) for b in cfg.bases for m in METRICS]
        head = ["method"] + [f"{METRIC_LABELS[m]}({'M' if b == MONOMIAL else 'S'})" for m, b in cols]
        lines = []
        for spec in cfg.dgps:
            title = f"n={spec.n}; f={spec.f}"
            lines += ["", title, "-" * 9 * len(head)]
            lines.append("".join(f"{h:>12}" if i else f"{h:<12}" for i, h in enumerate(head)))
            for method in cfg.methods:
                cells = []
                for metric, basis in cols:
                    key = (method, basis, spec.n, spec.f, metric)
                    v = self.mean.get(key, float("nan"))
                    mark = "" if self.valid(method, basis, spec.n, spec.f) else "*"
                    cells.append(f"{v:.3f}{mark}")
                lines.append(f"{METHOD_LABELS[method]:<12}" + "".join(f"{c:>12}" for c in cells))
        return "\n".join(lines).lstrip("\n") + "\n"


def _cell_order(key):
    method, basis, n, f, metric = key
    return (f, n, METHODS.index(method), BASES.index(basis), METRICS.index(metric))


@lru_cache(maxsize=None)
def _grid(npts):
    return np.linspace(0.0, 1.0, npts)


def _rep_seed(master_seed, spec, rep):
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(zlib_key(spec.f), spec.n, rep))
    return int(ss.generate_state(1, np.uint32)[0])


def zlib_key(label):
    return zlib.crc32(label.encode("utf-8"))


def _select(method, d, Kn, basis, cfg, seed):
    if method == "mallows":
        return mallows_select(d, Kn, family=basis).predictor
    if method == "aggregation":
        return aggregate_predictor(d, Kn, family=basis).predictor
    if method == "cv5":
        return vfold_select(d, Kn, V=cfg.V, seed=seed, family=basis).predictor
    if method == "lepski":
        return lepski_select(d, Kn, x0=cfg.x0, beta=cfg.beta, alpha=cfg.alpha, B=cfg.B,
                             seed=seed, family=basis).predictor
    raise ValueError(method)


def run_replication(cfg: McConfig, spec: DgpSpec, rep: int) -> dict:
    """Errors of every (method, basis) on one simulated sample; ``None`` marks a failure."""
    seed = _rep_seed(cfg.master_seed, spec, rep)
    d = simulate_dataset(spec, seed)
    Kn = cfg.Kn(spec.n)
    xs = d.x[:, 0]
    out = {}
    for basis in cfg.bases:
        for method in cfg.methods:
            try:
                g = _select(method, d, Kn, basis, cfg, seed)
            except (SelectionError, RankError, np.linalg.LinAlgError) as exc:
                log.warning("rep %d %s/%s failed: %s", rep, method, basis, exc)
                out[(method, basis)] = None
                continue
            out[(method, basis)] = tuple(
                error_metrics(g, spec.truth, m, xs=xs, x0=cfg.x0) for m in METRICS)
    return out


def run_table1(cfg: McConfig) -> McReport:
    """Run every configured cell; results do not depend on ``cfg.jobs``."""
    tasks = [(spec, r) for spec in cfg.dgps for r in range(cfg.reps)]
    if cfg.jobs > 1:
        results = Parallel(n_jobs=cfg.jobs)(
            delayed(run_replication)(cfg, spec, r) for spec, r in tasks)
    else:
        results = [run_replication(cfg, spec, r) for spec, r in tasks]

    report = McReport(cfg)
    acc = {}
    for (spec, _), res in zip(tasks, results):
        for (method, basis), errs in res.items():
            key = (method, basis, spec.n, spec.f)
            if errs is None:
                report.failures[key] = report.failures.get(key, 0) + 1
                continue
            acc.setdefault(key, []).append(errs)
    for spec in cfg.dgps:
        for basis in cfg.bases:
            for method in cfg.methods:
                key = (method, basis, spec.n, spec.f)
                vals = np.array(acc.get(key, []), dtype=float).reshape(-1, len(METRICS))
                for j, metric in enumerate(METRICS):
                    col = vals[:, j]
                    m = len(col)
                    report.mean[key + (metric,)] = float(col.mean()) if m else math.nan
                    report.se[key + (metric,)] = (float(col.std(ddof=1) / math.sqrt(m))
                                                  if m > 1 else math.nan)
                    report.used[key + (metric,)] = m
    return report
