"""Least-squares series regression, leverages and error metrics."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.linalg import solve_triangular
from scipy.integrate import trapezoid

from .basis import BasisSpec, design_matrix
from .dataset import Dataset

RANK_TOL = 1e-10
L2_GRID_POINTS = 10_001
UNIFORM_GRID_POINTS = 1_001
METRICS = ("l2", "prediction", "uniform", "pointwise")


class RankError(np.linalg.LinAlgError):
    def __init__(self, k, ratio):
        super().__init__(f"design with k={k} terms is numerically rank deficient "
                         f"(singular value ratio {ratio:.3g})")
        self.k = k


def pilot_k(n: int) -> int:
    """Default pilot term count and largest candidate, ceil(n^(1/3))."""
    k = int(round(n ** (1.0 / 3.0)))
    return k if k ** 3 >= n else k + 1


def scalar_covariate(d: Dataset) -> np.ndarray:
    if d.p != 1:
        raise ValueError(f"series regression needs a single covariate, dataset has p={d.p}")
    return d.x[:, 0]


@dataclass(frozen=True)
class SeriesFit:
    """OLS fit of ``y`` on ``k`` basis functions.

    ``q`` and ``r`` hold the thin QR factorisation of the design; the
    projection diagonal is ``sum(q**2, axis=1)``.
    """

    spec: BasisSpec
    beta: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray
    leverage: np.ndarray
    q: np.ndarray
    r: np.ndarray

    @property
    def k(self) -> int:
        return self.spec.k

    def predict(self, x) -> np.ndarray:
        return design_matrix(self.spec, x) @ self.beta

    __call__ = predict


def fit_design(spec: BasisSpec, P: np.ndarray, y: np.ndarray) -> SeriesFit:
    n, k = P.shape
    if n < k:
        raise RankError(k, 0.0)
    q, r = np.linalg.qr(P)
    sv = np.linalg.svd(r, compute_uv=False)
    ratio = sv[-1] / sv[0] if sv[0] > 0 else 0.0
    if ratio <= RANK_TOL:
        raise RankError(k, ratio)
    beta = solve_triangular(r, q.T @ y)
    fitted = q @ (q.T @ y)
    return SeriesFit(spec, beta, fitted, y - fitted, np.einsum("ij,ij->i", q, q), q, r)


def fit_series(d: Dataset, spec: BasisSpec) -> SeriesFit:
    """Least-squares series fit via a QR factorisation of the design."""
    x = scalar_covariate(d)
    return fit_design(spec, design_matrix(spec, x), d.y)


def hetero_trace(d: Dataset, spec: BasisSpec, resid) -> float:
    """``tr{(sum p p')^-1 sum e_i^2 p p'}``, i.e. ``sum_i e_i^2 h_i``."""
    fit = fit_series(d, spec)
    return trace_from_leverage(fit.leverage, resid)


def trace_from_leverage(leverage, resid) -> float:
    resid = np.asarray(resid, dtype=float)
    return float(np.dot(resid * resid, leverage))


def _grid(npts):
    return np.linspace(0.0, 1.0, npts)


@lru_cache(maxsize=4)
def _cached_grid(npts):
    g = _grid(npts)
    g.setflags(write=False)
    return g


def error_metrics(g: Callable, f: Callable, metric: str, *, xs=None, x0: float = 0.5,
                  grid=None) -> float:
    """Distance between an estimate ``g`` and the truth ``f``.

    Parameters
    ----------
    g, f : callables mapping an array of points in [0, 1] to values.
    metric : one of ``l2``, ``prediction``, ``uniform``, ``pointwise``.
    xs : sample design points, required for ``prediction``.
    x0 : evaluation point for ``pointwise``.
    grid : points for ``uniform``; defaults to 1,001 equispaced points.

    ``l2`` integrates the squared error against U[0, 1] with the trapezoid
    rule on 10,001 points.
    """
    if metric == "l2":
        t = _cached_grid(L2_GRID_POINTS)
        return float(np.sqrt(trapezoid((g(t) - f(t)) ** 2, t)))
    if metric == "prediction":
        if xs is None:
            raise ValueError("prediction metric needs the sample points xs")
        xs = np.asarray(xs, dtype=float)
        if xs.size == 0:
            raise ValueError("empty sample")
        return float(np.sqrt(np.mean((g(xs) - f(xs)) ** 2)))
    if metric == "uniform":
        t = _cached_grid(UNIFORM_GRID_POINTS) if grid is None else np.asarray(grid, dtype=float)
        if t.size == 0:
            raise ValueError("empty evaluation grid")
        return float(np.max(np.abs(g(t) - f(t))))
    if metric == "pointwise":
        x = np.array([x0], dtype=float)
        return float(abs(g(x)[0] - f(x)[0]))
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
