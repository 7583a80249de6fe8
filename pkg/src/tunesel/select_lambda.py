"""Penalty-level rules for the lasso and the l1-penalised logit.

Mean-regression rules target ``lam >= 2c max_j |n^-1 sum x_ij e_i|``; the
quantile and GLM rules use the corresponding constraint without the factor 2.
Unless given, ``alpha`` defaults to ``0.1 / log(max(p, n))`` and ``c`` to 1.1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from ._random import fold_partition, make_rng, multiplier_sums, upper_quantile
from .dataset import DataError, Dataset, within_transform
from .lasso import (DEFAULT_SOLVER, LassoFit, SolverConfig, lasso_fit_xy, logit_fit_xy,
                    logit_loss)

DEFAULT_C = 1.1


class PenaltyError(RuntimeError):
    pass


@dataclass
class LambdaResult:
    lam: float
    rule: str
    alpha: float
    c: float
    preliminary_lambda: Optional[float] = None
    residual_source: str = ""
    quantile_draws: Optional[int] = None
    per_grid: Optional[list] = None
    extra: dict = field(default_factory=dict)
    fit: Optional[LassoFit] = field(default=None, repr=False, compare=False)

    def to_report(self) -> dict:
        out = {"rule": self.rule, "lambda": self.lam, "alpha": self.alpha, "c": self.c}
        if self.preliminary_lambda is not None:
            out["preliminary_lambda"] = self.preliminary_lambda
        if self.residual_source:
            out["residual_source"] = self.residual_source
        if self.quantile_draws is not None:
            out["quantile_draws"] = self.quantile_draws
        for key, v in self.extra.items():
            if isinstance(v, np.ndarray):
                for idx, vj in np.ndenumerate(v):
                    out[f"{key}[{','.join(map(str, idx))}]"] = float(vj)
            else:
                out[key] = v
        for lam, crit in self.per_grid or ():
            out[f"criterion[{lam!r}]"] = crit
        if self.fit is not None:
            out["active_set"] = " ".join(str(j) for j in self.fit.active_set)
            out["kkt_gap"] = self.fit.kkt_gap
        return out


def default_alpha(n: int, p: int) -> float:
    return 0.1 / math.log(max(p, n))


def _alpha(alpha, n, p):
    alpha = default_alpha(n, p) if alpha is None else float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


def normal_level(alpha: float, p: int) -> float:
    """``Phi^{-1}(1 - alpha / (2p))``."""
    return float(norm.isf(alpha / (2.0 * p)))


def score_moment(X, scores, groups=None, n_groups=None) -> np.ndarray:
    """Per-column ``sqrt(n^-1 sum_g (sum_{i in g} x_ij s_i)^2)``.

    Without ``groups`` every observation is its own group.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    prod = X * np.asarray(scores, dtype=float)[:, None]
    if groups is not None:
        sums = np.zeros((n_groups, X.shape[1]))
        np.add.at(sums, groups, prod)
        prod = sums
    return np.sqrt(np.sum(prod ** 2, axis=0) / n)


def self_normalized_lambda(X, scores, c, alpha, groups=None, n_groups=None) -> float:
    """``2c/sqrt(n) * Phi^{-1}(1 - alpha/(2p)) * max_j score_moment_j``."""
    n, p = np.shape(X)
    m = float(np.max(score_moment(X, scores, groups, n_groups)))
    return 2.0 * c / math.sqrt(n) * normal_level(alpha, p) * m


def brt_lambda(d: Dataset, sigma: float, c: float = DEFAULT_C, alpha=None) -> LambdaResult:
    """Known-variance Gaussian rule."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    alpha = _alpha(alpha, d.n, d.p)
    scale = float(np.max(np.sqrt(np.mean(d.x ** 2, axis=0))))
    lam = 2.0 * c * sigma / math.sqrt(d.n) * normal_level(alpha, d.p) * scale
    if not lam > 0:
        raise PenaltyError("all covariate columns are zero")
    return LambdaResult(lam, "brt", alpha, c, extra={"sigma": sigma, "max_column_rms": scale})


def _three_step(rule, X, y, c, alpha, cfg, pilot_resid, groups=None, n_groups=None):
    lam0 = self_normalized_lambda(X, y, c, alpha, groups, n_groups)
    if not lam0 > 0:
        raise PenaltyError(f"{rule}: preliminary penalty is zero (degenerate moments)")
    if pilot_resid is None:
        pre = lasso_fit_xy(X, y, lam0, cfg)
        resid = y - X @ pre.beta
        source = f"lasso at preliminary lambda ({pre.active_set.size} active)"
    else:
        resid = np.asarray(pilot_resid, dtype=float)
        if resid.shape != y.shape:
            raise ValueError("pilot residuals must have one entry per observation")
        source = "supplied"
    return lam0, resid, source


def _bcch(rule, X, y, c, alpha, cfg, pilot_resid, groups=None, n_groups=None, extra=None):
    lam0, resid, source = _three_step(rule, X, y, c, alpha, cfg, pilot_resid, groups, n_groups)
    lam = self_normalized_lambda(X, resid, c, alpha, groups, n_groups)
    if not lam > 0:
        raise PenaltyError(f"{rule}: residual moments are all zero")
    fit = lasso_fit_xy(X, y, lam, cfg)
    info = {"max_moment_y": float(np.max(score_moment(X, y, groups, n_groups))),
            "max_moment_resid": float(np.max(score_moment(X, resid, groups, n_groups)))}
    info.update(extra or {})
    return LambdaResult(lam, rule, alpha, c, preliminary_lambda=lam0, residual_source=source,
                        extra=info, fit=fit)


def bcch_lambda(d: Dataset, c: float = DEFAULT_C, alpha=None, cfg: SolverConfig = DEFAULT_SOLVER,
                pilot_resid=None) -> LambdaResult:
    """Three-step self-normalised rule.

    1. penalty from the moments of ``x_ij * y_i``, lasso fit;
    2. residuals from that fit (or ``pilot_resid`` when supplied);
    3. penalty from the moments of ``x_ij * e_i``; the result carries the
       final lasso fit at that penalty.
    """
    alpha = _alpha(alpha, d.n, d.p)
    return _bcch("bcch", d.x, d.y, c, alpha, cfg, pilot_resid)


def cluster_bcch_lambda(d: Dataset, c: float = DEFAULT_C, alpha=None,
                        cfg: SolverConfig = DEFAULT_SOLVER, pilot_resid=None) -> LambdaResult:
    """Self-normalised rule with scores summed within clusters."""
    groups, G = d.groups()
    if G < 2:
        raise PenaltyError("cluster rule needs at least two clusters")
    alpha = _alpha(alpha, d.n, d.p)
    return _bcch("bcch_cluster", d.x, d.y, c, alpha, cfg, pilot_resid, groups, G,
                 extra={"clusters": G, "max_cluster_size": int(np.bincount(groups).max())})


def panel_bcch_lambda(d: Dataset, c: float = DEFAULT_C, alpha=None,
                      cfg: SolverConfig = DEFAULT_SOLVER, pilot_resid=None) -> LambdaResult:
    """Fixed-effects version: within-transform, then sum scores over time per unit.

    Normalisation uses ``NT`` observations; the returned fit is the lasso on
    the demeaned data.
    """
    dt = within_transform(d)
    if np.all(dt.x == 0):
        raise PenaltyError("within transform removed all covariate variation")
    groups, N = dt.groups()
    alpha = _alpha(alpha, dt.n, dt.p)
    res = _bcch("bcch_panel", dt.x, dt.y, c, alpha, cfg, pilot_resid, groups, N,
                extra={"units": N, "periods": dt.n // N})
    return res


def bootstrap_lambda(d: Dataset, c: float = DEFAULT_C, alpha=None, B: int = 1000, seed=0,
                     cfg: SolverConfig = DEFAULT_SOLVER, pilot_resid=None) -> LambdaResult:
    """Multiplier-bootstrap rule: ``2c/sqrt(n) * q``, with ``q`` the ``1-alpha``
    quantile of ``max_j |n^-1/2 sum w_i x_ij e_i|`` over Gaussian ``w``.

    Residuals come from the same preliminary fit as the self-normalised rule.
    """
    if B < 500:
        raise ValueError(f"need at least 500 bootstrap draws, got B={B}")
    alpha = _alpha(alpha, d.n, d.p)
    X, y = d.x, d.y
    lam0, resid, source = _three_step("bootstrap", X, y, c, alpha, cfg, pilot_resid)
    q = multiplier_quantile(X * resid[:, None], B, alpha, make_rng(seed, "bootstrap"))
    lam = 2.0 * c / math.sqrt(d.n) * q
    if not lam > 0:
        raise PenaltyError("bootstrap: residual scores are identically zero")
    fit = lasso_fit_xy(X, y, lam, cfg)
    return LambdaResult(lam, "bootstrap", alpha, c, preliminary_lambda=lam0,
                        residual_source=source, quantile_draws=B,
                        extra={"quantile": q, "seed": seed}, fit=fit)


def multiplier_quantile(scores, B, alpha, rng) -> float:
    """``1-alpha`` quantile of ``max_j |n^-1/2 sum_i w_i scores_ij|``."""
    scores = np.asarray(scores, dtype=float)
    n = scores.shape[0]
    draws = np.abs(multiplier_sums(scores, B, rng)).max(axis=1) / math.sqrt(n)
    return upper_quantile(draws, alpha)


def estimate_sigma2(d: Dataset, cfg: SolverConfig = DEFAULT_SOLVER) -> float:
    """Mean squared residual of the self-normalised lasso fit."""
    res = bcch_lambda(d, cfg=cfg)
    r = d.y - d.x @ res.fit.beta
    return float(np.mean(r ** 2))


def sure_lambda(d: Dataset, sigma2: float, grid, cfg: SolverConfig = DEFAULT_SOLVER) -> LambdaResult:
    """Minimise ``mean(resid^2) + 2 s2 ||b||_0 / n - s2`` over the grid."""
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    grid = [float(v) for v in grid]
    if not grid:
        raise ValueError("lambda grid is empty")
    n = d.n
    rows, fits = [], {}
    for lam in grid:
        try:
            fit = lasso_fit_xy(d.x, d.y, lam, cfg)
        except RuntimeError:
            continue
        r = d.y - d.x @ fit.beta
        crit = float(np.mean(r ** 2) + 2.0 * sigma2 * fit.active_set.size / n - sigma2)
        rows.append((lam, crit))
        fits[lam] = fit
    if not rows:
        raise PenaltyError("sure: every lasso fit on the grid failed")
    lam = _grid_argmin(rows)
    return LambdaResult(lam, "sure", float("nan"), float("nan"), per_grid=rows,
                        extra={"sigma2": sigma2}, fit=fits[lam])


def _grid_argmin(rows):
    # among equal criteria prefer the largest penalty
    best = min(c for _, c in rows)
    return max(lam for lam, c in rows if c == best)


def default_grid(n: int, size: int = 100) -> np.ndarray:
    """Geometric progression from ``1/n`` to ``n``."""
    return np.geomspace(1.0 / n, float(n), size)


def _cv_path(X, y, folds, grid, fitter, loss, cfg):
    """Out-of-fold loss per grid point and the fold coefficient vectors."""
    n, p = X.shape
    crit = np.zeros(len(grid))
    betas = np.zeros((len(folds), len(grid), p))
    for v, idx in enumerate(folds):
        train = np.setdiff1d(np.arange(n), idx)
        for g, lam in enumerate(grid):
            b = fitter(X[train], y[train], lam, cfg).beta
            betas[v, g] = b
            crit[g] += loss(X[idx], y[idx], b)
    return crit, betas


def _sq_loss(X, y, b):
    r = y - X @ b
    return float(r @ r)


def cv_lambda(d: Dataset, V: int = 5, grid=None, seed=0,
              cfg: SolverConfig = DEFAULT_SOLVER) -> LambdaResult:
    """V-fold cross-validated penalty.

    ``extra['beta_avcv']`` is the average of the fold estimates at the chosen
    penalty; ``fit`` is the full-sample lasso at that penalty.
    """
    grid = default_grid(d.n) if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("lambda grid is empty")
    folds = fold_partition(d.n, V, make_rng(seed, "cv"))
    crit, betas = _cv_path(d.x, d.y, folds, grid, lasso_fit_xy, _sq_loss, cfg)
    rows = [(float(l), float(c)) for l, c in zip(grid, crit)]
    lam = _grid_argmin(rows)
    g = int(np.flatnonzero(grid == lam)[0])
    fit = lasso_fit_xy(d.x, d.y, lam, cfg)
    return LambdaResult(lam, "cv", float("nan"), float("nan"), per_grid=rows,
                        extra={"V": V, "beta_avcv": betas[:, g].mean(axis=0),
                               "beta_folds": betas[:, g]},
                        fit=fit)


def _logit_sum_loss(X, y, b):
    return logit_loss(X, y, b) * X.shape[0]


def glm_bootstrap_after_cv_lambda(d: Dataset, V: int = 5, grid=None, c: float = DEFAULT_C,
                                  alpha=None, B: int = 1000, seed=0,
                                  cfg: SolverConfig = DEFAULT_SOLVER, scores=None) -> LambdaResult:
    """Penalised-logit rule: cross-validate, score each observation with the
    fold estimate that did not use it, then multiplier-bootstrap
    ``max_j |n^-1/2 sum w_i s_i x_ij|``; ``lam = c/sqrt(n) * q``.

    ``scores`` bypasses the cross-validation step.
    """
    if B < 500:
        raise ValueError(f"need at least 500 bootstrap draws, got B={B}")
    y = np.asarray(d.y)
    if not np.all((y == 0) | (y == 1)):
        raise DataError("penalised logit needs a 0/1 response")
    alpha = _alpha(alpha, d.n, d.p)
    n = d.n
    extra = {"seed": seed}
    if scores is None:
        grid = default_grid(n) if grid is None else np.asarray(grid, dtype=float)
        if grid.size == 0:
            raise ValueError("lambda grid is empty")
        folds = fold_partition(n, V, make_rng(seed, "cv"))
        crit, betas = _cv_path(d.x, y, folds, grid, logit_fit_xy, _logit_sum_loss, cfg)
        rows = [(float(l), float(cv)) for l, cv in zip(grid, crit)]
        lam_cv = _grid_argmin(rows)
        g = int(np.flatnonzero(grid == lam_cv)[0])
        scores = np.empty(n)
        for v, idx in enumerate(folds):
            scores[idx] = expit(d.x[idx] @ betas[v, g]) - y[idx]
        extra.update({"cv_lambda": lam_cv, "V": V})
        source = "out-of-fold logit fits at the cross-validated penalty"
    else:
        scores = np.asarray(scores, dtype=float)
        source = "supplied"
        lam_cv = None
    q = multiplier_quantile(d.x * scores[:, None], B, alpha, make_rng(seed, "bootstrap"))
    lam = c / math.sqrt(n) * q
    if not lam > 0:
        raise PenaltyError("glm bootstrap: scores are identically zero")
    extra["quantile"] = q
    fit = logit_fit_xy(d.x, y, lam, cfg)
    return LambdaResult(lam, "glm_bootstrap_cv", alpha, c, preliminary_lambda=lam_cv,
                        residual_source=source, quantile_draws=B, extra=extra, fit=fit)


def quantile_pivotal_lambda(d: Dataset, u: float, c: float = DEFAULT_C, alpha=None,
                            S: int = 10_000, seed=0) -> LambdaResult:
    """Simulated rule for l1-penalised quantile regression at level ``u``.

    Draws ``U_i ~ U(0,1)`` given the design and takes the ``1-alpha`` quantile
    ``q`` of ``sqrt(n) max_j |n^-1 sum x_ij (u - 1{U_i <= u}) / sqrt(u(1-u))|``;
    ``lam = c q / sqrt(n)``.  The response never enters.
    """
    if not 0.0 < u < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {u}")
    if S < 1000:
        raise ValueError(f"need at least 1000 simulation draws, got S={S}")
    X = d.x
    if np.all(X == 0):
        raise PenaltyError("all covariate columns are zero")
    alpha = _alpha(alpha, d.n, d.p)
    draws = pivotal_draws(X, u, S, make_rng(seed, "pivotal"))
    q = upper_quantile(draws, alpha)
    lam = c * q / math.sqrt(d.n)
    return LambdaResult(lam, "quantile_pivotal", alpha, c, quantile_draws=S,
                        extra={"u": u, "quantile": q, "seed": seed})


def pivotal_draws(X, u, S, rng, chunk: int = 20_000) -> np.ndarray:
    n = X.shape[0]
    scale = math.sqrt(u * (1.0 - u))
    out = np.empty(S)
    for start in range(0, S, chunk):
        stop = min(S, start + chunk)
        U = rng.uniform(size=(stop - start, n))
        s = (u - (U <= u)) / scale
        out[start:stop] = np.abs(s @ X).max(axis=1) / math.sqrt(n)
    return out
