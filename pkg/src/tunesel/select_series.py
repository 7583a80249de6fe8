"""Choosing the number of series terms.

All selectors take the candidate set ``Kn`` and return a :class:`SelectorResult`
whose ``criterion`` maps every candidate to the value being minimised.
Ties are broken towards the smallest ``k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from ._random import fold_partition, make_rng, multiplier_sums, upper_quantile
from .basis import MONOMIAL, BasisSpec, design_matrix
from .dataset import Dataset
from .series import SeriesFit, fit_design, pilot_k, scalar_covariate, trace_from_leverage

LEVERAGE_TOL = 1e-10


class SelectionError(RuntimeError):
    pass


@dataclass
class SelectorResult:
    method: str
    chosen_k: Optional[int]
    criterion: dict
    weights: Optional[dict] = None
    meta: dict = field(default_factory=dict)
    predictor: Optional[Callable] = field(default=None, repr=False, compare=False)
    predictors: dict = field(default_factory=dict, repr=False, compare=False)

    def to_report(self) -> dict:
        """Flat key/value view for writing to a report file."""
        out = {"method": self.method}
        if self.chosen_k is not None:
            out["chosen_k"] = self.chosen_k
        for k, v in self.criterion.items():
            out[f"criterion[{_label(k)}]"] = v
        for k, v in (self.weights or {}).items():
            out[f"weight[{_label(k)}]"] = v
        for key, v in self.meta.items():
            if isinstance(v, dict):
                for kk, vv in v.items():
                    out[f"{key}[{_label(kk)}]"] = vv
            else:
                out[key] = v
        return out


def _label(k):
    if isinstance(k, tuple):
        return "-".join(str(i) for i in k)
    return str(k)


class AggregatePredictor:
    """Weighted combination of series fits."""

    def __init__(self, fits: Sequence[SeriesFit], weights):
        self.fits = list(fits)
        self.weights = np.asarray(weights, dtype=float)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return sum(w * f.predict(x) for w, f in zip(self.weights, self.fits))


def _candidates(Kn) -> list:
    ks = sorted({int(k) for k in Kn})
    if not ks:
        raise ValueError("candidate set Kn is empty")
    if ks[0] < 1:
        raise ValueError("candidate term counts must be positive")
    return ks


def _argmin(crit: dict):
    keys = list(crit)
    vals = np.array([crit[k] for k in keys])
    return keys[int(np.argmin(vals))]


def _fit_all(x, y, family, ks):
    return {k: fit_design(BasisSpec(family, k), design_matrix(BasisSpec(family, k), x), y)
            for k in ks}


def _pilot(d, family, kbar, pilot_resid):
    if pilot_resid is not None:
        e = np.asarray(pilot_resid, dtype=float)
        if e.shape != (d.n,):
            raise ValueError(f"pilot residuals must have length {d.n}")
        return e, None
    kbar = pilot_k(d.n) if kbar is None else int(kbar)
    spec = BasisSpec(family, kbar)
    fit = fit_design(spec, design_matrix(spec, scalar_covariate(d)), d.y)
    return fit.residuals, kbar


def mallows_select(d: Dataset, Kn, kbar=None, family: str = MONOMIAL,
                   pilot_resid=None) -> SelectorResult:
    """Feasible Mallows criterion ``mean(resid_k^2) + 2 A_k / n``.

    ``A_k`` is the heteroskedasticity-robust trace built from the pilot
    residuals (the fit with ``kbar`` terms unless ``pilot_resid`` is given).
    """
    ks = _candidates(Kn)
    e, kbar = _pilot(d, family, kbar, pilot_resid)
    fits = _fit_all(scalar_covariate(d), d.y, family, ks)
    n = d.n
    trace = {k: trace_from_leverage(f.leverage, e) for k, f in fits.items()}
    crit = {k: float(np.mean(f.residuals ** 2) + 2.0 * trace[k] / n) for k, f in fits.items()}
    k_hat = _argmin(crit)
    return SelectorResult("mallows", k_hat, crit, meta={"kbar": kbar, "trace": trace},
                          predictor=fits[k_hat])


def stein_select(d: Dataset, Kn, kbar=None, family: str = MONOMIAL,
                 pilot_resid=None) -> SelectorResult:
    """Stein's unbiased risk estimate; for OLS series fits the divergence
    term equals the projection trace, so this is the Mallows criterion."""
    res = mallows_select(d, Kn, kbar, family, pilot_resid)
    res.method = "stein"
    return res


def penalty_weight(sigma2: float, size: int, n_models: int) -> float:
    """Model-size penalty ``2 s2 (1 + 2 sqrt(log H / m) + 2 log H / m)``."""
    L = math.log(n_models) / size
    return 2.0 * sigma2 * (1.0 + 2.0 * math.sqrt(L) + 2.0 * L)


def ordered_models(p: int) -> list:
    """Nested models ``(0,), (0, 1), ..., (0, ..., p-1)``."""
    return [tuple(range(m)) for m in range(1, p + 1)]


def penalized_model_select(d: Dataset, models, sigma2: float, Hm=None) -> SelectorResult:
    """Penalised least squares over explicit models (tuples of columns of ``d.x``).

    ``Hm`` maps a model size to the number of models of that size; by default
    it is counted from ``models``.
    """
    models = [tuple(int(j) for j in m) for m in models]
    if not models:
        raise ValueError("model list is empty")
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    if any(len(m) == 0 for m in models):
        raise ValueError("models must contain at least one column")
    if Hm is None:
        Hm = {}
        for m in models:
            Hm[len(m)] = Hm.get(len(m), 0) + 1
    n = d.n
    crit, pen = {}, {}
    for m in models:
        X = d.x[:, list(m)]
        q, r = np.linalg.qr(X)
        sv = np.linalg.svd(r, compute_uv=False)
        if sv[-1] <= 1e-10 * sv[0]:
            raise SelectionError(f"model {m} has a rank-deficient design")
        resid = d.y - q @ (q.T @ d.y)
        pen[m] = penalty_weight(sigma2, len(m), Hm[len(m)])
        crit[m] = float(np.mean(resid ** 2) + pen[m] * len(m) / n)
    m_hat = _argmin(crit)
    return SelectorResult("penalized", len(m_hat), crit,
                          meta={"model": _label(m_hat), "penalty": pen})


def validation_select(d: Dataset, Kn, split_seed=0, train_frac: float = 2 / 3,
                      family: str = MONOMIAL, train_idx=None) -> SelectorResult:
    """Hold-out selection: fit on a training part, score on the rest.

    The criterion is the mean squared validation error.  The returned
    predictor is the training fit at the chosen ``k``.
    """
    ks = _candidates(Kn)
    n = d.n
    if train_idx is None:
        perm = make_rng(split_seed, "validation").permutation(n)
        ntr = int(round(train_frac * n))
        train_idx = np.sort(perm[:ntr])
    train_idx = np.asarray(train_idx)
    mask = np.zeros(n, dtype=bool)
    mask[train_idx] = True
    valid_idx = np.flatnonzero(~mask)
    need = max(ks) + 1
    if train_idx.size < need or valid_idx.size < need:
        raise SelectionError(f"fold too small: {train_idx.size} training and {valid_idx.size} "
                             f"validation rows, need {need} each")
    x = scalar_covariate(d)
    fits = _fit_all(x[train_idx], d.y[train_idx], family, ks)
    crit = {k: float(np.mean((d.y[valid_idx] - f.predict(x[valid_idx])) ** 2))
            for k, f in fits.items()}
    k_hat = _argmin(crit)
    return SelectorResult("validation", k_hat, crit,
                          meta={"n_train": int(train_idx.size), "n_valid": int(valid_idx.size)},
                          predictor=fits[k_hat])


def vfold_select(d: Dataset, Kn, V: int = 5, seed=0, family: str = MONOMIAL,
                 folds=None) -> SelectorResult:
    """V-fold cross-validation.

    The criterion is the out-of-fold squared error averaged over all ``n``
    observations.  ``predictors`` holds both the fold-average (``avcv``) and
    the full-sample refit (``fvcv``); ``predictor`` is the refit.
    """
    ks = _candidates(Kn)
    n = d.n
    if folds is None:
        folds = fold_partition(n, V, make_rng(seed, "vfold"))
    V = len(folds)
    if V < 2:
        raise ValueError("need at least 2 folds")
    x = scalar_covariate(d)
    sse = {k: 0.0 for k in ks}
    fold_fits = []
    for idx in folds:
        train = np.setdiff1d(np.arange(n), idx)
        if train.size < max(ks):
            raise SelectionError(f"fold complement of size {train.size} cannot fit k={max(ks)}")
        fits = _fit_all(x[train], d.y[train], family, ks)
        fold_fits.append(fits)
        for k, f in fits.items():
            sse[k] += float(np.sum((d.y[idx] - f.predict(x[idx])) ** 2))
    crit = {k: s / n for k, s in sse.items()}
    k_hat = _argmin(crit)
    spec = BasisSpec(family, k_hat)
    full = fit_design(spec, design_matrix(spec, x), d.y)
    avcv = AggregatePredictor([ff[k_hat] for ff in fold_fits], np.full(V, 1.0 / V))
    return SelectorResult("vfold", k_hat, crit,
                          meta={"V": V, "fold_sizes": ",".join(str(len(f)) for f in folds)},
                          predictor=full, predictors={"avcv": avcv, "fvcv": full})


def loo_select(d: Dataset, Kn, family: str = MONOMIAL) -> SelectorResult:
    """Leave-one-out CV through the leverage identity
    ``mean((y_i - f_k(x_i))^2 / (1 - h_ki)^2)``."""
    ks = _candidates(Kn)
    fits = _fit_all(scalar_covariate(d), d.y, family, ks)
    crit = {}
    for k, f in fits.items():
        if np.max(f.leverage) >= 1.0 - LEVERAGE_TOL:
            i = int(np.argmax(f.leverage))
            raise SelectionError(f"k={k} interpolates observation {i} (leverage 1)")
        crit[k] = float(np.mean((f.residuals / (1.0 - f.leverage)) ** 2))
    k_hat = _argmin(crit)
    return SelectorResult("loo", k_hat, crit, predictor=fits[k_hat])


def lepski_weights(fit: SeriesFit, x0: float) -> np.ndarray:
    """``p(x0)' Q^{-1} p(X_i)`` for every sample point, with ``Q = P'P / n``."""
    n = fit.q.shape[0]
    z = solve_triangular(fit.r, design_matrix(fit.spec, [x0])[0], trans="T")
    return n * (fit.q @ z)


def lepski_select(d: Dataset, Kn, x0: float = 0.5, beta: float = 1.0, alpha: float = 0.05,
                  B: int = 1000, kbar=None, seed=0, family: str = MONOMIAL,
                  pilot_resid=None) -> SelectorResult:
    """Pointwise Lepski rule with multiplier-bootstrap critical values.

    ``H_k`` is accepted when ``max_{k'>k} T_kk' / sqrt(p_kk') <= beta + c_k``;
    the smallest accepted ``k`` is chosen and the largest candidate is always
    accepted.  The criterion stores the excess ``max(0, stat - beta - c_k)``,
    which is zero exactly on accepted candidates.
    """
    ks = _candidates(Kn)
    if not 0.0 <= x0 <= 1.0:
        raise ValueError(f"x0={x0} outside [0, 1]")
    if B < 500:
        raise ValueError(f"need at least 500 bootstrap draws, got B={B}")
    n = d.n
    e, kbar = _pilot(d, family, kbar, pilot_resid)
    fits = _fit_all(scalar_covariate(d), d.y, family, ks)
    a = {k: lepski_weights(f, x0) for k, f in fits.items()}
    f0 = {k: float(f.predict([x0])[0]) for k, f in fits.items()}

    pairs = [(k, kp) for i, k in enumerate(ks) for kp in ks[i + 1:]]
    stat = np.empty(len(pairs))
    S = np.empty((n, len(pairs)))
    pvar = {}
    for j, (k, kp) in enumerate(pairs):
        diff = a[kp] - a[k]
        p_hat = float(np.sum(e ** 2 * diff ** 2)) / n ** 2
        if not p_hat > 0:
            raise SelectionError(f"degenerate variance estimate for pair (k={k}, k'={kp})")
        pvar[(k, kp)] = p_hat
        stat[j] = abs(f0[kp] - f0[k]) / math.sqrt(p_hat)
        S[:, j] = diff * e / (n * math.sqrt(p_hat))

    boot = np.abs(multiplier_sums(S, B, make_rng(seed, "lepski"))) if pairs else None
    crit, cval, tmax = {}, {}, {}
    for k in ks:
        cols = [j for j, (kk, _) in enumerate(pairs) if kk == k]
        if not cols:
            crit[k], cval[k], tmax[k] = 0.0, float("nan"), 0.0
            continue
        cval[k] = upper_quantile(boot[:, cols].max(axis=1), alpha)
        tmax[k] = float(stat[cols].max())
        crit[k] = max(0.0, tmax[k] - beta - cval[k])
    k_hat = next(k for k in ks if crit[k] == 0.0)
    meta = {"x0": x0, "beta": beta, "alpha": alpha, "B": B, "kbar": kbar,
            "critical_value": cval, "max_stat": tmax,
            "p_hat": {f"{k}-{kp}": v for (k, kp), v in pvar.items()}}
    return SelectorResult("lepski", k_hat, crit, meta=meta, predictor=fits[k_hat])


def exponential_weights(risk, n: int, sigma2: float) -> np.ndarray:
    """Normalised ``exp(-n r_k / (4 sigma2))``, computed with a max shift."""
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    z = -n * np.asarray(risk, dtype=float) / (4.0 * sigma2)
    w = np.exp(z - z.max())
    return w / w.sum()


def aggregate_predictor(d: Dataset, Kn, kbar=None, family: str = MONOMIAL,
                        pilot_resid=None) -> SelectorResult:
    """Exponentially weighted average of the series fits over ``Kn``.

    Risk estimates are ``mean(resid_k^2) + 2 A_k / n - s2`` with ``s2`` the
    mean squared pilot residual; they are recorded as the criterion.
    """
    ks = _candidates(Kn)
    e, kbar = _pilot(d, family, kbar, pilot_resid)
    n = d.n
    s2 = float(np.mean(e ** 2))
    if not s2 > 0:
        raise SelectionError("pilot residual variance is zero")
    fits = _fit_all(scalar_covariate(d), d.y, family, ks)
    risk = {k: float(np.mean(f.residuals ** 2) + 2.0 * trace_from_leverage(f.leverage, e) / n - s2)
            for k, f in fits.items()}
    w = exponential_weights([risk[k] for k in ks], n, s2)
    return SelectorResult("aggregation", None, risk, weights=dict(zip(ks, w.tolist())),
                          meta={"kbar": kbar, "sigma2": s2},
                          predictor=AggregatePredictor([fits[k] for k in ks], w))
