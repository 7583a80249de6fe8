"""l1-penalised least squares and logistic regression.

Both objectives use the ``1/n``-scaled loss:

    lasso:  (1/n) sum (y_i - x_i'b)^2 + lam * ||b||_1
    logit:  (1/n) sum [log(1 + exp(x_i'b)) - y_i x_i'b] + lam * ||b||_1

Convergence is declared on the KKT violation, not on coefficient change.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .dataset import Dataset


class ConvergenceError(RuntimeError):
    def __init__(self, msg, kkt_gap):
        super().__init__(f"{msg} (KKT gap {kkt_gap:.3g})")
        self.kkt_gap = kkt_gap


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-8
    max_iter: int = 10_000

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


DEFAULT_SOLVER = SolverConfig()


@dataclass
class LassoFit:
    beta: np.ndarray
    lam: float
    iterations: int
    kkt_gap: float
    objective: float
    history: tuple = field(default=(), repr=False)

    @property
    def active_set(self) -> np.ndarray:
        return np.flatnonzero(self.beta)


def soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def kkt_violation(grad, beta, lam) -> float:
    """Max violation of ``0 in grad + lam * d||b||_1`` coordinatewise."""
    grad = np.asarray(grad, dtype=float)
    nz = beta != 0
    v = np.where(nz, np.abs(grad + lam * np.sign(beta)), np.maximum(np.abs(grad) - lam, 0.0))
    return float(v.max()) if v.size else 0.0


def lasso_objective(X, y, beta, lam) -> float:
    r = y - X @ beta
    return float(np.mean(r * r) + lam * np.sum(np.abs(beta)))


def lasso_gradient(X, y, beta) -> np.ndarray:
    """Gradient of the squared-loss part, ``-(2/n) X'(y - Xb)``."""
    return -2.0 * (X.T @ (y - X @ beta)) / X.shape[0]


def lasso_zero_threshold(X, y) -> float:
    """Smallest penalty at which the all-zero vector solves the lasso."""
    return float(2.0 * np.max(np.abs(X.T @ y)) / X.shape[0])


def _check_lambda(lam):
    if not (np.isfinite(lam) and lam > 0):
        raise ValueError(f"penalty must be a positive number, got {lam!r}")


def lasso_fit(d: Dataset, lam: float, cfg: SolverConfig = DEFAULT_SOLVER) -> LassoFit:
    return lasso_fit_xy(d.x, d.y, lam, cfg)


def lasso_fit_xy(X, y, lam, cfg: SolverConfig = DEFAULT_SOLVER) -> LassoFit:
    """Cyclic coordinate descent with covariance updates, started at zero.

    Full sweeps alternate with sweeps restricted to the current active set;
    the loop stops once a full sweep leaves the KKT violation below
    ``cfg.tol``.  ``history`` records the objective after every full sweep.
    """
    _check_lambda(lam)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    G = X.T @ X / n
    c = X.T @ y / n
    yy = float(y @ y) / n
    diag = np.diag(G).copy()
    usable = diag > 0
    beta = np.zeros(p)
    g = np.zeros(p)  # G @ beta
    G_cols = [G[:, j].copy() for j in range(p)]

    def sweep(idx):
        for j in idx:
            bj = beta[j]
            z = 2.0 * (c[j] - g[j] + diag[j] * bj)
            new = np.sign(z) * max(abs(z) - lam, 0.0) / (2.0 * diag[j])
            if new != bj:
                g[:] += G_cols[j] * (new - bj)
                beta[j] = new

    def objective():
        return float(beta @ g - 2.0 * c @ beta + yy + lam * np.abs(beta).sum())

    full = np.flatnonzero(usable)
    history = [objective()]
    gap = np.inf
    it = 0
    while it < cfg.max_iter:
        sweep(full)
        it += 1
        g[:] = G @ beta
        history.append(objective())
        gap = kkt_violation(2.0 * (g - c), beta, lam)
        if gap <= cfg.tol:
            break
        active = np.flatnonzero(beta)
        # inner passes over the active set only
        for _ in range(cfg.max_iter):
            if it >= cfg.max_iter or active.size == 0:
                break
            before = beta[active].copy()
            sweep(active)
            it += 1
            if np.max(np.abs(beta[active] - before)) <= 1e-3 * cfg.tol:
                break
        g[:] = G @ beta
    gap = kkt_violation(lasso_gradient(X, y, beta), beta, lam)
    if gap > cfg.tol:
        raise ConvergenceError(f"lasso did not converge in {cfg.max_iter} iterations", gap)
    return LassoFit(beta, float(lam), it, gap, lasso_objective(X, y, beta, lam), tuple(history))


def logit_loss(X, y, beta) -> float:
    t = X @ beta
    return float(np.mean(np.logaddexp(0.0, t) - y * t))


def logit_objective(X, y, beta, lam) -> float:
    return logit_loss(X, y, beta) + lam * float(np.sum(np.abs(beta)))


def logit_gradient(X, y, beta) -> np.ndarray:
    return X.T @ (expit(X @ beta) - y) / X.shape[0]


def logit_zero_threshold(X, y) -> float:
    """Smallest penalty at which zero solves the penalised logit."""
    return float(np.max(np.abs(X.T @ (0.5 - np.asarray(y)))) / X.shape[0])


def _check_binary(y):
    y = np.asarray(y, dtype=float)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("logistic regression needs a 0/1 response")
    return y


def logit_penalized_fit(d: Dataset, lam: float, cfg: SolverConfig = DEFAULT_SOLVER) -> LassoFit:
    return logit_fit_xy(d.x, d.y, lam, cfg)


def logit_fit_xy(X, y, lam, cfg: SolverConfig = DEFAULT_SOLVER) -> LassoFit:
    """Accelerated proximal gradient (FISTA) with adaptive restart.

    The step is ``1/L`` with ``L = ||X||_2^2 / (4n)``, the Lipschitz constant
    of the logistic loss gradient.
    """
    _check_lambda(lam)
    X = np.asarray(X, dtype=float)
    y = _check_binary(y)
    n, p = X.shape
    L = np.linalg.norm(X, 2) ** 2 / (4.0 * n)
    beta = np.zeros(p)
    if L == 0:
        return LassoFit(beta, float(lam), 0, 0.0, logit_objective(X, y, beta, lam))
    step = 1.0 / L
    z = beta.copy()
    t = 1.0
    history = [logit_objective(X, y, beta, lam)]
    gap = kkt_violation(logit_gradient(X, y, beta), beta, lam)
    it = 0
    while gap > cfg.tol and it < cfg.max_iter:
        grad_z = logit_gradient(X, y, z)
        new = soft_threshold(z - step * grad_z, step * lam)
        obj = logit_objective(X, y, new, lam)
        if obj > history[-1]:
            # restart momentum; a plain proximal step from beta never increases the objective
            t = 1.0
            z = beta.copy()
            new = soft_threshold(beta - step * logit_gradient(X, y, beta), step * lam)
            obj = logit_objective(X, y, new, lam)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = new + ((t - 1.0) / t_next) * (new - beta)
        beta, t = new, t_next
        history.append(obj)
        it += 1
        gap = kkt_violation(logit_gradient(X, y, beta), beta, lam)
    if gap > cfg.tol:
        raise ConvergenceError(f"penalised logit did not converge in {cfg.max_iter} iterations", gap)
    return LassoFit(beta, float(lam), it, gap, logit_objective(X, y, beta, lam), tuple(history))
