"""Series basis functions on [0, 1]: monomials and quadratic regression splines."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MONOMIAL = "monomial"
SPLINE = "spline"
FAMILIES = (MONOMIAL, SPLINE)

_EDGE_TOL = 1e-12


@dataclass(frozen=True)
class BasisSpec:
    """A basis family together with the number of terms ``k``.

    Quadratic splines use ``1, x, x^2`` followed by truncated squares
    ``((x - (j-3)/(k-2)) v 0)^2`` for ``j = 4..k``; the knot grid therefore
    moves with ``k``.
    """

    family: str
    k: int

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown basis family {self.family!r}; expected one of {FAMILIES}")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")
        object.__setattr__(self, "k", int(self.k))

    def knots(self) -> np.ndarray:
        if self.family != SPLINE or self.k < 4:
            return np.empty(0)
        return (np.arange(4, self.k + 1) - 3) / (self.k - 2)


def _check_domain(x):
    if x.size and (np.min(x) < -_EDGE_TOL or np.max(x) > 1 + _EDGE_TOL):
        bad = x[(x < -_EDGE_TOL) | (x > 1 + _EDGE_TOL)][0]
        raise ValueError(f"x={bad!r} lies outside the basis domain [0, 1]")


def design_matrix(spec: BasisSpec, xs) -> np.ndarray:
    """Return the n x k matrix whose i-th row is the basis evaluated at ``xs[i]``."""
    x = np.asarray(xs, dtype=float).ravel()
    _check_domain(x)
    k = spec.k
    P = np.empty((x.size, k))
    if spec.family == MONOMIAL:
        P[:, 0] = 1.0
        for j in range(1, k):
            P[:, j] = P[:, j - 1] * x
        return P
    npoly = min(k, 3)
    P[:, 0] = 1.0
    if npoly > 1:
        P[:, 1] = x
    if npoly > 2:
        P[:, 2] = x * x
    for j, t in enumerate(spec.knots(), start=3):
        P[:, j] = np.maximum(x - t, 0.0) ** 2
    return P


def eval_basis(spec: BasisSpec, x: float) -> np.ndarray:
    """Basis vector of length ``k`` at a single point."""
    return design_matrix(spec, np.array([x], dtype=float))[0]
