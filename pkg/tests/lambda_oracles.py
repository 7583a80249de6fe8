"""Independent recomputations of the penalty formulas used by several test modules."""

import math
from itertools import product

import mpmath
import numpy as np

from tunesel.lasso import lasso_fit_xy


def normal_isf(q):
    # inverse upper tail via mpmath at 30 digits
    mpmath.mp.dps = 30
    return float(-mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(q) - 1))


def grouped_rms(X, s, groups=None):
    n, p = X.shape
    if groups is None:
        groups = np.arange(n)
    out = []
    for j in range(p):
        tot = 0.0
        for g in np.unique(groups):
            m = groups == g
            tot += float(np.sum(X[m, j] * s[m])) ** 2
        out.append(math.sqrt(tot / n))
    return max(out)


def self_normalized(X, s, c, alpha, groups=None):
    n, p = X.shape
    return 2 * c / math.sqrt(n) * normal_isf(alpha / (2 * p)) * grouped_rms(X, s, groups)


def bcch_oracle(X, y, c, alpha, groups=None):
    lam0 = self_normalized(X, y, c, alpha, groups)
    b = lasso_fit_xy(X, y, lam0).beta
    return lam0, self_normalized(X, y - X @ b, c, alpha, groups)


def pivotal_exact_quantile(n, alpha):
    """Exact (1 - alpha) quantile of |sum of n signs| / sqrt(n) under fair signs."""
    vals = np.array([abs(sum(s)) / math.sqrt(n) for s in product((-1, 1), repeat=n)])
    vals.sort()
    return vals[math.ceil((1 - alpha) * vals.size) - 1], vals
