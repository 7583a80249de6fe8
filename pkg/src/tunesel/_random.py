"""Seed derivation, fold partitions and multiplier-bootstrap draws.

Every random stream is keyed by ``(seed, *labels)`` through
:class:`numpy.random.SeedSequence`, so results never depend on how work is
split between processes.
"""

from __future__ import annotations

import math
import zlib

import numpy as np

_CHUNK_ELEMENTS = 4_000_000


def _key(label):
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError("integer stream labels must be non-negative")
        return int(label)
    return zlib.crc32(str(label).encode("utf-8"))


def make_rng(seed, *labels) -> np.random.Generator:
    """Independent generator for the stream named by ``labels`` under ``seed``."""
    if seed is None:
        raise ValueError("an explicit integer seed is required")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(l) for l in labels))
    return np.random.Generator(np.random.PCG64(ss))


def fold_partition(n: int, V: int, rng: np.random.Generator):
    """Random partition of ``range(n)`` into ``V`` folds whose sizes differ by at most one."""
    if V < 2:
        raise ValueError(f"need at least 2 folds, got V={V}")
    if V > n:
        raise ValueError(f"V={V} exceeds the sample size n={n}")
    perm = rng.permutation(n)
    return [np.sort(f) for f in np.array_split(perm, V)]


def multiplier_sums(S: np.ndarray, B: int, rng: np.random.Generator) -> np.ndarray:
    """``B x m`` matrix whose row b is ``w_b @ S`` with ``w_b ~ N(0, I_n)``.

    Draws are generated in row chunks from one stream, so the values equal
    those of a single ``rng.standard_normal((B, n))`` call.
    """
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    out = np.empty((B, S.shape[1]))
    step = max(1, _CHUNK_ELEMENTS // max(n, 1))
    for start in range(0, B, step):
        stop = min(B, start + step)
        out[start:stop] = rng.standard_normal((stop - start, n)) @ S
    return out


def upper_quantile(draws, alpha: float) -> float:
    """Empirical ``1 - alpha`` quantile: order statistic ``ceil((1 - alpha) B)``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    draws = np.sort(np.asarray(draws, dtype=float).ravel())
    B = draws.size
    if B == 0:
        raise ValueError("no draws")
    idx = math.ceil((1.0 - alpha) * B - 1e-9)
    return float(draws[min(max(idx, 1), B) - 1])
