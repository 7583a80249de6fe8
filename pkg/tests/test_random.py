import numpy as np
import pytest

from tunesel import _random
from tunesel._random import fold_partition, make_rng, multiplier_sums, upper_quantile


def test_streams_are_keyed_and_reproducible():
    a = make_rng(3, "lepski").standard_normal(5)
    assert np.array_equal(a, make_rng(3, "lepski").standard_normal(5))
    assert not np.array_equal(a, make_rng(3, "cv").standard_normal(5))
    assert not np.array_equal(a, make_rng(4, "lepski").standard_normal(5))
    with pytest.raises(ValueError):
        make_rng(None)
    with pytest.raises(ValueError):
        make_rng(1, -2)


def test_chunked_draws_equal_single_call(monkeypatch):
    S = np.random.default_rng(0).standard_normal((37, 4))
    ref = make_rng(9, "m").standard_normal((250, 37)) @ S
    monkeypatch.setattr(_random, "_CHUNK_ELEMENTS", 37 * 7)
    got = multiplier_sums(S, 250, make_rng(9, "m"))
    np.testing.assert_array_equal(got, ref)


def test_upper_quantile_order_statistic():
    draws = np.arange(1.0, 101.0)[::-1]
    assert upper_quantile(draws, 0.05) == 95.0
    assert upper_quantile(draws, 0.055) == 95.0
    assert upper_quantile(draws, 0.5) == 50.0
    with pytest.raises(ValueError):
        upper_quantile(draws, 1.0)


def test_fold_partition_contract():
    folds = fold_partition(11, 3, make_rng(1))
    assert sorted(len(f) for f in folds) == [3, 4, 4]
    with pytest.raises(ValueError):
        fold_partition(5, 1, make_rng(1))
