import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tunesel.basis import MONOMIAL, SPLINE, BasisSpec, design_matrix, eval_basis


def test_monomial_values():
    np.testing.assert_allclose(eval_basis(BasisSpec(MONOMIAL, 3), 0.5), [1, 0.5, 0.25])


def test_spline_below_knot():
    np.testing.assert_allclose(eval_basis(BasisSpec(SPLINE, 4), 0.25), [1, 0.25, 0.0625, 0])


def test_spline_at_right_edge():
    np.testing.assert_allclose(eval_basis(BasisSpec(SPLINE, 5), 1.0),
                               [1, 1, 1, 4 / 9, 1 / 9], rtol=1e-15)


def test_small_design():
    np.testing.assert_array_equal(design_matrix(BasisSpec(MONOMIAL, 2), [0, 1]), [[1, 0], [1, 1]])


@pytest.mark.parametrize("family", [MONOMIAL, SPLINE])
def test_k1_is_constant(family):
    assert np.all(design_matrix(BasisSpec(family, 1), np.linspace(0, 1, 7)) == 1.0)


@pytest.mark.parametrize("family", [MONOMIAL, SPLINE])
def test_rows_match_pointwise(family):
    xs = np.random.default_rng(2).uniform(0, 1, 100)
    spec = BasisSpec(family, 7)
    P = design_matrix(spec, xs)
    for i, x in enumerate(xs):
        # independent formula, written out term by term
        if family == MONOMIAL:
            ref = [x ** j for j in range(7)]
        else:
            ref = [1, x, x * x] + [max(x - (j - 3) / 5, 0) ** 2 for j in range(4, 8)]
        np.testing.assert_allclose(P[i], ref, rtol=1e-14, atol=1e-15)


def test_monomial_at_zero_is_unit_vector():
    e = eval_basis(BasisSpec(MONOMIAL, 5), 0.0)
    np.testing.assert_array_equal(e, [1, 0, 0, 0, 0])


def test_spline_small_k_is_polynomial():
    xs = np.linspace(0, 1, 11)
    for k in (1, 2, 3):
        np.testing.assert_array_equal(design_matrix(BasisSpec(SPLINE, k), xs),
                                      design_matrix(BasisSpec(MONOMIAL, k), xs))


@settings(max_examples=25, deadline=None)
@given(st.integers(4, 12))
def test_spline_c1_across_knots(k):
    spec = BasisSpec(SPLINE, k)
    h = 1e-6
    for j, t in enumerate(spec.knots(), start=3):
        if t + h > 1:
            continue
        left, mid, right = design_matrix(spec, [t - h, t, t + h])[:, j]
        assert abs(right - left) < 1e-4
        # one-sided derivatives around the knot agree
        assert abs((right - mid) / h - (mid - left) / h) < 1e-4


def test_domain_and_spec_errors():
    with pytest.raises(ValueError, match="outside"):
        eval_basis(BasisSpec(MONOMIAL, 2), 1.1)
    eval_basis(BasisSpec(MONOMIAL, 2), 1.0 + 5e-13)
    with pytest.raises(ValueError):
        BasisSpec("legendre", 2)
    with pytest.raises(ValueError):
        BasisSpec(MONOMIAL, 0)
