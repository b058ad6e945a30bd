import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from orss.errors import DimensionMismatchError, InvariantViolation
from orss.linalg import MaintainedInverse, PSDState, psd_sandwich_margins


def dense_inverse(state):
    return np.linalg.inv(state.gram + state.lam * np.eye(state.dim))


def test_ridge_quadratic_empty_state():
    s = PSDState(3, lam=1.0)
    assert s.ridge_quadratic([1.0, 0.0, 0.0]) == pytest.approx(1.0)
    assert s.ridge_quadratic(np.zeros(3)) == 0.0


def test_ridge_quadratic_two_rows_against_dense_solve():
    s = PSDState(2, lam=0.5)
    s.absorb_row([1.0, 0.0])
    s.absorb_row([1.0, 1.0])
    v = np.array([0.0, 1.0])
    expected = v @ np.linalg.solve(np.array([[2.5, 1.0], [1.0, 1.5]]), v)
    assert expected == pytest.approx(0.9090909090909091)
    assert s.ridge_quadratic(v) == pytest.approx(expected, rel=1e-12)


def test_ridge_quadratic_rejects_bad_input():
    s = PSDState(2, lam=1.0)
    with pytest.raises(DimensionMismatchError):
        s.ridge_quadratic([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        s.ridge_quadratic([np.nan, 0.0])
    with pytest.raises(ValueError):
        s.ridge_quadratic([np.inf, 0.0])


def test_lambda_must_be_positive():
    with pytest.raises(ValueError):
        PSDState(2, lam=0.0)
    with pytest.raises(ValueError):
        PSDState(2, lam=-1.0)


def test_absorb_unit_vector():
    s = PSDState(4, lam=1.0)
    s.absorb_row(np.eye(4)[0], 1.0)
    np.testing.assert_allclose(s.inv, np.diag([0.5, 1.0, 1.0, 1.0]), atol=1e-15)
    assert s.count == 1


def test_absorb_zero_scale_only_counts():
    s = PSDState(3, lam=2.0)
    s.absorb_row([1.0, 2.0, 3.0], 1.0)
    before = (s.gram.copy(), s.inv.copy())
    s.absorb_row([4.0, 5.0, 6.0], 0.0)
    np.testing.assert_array_equal(s.gram, before[0])
    np.testing.assert_array_equal(s.inv, before[1])
    assert s.count == 2


def test_absorb_rejects_negative_scale():
    with pytest.raises(ValueError):
        PSDState(2, lam=1.0).absorb_row([1.0, 0.0], -1.0)


def test_thousand_absorbs_match_fresh_inverse():
    rng = np.random.default_rng(0)
    s = PSDState(8, lam=0.3)
    for _ in range(1000):
        s.absorb_row(rng.standard_normal(8), rng.uniform(0.0, 3.0))
    ref = dense_inverse(s)
    assert np.linalg.norm(s.inv - ref) / np.linalg.norm(ref) < 1e-8
    assert s.inverse_residual() < 1e-7


def test_det_ratio_simple():
    s = PSDState(3, lam=1.0)
    assert s.det_ratio_after(np.eye(3)[0], 1.0) == pytest.approx(2.0)
    assert s.det_ratio_after(np.zeros(3), 1.0) == 1.0


def test_det_ratio_against_determinants():
    rng = np.random.default_rng(5)
    s = PSDState(5, lam=0.7)
    for _ in range(7):
        s.absorb_row(rng.standard_normal(5))
    v, scale = rng.standard_normal(5), 1.3
    base = s.gram + s.lam * np.eye(5)
    expected = np.linalg.det(base + scale * np.outer(v, v)) / np.linalg.det(base)
    assert s.det_ratio_after(v, scale) == pytest.approx(expected, rel=1e-10)


def test_sandwich_identity_case():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((30, 4))
    cert = psd_sandwich_margins(a.T @ a, a.T @ a, 0.1, 0.01)
    assert cert.passed
    assert cert.min_eig == pytest.approx(1.0, abs=1e-12)
    assert cert.max_eig == pytest.approx(1.0, abs=1e-12)


def test_sandwich_zero_approximation_fails():
    eps, delta, d = 0.5, 0.1, 4
    lam = delta / eps
    cert = psd_sandwich_margins(np.eye(d), np.zeros((d, d)), eps, delta)
    # every eigenvalue of (I + lam I)^{-1} lam I is lam / (1 + lam) = 1/6
    assert lam / (1 + lam) == pytest.approx(1 / 6)
    assert cert.min_eig == pytest.approx(1 / 6, abs=1e-12)
    assert cert.max_eig == pytest.approx(1 / 6, abs=1e-12)
    assert not cert.passed


def test_sandwich_scaled_at_upper_boundary():
    eps, delta = 0.25, 1e-9
    rng = np.random.default_rng(2)
    a = rng.standard_normal((40, 5))
    g = a.T @ a
    cert = psd_sandwich_margins(g, (1 + eps) * g, eps, delta)
    assert cert.passed
    assert cert.max_eig <= 1 + eps + 1e-12


def test_sandwich_rejects_bad_input():
    with pytest.raises(ValueError):
        psd_sandwich_margins(np.array([[1.0, 2.0], [0.0, 1.0]]), np.eye(2), 0.5, 0.1)
    with pytest.raises(ValueError):
        psd_sandwich_margins(np.eye(2), np.eye(2), 0.5, 0.0)
    with pytest.raises(DimensionMismatchError):
        psd_sandwich_margins(np.eye(2), np.eye(3), 0.5, 0.1)


def test_maintained_inverse_signed_updates():
    x = MaintainedInverse(2.0 * np.eye(3))
    u = np.array([1.0, 1.0, 0.0])
    x.update(u, 1.5)
    x.update(u, -0.5)
    np.testing.assert_allclose(x.inv, np.linalg.inv(2.0 * np.eye(3) + np.outer(u, u)), atol=1e-14)


def test_maintained_inverse_refuses_indefinite_update():
    x = MaintainedInverse(np.eye(2))
    with pytest.raises(InvariantViolation):
        x.update(np.array([1.0, 0.0]), -1.0)


rows_strategy = arrays(
    np.float64, st.tuples(st.integers(1, 12), st.just(4)),
    elements=st.floats(-10, 10, allow_nan=False, width=64),
)


@settings(max_examples=60, deadline=None)
@given(rows=rows_strategy, probe=arrays(np.float64, 4, elements=st.floats(-5, 5, width=64)),
       lam=st.floats(0.05, 10.0))
def test_absorbing_never_raises_quadratic(rows, probe, lam):
    s = PSDState(4, lam)
    prev = s.ridge_quadratic(probe)
    for r in rows:
        s.absorb_row(r)
        cur = s.ridge_quadratic(probe)
        assert cur <= prev * (1 + 1e-9) + 1e-12
        prev = cur
    assert s.inverse_residual() < 1e-7


@settings(max_examples=60, deadline=None)
@given(rows=rows_strategy, v=arrays(np.float64, 4, elements=st.floats(-5, 5, width=64)),
       scale=st.floats(0.0, 100.0))
def test_det_ratio_at_least_one(rows, v, scale):
    s = PSDState(4, 1.0)
    for r in rows:
        s.absorb_row(r)
    assert s.det_ratio_after(v, scale) >= 1.0


@settings(max_examples=40, deadline=None)
@given(rows=rows_strategy, eps=st.floats(0.01, 0.99), delta=st.floats(1e-3, 10.0))
def test_sandwich_reflexive(rows, eps, delta):
    g = rows.T @ rows
    assert psd_sandwich_margins(g, g, eps, delta).passed


@settings(max_examples=40, deadline=None)
@given(rows=rows_strategy)
def test_gram_stays_psd(rows):
    s = PSDState(4, 1.0)
    for r in rows:
        s.absorb_row(r)
    eig = np.linalg.eigvalsh(s.gram)
    assert eig[0] >= -1e-10 * max(eig[-1], 1.0)
