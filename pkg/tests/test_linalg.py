import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emergentk.errors import DimensionMismatch, MultiBlock, NotDefective, NotSingleEigenvalue
from emergentk.linalg import (
    PointClass,
    check_spectrum,
    classify_point,
    commutator,
    eigendecompose,
    jordan_block,
    jordanize_single_block,
)
from emergentk.models import h_ep, h_ssh_block

complex_entries = st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False)


def square(n):
    return st.lists(complex_entries, min_size=n * n, max_size=n * n).map(lambda v: np.array(v).reshape(n, n))


def test_symmetric_2x2_regular():
    spec = eigendecompose(h_ep(0.0))
    np.testing.assert_allclose(spec.eigenvalues, [-1, 1], atol=1e-14)
    assert spec.classification is PointClass.REGULAR
    assert check_spectrum(h_ep(0.0), spec)["ok"]


def test_ep_point_classified_ep():
    spec = eigendecompose(h_ep(1.0))
    np.testing.assert_allclose(spec.eigenvalues, [0, 0], atol=1e-7)
    assert spec.classification is PointClass.EP
    assert spec.min_sv < 1e-6


def test_zero_block_is_dp():
    spec = eigendecompose(h_ssh_block(1.0, math.pi))
    assert spec.classification is PointClass.DP
    assert spec.min_sv == pytest.approx(1.0)


def test_near_ep_is_regular_with_analytic_gap():
    gamma = 0.999
    spec = eigendecompose(h_ep(gamma))
    # characteristic polynomial lam^2 = 1 - gamma^2
    assert spec.gap == pytest.approx(2 * math.sqrt(1 - gamma**2), rel=1e-9)
    assert classify_point(spec) is PointClass.REGULAR


def test_classify_thresholds_override():
    spec = eigendecompose(np.diag([0.0, 1e-3]))
    assert classify_point(spec) is PointClass.REGULAR
    assert classify_point(spec, gap_tol=1e-2) is PointClass.DP
    assert classify_point(spec, ep_tol=2.0) is PointClass.EP
    assert classify_point(eigendecompose(np.zeros((2, 2)))) is PointClass.DP


def test_eigenvalue_ordering_lexicographic():
    H = np.diag([2 + 1j, -1, 2 - 1j, 0.5j])
    spec = eigendecompose(H)
    np.testing.assert_allclose(spec.eigenvalues, [-1, 0.5j, 2 - 1j, 2 + 1j])


def test_deterministic_bytes():
    rng = np.random.default_rng(3)
    H = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    a, b = eigendecompose(H), eigendecompose(H.copy())
    assert a.eigenvalues.tobytes() == b.eigenvalues.tobytes()
    assert a.P.tobytes() == b.P.tobytes()


def test_min_sv_decreases_towards_ep():
    gammas = np.round(np.arange(0.90, 0.995, 0.01), 10)
    svs = [eigendecompose(h_ep(g)).min_sv for g in gammas]
    assert all(b < a for a, b in zip(svs, svs[1:]))


@settings(max_examples=60, deadline=None)
@given(square(3))
def test_round_trip_regular(H):
    spec = eigendecompose(H)
    if spec.classification is not PointClass.REGULAR or np.linalg.cond(spec.P) > 1e6:
        return
    scale = max(np.linalg.norm(H, 2), 1)
    assert np.linalg.norm(spec.reconstruct() - H, 2) <= 1e-9 * scale


@settings(max_examples=40, deadline=None)
@given(square(3), st.lists(st.complex_numbers(min_magnitude=0.1, max_magnitude=10), min_size=3, max_size=3))
def test_column_rescaling_invariant(H, s):
    spec = eigendecompose(H)
    P = spec.P * np.asarray(s)
    # normalising columns again recovers the same singular values
    Pn = P / np.linalg.norm(P, axis=0)
    assert np.linalg.svd(Pn, compute_uv=False).min() == pytest.approx(spec.min_sv, rel=1e-8, abs=1e-12)
    lam = np.diag(np.linalg.solve(P, H @ P))
    if spec.classification is PointClass.REGULAR and np.linalg.cond(P) < 1e8:
        np.testing.assert_allclose(lam, spec.eigenvalues, atol=1e-6 * max(1, np.abs(H).max()))


def test_jordanize_ep_model():
    H = h_ep(1.0)
    jb = jordanize_single_block(H, 1.0)
    assert jb.size == 2 and abs(jb.lam) < 1e-14
    np.testing.assert_allclose(np.linalg.solve(jb.Q, H @ jb.Q), [[0, 1], [0, 0]], atol=1e-12)


def test_jordanize_already_jordan():
    jb = jordanize_single_block(np.array([[0, 1], [0, 0]]), 1.0)
    np.testing.assert_allclose(jb.Q, np.eye(2), atol=1e-15)


@pytest.mark.parametrize("c", [1.0, 2.0, 0.5j])
def test_jordan_chain_relation(c):
    rng = np.random.default_rng(7)
    S = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    H = S @ jordan_block(0.3 - 0.2j, 1.0, 3) @ np.linalg.inv(S)
    jb = jordanize_single_block(H, c, tol=1e-6)
    N = H - jb.lam * np.eye(3)
    assert np.linalg.norm(N @ jb.Q[:, 0]) < 1e-8
    for k in range(2):
        np.testing.assert_allclose(N @ jb.Q[:, k + 1], c * jb.Q[:, k], atol=1e-8)
    np.testing.assert_allclose(np.linalg.solve(jb.Q, H @ jb.Q), jb.J, atol=1e-8)


def test_jordanize_errors():
    with pytest.raises(NotDefective):
        jordanize_single_block(np.eye(2))
    with pytest.raises(MultiBlock):
        jordanize_single_block(np.pad(jordan_block(0, 1, 2), ((0, 1), (0, 1))))
    with pytest.raises(NotSingleEigenvalue):
        jordanize_single_block(np.diag([1.0, 2.0]))
    with pytest.raises(ValueError):
        jordanize_single_block(h_ep(1.0), c=0)


def test_commutator_examples():
    X = np.array([[0, 1], [1, 0]])
    Z = np.array([[1, 0], [0, -1]])
    np.testing.assert_array_equal(commutator(np.eye(2), X), 0)
    np.testing.assert_array_equal(commutator(X, Z), [[0, -2], [2, 0]])
    np.testing.assert_allclose(commutator(h_ep(0.5), h_ep(0.5)), 0)
    with pytest.raises(DimensionMismatch):
        commutator(np.eye(2), np.eye(3))
