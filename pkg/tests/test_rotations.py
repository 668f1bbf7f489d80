"""Quaternion and rotation-matrix algebra."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graspkit import (
    axis_angle_matrix,
    axis_angle_quat,
    matrix_to_quat,
    quat_mul,
    quat_rotate,
    quat_to_matrix,
)
from graspkit.rotations import is_rotation_matrix, quat_conjugate, quat_normalize

from .oracles import quat_to_matrix_oracle, rodrigues_matrix_oracle

unit_quats = st.builds(
    lambda v: np.asarray(v) / np.linalg.norm(v),
    st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(
        lambda v: np.linalg.norm(v) > 1e-3
    ),
)


def test_quat_mul_hamilton_basis_products():
    w = np.array([1.0, 0.0, 0.0, 0.0])
    i = np.array([0.0, 1.0, 0.0, 0.0])
    j = np.array([0.0, 0.0, 1.0, 0.0])
    k = np.array([0.0, 0.0, 0.0, 1.0])
    np.testing.assert_allclose(quat_mul(i, j), k, atol=1e-15)
    np.testing.assert_allclose(quat_mul(j, k), i, atol=1e-15)
    np.testing.assert_allclose(quat_mul(k, i), j, atol=1e-15)
    np.testing.assert_allclose(quat_mul(i, i), -w, atol=1e-15)
    np.testing.assert_allclose(quat_mul(w, j), j, atol=1e-15)


@given(a=unit_quats, b=unit_quats)
@settings(max_examples=80, deadline=None)
def test_quat_mul_matches_matrix_composition(a, b):
    lhs = quat_to_matrix(quat_mul(a, b))
    rhs = quat_to_matrix(a) @ quat_to_matrix(b)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


@given(q=unit_quats)
@settings(max_examples=80, deadline=None)
def test_quat_to_matrix_matches_oracle_and_is_rotation(q):
    m = quat_to_matrix(q)
    np.testing.assert_allclose(m, quat_to_matrix_oracle(q), atol=1e-12)
    assert is_rotation_matrix(m)


@given(q=unit_quats)
@settings(max_examples=80, deadline=None)
def test_matrix_quat_roundtrip(q):
    m = quat_to_matrix(q)
    back = matrix_to_quat(m)
    assert back[0] >= 0.0
    # q and -q encode the same rotation
    sign = 1.0 if float(np.dot(back, q)) >= 0 else -1.0
    np.testing.assert_allclose(back, sign * np.asarray(q), atol=1e-9)
    np.testing.assert_allclose(quat_to_matrix(back), m, atol=1e-9)


@given(
    q=unit_quats,
    v=st.lists(st.floats(-3, 3), min_size=3, max_size=3),
)
@settings(max_examples=80, deadline=None)
def test_quat_rotate_agrees_with_matrix(q, v):
    v = np.asarray(v)
    np.testing.assert_allclose(quat_rotate(q, v), quat_to_matrix(q) @ v, atol=1e-9)


@given(
    axis=st.sampled_from([(1.0, 0, 0), (0, 1.0, 0), (0, 0, 1.0), (1.0, 1.0, 0.5)]),
    degrees=st.floats(-180.0, 180.0),
)
@settings(max_examples=60, deadline=None)
def test_axis_angle_against_rodrigues_oracle(axis, degrees):
    m = axis_angle_matrix(axis, degrees)
    want = rodrigues_matrix_oracle(axis, np.radians(degrees))
    np.testing.assert_allclose(m, want, atol=1e-12)
    np.testing.assert_allclose(quat_to_matrix(axis_angle_quat(axis, degrees)), m, atol=1e-12)


def test_quat_conjugate_inverts_unit_rotation():
    q = quat_normalize([0.4, 0.3, -0.2, 0.7])
    ident = quat_mul(q, quat_conjugate(q))
    np.testing.assert_allclose(ident, [1.0, 0.0, 0.0, 0.0], atol=1e-12)


def test_zero_quat_and_axis_rejected():
    with pytest.raises(ValueError):
        quat_normalize([0.0, 0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        axis_angle_quat([0.0, 0.0, 0.0], 0.3)


def test_is_rotation_matrix_rejects_reflection():
    reflect = np.diag([1.0, 1.0, -1.0]) @ np.eye(3)
    reflect[2, 2] = -1.0
    assert not is_rotation_matrix(np.diag([1.0, 1.0, -1.0]))
    assert is_rotation_matrix(np.eye(3))
