import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pvtrain.grid import (
    hessian_adjoint,
    hessian_stack,
    multi_indices,
    n_channels,
)
from pvtrain.operator import identity_spec
from pvtrain.oracle import dense_assemble


def loop_partial(u, idx):
    """Pixel-loop forward differences, composed right to left along ``idx``."""
    out = np.array(u, dtype=float)
    for a in reversed(idx):
        h, w = out.shape
        nxt = np.zeros_like(out)
        for i in range(h):
            for j in range(w):
                if a == 0 and j + 1 < w:
                    nxt[i, j] = out[i, j + 1] - out[i, j]
                elif a == 1 and i + 1 < h:
                    nxt[i, j] = out[i + 1, j] - out[i, j]
        out = nxt
    return out


def test_channel_counts():
    assert [n_channels(d) for d in (1, 2, 3)] == [2, 6, 14]
    assert multi_indices(2) == [(0,), (1,), (0, 0), (0, 1), (1, 0), (1, 1)]


@pytest.mark.parametrize("d", [0, 4])
def test_rejects_unsupported_order(d):
    with pytest.raises(ValueError):
        hessian_stack(np.zeros((3, 3)), d)


def test_rejects_bad_images():
    with pytest.raises(ValueError):
        hessian_stack(np.zeros((1, 5)), 1)
    with pytest.raises(ValueError):
        hessian_stack(np.array([[0.0, np.nan], [0.0, 0.0]]), 1)


def test_constant_image_has_zero_stack():
    assert np.all(hessian_stack(np.full((5, 4), 5.0), 1) == 0)


def test_ramp_gradient():
    u = np.tile(np.arange(4.0), (4, 1))  # u(i, j) = j
    g = hessian_stack(u, 1)
    expected_x = np.ones((4, 4))
    expected_x[:, -1] = 0
    np.testing.assert_array_equal(g[0], expected_x)
    np.testing.assert_array_equal(g[1], 0)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_stack_matches_loop_oracle(rng, d):
    u = rng.standard_normal((5, 5))
    g = hessian_stack(u, d)
    for c, idx in enumerate(multi_indices(d)):
        np.testing.assert_array_equal(g[c], loop_partial(u, idx))


def test_adjoint_of_zero_field():
    assert np.all(hessian_adjoint(np.zeros((6, 3, 4)), 2) == 0)


def test_adjoint_of_unit_x_field_is_dense_transpose():
    h, w = 4, 5
    v = np.zeros((2, h, w))
    v[0] = 1.0
    expected = (dense_assemble(identity_spec(1), w, h).T @ v.ravel()).reshape(h, w)
    got = hessian_adjoint(v, 1)
    np.testing.assert_allclose(got, expected, atol=1e-15)
    # -div of (1, 0): outflow at the left column, inflow at the right one
    assert np.all(got[:, 0] == -1) and np.all(got[:, -1] == 1)
    assert np.all(got[:, 1:-1] == 0)


def test_adjoint_channel_mismatch():
    with pytest.raises(ValueError):
        hessian_adjoint(np.zeros((2, 3, 3)), 2)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_adjoint_identity(rng, d):
    for _ in range(20):
        h, w = rng.integers(2, 17, size=2)
        u = rng.standard_normal((h, w))
        v = rng.standard_normal((n_channels(d), h, w))
        lhs = np.sum(hessian_stack(u, d) * v)
        rhs = np.sum(u * hessian_adjoint(v, d))
        assert abs(lhs - rhs) <= 1e-12 * np.linalg.norm(u) * np.linalg.norm(v)


images = arrays(
    np.float64,
    st.tuples(st.integers(2, 7), st.integers(2, 7)),
    elements=st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False),
)


@settings(max_examples=60, deadline=None)
@given(images, st.integers(1, 3), st.floats(-1e3, 1e3))
def test_constants_in_kernel(u, d, c):
    assert np.all(hessian_stack(np.full(u.shape, c), d) == 0)


@settings(max_examples=60, deadline=None)
@given(images, st.integers(1, 3), st.floats(-10, 10), st.floats(-10, 10))
def test_linearity(u, d, a, b):
    w = np.roll(u, 1, axis=0) - 0.5 * u
    lhs = hessian_stack(a * u + b * w, d)
    rhs = a * hessian_stack(u, d) + b * hessian_stack(w, d)
    scale = np.max(np.abs(lhs)) + np.max(np.abs(rhs)) + 1.0
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale
