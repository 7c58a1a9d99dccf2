import numpy as np
import pytest
from conftest import random_spec

from pvtrain.operator import OperatorSpec, adjoint, apply, identity_spec
from pvtrain.oracle import (
    OracleParams,
    dense_assemble,
    dual_reference_solve,
    randomized_pv_lower_bound,
)
from pvtrain.regularizer import pv
from pvtrain.solver import SolverParams, denoise


def test_params_validation():
    with pytest.raises(ValueError):
        OracleParams(tolerance=0.0)
    with pytest.raises(ValueError):
        OracleParams(max_iterations=0)


def test_dense_zero_blocks():
    m = dense_assemble(OperatorSpec((np.zeros((2, 2)), np.zeros((4, 4)))), 3, 3)
    assert m.shape == (6 * 9, 9) and not m.any()


def test_dense_hand_2x2():
    # pixels a, b / c, d flattened row-major; channel x then channel y
    expected = np.array(
        [
            [-1, 1, 0, 0],  # x at (0,0): b - a
            [0, 0, 0, 0],  # x at (0,1): replicate boundary
            [0, 0, -1, 1],  # x at (1,0): d - c
            [0, 0, 0, 0],
            [-1, 0, 1, 0],  # y at (0,0): c - a
            [0, -1, 0, 1],  # y at (0,1): d - b
            [0, 0, 0, 0],
            [0, 0, 0, 0],
        ],
        dtype=float,
    )
    np.testing.assert_array_equal(dense_assemble(identity_spec(1), 2, 2), expected)


def test_dense_cap():
    with pytest.raises(ValueError):
        dense_assemble(identity_spec(1), 17, 16)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_matvec_equivalence(rng, d):
    spec = random_spec(rng, d)
    h, w = 5, 7
    m = dense_assemble(spec, w, h)
    for _ in range(100):
        u = rng.standard_normal((h, w))
        np.testing.assert_allclose(m @ u.ravel(), apply(spec, u).ravel(), rtol=0, atol=1e-12 * max(1, np.abs(m).sum()))


def test_dense_transpose_is_adjoint(rng):
    spec = random_spec(rng, 2)
    m = dense_assemble(spec, 4, 3)
    cols = []
    for k in range(m.shape[0]):
        e = np.zeros(m.shape[0])
        e[k] = 1.0
        cols.append(adjoint(spec, e.reshape(spec.K, 3, 4)).ravel())
    assert np.max(np.abs(np.array(cols) - m)) <= 1e-12


def test_oracle_constant():
    c = np.full((5, 5), 0.4)
    np.testing.assert_allclose(dual_reference_solve(c, 0.3, identity_spec(1)), c, atol=1e-12)


def test_oracle_tiny_alpha(rng):
    f = rng.uniform(0, 1, (6, 6))
    np.testing.assert_allclose(dual_reference_solve(f, 1e-8, identity_spec(2)), f, atol=1e-6)


def test_oracle_rejects():
    with pytest.raises(ValueError):
        dual_reference_solve(np.zeros((17, 4)), 0.1, identity_spec(1))
    with pytest.raises(ValueError):
        dual_reference_solve(np.zeros((4, 4)), 0.0, identity_spec(1))


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("norm", [1, 2, np.inf])
def test_oracle_agrees_with_solver(seed, norm):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, 1, scale=0.7)
    f = rng.uniform(0, 1, (8, 8))
    ref = dual_reference_solve(f, 0.1, spec, norm)
    got = denoise(f, 0.1, spec, norm, SolverParams(max_iterations=50_000, gap_tolerance=1e-13)).u
    assert np.linalg.norm(got - ref) <= 1e-5 * np.linalg.norm(f)


def test_lower_bound_constant():
    assert randomized_pv_lower_bound(identity_spec(1), np.ones((4, 4)), draws=20) == 0.0


@pytest.mark.parametrize("norm", [1, 2, np.inf])
def test_lower_bound_analytic(rng, norm):
    spec = random_spec(rng, 2)
    u = rng.standard_normal((6, 6))
    value = pv(spec, u, norm)
    assert randomized_pv_lower_bound(spec, u, norm, draws=0) == pytest.approx(value, rel=1e-10)
    assert randomized_pv_lower_bound(spec, u, norm, draws=5, include_optimal=True) == pytest.approx(
        value, rel=1e-10
    )


@pytest.mark.parametrize("norm", [1, 2, np.inf])
def test_lower_bound_random_draws(norm):
    i, j = np.mgrid[:8, :8] / 7.0
    u = np.sin(3 * i) + np.cos(2 * j) + i * j  # smooth
    spec = identity_spec(1)
    value = pv(spec, u, norm)
    bound = randomized_pv_lower_bound(spec, u, norm, draws=1000, seed=3)
    assert 0.5 * value <= bound <= value + 1e-9


def test_lower_bound_rejects_negative_draws():
    with pytest.raises(ValueError):
        randomized_pv_lower_bound(identity_spec(1), np.ones((3, 3)), draws=-1)
