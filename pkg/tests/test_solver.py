import numpy as np
import pytest
from conftest import random_spec
from hypothesis import given, settings
from hypothesis import strategies as st

from pvtrain.operator import OperatorSpec, continuity_modulus, identity_spec, shear_spec
from pvtrain.oracle import dense_assemble, dual_reference_solve
from pvtrain.regularizer import dual_ball_project, kernel_project_gradient, pv
from pvtrain.solver import (
    SolverParams,
    denoise,
    duality_gap,
    fidelity_prox,
    operator_norm,
)

TIGHT = SolverParams(max_iterations=50_000, gap_tolerance=1e-11)


def test_params_validation():
    for bad in (
        dict(max_iterations=0),
        dict(gap_tolerance=0.0),
        dict(theta=1.5),
        dict(step_rule="adaptive"),
        dict(check_every=0),
    ):
        with pytest.raises(ValueError):
            SolverParams(**bad)


def test_fidelity_prox_examples(rng):
    f = rng.standard_normal((3, 4))
    np.testing.assert_allclose(fidelity_prox(f, 0.3, f), f)
    np.testing.assert_allclose(fidelity_prox(np.zeros_like(f), 1e12, f), f, atol=1e-11)
    assert fidelity_prox(np.full((1, 1), 2.0), 0.5, np.zeros((1, 1)))[0, 0] == 1.0
    with pytest.raises(ValueError):
        fidelity_prox(f, 0.3, f[:2])
    with pytest.raises(ValueError):
        fidelity_prox(f, 0.0, f)


def test_operator_norm_examples(rng):
    zero = OperatorSpec((np.zeros((2, 2)),))
    assert operator_norm(zero, 8, 8) == 0.0
    L = operator_norm(identity_spec(1), 16, 16)
    assert 2.6 <= L <= 2.8569
    with pytest.raises(ValueError):
        operator_norm(identity_spec(1), 1, 8)


@pytest.mark.parametrize("d", [1, 2])
def test_operator_norm_against_svd(rng, d):
    spec = random_spec(rng, d)
    smax = np.linalg.svd(dense_assemble(spec, 8, 8), compute_uv=False)[0]
    L = operator_norm(spec, 8, 8)
    assert smax <= L <= 1.01 * smax * (1 + 1e-6)


def test_alpha_zero_short_circuit(rng):
    f = rng.standard_normal((6, 5))
    res = denoise(f, 0.0, identity_spec(2))
    assert np.array_equal(res.u, f)
    assert (res.iterations, res.gap, res.converged, res.fidelity) == (0, 0.0, True, 0.0)


@pytest.mark.parametrize("alpha", [float("nan"), -1.0, float("inf")])
def test_bad_alpha(alpha):
    with pytest.raises(ValueError):
        denoise(np.zeros((4, 4)), alpha, identity_spec(1))


def test_non_finite_input():
    f = np.zeros((4, 4))
    f[1, 1] = np.nan
    with pytest.raises(ValueError):
        denoise(f, 0.1, identity_spec(1))


@pytest.mark.parametrize("norm", [1, 2, np.inf])
def test_constant_is_fixed(norm):
    f = np.full((8, 8), 0.3)
    res = denoise(f, 0.7, identity_spec(2), norm)
    assert res.converged
    np.testing.assert_allclose(res.u, f, atol=1e-6)


def test_zero_operator_returns_data(rng):
    f = rng.standard_normal((5, 5))
    res = denoise(f, 1.0, OperatorSpec((np.zeros((2, 2)),)))
    assert np.array_equal(res.u, f) and res.converged


@pytest.mark.parametrize(
    "spec,norm",
    [(identity_spec(1), 2), (identity_spec(1), 1), (identity_spec(1), np.inf), (identity_spec(2), 2)],
)
def test_matches_oracle(rng, spec, norm):
    f = rng.uniform(0, 1, (8, 8))
    ref = dual_reference_solve(f, 0.1, spec, norm)
    res = denoise(f, 0.1, spec, norm, SolverParams(max_iterations=50_000, gap_tolerance=1e-13))
    assert np.linalg.norm(res.u - ref) <= 1e-5 * np.linalg.norm(f)


def test_duality_gap_trivial_cases(rng):
    f = rng.standard_normal((4, 4))
    zero = np.zeros((2, 4, 4))
    assert duality_gap(f, 0.0, identity_spec(1), 2, f, zero) == 0.0
    c = np.full((4, 4), 1.25)
    assert duality_gap(c, 0.5, identity_spec(1), 2, c, zero) == 0.0
    with pytest.raises(ValueError):
        duality_gap(f, 0.1, identity_spec(1), 2, f, np.ones((2, 4, 4)))


def test_converged_gap_small_and_nonnegative(rng):
    f = rng.uniform(0, 1, (8, 8))
    res = denoise(f, 0.2, identity_spec(1))
    assert res.converged and 0 <= res.gap <= 1e-6
    gap = duality_gap(f, 0.2, identity_spec(1), 2, res.u, res.dual)
    primal = np.sum((res.u - f) ** 2) + 0.2 * res.pv_value
    assert -1e-10 <= gap <= 1e-6 * (1 + primal)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, np.inf]), st.floats(0.01, 2.0))
def test_weak_duality(seed, norm, alpha):
    # any primal image against any feasible dual field
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, 2)
    f, u = rng.standard_normal((2, 6, 6))
    v = dual_ball_project(3 * rng.standard_normal((spec.K, 6, 6)), alpha, norm)
    assert duality_gap(f, alpha, spec, norm, u, v) >= -1e-10


def test_deterministic(small_desk):
    a = denoise(small_desk.noisy, 0.3, shear_spec(0.2, -0.1))
    b = denoise(small_desk.noisy, 0.3, shear_spec(0.2, -0.1))
    assert np.array_equal(a.u, b.u) and np.array_equal(a.dual, b.dual)


def test_averaged_iterate_objective_nonincreasing(small_desk):
    f, alpha, spec = small_desk.noisy, 0.3, identity_spec(1)
    total = np.zeros_like(f)
    values = []

    def record(it, u, v):
        total[...] += u
        avg = total / it
        values.append(np.sum((avg - f) ** 2) + alpha * pv(spec, avg))

    denoise(f, alpha, spec, params=SolverParams(max_iterations=400, gap_tolerance=1e-14), callback=record)
    steps = np.diff(values[10:])
    assert np.all(steps <= 1e-8)


def test_g_alpha_nonincreasing(small_desk):
    alphas = [0.0, 0.02, 0.05, 0.1, 0.2, 0.4, 0.8]
    g = [denoise(small_desk.noisy, a, identity_spec(1), params=TIGHT).pv_value for a in alphas]
    assert all(b <= a + 1e-6 for a, b in zip(g, g[1:]))


@pytest.mark.parametrize("a1,a2", [(0.05, 0.1), (0.1, 0.3), (0.2, 0.25)])
def test_alpha_lipschitz(small_desk, a1, a2):
    r1 = denoise(small_desk.noisy, a1, identity_spec(1), params=TIGHT)
    r2 = denoise(small_desk.noisy, a2, identity_spec(1), params=TIGHT)
    lhs = np.sum((r1.u - r2.u) ** 2)
    assert lhs <= abs(a1 - a2) * (r1.pv_value + r2.pv_value) + 1e-5


@pytest.mark.parametrize("s1,s2", [(0.0, 0.1), (0.3, 0.5), (-0.4, 0.4)])
def test_operator_continuity(small_desk, s1, s2):
    alpha, P = 0.2, 1.0
    b1, b2 = shear_spec(s1), shear_spec(s2)
    u1 = denoise(small_desk.noisy, alpha, b1, params=TIGHT).u
    u2 = denoise(small_desk.noisy, alpha, b2, params=TIGHT).u
    lhs = np.sum((u1 - u2) ** 2)
    rhs = alpha * continuity_modulus(b1, b2, P) * (pv(b1, u1) + pv(b1, u2))
    assert lhs <= rhs + 1e-6


@pytest.mark.parametrize("norm", [1, 2, np.inf])
def test_data_stability(rng, norm):
    spec = random_spec(rng, 1)
    f = rng.uniform(0, 1, (12, 12))
    g = f + 0.05 * rng.standard_normal(f.shape)
    u = denoise(f, 0.2, spec, norm, TIGHT).u
    w = denoise(g, 0.2, spec, norm, TIGHT).u
    assert np.linalg.norm(u - w) <= np.linalg.norm(f - g) + 1e-5


def test_large_alpha_tends_to_mean(small_desk):
    f = small_desk.noisy
    diameter = np.hypot(*f.shape)
    res = denoise(f, 1e3 * diameter, identity_spec(1))
    assert np.linalg.norm(res.u - kernel_project_gradient(f)) <= 1e-2


@pytest.mark.parametrize("norm", [1, 2, np.inf])
def test_uniqueness_from_two_starts(small_desk, norm):
    f, alpha, spec = small_desk.noisy, 0.25, shear_spec(0.3)
    params = SolverParams()
    a = denoise(f, alpha, spec, norm, params)
    b = denoise(f, alpha, spec, norm, params, init=np.zeros_like(f))
    obj = lambda r: r.fidelity + alpha * r.pv_value
    assert a.converged and b.converged
    assert abs(obj(a) - obj(b)) <= 10 * params.gap_tolerance * (1 + obj(a))
