import math

import numpy as np
import pytest

from delayed_gd.core import finite_difference_grad
from delayed_gd.problems import (
    ConvergenceError,
    LogisticProblem,
    PLLeastSquares,
    QuadraticProblem,
    RidgeLSProblem,
    constants_of,
    gaussian_stream,
    gen_classification_data,
    gen_pl_data,
    gen_regression_data,
    minimizer_pseudo_inverse,
    reference_minimizer,
)

SLACK = 1e-9
PROBLEMS = ["ridge", "logistic", "pl_problem"]


def orthogonal(rng, n):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return q


def random_points(rng, center, n, scale=2.0):
    return center + scale * rng.standard_normal((n, center.shape[0]))


def test_gaussian_stream_deterministic_and_split():
    a = gaussian_stream(7, 0, 1001)
    assert a.shape == (1001,)
    assert np.array_equal(a, gaussian_stream(7, 0, 1001))
    assert not np.array_equal(a, gaussian_stream(7, 1, 1001))
    # prefix stable: n does not change earlier draws
    assert np.array_equal(a[:500], gaussian_stream(7, 0, 500))


def test_gaussian_stream_moments():
    z = gaussian_stream(3, 0, 200_000)
    assert abs(z.mean()) < 0.01
    assert abs(z.var() - 1.0) < 0.01


def test_regression_shapes_and_noise():
    p = gen_regression_data(1000, 10, 42)
    assert p.A.shape == (1000, 10) and p.y.shape == (1000,)
    assert p.mu_reg == 0.1
    s = p.A.sum(axis=1)
    noise = p.y - s - np.cos(s)
    assert abs(noise.var() - 0.25) < 0.03
    q = gen_regression_data(1000, 10, 42)
    assert np.array_equal(p.A, q.A) and np.array_equal(p.y, q.y)
    assert not np.array_equal(p.A, gen_regression_data(1000, 10, 43).A)


def test_classification_labels_and_means():
    p = gen_classification_data(1000, 10, 42)
    assert (p.y == 1).sum() == 500 and (p.y == -1).sum() == 500
    np.testing.assert_allclose(p.A[p.y == 1].mean(axis=0), 1.0, atol=0.15)
    np.testing.assert_allclose(p.A[p.y == -1].mean(axis=0), -1.0, atol=0.15)
    q = gen_classification_data(1000, 10, 42)
    assert np.array_equal(p.A, q.A) and np.array_equal(p.y, q.y)
    with pytest.raises(ValueError):
        gen_classification_data(999, 10, 0)


def test_pl_data_positive_definite():
    p = gen_pl_data(6, 15, 42)
    assert p.A.shape == (6, 15)
    eigs = np.linalg.eigvalsh(p.A @ p.A.T)
    assert eigs.shape == (6,) and np.all(eigs > 0)
    assert np.array_equal(p.A, gen_pl_data(6, 15, 42).A)
    with pytest.raises(ValueError):
        gen_pl_data(15, 6, 0)


def test_pl_rejects_rank_deficient():
    A = np.ones((2, 4))
    with pytest.raises(ValueError):
        PLLeastSquares(A, b=np.zeros(2))


def test_constants_identity_ridge():
    m = 5
    c = constants_of(RidgeLSProblem(np.eye(m), y=np.arange(m), mu_reg=0.0))
    assert c.L == pytest.approx(2 / m, rel=1e-14)
    assert c.mu == pytest.approx(2 / m, rel=1e-14)
    np.testing.assert_allclose(c.x_star, np.arange(m), atol=1e-9)


def test_constants_pl_prescribed_singular_values():
    rng = np.random.default_rng(0)
    U, V = orthogonal(rng, 2), orthogonal(rng, 3)
    A = U @ np.diag([2.0, 1.0]) @ V[:2]
    c = constants_of(PLLeastSquares(A, b=rng.standard_normal(2)))
    assert c.L == pytest.approx(4.0, rel=1e-12)
    assert c.zeta == pytest.approx(1.0, rel=1e-12)
    assert c.mu == 0.0


def test_constants_logistic_zero_data():
    p = LogisticProblem(np.zeros((4, 3)), y=[1, -1, 1, -1], mu_reg=0.1)
    c = constants_of(p)
    assert c.L == pytest.approx(0.1) and c.mu == pytest.approx(0.1)
    np.testing.assert_allclose(c.x_star, 0.0, atol=1e-12)


@pytest.mark.parametrize("name", PROBLEMS)
def test_constants_invariants(request, name):
    p = request.getfixturevalue(name)
    c = constants_of(p)
    assert 0 <= c.mu <= c.L and 0 <= c.zeta <= c.L * (1 + 1e-12)
    assert c.f_star == p.value(c.x_star)
    meta = c.as_meta()
    assert set(meta) >= {"L", "mu", "zeta", "alpha", "f_star", "minimizer"}


def test_pseudo_inverse_examples(rng):
    Q = orthogonal(rng, 5)[:3]
    b = rng.standard_normal(3)
    np.testing.assert_allclose(minimizer_pseudo_inverse(PLLeastSquares(Q, b=b)), Q.T @ b, atol=1e-14)
    assert np.all(minimizer_pseudo_inverse(PLLeastSquares(Q, b=np.zeros(3))) == 0.0)


def test_pseudo_inverse_residual(pl_problem):
    x = minimizer_pseudo_inverse(pl_problem)
    A, b = pl_problem.A, pl_problem.b
    assert np.linalg.norm(A.T @ (A @ x - b)) <= 1e-10


def test_reference_minimizer_one_step():
    c = np.array([1.0, -2.0, 3.0])
    x, f = reference_minimizer(QuadraticProblem(np.eye(3), c), np.zeros(3))
    np.testing.assert_array_equal(x, c)
    assert f == 0.0


def test_reference_minimizer_ridge(ridge, ridge_consts):
    x = ridge_consts.x_star
    assert np.linalg.norm(ridge.grad(x)) <= 1e-10
    x2, _ = reference_minimizer(ridge, x)
    assert np.linalg.norm(x2 - x) <= 1e-10
    assert ridge_consts.x_star_radius <= 1e-10 / ridge.mu


def test_reference_minimizer_cap():
    with pytest.raises(ConvergenceError):
        reference_minimizer(QuadraticProblem(np.diag([1.0, 1e-6]), np.ones(2)), np.zeros(2), max_iters=10)


@pytest.mark.parametrize("name", PROBLEMS)
def test_gradient_matches_central_differences(request, name, rng):
    p = request.getfixturevalue(name)
    for x in random_points(rng, np.zeros(p.dim), 100, scale=1.0):
        g = p.grad(x)
        fd = finite_difference_grad(p, x)
        assert np.linalg.norm(fd - g) <= 1e-5 * max(np.linalg.norm(g), 1e-3)


def test_finite_difference_trivial_cases():
    quad = QuadraticProblem(np.eye(2), np.zeros(2))
    np.testing.assert_allclose(finite_difference_grad(quad, [2.0, -3.0]), [2.0, -3.0], atol=1e-8)
    flat = QuadraticProblem(np.zeros((2, 2)), np.zeros(2))
    assert np.all(finite_difference_grad(flat, [1.0, 1.0]) == 0.0)


@pytest.mark.parametrize("name", PROBLEMS)
def test_smoothness(request, name, rng):
    p = request.getfixturevalue(name)
    c = constants_of(p)
    xs = random_points(rng, c.x_star, 1000)
    ys = random_points(rng, c.x_star, 1000)
    for x, y in zip(xs, ys):
        assert np.linalg.norm(p.grad(y) - p.grad(x)) <= c.L * np.linalg.norm(y - x) * (1 + SLACK)


@pytest.mark.parametrize("name", ["ridge", "logistic"])
def test_strong_convexity(request, name, rng):
    p = request.getfixturevalue(name)
    c = constants_of(p)
    xs = random_points(rng, c.x_star, 1000)
    ys = random_points(rng, c.x_star, 1000)
    for x, y in zip(xs, ys):
        fx, fy, d = p.value(x), p.value(y), y - x
        rhs = fx + d @ p.grad(x) + 0.5 * c.mu * (d @ d)
        assert fy >= rhs - SLACK * max(abs(fx), abs(fy), 1.0)


@pytest.mark.parametrize("name", ["ridge", "logistic"])
def test_coercivity(request, name, rng):
    p = request.getfixturevalue(name)
    c = constants_of(p)
    y, gy = c.x_star, p.grad(c.x_star)
    for x in random_points(rng, c.x_star, 1000):
        d, g = x - y, p.grad(x) - gy
        lhs = d @ g
        rhs = c.mu * c.L / (c.mu + c.L) * (d @ d) + (g @ g) / (c.mu + c.L)
        assert lhs >= rhs - SLACK * max(abs(lhs), 1.0)


def test_pl_inequality(pl_problem, pl_consts, rng):
    for x in random_points(rng, pl_consts.x_star, 1000):
        g = pl_problem.grad(x)
        assert 0.5 * (g @ g) >= pl_consts.zeta * (pl_problem.value(x) - pl_consts.f_star) - SLACK
