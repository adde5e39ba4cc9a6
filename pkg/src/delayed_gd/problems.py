"""Experiment cost functions, seeded data generators, constants and minimizers.

Random data comes from numpy's Philox counter-based generator keyed by
``(seed, stream)``, one stream per array, and Gaussian variates are produced
by the Box-Muller transform of its uniform doubles. Any Philox4x64-10
implementation with the same key therefore reproduces the datasets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .core import GradientOracle

__all__ = [
    "RidgeLSProblem",
    "LogisticProblem",
    "PLLeastSquares",
    "QuadraticProblem",
    "ProblemConstants",
    "ConvergenceError",
    "gaussian_stream",
    "gen_regression_data",
    "gen_classification_data",
    "gen_pl_data",
    "constants_of",
    "minimizer_pseudo_inverse",
    "reference_minimizer",
    "PROBLEM_KINDS",
]

DEFAULT_MU = 0.1
PL_MAX_ATTEMPTS = 16


class ConvergenceError(RuntimeError):
    pass


def gaussian_stream(seed: int, stream: int, n: int) -> np.ndarray:
    """``n`` standard normals from the Philox stream keyed by ``(seed, stream)``.

    Pairs of uniforms ``(u1, u2)`` map to ``r cos(theta), r sin(theta)`` with
    ``r = sqrt(-2 ln(1 - u1))`` and ``theta = 2 pi u2``.
    """
    if not 0 <= seed < 2**64 or not 0 <= stream < 2**64:
        raise ValueError("seed and stream must fit in an unsigned 64-bit integer")
    gen = np.random.Generator(np.random.Philox(key=np.array([seed, stream], dtype=np.uint64)))
    pairs = (n + 1) // 2
    u = gen.random(2 * pairs).reshape(pairs, 2)
    r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
    theta = 2.0 * np.pi * u[:, 1]
    z = np.column_stack([r * np.cos(theta), r * np.sin(theta)]).reshape(-1)
    return z[:n]


def _gram_eigs(A: np.ndarray) -> np.ndarray:
    """Eigenvalues of whichever Gram matrix (A^T A or A A^T) is smaller, ascending."""
    m, d = A.shape
    gram = A.T @ A if d <= m else A @ A.T
    return np.linalg.eigvalsh(gram)


def _lambda_max_ata(A: np.ndarray) -> float:
    return max(float(_gram_eigs(A)[-1]), 0.0)


def _lambda_min_ata(A: np.ndarray) -> float:
    m, d = A.shape
    if m < d:
        return 0.0
    return max(float(_gram_eigs(A)[0]), 0.0)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass(frozen=True, eq=False)
class _DataProblem:
    A: np.ndarray
    seed: int | None = field(default=None, kw_only=True)

    def __post_init__(self):
        A = np.array(self.A, dtype=np.float64)
        if A.ndim != 2 or min(A.shape) < 1:
            raise ValueError(f"A must be a nonempty 2-d array, got shape {A.shape}")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def _vector(self, v, name):
        v = np.array(v, dtype=np.float64).reshape(-1)
        if v.shape[0] != self.m:
            raise ValueError(f"{name} must have {self.m} entries, got {v.shape[0]}")
        v.setflags(write=False)
        return v


@dataclass(frozen=True, eq=False)
class RidgeLSProblem(_DataProblem):
    """``(1/m) sum (y_i - A_i x)^2 + (mu/2) |x|^2``."""

    y: np.ndarray = None
    mu_reg: float = DEFAULT_MU
    kind = "ridge_ls"

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "y", self._vector(self.y, "y"))
        if not self.mu_reg >= 0:
            raise ValueError("ridge weight must be nonnegative")

    def value(self, x):
        r = self.y - self.A @ x
        return float(r @ r / self.m + 0.5 * self.mu_reg * (x @ x))

    def grad(self, x):
        return (2.0 / self.m) * (self.A.T @ (self.A @ x - self.y)) + self.mu_reg * x

    @cached_property
    def L(self) -> float:
        return 2.0 * _lambda_max_ata(self.A) / self.m + self.mu_reg

    @cached_property
    def mu(self) -> float:
        return 2.0 * _lambda_min_ata(self.A) / self.m + self.mu_reg

    @property
    def zeta(self) -> float:
        return self.mu


@dataclass(frozen=True, eq=False)
class LogisticProblem(_DataProblem):
    """``(1/m) sum ln(1 + exp(-y_i A_i x)) + (mu/2) |x|^2`` with labels in {-1, +1}."""

    y: np.ndarray = None
    mu_reg: float = DEFAULT_MU
    kind = "logistic"

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "y", self._vector(self.y, "y"))
        if not np.all(np.abs(self.y) == 1.0):
            raise ValueError("labels must be -1 or +1")
        if not self.mu_reg > 0:
            raise ValueError("ridge weight must be positive")

    def value(self, x):
        margins = self.y * (self.A @ x)
        return float(np.mean(np.logaddexp(0.0, -margins)) + 0.5 * self.mu_reg * (x @ x))

    def grad(self, x):
        margins = self.y * (self.A @ x)
        w = -self.y * _sigmoid(-margins)
        return self.A.T @ w / self.m + self.mu_reg * x

    @cached_property
    def L(self) -> float:
        # the sigmoid's derivative is at most 1/4
        return _lambda_max_ata(self.A) / (4.0 * self.m) + self.mu_reg

    @property
    def mu(self) -> float:
        return self.mu_reg

    @property
    def zeta(self) -> float:
        return self.mu_reg


@dataclass(frozen=True, eq=False)
class PLLeastSquares(_DataProblem):
    """``(1/2) |A x - b|^2`` with more unknowns than rows; PL but not strongly convex."""

    b: np.ndarray = None
    kind = "pl_ls"

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "b", self._vector(self.b, "b"))
        if self.dim <= self.m:
            raise ValueError(f"need d > m, got m={self.m}, d={self.dim}")
        eigs = np.linalg.eigvalsh(self.A @ self.A.T)
        if not eigs[0] > 1e-12 * max(eigs[-1], 1.0):
            raise ValueError("A A^T is not positive definite")

    def value(self, x):
        r = self.A @ x - self.b
        return float(0.5 * (r @ r))

    def grad(self, x):
        return self.A.T @ (self.A @ x - self.b)

    @cached_property
    def L(self) -> float:
        return _lambda_max_ata(self.A)

    @property
    def mu(self) -> float:
        return 0.0

    @cached_property
    def zeta(self) -> float:
        return float(np.linalg.eigvalsh(self.A @ self.A.T)[0])


@dataclass(frozen=True, eq=False)
class QuadraticProblem:
    """``(1/2) (x - c)^T H (x - c)`` with symmetric positive definite ``H``."""

    H: np.ndarray
    c: np.ndarray
    kind = "quadratic"
    seed = None

    def __post_init__(self):
        H = np.atleast_2d(np.array(self.H, dtype=np.float64))
        c = np.array(self.c, dtype=np.float64).reshape(-1)
        if H.shape != (c.shape[0], c.shape[0]) or not np.allclose(H, H.T):
            raise ValueError("H must be symmetric and match c")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "c", c)

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    def value(self, x):
        r = x - self.c
        return float(0.5 * r @ (self.H @ r))

    def grad(self, x):
        return self.H @ (x - self.c)

    @cached_property
    def _eigs(self):
        return np.linalg.eigvalsh(self.H)

    @property
    def L(self) -> float:
        return float(self._eigs[-1])

    @property
    def mu(self) -> float:
        return float(self._eigs[0])

    @property
    def zeta(self) -> float:
        return self.mu


PROBLEM_KINDS = {
    "ridge_ls": RidgeLSProblem,
    "logistic": LogisticProblem,
    "pl_ls": PLLeastSquares,
}


def gen_regression_data(m: int, d: int, seed: int, mu_reg: float = DEFAULT_MU) -> RidgeLSProblem:
    """Gaussian rows, targets ``A_i . 1 + cos(A_i . 1) + xi_i`` with ``xi ~ N(0, 1/4)``."""
    if m < 1 or d < 1:
        raise ValueError("m and d must be positive")
    A = gaussian_stream(seed, 0, m * d).reshape(m, d)
    s = A.sum(axis=1)
    y = s + np.cos(s) + 0.5 * gaussian_stream(seed, 1, m)
    return RidgeLSProblem(A, y=y, mu_reg=mu_reg, seed=seed)


def gen_classification_data(m: int, d: int, seed: int, mu_reg: float = DEFAULT_MU) -> LogisticProblem:
    """First half labelled +1, second half -1; row i drawn from ``N(y_i 1, I)``."""
    if m < 2 or m % 2 or d < 1:
        raise ValueError(f"m must be even and positive, got m={m}")
    y = np.where(np.arange(m) < m // 2, 1.0, -1.0)
    A = y[:, None] + gaussian_stream(seed, 0, m * d).reshape(m, d)
    return LogisticProblem(A, y=y, mu_reg=mu_reg, seed=seed)


def gen_pl_data(m: int, d: int, seed: int) -> PLLeastSquares:
    """Standard Gaussian ``A`` (m x d, d > m) and ``b``; redrawn until ``A A^T`` is positive definite.

    Attempt ``k`` uses streams ``2k`` (A) and ``2k + 1`` (b).
    """
    if not d > m >= 1:
        raise ValueError(f"need d > m >= 1, got m={m}, d={d}")
    for attempt in range(PL_MAX_ATTEMPTS):
        A = gaussian_stream(seed, 2 * attempt, m * d).reshape(m, d)
        b = gaussian_stream(seed, 2 * attempt + 1, m)
        try:
            return PLLeastSquares(A, b=b, seed=seed)
        except ValueError:
            continue
    raise RuntimeError(f"no positive definite A A^T after {PL_MAX_ATTEMPTS} attempts")


@dataclass(frozen=True)
class ProblemConstants:
    """Certified constants and the reference minimizer.

    ``x_star_radius`` bounds the distance from ``x_star`` to the exact
    minimizer (the minimum-norm one for PL least squares).
    """

    L: float
    mu: float
    zeta: float
    x_star: np.ndarray
    f_star: float
    x_star_radius: float = 0.0
    method: str = ""

    @property
    def alpha(self) -> float:
        return 2.0 * self.mu * self.L / (self.mu + self.L) if self.mu > 0 else 0.0

    def as_meta(self) -> dict:
        return {
            "L": self.L,
            "mu": self.mu,
            "zeta": self.zeta,
            "alpha": self.alpha,
            "f_star": self.f_star,
            "x_star_norm": float(np.linalg.norm(self.x_star)),
            "x_star_radius": self.x_star_radius,
            "minimizer": self.method,
        }


def minimizer_pseudo_inverse(problem: PLLeastSquares) -> np.ndarray:
    """Minimum-norm minimizer ``A^T (A A^T)^{-1} b``."""
    A, b = problem.A, problem.b
    try:
        return A.T @ np.linalg.solve(A @ A.T, b)
    except np.linalg.LinAlgError as exc:
        raise ValueError("A A^T is singular") from exc


def reference_minimizer(
    oracle: GradientOracle, x0, tol: float = 1e-10, max_iters: int = 1_000_000
) -> tuple[np.ndarray, float]:
    """Delay-free gradient descent with step 1/L until the gradient norm is at most ``tol``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    x = np.array(x0, dtype=np.float64).reshape(-1)
    eta = 1.0 / oracle.L
    for _ in range(max_iters + 1):
        g = oracle.grad(x)
        if np.linalg.norm(g) <= tol:
            return x, oracle.value(x)
        x = x - eta * g
    raise ConvergenceError(
        f"gradient norm {np.linalg.norm(g):.3e} still above {tol:g} after {max_iters} iterations"
    )


def constants_of(problem, tol: float = 1e-10, x0=None) -> ProblemConstants:
    """L, mu, zeta and the reference minimizer of ``problem``."""
    if isinstance(problem, PLLeastSquares):
        x_star = minimizer_pseudo_inverse(problem)
        radius = float(np.linalg.norm(problem.A @ x_star - problem.b)) / math.sqrt(problem.zeta)
        method = "pseudo_inverse"
    else:
        start = np.zeros(problem.dim) if x0 is None else x0
        x_star, _ = reference_minimizer(problem, start, tol)
        gnorm = float(np.linalg.norm(problem.grad(x_star)))
        radius = gnorm / problem.mu if problem.mu > 0 else math.inf
        method = f"gradient_descent(tol={tol:g}, stop=grad_norm)"
    return ProblemConstants(
        L=float(problem.L),
        mu=float(problem.mu),
        zeta=float(problem.zeta),
        x_star=x_star,
        f_star=problem.value(x_star),
        x_star_radius=radius,
        method=method,
    )
