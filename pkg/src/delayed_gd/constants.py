"""Closed-form constants and admissible step sizes for delayed gradient descent.

All values are plain ``float`` arithmetic. The three J constants are stored
as decimal literals and only defined on the half-integers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real

__all__ = [
    "HalfInteger",
    "StepSizePolicy",
    "j_constant",
    "alpha",
    "c_tau",
    "d_tau",
    "thm15_coefficient",
    "max_step_strongly_convex",
    "max_step_pl",
    "C_TAU_LIMIT",
]

J_HALF = 1.455
J_ONE = 1.25
J_TAIL = 1.2

#: limit of c_tau as the delay grows, 1/sqrt(6 * 1.2)
C_TAU_LIMIT = 1.0 / math.sqrt(7.2)


@dataclass(frozen=True)
class HalfInteger:
    """The number ``twice_value / 2``."""

    twice_value: int

    def __post_init__(self):
        if isinstance(self.twice_value, bool) or not isinstance(self.twice_value, int):
            raise TypeError("twice_value must be an int")
        if self.twice_value < 1:
            raise ValueError(f"half-integer must be >= 1/2, got {self.twice_value}/2")

    @classmethod
    def of(cls, n) -> "HalfInteger":
        """Coerce ``n`` (int, float, Fraction or HalfInteger) to a HalfInteger."""
        if isinstance(n, HalfInteger):
            return n
        if not isinstance(n, (Real, Fraction)) or isinstance(n, bool):
            raise TypeError(f"cannot interpret {n!r} as a half-integer")
        twice = Fraction(n) * 2
        if twice.denominator != 1:
            raise ValueError(f"{n!r} is not a multiple of 1/2")
        return cls(int(twice))

    @property
    def value(self) -> float:
        return self.twice_value / 2


def j_constant(n) -> float:
    """J_n: 1.455 at n=1/2, 1.25 at n=1 and 1.2 for every n >= 3/2."""
    twice = HalfInteger.of(n).twice_value
    if twice == 1:
        return J_HALF
    if twice == 2:
        return J_ONE
    return J_TAIL


def alpha(mu: float, L: float) -> float:
    """Harmonic-mean constant ``2 mu L / (mu + L)``; lies in [mu, L]."""
    if not (mu > 0 and L > 0):
        raise ValueError(f"mu and L must be positive (mu={mu}, L={L})")
    if mu > L:
        raise ValueError(f"strong convexity {mu} exceeds smoothness {L}")
    return 2.0 * mu * L / (mu + L)


def _check_tau(tau) -> int:
    if isinstance(tau, bool) or int(tau) != tau or tau < 1:
        raise ValueError(f"delay must be a positive integer, got {tau!r}")
    return int(tau)


def c_tau(tau: int) -> float:
    """Step-size constant of the q=1 strongly convex theorem: eta <= c_tau / (L tau)."""
    tau = _check_tau(tau)
    return tau / (math.sqrt(6.0 * j_constant(tau) * tau * tau + 1.0) + 1.0)


def d_tau(tau: int) -> float:
    """Numerator of the delay branch of the PL step bound."""
    tau = _check_tau(tau)
    return 2.0 * tau / (math.sqrt(1.0 + 4.0 * j_constant(tau) * tau * tau) + 1.0)


@dataclass(frozen=True)
class StepSizePolicy:
    """Problem constants plus the delay and Young split needed for step bounds.

    ``mu`` is the strong convexity modulus and ``zeta`` the PL constant; either
    may be zero when the corresponding theorem is not used.
    """

    L: float
    tau: int
    mu: float = 0.0
    zeta: float = 0.0
    q: float = 1.0

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")
        _check_tau(self.tau)
        if not self.q > 0:
            raise ValueError(f"q must be positive, got {self.q}")
        if self.mu < 0 or self.zeta < 0:
            raise ValueError("mu and zeta must be nonnegative")
        if self.mu > self.L:
            raise ValueError(f"mu={self.mu} exceeds L={self.L}")

    @property
    def alpha(self) -> float:
        return alpha(self.mu, self.L)


def _max_step_sc(L: float, alpha_: float, tau: int, q: float) -> float:
    first = L * (1.0 + q) / (5.0 * alpha_)
    second = tau / (math.sqrt(2.0 * j_constant(tau) * tau * tau * (2.0 + 1.0 / q) + 1.0) + 1.0)
    return min(first, second) / (tau * L)


def max_step_strongly_convex(policy: StepSizePolicy) -> float:
    """Largest eta for which the non-ergodic distance bound is guaranteed.

    Both branches of the minimum are evaluated; which one binds depends on q
    and on L / alpha.
    """
    if policy.mu <= 0:
        raise ValueError("strong convexity (mu > 0) is required")
    return _max_step_sc(policy.L, policy.alpha, policy.tau, policy.q)


def _max_step_pl(L: float, zeta: float, tau: int) -> float:
    return min(L / (5.0 * zeta), d_tau(tau)) / (L * tau)


def max_step_pl(policy: StepSizePolicy) -> float:
    """Largest eta for which the PL cost-gap envelope is guaranteed."""
    if policy.zeta <= 0:
        raise ValueError("PL constant zeta > 0 is required")
    return _max_step_pl(policy.L, policy.zeta, policy.tau)


def thm15_coefficient(L: float, tau: int, eta: float) -> float:
    """Prefactor ``1 / (1 - J_{tau/2} L tau eta)``; ``inf`` when the denominator is not positive."""
    denom = 1.0 - j_constant(HalfInteger(_check_tau(tau))) * L * tau * eta
    return 1.0 / denom if denom > 0 else math.inf
