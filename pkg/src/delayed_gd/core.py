"""Delayed gradient iteration, its shadow sequence, and run traces.

The iterate follows ``x_{t+1} = x_t - eta * grad f(x_{t-tau})`` once ``t >= tau``
and stays at ``x_0`` before that. The shadow sequence ``xs_{t+1} = xs_t - eta *
grad f(x_t)`` starts at ``x_0`` and consumes the gradient at the actual iterate.
Each point's gradient is evaluated once and cached next to it in the history.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Any, Protocol, runtime_checkable

import numpy as np

__all__ = [
    "GradientOracle",
    "DelayedRunState",
    "RunTrace",
    "init_state",
    "shadow_step",
    "dgd_step",
    "advance",
    "run",
    "finite_difference_grad",
    "UNIT_ROUNDOFF",
]

UNIT_ROUNDOFF = np.finfo(np.float64).eps / 2

TRACE_COLUMNS = ("t", "dist", "cost_gap", "grad_sq", "dev_sq", "shadow_sq", "fp_err")


@runtime_checkable
class GradientOracle(Protocol):
    """A differentiable cost with its exact gradient and smoothness constant."""

    dim: int
    L: float

    def value(self, x: np.ndarray) -> float: ...

    def grad(self, x: np.ndarray) -> np.ndarray: ...


def _as_point(x, dim: int | None = None) -> np.ndarray:
    x = np.array(x, dtype=np.float64, copy=True).reshape(-1)
    if dim is not None and x.shape[0] != dim:
        raise ValueError(f"dimension mismatch: point has {x.shape[0]} entries, oracle expects {dim}")
    return x


@dataclass
class DelayedRunState:
    """Mutable state of one delayed run.

    ``history`` holds ``x_{max(0, t-tau)} .. x_t`` and ``grads`` the matching
    gradients. ``fp_err`` is a running first-order bound on the rounding
    accumulated by the iterate and shadow updates together.
    """

    t: int
    x: np.ndarray
    x0: np.ndarray
    shadow: np.ndarray
    eta: float
    tau: int
    history: deque = field(repr=False)
    grads: deque = field(repr=False)
    shadow_t: int = 0
    fp_err: float = 0.0

    @property
    def grad(self) -> np.ndarray:
        """Gradient at the current iterate."""
        return self.grads[-1]


def init_state(oracle: GradientOracle, x0, eta: float, tau: int) -> DelayedRunState:
    if not eta > 0:
        raise ValueError(f"step size must be positive, got {eta}")
    if isinstance(tau, bool) or int(tau) != tau or tau < 0:
        raise ValueError(f"delay must be a nonnegative integer, got {tau!r}")
    tau = int(tau)
    x0 = _as_point(x0, oracle.dim)
    g0 = np.asarray(oracle.grad(x0), dtype=np.float64)
    return DelayedRunState(
        t=0,
        x=x0,
        x0=x0,
        shadow=x0.copy(),
        eta=float(eta),
        tau=tau,
        history=deque([x0], maxlen=tau + 1),
        grads=deque([g0], maxlen=tau + 1),
    )


def _check_dim(state: DelayedRunState, oracle: GradientOracle):
    if state.x.shape[0] != oracle.dim:
        raise ValueError(f"dimension mismatch: state has {state.x.shape[0]}, oracle expects {oracle.dim}")


def shadow_step(state: DelayedRunState, oracle: GradientOracle) -> DelayedRunState:
    """Advance the shadow by ``-eta * grad f(x_t)``; must precede ``dgd_step`` at the same t."""
    _check_dim(state, oracle)
    if state.shadow_t != state.t:
        raise RuntimeError("shadow already advanced for this iteration")
    step = state.eta * state.grads[-1]
    state.shadow = state.shadow - step
    state.fp_err += 2 * UNIT_ROUNDOFF * (np.linalg.norm(state.shadow) + np.linalg.norm(step))
    state.shadow_t += 1
    return state


def dgd_step(state: DelayedRunState, oracle: GradientOracle) -> DelayedRunState:
    """Produce ``x_{t+1}`` from the cached gradient at ``x_{t-tau}`` and rotate the history."""
    _check_dim(state, oracle)
    if state.shadow_t != state.t + 1:
        raise RuntimeError("shadow_step must run before dgd_step at each iteration")
    if state.t < state.tau:
        # warmup: the iterate is x_0 bit for bit, so its gradient is reused
        new_x, new_g = state.x0, state.grads[-1]
    else:
        step = state.eta * state.grads[0]
        new_x = state.x - step
        new_g = np.asarray(oracle.grad(new_x), dtype=np.float64)
        state.fp_err += 2 * UNIT_ROUNDOFF * (np.linalg.norm(new_x) + np.linalg.norm(step))
    state.history.append(new_x)
    state.grads.append(new_g)
    state.x = new_x
    state.t += 1
    return state


def advance(state: DelayedRunState, oracle: GradientOracle) -> DelayedRunState:
    return dgd_step(shadow_step(state, oracle), oracle)


@dataclass
class RunTrace:
    """Per-iteration diagnostics of a run; row ``t`` describes ``x_t`` before stepping.

    Columns: distance to the reference minimizer, cost gap, squared gradient
    norm at ``x_t``, squared iterate/shadow deviation, squared shadow distance,
    and the accumulated rounding bound.
    """

    t: np.ndarray
    dist: np.ndarray
    cost_gap: np.ndarray
    grad_sq: np.ndarray
    dev_sq: np.ndarray
    shadow_sq: np.ndarray
    fp_err: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def eta(self) -> float:
        return self.meta["eta"]

    @property
    def tau(self) -> int:
        return self.meta["tau"]

    def columns(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in TRACE_COLUMNS}

    def equals(self, other: "RunTrace") -> bool:
        """Bitwise equality of all columns and metadata."""
        if self.meta != other.meta or len(self) != len(other):
            return False
        return all(
            np.array_equal(a, b, equal_nan=True)
            for a, b in zip(self.columns().values(), other.columns().values())
        )


def run(
    oracle: GradientOracle,
    x0,
    eta: float,
    tau: int,
    max_iters: int,
    x_star,
    f_star: float,
    *,
    meta: dict | None = None,
) -> RunTrace:
    """Run ``max_iters`` delayed steps and record ``max_iters + 1`` rows.

    ``x_star`` and ``f_star`` are the reference minimizer and value; ``meta``
    is merged into the trace metadata (problem id, seed, minimizer radius...).
    """
    if max_iters < tau:
        raise ValueError(f"max_iters={max_iters} must be at least tau={tau}")
    state = init_state(oracle, x0, eta, tau)
    x_star = _as_point(x_star, oracle.dim)
    n = max_iters + 1
    cols = {name: np.empty(n) for name in TRACE_COLUMNS}
    cols["t"] = np.arange(n)
    for t in range(n):
        x, g = state.x, state.grad
        cols["dist"][t] = np.linalg.norm(x - x_star)
        cols["cost_gap"][t] = oracle.value(x) - f_star
        cols["grad_sq"][t] = g @ g
        dev = x - state.shadow
        cols["dev_sq"][t] = dev @ dev
        sh = state.shadow - x_star
        cols["shadow_sq"][t] = sh @ sh
        cols["fp_err"][t] = state.fp_err
        if t < max_iters:
            advance(state, oracle)
    info = {"eta": float(eta), "tau": int(tau), "max_iters": int(max_iters)}
    if meta:
        info.update(meta)
    return RunTrace(meta=info, **cols)


def finite_difference_grad(oracle: GradientOracle, x, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient, one coordinate at a time."""
    if not h > 0:
        raise ValueError("h must be positive")
    x = _as_point(x)
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (oracle.value(x + e) - oracle.value(x - e)) / (2 * h)
    return out
