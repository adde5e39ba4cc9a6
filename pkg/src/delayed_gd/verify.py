"""Inequality checkers over run traces and standalone lemma oracles.

Every check compares ``lhs <= rhs`` with a relative slack (default 1e-9) on
a per-row scale. Differences inside the slack are counted as warnings;
larger ones are violations.

Measured distances are only known up to the reference minimizer's certified
radius plus the rounding bound accumulated by the run (``x_star_radius`` in
the trace metadata and the ``fp_err`` column). A checker reports a violation
only when the inequality fails for every point consistent with those
uncertainties, so a run that has converged to the rounding floor cannot
produce spurious failures. With zero radius and zero rounding (synthetic
traces) the comparisons are exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, NamedTuple, Sequence

import numpy as np

from .constants import HalfInteger, _max_step_pl, _max_step_sc, j_constant, thm15_coefficient
from .core import UNIT_ROUNDOFF, RunTrace

__all__ = [
    "Violation",
    "ViolationReport",
    "LemmaInstance",
    "LogErrors",
    "window_grad_sum",
    "thm15_rate",
    "thm15_bound",
    "check_thm15",
    "check_thm21",
    "check_deviation",
    "check_pl",
    "monitor_prop21",
    "monotonicity_probe",
    "lemma21_sweep",
    "default_half_integers",
    "condition_221",
    "condition_221_shortcut",
    "random_lemma_instance",
    "lemma22_oracle",
    "lemma22_expansion",
    "log_error_metrics",
    "slope_fit",
]

DEFAULT_SLACK = 1e-9
FLOOR_FACTOR = 1e3


class Violation(NamedTuple):
    at: Any
    lhs: float
    rhs: float
    margin: float


@dataclass
class ViolationReport:
    """Outcome of one inequality over many points.

    ``worst_margin`` is the largest ``(lhs - rhs) / scale`` seen; it is
    negative when every point holds strictly.
    """

    inequality: str
    checked: int = 0
    violations: list[Violation] = field(default_factory=list)
    worst_margin: float = -math.inf
    worst_at: Any = None
    warnings: int = 0
    applicable: bool = True
    note: str = ""
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.applicable and not self.violations

    @property
    def status(self) -> str:
        if not self.applicable:
            return "n/a"
        return "pass" if not self.violations else "fail"

    def to_line(self) -> str:
        parts = [
            self.inequality,
            f"status={self.status}",
            f"checked={self.checked}",
            f"violations={len(self.violations)}",
            f"worst_margin={self.worst_margin!r}",
            f"worst_at={self.worst_at!r}",
            f"warnings={self.warnings}",
        ]
        if self.note:
            parts.append(f"note={self.note!r}")
        return " ".join(parts)

    def to_record(self) -> dict[str, Any]:
        rec = {
            "inequality": self.inequality,
            "status": self.status,
            "checked": self.checked,
            "violations": len(self.violations),
            "worst_margin": _finite_or_none(self.worst_margin),
            "worst_at": self.worst_at,
            "warnings": self.warnings,
            "first_violations": [
                {"at": v.at, "lhs": v.lhs, "rhs": v.rhs, "margin": v.margin}
                for v in self.violations[:5]
            ],
            "note": self.note,
        }
        rec.update({k: _finite_or_none(v) if isinstance(v, float) else v for k, v in self.details.items()})
        return rec

    def merge(self, other: "ViolationReport") -> "ViolationReport":
        """Fold another report of the same inequality into this one."""
        self.checked += other.checked
        self.violations.extend(other.violations)
        self.warnings += other.warnings
        self.applicable = self.applicable and other.applicable
        if other.worst_margin > self.worst_margin:
            self.worst_margin, self.worst_at = other.worst_margin, other.worst_at
        return self

    def _absorb(self, at, lhs, rhs, scale, slack):
        """Compare arrays elementwise and accumulate into the report."""
        lhs = np.asarray(lhs, dtype=float)
        rhs = np.asarray(rhs, dtype=float)
        scale = np.asarray(scale, dtype=float)
        diff = lhs - rhs
        tiny = np.finfo(float).tiny
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            margin = np.where(scale > 0, diff / np.maximum(scale, tiny), np.sign(diff))
        bad = ~(diff <= slack * scale)  # NaN counts as a violation
        self.checked += lhs.size
        self.warnings += int(np.count_nonzero((diff > 0) & ~bad))
        for i in np.flatnonzero(bad):
            self.violations.append(Violation(_py(at[i]), float(lhs[i]), float(rhs[i]), float(margin[i])))
        if lhs.size:
            finite = np.where(np.isnan(margin), np.inf, margin)
            k = int(np.argmax(finite))
            if finite[k] > self.worst_margin:
                self.worst_margin = float(finite[k])
                self.worst_at = _py(at[k])


def _py(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, tuple):
        return tuple(_py(x) for x in v)
    return v


def _finite_or_none(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _not_applicable(name: str, note: str) -> ViolationReport:
    return ViolationReport(name, applicable=False, note=note)


def _resolution(trace: RunTrace) -> np.ndarray:
    """Per-row uncertainty of measured points: minimizer radius plus accumulated rounding."""
    return float(trace.meta.get("x_star_radius", 0.0)) + np.asarray(trace.fp_err, dtype=float)


def _gap_uncertainty(trace: RunTrace) -> np.ndarray:
    delta = np.asarray(trace.fp_err, dtype=float)
    L = float(trace.meta.get("L", 0.0))
    f_star = abs(float(trace.meta.get("f_star", 0.0)))
    return (
        np.sqrt(trace.grad_sq) * delta
        + 0.5 * L * delta**2
        + 4 * UNIT_ROUNDOFF * (np.abs(trace.cost_gap) + f_star)
    )


def window_grad_sum(grad_sq: Sequence[float], tau: int) -> np.ndarray:
    """R(t): sum of ``grad_sq[j]`` over ``max(0, t - tau) <= j <= t - 1``; R(0) = 0.

    Summed window by window, not by differencing a cumulative sum, so small
    late terms keep full relative precision.
    """
    g = np.asarray(grad_sq, dtype=float)
    n = g.shape[0]
    out = np.zeros(n)
    if tau == 0 or n < 2:
        return out
    padded = np.concatenate([np.zeros(tau), g[:-1]])
    windows = np.lib.stride_tricks.sliding_window_view(padded, tau)
    out[1:] = windows[1:n].sum(axis=1)
    return out


def thm15_rate(alpha: float, eta: float, q: float = 1.0) -> float:
    """Per-step contraction factor of the distance bound, ``(1 - eta alpha / (1 + q))^(1/2)``."""
    return math.sqrt(1.0 - eta * alpha / (1.0 + q))


def thm15_bound(t, dist0: float, L: float, alpha: float, tau: int, eta: float, q: float = 1.0):
    """Right-hand side of the distance bound at iteration(s) ``t``."""
    coef = thm15_coefficient(L, tau, eta)
    base = 1.0 - eta * alpha / (1.0 + q)
    return coef * np.power(base, np.asarray(t, dtype=float) / 2.0) * dist0


def _sc_admissible(L, alpha, tau, eta, q) -> tuple[bool, str]:
    if alpha <= 0:
        return False, "strong convexity constant is zero"
    if tau < 1:
        return False, "delay must be at least 1"
    limit = _max_step_sc(L, alpha, tau, q)
    if eta > limit:
        return False, f"eta={eta!r} exceeds admissible {limit!r}"
    return True, ""


def check_thm15(trace: RunTrace, L: float, alpha: float, tau: int, eta: float, q: float = 1.0,
                slack: float = DEFAULT_SLACK) -> ViolationReport:
    """Pointwise ``|x_t - x*| <= coef * (1 - eta alpha/(1+q))^(t/2) |x_0 - x*|`` along the trace."""
    name = "thm15" if q != 1.0 else "thm11"
    ok, why = _sc_admissible(L, alpha, tau, eta, q)
    if not ok:
        return _not_applicable(name, why)
    rho = _resolution(trace)
    rhs = thm15_bound(trace.t, trace.dist[0] + rho[0], L, alpha, tau, eta, q)
    lhs = np.maximum(trace.dist - rho, 0.0)
    report = ViolationReport(name, details={"q": q, "coefficient": thm15_coefficient(L, tau, eta)})
    report._absorb(trace.t, lhs, rhs, rhs, slack)
    return report


def check_thm21(trace: RunTrace, L: float, alpha: float, eta: float, q: float = 1.0,
                tau: int | None = None, slack: float = DEFAULT_SLACK) -> ViolationReport:
    """Shadow bound ``|xs_t - x*|^2 <= (1 - alpha eta/(1+q))^t |x_0 - x*|^2``."""
    tau = trace.tau if tau is None else tau
    ok, why = _sc_admissible(L, alpha, tau, eta, q)
    if not ok:
        return _not_applicable("thm21", why)
    rho = _resolution(trace)
    base = 1.0 - alpha * eta / (1.0 + q)
    rhs = np.power(base, trace.t.astype(float)) * (trace.dist[0] + rho[0]) ** 2
    lhs = np.maximum(np.sqrt(trace.shadow_sq) - rho, 0.0) ** 2
    report = ViolationReport("thm21", details={"q": q})
    report._absorb(trace.t, lhs, rhs, rhs, slack)
    return report


def check_deviation(trace: RunTrace, eta: float, tau: int, slack: float = DEFAULT_SLACK) -> ViolationReport:
    """``|x_t - xs_t|^2 <= eta^2 tau R(t)``; holds for any step size."""
    R = window_grad_sum(trace.grad_sq, tau)
    rhs = eta * eta * tau * R
    lhs = np.maximum(np.sqrt(trace.dev_sq) - trace.fp_err, 0.0) ** 2
    report = ViolationReport("deviation")
    report._absorb(trace.t, lhs, rhs, rhs, slack)
    return report


def monitor_prop21(trace: RunTrace, alpha: float, eta: float, q: float, L: float, tau: int,
                   slack: float = DEFAULT_SLACK) -> ViolationReport:
    """Per-step shadow inequality, checked for every consecutive pair of rows.

    ``|xs_{t+1} - x*|^2 <= (1 - alpha eta/(1+q)) |xs_t - x*|^2 - (eta/(2L) - eta^2) |g_t|^2
    + eta^2 tau (alpha eta / q + 2 L eta) R(t)``. No step-size condition is needed.
    """
    n = len(trace)
    if n < 2:
        return ViolationReport("prop21")
    rho = _resolution(trace)
    s = np.sqrt(trace.shadow_sq)
    R = window_grad_sum(trace.grad_sq, tau)
    first = (1.0 - alpha * eta / (1.0 + q)) * (s[:-1] + rho[:-1]) ** 2
    second = -(eta / (2.0 * L) - eta * eta) * trace.grad_sq[:-1]
    third = eta * eta * tau * (alpha * eta / q + 2.0 * L * eta) * R[:-1]
    rhs = first + second + third
    lhs = np.maximum(s[1:] - rho[1:], 0.0) ** 2
    scale = np.abs(first) + np.abs(second) + np.abs(third)
    report = ViolationReport("prop21", details={"q": q})
    report._absorb(trace.t[:-1], lhs, rhs, scale, slack)
    return report


def check_pl(trace: RunTrace, zeta: float, eta: float, tau: int, L: float | None = None,
             slack: float = DEFAULT_SLACK) -> ViolationReport:
    """Envelope ``f(x_t) - f* <= (1 - eta zeta)^(t - tau) (f(x_tau) - f*)`` for ``t >= tau``.

    With ``tau = 0`` this is the classical PL descent envelope, admissible for
    ``eta <= 1/L``.
    """
    L = float(trace.meta["L"]) if L is None else L
    if not zeta > 0:
        return _not_applicable("pl", "PL constant is zero")
    limit = 1.0 / L if tau == 0 else _max_step_pl(L, zeta, tau)
    if eta > limit:
        return _not_applicable("pl", f"eta={eta!r} exceeds admissible {limit!r}")
    if len(trace) <= tau:
        return ViolationReport("pl")
    unc = _gap_uncertainty(trace)
    gap = trace.cost_gap
    k = (trace.t[tau:] - tau).astype(float)
    rhs = np.power(1.0 - eta * zeta, k) * (gap[tau] + unc[tau])
    lhs = gap[tau:] - unc[tau:]
    report = ViolationReport("pl")
    report._absorb(trace.t[tau:], lhs, rhs, np.maximum(rhs, 0.0), slack)
    return report


class LogErrors(NamedTuple):
    """Log distance ratio ``E[t]`` from t=0 and log cost-gap ratio ``e[i]`` at t = tau + i."""

    E: np.ndarray
    e: np.ndarray
    tau: int


def _cut(values: np.ndarray, floor: np.ndarray) -> int:
    below = np.flatnonzero(~(values > floor))
    return int(below[0]) if below.size else values.shape[0]


def log_error_metrics(trace: RunTrace, floor_factor: float = FLOOR_FACTOR) -> LogErrors:
    """``E_t = ln(|x_t - x*| / |x_0 - x*|)`` and ``e_t = ln(gap_t / gap_tau)``.

    Each sequence stops at the first row whose value is not above
    ``floor_factor`` times its measurement uncertainty (zero for exact
    traces, where only an exact zero truncates).
    """
    tau = trace.tau
    if not trace.dist[0] > 0:
        raise ValueError("x_0 coincides with the reference minimizer; log error undefined")
    nE = _cut(trace.dist, floor_factor * _resolution(trace))
    E = np.log(trace.dist[:nE] / trace.dist[0])
    if len(trace) <= tau:
        return LogErrors(E, np.empty(0), tau)
    gap = trace.cost_gap[tau:]
    if not gap[0] > 0:
        raise ValueError("cost gap at t = tau is not positive; log cost error undefined")
    ne = _cut(gap, floor_factor * _gap_uncertainty(trace)[tau:])
    return LogErrors(E, np.log(gap[:ne] / gap[0]), tau)


def monotonicity_probe(values: Sequence[float], start: int = 0, name: str = "monotone") -> ViolationReport:
    """Record every strict increase ``values[i+1] > values[i]``; ``at`` is ``start + i + 1``."""
    v = np.asarray(values, dtype=float)
    report = ViolationReport(name)
    if v.shape[0] < 2:
        return report
    at = np.arange(start + 1, start + v.shape[0])
    report._absorb(at, v[1:], v[:-1], np.zeros(v.shape[0] - 1), 0.0)
    return report


def slope_fit(seq: Sequence[float], tail_fraction: float = 0.5, t0: int = 0) -> tuple[float, float]:
    """Least-squares line through the last ``tail_fraction`` of ``seq``; returns ``(slope, r^2)``.

    ``r^2`` is NaN for a constant tail.
    """
    y = np.asarray(seq, dtype=float)
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    k = int(math.ceil(tail_fraction * y.shape[0]))
    if k < 10:
        raise ValueError(f"need at least 10 points in the tail window, got {k}")
    ty = y[-k:]
    tx = np.arange(y.shape[0] - k, y.shape[0], dtype=float) + t0
    xc = tx - tx.mean()
    yc = ty - ty.mean()
    slope = float(xc @ yc / (xc @ xc))
    ss_tot = float(yc @ yc)
    if ss_tot == 0.0:
        return slope, math.nan
    resid = yc - slope * xc
    return slope, 1.0 - float(resid @ resid) / ss_tot


# --- Lemma oracles ---------------------------------------------------------


def default_half_integers(max_n: float = 50) -> list[HalfInteger]:
    return [HalfInteger(k) for k in range(1, int(2 * max_n) + 1)]


def lemma21_sweep(n_set: Sequence | None = None, x_grid_step: float = 1e-3,
                  j_override: float | dict | None = None, include_limit: bool = True,
                  slack: float = DEFAULT_SLACK) -> ViolationReport:
    """``(1 - x/n)^(-n) <= 1 + J_n x`` for every n in ``n_set`` and x on a grid over (0, 1/5].

    ``j_override`` replaces J_n, either for every n (a float) or per n (a
    mapping from n to J); used by the tightness probes. With ``include_limit``
    the limiting form ``e^x <= 1 + J x`` is also checked using the large-n
    constant.
    """
    if not x_grid_step > 0:
        raise ValueError("grid step must be positive")
    n_set = default_half_integers() if n_set is None else [HalfInteger.of(n) for n in n_set]
    k = np.arange(1, int(math.floor(0.2 / x_grid_step + 1e-9)) + 1)
    xs = k * x_grid_step
    if xs[-1] < 0.2:
        xs = np.append(xs, 0.2)
    if j_override is None:
        table = {}
    elif isinstance(j_override, dict):
        table = {HalfInteger.of(k): float(v) for k, v in j_override.items()}
    else:
        table = {n: float(j_override) for n in n_set}
    name = "lemma21" if not table else "lemma21[J overridden]"
    report = ViolationReport(name, details={"grid_points": int(xs.shape[0])})
    for n in n_set:
        nv = n.value
        J = table.get(n, j_constant(n))
        lhs = np.exp(-nv * np.log1p(-xs / nv))
        rhs = 1.0 + J * xs
        report._absorb([(nv, float(x)) for x in xs], lhs, rhs, rhs, slack)
    if include_limit:
        J = float(j_override) if isinstance(j_override, (int, float)) else j_constant(HalfInteger(3))
        rhs = 1.0 + J * xs
        report._absorb([("inf", float(x)) for x in xs], np.exp(xs), rhs, rhs, slack)
    return report


def condition_221(c: float, delta: float, Q: float, tau: int) -> bool:
    """``sum_{k<j} c^k delta <= c^j Q`` for every j = 1..tau (all j evaluated)."""
    ok = True
    partial, cj = 0.0, 1.0
    for _ in range(tau):
        partial += cj * delta
        cj *= c
        ok &= partial <= cj * Q
    return bool(ok)


def condition_221_shortcut(c: float, delta: float, Q: float, tau: int) -> bool:
    """Same condition checked only at j = tau, where it is tightest for c in (0, 1)."""
    return sum(c**k for k in range(tau)) * delta <= c**tau * Q


@dataclass
class LemmaInstance:
    """Constants and forcing sequence of the sequential recursion."""

    c: float
    delta: float
    Q: float
    tau: int
    b: np.ndarray
    a0: float = 1.0

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        if not 0 < self.c < 1:
            raise ValueError("c must lie in (0, 1)")
        if self.delta < 0 or not self.Q > 0 or not self.a0 > 0 or self.tau < 1:
            raise ValueError("need delta >= 0, Q > 0, a0 > 0, tau >= 1")
        if np.any(self.b < 0):
            raise ValueError("b must be nonnegative")

    @property
    def satisfies_condition(self) -> bool:
        return condition_221(self.c, self.delta, self.Q, self.tau)


def random_lemma_instance(rng: np.random.Generator, horizon: int = 200, max_tau: int = 8) -> LemmaInstance:
    """Draw ``c, Q`` uniformly, then ``delta`` uniformly up to the largest value the condition allows."""
    tau = int(rng.integers(1, max_tau + 1))
    c = float(rng.uniform(0.05, 1.0))
    Q = float(rng.uniform(0.01, 1.0))
    delta_max = c**tau * Q / sum(c**k for k in range(tau))
    delta = float(rng.uniform(0.0, delta_max))
    b = rng.exponential(1.0, size=horizon + 1) * rng.uniform(0.0, 10.0)
    a0 = float(rng.uniform(0.1, 10.0))
    return LemmaInstance(c, delta, Q, tau, b, a0)


def _recursion(inst: LemmaInstance, horizon: int) -> np.ndarray:
    """a_0..a_{horizon+1} with equality in the recursion."""
    c, d, Q, tau, b = inst.c, inst.delta, inst.Q, inst.tau, inst.b
    a = np.empty(horizon + 2)
    a[0] = inst.a0
    for t in range(horizon + 1):
        lo = max(0, t - tau)
        a[t + 1] = c * a[t] + d * b[lo:t].sum() - Q * b[t]
    return a


def lemma22_expansion(inst: LemmaInstance, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form ``a_{t+1}`` for t = 0..horizon as combinations of ``a_0`` and ``b_0..b_t``.

    The coefficient of ``b_j`` depends only on the lag ``k = t - j``: for
    ``1 <= k <= tau`` it is ``sum_{i<k} c^i delta - c^k Q``, for ``k > tau`` it
    is ``c^(k - tau) (sum_{i<tau} c^i delta - c^tau Q)``, and ``b_t`` enters
    with ``-Q``. Returns ``(values, scales)``; ``scales`` sums the absolute terms.
    """
    c, d, Q, tau = inst.c, inst.delta, inst.Q, inst.tau
    b = inst.b[: horizon + 1]
    lags = np.arange(horizon + 1)
    geo = np.cumsum(c ** np.arange(tau)) * d  # geo[k-1] = sum_{i<k} c^i delta
    w = np.zeros(horizon + 1)
    near = (lags >= 1) & (lags <= tau)
    w[near] = geo[lags[near] - 1] - c ** lags[near] * Q
    far = lags > tau
    w[far] = c ** (lags[far] - tau) * (geo[tau - 1] - c**tau * Q)
    k = lags[:, None] - lags[None, :]
    W = np.where(k >= 1, w[np.clip(k, 0, horizon)], 0.0)
    lead = c ** (lags + 1.0) * inst.a0
    values = lead + W @ b - Q * b
    scales = lead + np.abs(W) @ b + Q * b
    return values, scales


def lemma22_oracle(inst: LemmaInstance, horizon: int = 200, slack: float = DEFAULT_SLACK,
                   expansion_tol: float = 1e-10) -> ViolationReport:
    """Worst-case recursion versus ``c^{t+1} a_0`` and versus the closed-form expansion.

    Raises ``ValueError`` if the instance does not satisfy the lemma's condition.
    """
    if not inst.satisfies_condition:
        raise ValueError("instance violates the lemma's hypothesis")
    if inst.b.shape[0] < horizon + 1:
        raise ValueError(f"b needs {horizon + 1} entries")
    a = _recursion(inst, horizon)
    ts = np.arange(horizon + 1)
    bound = inst.c ** (ts + 1.0) * inst.a0
    values, scales = lemma22_expansion(inst, horizon)
    rel = np.abs(values - a[1:]) / np.maximum(scales, np.finfo(float).tiny)
    report = ViolationReport("lemma22", details={"max_expansion_relerr": float(rel.max())})
    report._absorb(ts, a[1:], bound, scales, slack)
    bad = np.flatnonzero(rel > expansion_tol)
    for i in bad:
        report.violations.append(Violation(("expansion", int(i)), float(a[i + 1]), float(values[i]), float(rel[i])))
    return report
