"""Command-line entry point: ``gen-data``, ``run``, ``verify-lemmas`` and ``sweep``.

Exit codes: 0 when every applicable check passes, 1 when a bound is
violated, 2 on configuration or I/O errors.
"""
from __future__ import annotations

import argparse
import ast
import csv
import io
import json
import math
import operator
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import constants as K
from .core import run as run_dgd
from .problems import (
    DEFAULT_MU,
    PLLeastSquares,
    constants_of,
    gen_classification_data,
    gen_pl_data,
    gen_regression_data,
)
from .serialize import format_float, load_dataset, save_dataset, write_trace_csv
from .verify import (
    ViolationReport,
    check_deviation,
    check_pl,
    check_thm15,
    check_thm21,
    condition_221,
    lemma21_sweep,
    lemma22_oracle,
    LemmaInstance,
    log_error_metrics,
    monitor_prop21,
    monotonicity_probe,
    random_lemma_instance,
    slope_fit,
    thm15_bound,
)

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2
ITERS_PER_TAU = 200
DEFAULT_SHAPES = {"ridge_ls": (1000, 10), "logistic": (1000, 10), "pl_ls": (6, 15)}
GENERATORS = {
    "ridge_ls": lambda m, d, seed, mu: gen_regression_data(m, d, seed, mu),
    "logistic": lambda m, d, seed, mu: gen_classification_data(m, d, seed, mu),
    "pl_ls": lambda m, d, seed, mu: gen_pl_data(m, d, seed),
}
SUMMARY_COLUMNS = (
    "problem", "seed", "tau", "eta_expr", "eta", "admissible", "metric", "slope", "r_squared",
    "fit_points", "thm_violations", "prop21_violations", "deviation_violations", "pl_violations",
    "status", "error",
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "ridge_ls"
    m: int | None = None
    d: int | None = None
    seed: int = 0
    tau: int = 5
    eta: str = "max"
    q: float = 1.0
    max_iters: int | None = None
    tol: float = 1e-10
    mu_reg: float = DEFAULT_MU
    x0: float = 0.0
    data: str | None = None
    out: str | None = None

    def __post_init__(self):
        if self.problem not in GENERATORS:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {sorted(GENERATORS)}")
        if self.tau < 1:
            raise ConfigError("tau must be at least 1")
        if not self.q > 0:
            raise ConfigError("q must be positive")
        if self.max_iters is not None and self.max_iters < self.tau:
            raise ConfigError("iterations must be at least tau")

    @property
    def shape(self) -> tuple[int, int]:
        m0, d0 = DEFAULT_SHAPES[self.problem]
        return (self.m or m0, self.d or d0)

    @property
    def iterations(self) -> int:
        return self.max_iters if self.max_iters is not None else ITERS_PER_TAU * self.tau


# --- step-size expressions -----------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def eval_eta(expr: str, names: dict[str, float]) -> float:
    """Evaluate an arithmetic step-size expression such as ``0.6/(L*tau)``.

    Only numbers, the names in ``names`` and ``+ - * / **`` are allowed.
    """
    try:
        tree = ast.parse(expr.strip(), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"bad eta expression {expr!r}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id not in names:
                raise ConfigError(f"unknown name {node.id!r} in eta expression; allowed: {sorted(names)}")
            return float(names[node.id])
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        raise ConfigError(f"unsupported syntax in eta expression {expr!r}")

    try:
        value = ev(tree)
    except ZeroDivisionError as exc:
        raise ConfigError(f"division by zero in eta expression {expr!r}") from exc
    if not (math.isfinite(value) and value > 0):
        raise ConfigError(f"eta expression {expr!r} gave non-positive or non-finite {value}")
    return value


def admissible_max(consts, tau: int, q: float) -> float:
    """Theorem step-size limit for the measured constants (strongly convex first, else PL)."""
    if consts.mu > 0:
        return K._max_step_sc(consts.L, consts.alpha, tau, q)
    return K._max_step_pl(consts.L, consts.zeta, tau)


def eta_names(consts, tau: int, q: float) -> dict[str, float]:
    return {
        "L": consts.L, "tau": tau, "mu": consts.mu, "zeta": consts.zeta, "alpha": consts.alpha,
        "q": q, "C": K.c_tau(tau), "D": K.d_tau(tau), "max": admissible_max(consts, tau, q),
    }


# --- commands --------------------------------------------------------------


def _make_problem(cfg: ExperimentConfig):
    if cfg.data:
        problem = load_dataset(cfg.data)
        if problem.kind != cfg.problem:
            raise ConfigError(f"dataset holds {problem.kind!r}, config asks for {cfg.problem!r}")
        return problem
    m, d = cfg.shape
    return GENERATORS[cfg.problem](m, d, cfg.seed, cfg.mu_reg)


def cmd_gen_data(cfg: ExperimentConfig) -> Path:
    if not cfg.out:
        raise ConfigError("--out is required")
    problem = _make_problem(replace(cfg, data=None))
    meta = {"L": problem.L, "mu": problem.mu, "zeta": problem.zeta}
    if isinstance(problem, PLLeastSquares):
        meta["lambda_min_AAT"] = problem.zeta
    return save_dataset(problem, cfg.out, meta)


def _theorem_reports(trace, consts, cfg: ExperimentConfig, eta: float) -> list[ViolationReport]:
    tau, q = cfg.tau, cfg.q
    reports = []
    if consts.mu > 0:
        reports.append(check_thm15(trace, consts.L, consts.alpha, tau, eta, q))
        reports.append(check_thm21(trace, consts.L, consts.alpha, eta, q, tau=tau))
        reports.append(monitor_prop21(trace, consts.alpha, eta, q, consts.L, tau))
    reports.append(check_deviation(trace, eta, tau))
    reports.append(check_pl(trace, consts.zeta, eta, tau, L=consts.L))
    return reports


def _derived_columns(trace, consts, cfg: ExperimentConfig, eta: float):
    n, tau = len(trace), cfg.tau
    logs = log_error_metrics(trace)
    e_col = np.full(n, np.nan)
    e_col[tau: tau + logs.e.shape[0]] = logs.e
    if consts.mu > 0:
        bound = thm15_bound(trace.t, trace.dist[0], consts.L, consts.alpha, tau, eta, cfg.q)
    else:
        bound = np.full(n, np.nan)
        bound[tau:] = (1.0 - eta * consts.zeta) ** (trace.t[tau:] - tau) * trace.cost_gap[tau]
    return logs, {"E_t": logs.E, "e_t": e_col, "bound": bound}


def execute(cfg: ExperimentConfig, problem=None, consts=None):
    """Run one configuration; returns ``(trace, reports, logs, columns)``."""
    problem = _make_problem(cfg) if problem is None else problem
    consts = constants_of(problem, cfg.tol) if consts is None else consts
    eta = eval_eta(cfg.eta, eta_names(consts, cfg.tau, cfg.q))
    meta = {
        "problem": problem.kind,
        "seed": problem.seed,
        "m": problem.m,
        "d": problem.dim,
        "eta_expr": cfg.eta,
        "q": cfg.q,
        "x0": cfg.x0,
        "tol": cfg.tol,
        "admissible_eta": admissible_max(consts, cfg.tau, cfg.q),
        "iters_rule": "explicit" if cfg.max_iters is not None else f"{ITERS_PER_TAU}*tau",
        **consts.as_meta(),
    }
    if cfg.data:
        meta["data"] = str(cfg.data)
    x0 = np.full(problem.dim, float(cfg.x0))
    trace = run_dgd(problem, x0, eta, cfg.tau, cfg.iterations, consts.x_star, consts.f_star, meta=meta)
    reports = _theorem_reports(trace, consts, cfg, eta)
    logs, cols = _derived_columns(trace, consts, cfg, eta)
    if logs.e.shape[0] >= 2:
        probe = monotonicity_probe(logs.e, start=cfg.tau, name="monotone_e_t")
        probe.details["informational"] = True
        reports.append(probe)
    return trace, reports, logs, cols


def _exit_code(reports) -> int:
    failing = [r for r in reports if not r.details.get("informational") and r.status == "fail"]
    return EXIT_VIOLATION if failing else EXIT_OK


def report_text(reports) -> str:
    return "".join(r.to_line() + "\n" for r in reports)


def report_jsonl(reports) -> str:
    return "".join(json.dumps(r.to_record(), sort_keys=True) + "\n" for r in reports)


def cmd_run(cfg: ExperimentConfig, stream=None) -> int:
    if not cfg.out:
        raise ConfigError("--out is required")
    trace, reports, _, cols = execute(cfg)
    out = Path(cfg.out)
    write_trace_csv(trace, out, cols)
    out.with_name(out.name + ".report.jsonl").write_text(report_jsonl(reports), encoding="utf-8")
    (stream or sys.stdout).write(report_text(reports))
    return _exit_code(reports)


def lemma_battery(instances: int = 1000, horizon: int = 200, seed: int = 0,
                  j_half: float | None = None, grid_step: float = 1e-3) -> list[tuple[ViolationReport, bool]]:
    """Lemma checks as ``(report, expected_to_pass)`` pairs."""
    out = []
    override = None if j_half is None else {0.5: j_half}
    out.append((lemma21_sweep(x_grid_step=grid_step, j_override=override), True))
    probe = lemma21_sweep([0.5], grid_step, j_override=1.25, include_limit=False)
    probe.inequality = "lemma21_tightness[n=1/2,J=1.25]"
    out.append((probe, False))
    eq = ViolationReport("lemma21_equality[n=1,x=0.2]")
    eq._absorb([(1.0, 0.2)], [abs(1.0 / (1.0 - 0.2) - (1.0 + 1.25 * 0.2))], [0.0], [1.0], 1e-12)
    out.append((eq, True))
    rng = np.random.default_rng(seed)
    batch = ViolationReport("lemma22")
    worst_rel = 0.0
    for _ in range(instances):
        inst = random_lemma_instance(rng, horizon)
        rep = lemma22_oracle(inst, horizon)
        worst_rel = max(worst_rel, rep.details["max_expansion_relerr"])
        batch.merge(rep)
    batch.details["instances"] = instances
    batch.details["max_expansion_relerr"] = worst_rel
    out.append((batch, True))
    zero = ViolationReport("lemma22[delta=0]")
    for _ in range(max(instances // 10, 1)):
        inst = random_lemma_instance(rng, horizon)
        inst = LemmaInstance(inst.c, 0.0, inst.Q, inst.tau, inst.b, inst.a0)
        assert condition_221(inst.c, inst.delta, inst.Q, inst.tau)
        zero.merge(lemma22_oracle(inst, horizon))
    out.append((zero, True))
    return out


def cmd_verify_lemmas(instances: int = 1000, horizon: int = 200, seed: int = 0,
                      j_half: float | None = None, stream=None) -> int:
    stream = stream or sys.stdout
    code = EXIT_OK
    for report, expect_pass in lemma_battery(instances, horizon, seed, j_half):
        ok = report.passed == expect_pass
        suffix = "" if expect_pass else f" expected=fail outcome={'ok' if ok else 'unexpected'}"
        stream.write(report.to_line() + suffix + "\n")
        if not ok:
            code = EXIT_VIOLATION
            for v in report.violations[:3]:
                stream.write(f"  counterexample at={v.at!r} lhs={v.lhs!r} rhs={v.rhs!r}\n")
    return code


def _sweep_cell(args):
    cfg, problem, consts = args
    row = {"problem": cfg.problem, "seed": cfg.seed, "tau": cfg.tau, "eta_expr": cfg.eta}
    try:
        trace, reports, logs, _ = execute(cfg, problem, consts)
        by = {r.inequality: r for r in reports}
        eta = trace.eta
        row["eta"] = eta
        row["admissible"] = eta <= admissible_max(consts, cfg.tau, cfg.q)
        if consts.mu > 0:
            metric, seq, t0 = "E_t", logs.E, 0
        else:
            metric, seq, t0 = "e_t", logs.e, cfg.tau
        row["metric"] = metric
        row["fit_points"] = int(seq.shape[0])
        try:
            row["slope"], row["r_squared"] = slope_fit(seq, 0.5, t0)
        except ValueError:
            row["slope"] = row["r_squared"] = math.nan
        thm = [by[k] for k in ("thm11", "thm15", "thm21") if k in by]
        row["thm_violations"] = sum(len(r.violations) for r in thm) if any(r.applicable for r in thm) else "n/a"
        row["prop21_violations"] = len(by["prop21"].violations) if "prop21" in by else "n/a"
        row["deviation_violations"] = len(by["deviation"].violations)
        row["pl_violations"] = len(by["pl"].violations) if by["pl"].applicable else "n/a"
        row["status"] = "fail" if _exit_code(reports) else "pass"
        row["error"] = ""
    except Exception as exc:  # one bad cell must not stop the sweep
        row.update(status="error", error=f"{type(exc).__name__}: {exc}")
    return row


def cmd_sweep(cfg: ExperimentConfig, taus, etas, jobs: int = 1) -> int:
    if not taus or not etas:
        raise ConfigError("sweep grid is empty")
    if not cfg.out:
        raise ConfigError("--out is required")
    problem = _make_problem(cfg)
    consts = constants_of(problem, cfg.tol)
    cells = [(replace(cfg, tau=int(t), eta=str(e)), problem, consts) for t in taus for e in etas]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(c) for c in cells]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for row in rows:
        writer.writerow([_cell_text(row.get(k, "")) for k in SUMMARY_COLUMNS])
    Path(cfg.out).write_text(buf.getvalue(), encoding="utf-8")
    if any(r["status"] == "error" for r in rows):
        return EXIT_CONFIG
    return EXIT_VIOLATION if any(r["status"] == "fail" for r in rows) else EXIT_OK


def _cell_text(v) -> str:
    if isinstance(v, bool) or v is None:
        return str(v).lower() if v is not None else ""
    if isinstance(v, float):
        return format_float(v)
    return str(v)


# --- argument parsing -----------------------------------------------------


def _common(p: argparse.ArgumentParser):
    p.add_argument("--problem", default="ridge_ls", choices=sorted(GENERATORS))
    p.add_argument("--m", type=int, default=None, help="number of data rows")
    p.add_argument("--d", type=int, default=None, help="dimension")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mu", type=float, default=DEFAULT_MU, dest="mu_reg", help="ridge weight")
    p.add_argument("--out", required=True)


def _run_flags(p: argparse.ArgumentParser):
    p.add_argument("--eta", default="max",
                   help="step size: number or expression in L, tau, mu, zeta, alpha, q, C, D, max")
    p.add_argument("--q", type=float, default=1.0)
    p.add_argument("--iters", type=int, default=None, dest="max_iters", help="default 200*tau")
    p.add_argument("--tol", type=float, default=1e-10, help="gradient-norm tolerance of the reference minimizer")
    p.add_argument("--x0", type=float, default=0.0, help="constant fill of the initial point")
    p.add_argument("--data", default=None, help="dataset file written by gen-data")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="delayed-gd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a seeded dataset")
    _common(p)

    p = sub.add_parser("run", help="run delayed gradient descent and check the bounds")
    _common(p)
    _run_flags(p)
    p.add_argument("--tau", type=int, default=5)

    p = sub.add_parser("sweep", help="grid over delays and step sizes")
    _common(p)
    _run_flags(p)
    p.add_argument("--tau", type=int, nargs="+", default=[5, 10, 20, 100], dest="taus")
    p.add_argument("--etas", nargs="+", default=["0.1/tau", "0.2/tau", "0.3/tau"])
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("verify-lemmas", help="sweep and randomized lemma oracles")
    p.add_argument("--instances", type=int, default=1000)
    p.add_argument("--horizon", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--j-half", type=float, default=None, help="override J_{1/2} (tightness probe)")
    return parser


def _config(ns, **over) -> ExperimentConfig:
    fields = set(ExperimentConfig.__dataclass_fields__)
    kw = {k: v for k, v in vars(ns).items() if k in fields}
    kw.update(over)
    return ExperimentConfig(**kw)


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        if ns.command == "gen-data":
            path = cmd_gen_data(_config(ns))
            print(path)
            return EXIT_OK
        if ns.command == "run":
            return cmd_run(_config(ns))
        if ns.command == "sweep":
            return cmd_sweep(_config(ns, tau=min(ns.taus) if ns.taus else 1), ns.taus, ns.etas, ns.jobs)
        return cmd_verify_lemmas(ns.instances, ns.horizon, ns.seed, ns.j_half)
    except (ConfigError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
