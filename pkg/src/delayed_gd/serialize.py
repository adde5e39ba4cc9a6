"""Dataset files and CSV traces.

Datasets are single-line JSON documents tagged ``delayed-gd-dataset`` with a
version number; ``A`` is stored row-major. Floats are written with ``repr``
so every value round-trips exactly.

Trace CSVs start with one ``# meta: {json}`` comment line followed by a
header row and one row per iteration.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .core import TRACE_COLUMNS, RunTrace
from .problems import PROBLEM_KINDS, LogisticProblem, PLLeastSquares, RidgeLSProblem

__all__ = [
    "DATASET_FORMAT",
    "DATASET_VERSION",
    "CSV_COLUMNS",
    "dataset_to_dict",
    "dataset_from_dict",
    "save_dataset",
    "load_dataset",
    "trace_to_csv",
    "trace_from_csv",
    "write_trace_csv",
    "read_trace_csv",
    "format_float",
]

DATASET_FORMAT = "delayed-gd-dataset"
DATASET_VERSION = 1
CSV_COLUMNS = TRACE_COLUMNS + ("E_t", "e_t", "bound")


def format_float(v) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def dataset_to_dict(problem, meta: dict | None = None) -> dict:
    if isinstance(problem, PLLeastSquares):
        target, mu_reg = problem.b, None
    elif isinstance(problem, (RidgeLSProblem, LogisticProblem)):
        target, mu_reg = problem.y, problem.mu_reg
    else:
        raise TypeError(f"cannot serialize {type(problem).__name__}")
    doc = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "problem": problem.kind,
        "m": problem.m,
        "d": problem.dim,
        "seed": problem.seed,
        "A": [float(v) for v in problem.A.reshape(-1)],
        "target": [float(v) for v in target],
        "meta": meta or {},
    }
    if mu_reg is not None:
        doc["mu_reg"] = float(mu_reg)
    return doc


def dataset_from_dict(doc: dict):
    if doc.get("format") != DATASET_FORMAT:
        raise ValueError("not a delayed-gd dataset")
    if doc.get("version") != DATASET_VERSION:
        raise ValueError(f"unsupported dataset version {doc.get('version')!r}")
    kind = doc["problem"]
    if kind not in PROBLEM_KINDS:
        raise ValueError(f"unknown problem kind {kind!r}")
    m, d = int(doc["m"]), int(doc["d"])
    A = np.array(doc["A"], dtype=np.float64)
    if A.shape[0] != m * d:
        raise ValueError(f"A has {A.shape[0]} entries, expected {m * d}")
    A = A.reshape(m, d)
    target = np.array(doc["target"], dtype=np.float64)
    seed = doc.get("seed")
    if kind == "pl_ls":
        return PLLeastSquares(A, b=target, seed=seed)
    return PROBLEM_KINDS[kind](A, y=target, mu_reg=float(doc["mu_reg"]), seed=seed)


def save_dataset(problem, path, meta: dict | None = None) -> Path:
    path = Path(path)
    text = json.dumps(dataset_to_dict(problem, meta), sort_keys=True, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def load_dataset(path):
    with open(path, encoding="utf-8") as fh:
        return dataset_from_dict(json.load(fh))


def trace_to_csv(trace: RunTrace, extra: dict[str, np.ndarray] | None = None) -> str:
    """Serialize a trace; ``extra`` supplies the E_t, e_t and bound columns (NaN when absent)."""
    n = len(trace)
    extra = extra or {}
    cols = dict(trace.columns())
    for name in ("E_t", "e_t", "bound"):
        col = np.full(n, np.nan)
        if name in extra:
            v = np.asarray(extra[name], dtype=float)
            col[: v.shape[0]] = v
        cols[name] = col
    buf = io.StringIO()
    buf.write("# meta: " + json.dumps(trace.meta, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for i in range(n):
        row = [str(int(cols["t"][i]))]
        row += [format_float(cols[name][i]) for name in CSV_COLUMNS[1:]]
        writer.writerow(row)
    return buf.getvalue()


def trace_from_csv(text: str) -> tuple[RunTrace, dict[str, np.ndarray]]:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# meta: "):
        raise ValueError("missing trace metadata line")
    meta = json.loads(lines[0][len("# meta: "):])
    reader = csv.reader(lines[1:])
    header = next(reader)
    if tuple(header) != CSV_COLUMNS:
        raise ValueError(f"unexpected header {header}")
    rows = [r for r in reader if r]
    data = {name: [] for name in CSV_COLUMNS}
    for r in rows:
        for name, v in zip(CSV_COLUMNS, r):
            data[name].append(v)
    cols = {name: np.array([float(v) for v in data[name]]) for name in CSV_COLUMNS}
    cols["t"] = np.array([int(v) for v in data["t"]], dtype=int)
    trace = RunTrace(meta=meta, **{name: cols[name] for name in TRACE_COLUMNS})
    return trace, {name: cols[name] for name in ("E_t", "e_t", "bound")}


def write_trace_csv(trace: RunTrace, path, extra=None) -> Path:
    path = Path(path)
    path.write_text(trace_to_csv(trace, extra), encoding="utf-8")
    return path


def read_trace_csv(path):
    return trace_from_csv(Path(path).read_text(encoding="utf-8"))
