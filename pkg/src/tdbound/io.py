"""Instance, model and results files, plus the benchmark harness.

Instance files are JSON lines. Line 1 is a header object, every later line
holds one arc's samples::

    {"format": "tdtsp-instance", "version": 1, "name": ..., "n": 3, "horizon": 480.0, ...}
    {"from": 0, "to": 1, "t": [0.0, 5.0, ...], "tau": [12.5, 12.5, ...]}

Floats are written with ``repr`` precision, so a save/load round trip is
exact and repeated saves are byte-identical.
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .bounds import Method, dev_percent, run_method
from .config import DEFAULT_STEP, MAX_EXACT_CUSTOMERS
from .errors import SchemaError, TdboundError
from .learn import EtaModel, MlpConfig, Zoning
from .tdgraph import TimeDependentGraph, TravelTimeFunction, validate_fifo

INSTANCE_FORMAT = "tdtsp-instance"
INSTANCE_VERSION = 1
MODEL_FORMAT = "tdbound-eta-model"
MODEL_VERSION = 1
RESULTS_HEADER = ["instance", "BK", "ub", "dev_pct", "time_s", "method",
                  "zeta_star", "omega_size", "bk_provenance"]
SUMMARY_HEADER = ["method", "count", "failed", "avg_dev_pct", "min_dev_pct", "max_dev_pct",
                  "avg_time_s", "min_time_s", "max_time_s"]
WORKERS_ENV = "TDBOUND_WORKERS"


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(", ", ": "), allow_nan=False)


# -- instances ---------------------------------------------------------------

def instance_lines(G: TimeDependentGraph) -> list[str]:
    header = {
        "format": INSTANCE_FORMAT,
        "version": INSTANCE_VERSION,
        "name": G.name,
        "n": G.n,
        "horizon": float(G.horizon),
        "coordinates": None if G.coordinates is None else G.coordinates.tolist(),
        "provenance": G.provenance,
    }
    lines = [_dumps(header)]
    for i in G.vertices:
        for j in G.vertices:
            if i != j:
                f = G.arcs[i, j]
                lines.append(_dumps({"from": i, "to": j, "t": f.times.tolist(),
                                     "tau": f.values.tolist()}))
    return lines


def save_instance(G: TimeDependentGraph, path):
    Path(path).write_text("\n".join(instance_lines(G)) + "\n", encoding="utf-8")


def _check_header(h, problems):
    if not isinstance(h, dict):
        problems.append("line 1: header must be a JSON object")
        return False
    if h.get("format") != INSTANCE_FORMAT:
        problems.append(f"line 1: format must be {INSTANCE_FORMAT!r}, got {h.get('format')!r}")
    if h.get("version") != INSTANCE_VERSION:
        problems.append(f"line 1: unsupported version {h.get('version')!r}")
    n = h.get("n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        problems.append(f"line 1: n must be a positive integer, got {n!r}")
    hz = h.get("horizon")
    if not isinstance(hz, (int, float)) or isinstance(hz, bool) or not hz > 0:
        problems.append(f"line 1: horizon must be a positive number, got {hz!r}")
    return not problems


def parse_instance(text: str, source: str = "<string>", default_name: str = "") -> TimeDependentGraph:
    """Parse instance text, collecting every problem before giving up."""
    lines = text.splitlines()
    problems = []
    if not lines:
        raise SchemaError(f"{source}: empty file", ["line 1: missing header"])
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{source}: malformed header", [f"line 1: {exc.msg}"]) from None
    if not _check_header(header, problems):
        raise SchemaError(f"{source}: invalid header", problems)
    n = header["n"]
    horizon = float(header["horizon"])

    arcs = {}
    non_fifo = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            problems.append(f"line {lineno}: {exc.msg}")
            continue
        if not isinstance(rec, dict) or set(rec) != {"from", "to", "t", "tau"}:
            problems.append(f"line {lineno}: arc record needs exactly the keys from, to, t, tau")
            continue
        i, j = rec["from"], rec["to"]
        if not (isinstance(i, int) and isinstance(j, int) and 0 <= i <= n and 0 <= j <= n and i != j):
            problems.append(f"line {lineno}: bad arc endpoints ({i!r}, {j!r})")
            continue
        if (i, j) in arcs:
            problems.append(f"line {lineno}: duplicate arc ({i}, {j})")
            continue
        try:
            f = TravelTimeFunction(np.array(rec["t"], dtype=float), np.array(rec["tau"], dtype=float))
        except (TdboundError, ValueError, TypeError) as exc:
            problems.append(f"line {lineno}: arc ({i}, {j}): {exc}")
            continue
        if f.horizon != horizon:
            problems.append(f"line {lineno}: arc ({i}, {j}) samples end at {f.horizon}, not the horizon {horizon}")
            continue
        bad = validate_fifo(f)
        if bad:
            non_fifo.append((i, j))
            problems.append(f"line {lineno}: arc ({i}, {j}) violates FIFO on segments {bad[:5]}")
            continue
        arcs[i, j] = f

    missing = [(i, j) for i in range(n + 1) for j in range(n + 1) if i != j and (i, j) not in arcs
               and (i, j) not in non_fifo]
    if missing:
        problems.append(f"missing arcs {missing[:10]}" + (" ..." if len(missing) > 10 else ""))
    if problems:
        what = f"FIFO violated on arcs {non_fifo}" if non_fifo else "invalid instance"
        raise SchemaError(f"{source}: {what}", problems)
    coords = header.get("coordinates")
    try:
        return TimeDependentGraph(n, arcs, horizon,
                                  None if coords is None else np.array(coords, dtype=float),
                                  name=header.get("name") or default_name, provenance=header.get("provenance"))
    except TdboundError as exc:
        raise SchemaError(f"{source}: {exc}", [f"line 1: {exc}"]) from None


def load_instance(path) -> TimeDependentGraph:
    path = Path(path)
    return parse_instance(path.read_text(encoding="utf-8"), str(path), path.stem)


def instance_paths(directory) -> list[Path]:
    return sorted(Path(directory).glob("*.jsonl"))


# -- models ------------------------------------------------------------------

def model_to_dict(model: EtaModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "K": model.K,
        "hidden": int(model.W1.shape[1]),
        "centroids": model.zoning.centroids.tolist(),
        "kmeans_trace": list(model.zoning.objective_trace),
        "kmeans_iterations": model.zoning.iterations,
        "W1": model.W1.tolist(),
        "b1": model.b1.tolist(),
        "W2": model.W2.tolist(),
        "b2": model.b2.tolist(),
        "per_zone_mae": model.per_zone_mae.tolist(),
        "per_zone_mean_error": model.per_zone_mean_error.tolist(),
        "per_zone_std_error": model.per_zone_std_error.tolist(),
        "seed": model.seed,
        "iterations": model.iterations,
        "final_loss": model.final_loss,
        "r2": None if math.isnan(model.r2) else model.r2,
        "config": asdict(model.config),
    }


def model_from_dict(d: dict) -> EtaModel:
    if d.get("format") != MODEL_FORMAT:
        raise SchemaError("not a model file", [f"format must be {MODEL_FORMAT!r}"])
    if d.get("version") != MODEL_VERSION:
        raise SchemaError("unsupported model version", [f"version {d.get('version')!r}"])
    try:
        K, h = int(d["K"]), int(d["hidden"])
        arr = {k: np.array(d[k], dtype=float) for k in
               ("centroids", "W1", "b1", "W2", "b2", "per_zone_mae",
                "per_zone_mean_error", "per_zone_std_error")}
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError("model file is incomplete", [str(exc)]) from None
    shapes = {"centroids": (K, 2), "W1": (K, h), "b1": (h,), "W2": (h, K), "b2": (K,),
              "per_zone_mae": (K,), "per_zone_mean_error": (K,), "per_zone_std_error": (K,)}
    wrong = [f"{k}: expected shape {s}, got {arr[k].shape}" for k, s in shapes.items()
             if arr[k].shape != s]
    if wrong:
        raise SchemaError("model arrays have the wrong shape", wrong)
    zoning = Zoning(arr["centroids"], tuple(d.get("kmeans_trace", ())), d.get("kmeans_iterations", 0))
    r2 = d.get("r2")
    return EtaModel(zoning, arr["W1"], arr["b1"], arr["W2"], arr["b2"], arr["per_zone_mae"],
                    arr["per_zone_mean_error"], arr["per_zone_std_error"],
                    seed=d.get("seed", 0), iterations=d.get("iterations", 0),
                    final_loss=d.get("final_loss", float("nan")),
                    r2=float("nan") if r2 is None else r2,
                    config=MlpConfig(**d.get("config", {})))


def save_model(model: EtaModel, path):
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n", encoding="utf-8")


def load_model(path) -> EtaModel:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: malformed model file", [f"line {exc.lineno}: {exc.msg}"]) from None
    return model_from_dict(d)


# -- results -----------------------------------------------------------------

@dataclass
class BenchmarkRecord:
    instance: str
    BK: float
    ub: float
    dev_pct: float
    time_s: float
    method: str
    zeta_star: float = None
    omega_size: int = None
    bk_provenance: str = "dp_exact"

    def row(self) -> list[str]:
        def fmt(x):
            return "" if x is None else repr(float(x)) if isinstance(x, float) else str(x)
        return [self.instance, fmt(self.BK), fmt(self.ub), f"{self.dev_pct:.2f}",
                f"{self.time_s:.4f}", self.method, fmt(self.zeta_star), fmt(self.omega_size),
                self.bk_provenance]


@dataclass
class Failure:
    instance: str
    method: str
    error: str


@dataclass
class ResultsTable:
    records: list
    failures: list

    def summary(self) -> list[dict]:
        methods = sorted({r.method for r in self.records} | {f.method for f in self.failures})
        out = []
        for m in methods:
            rows = [r for r in self.records if r.method == m]
            devs = [r.dev_pct for r in rows]
            times = [r.time_s for r in rows]
            stat = (lambda xs, fn: fn(xs) if xs else float("nan"))
            out.append({
                "method": m,
                "count": len(rows),
                "failed": sum(f.method == m for f in self.failures),
                "avg_dev_pct": stat(devs, np.mean), "min_dev_pct": stat(devs, min),
                "max_dev_pct": stat(devs, max),
                "avg_time_s": stat(times, np.mean), "min_time_s": stat(times, min),
                "max_time_s": stat(times, max),
            })
        return out


def summary_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.stem + "_summary" + out.suffix)


def write_results(table: ResultsTable, out):
    """Per-instance rows to ``out``; the summary goes to ``<stem>_summary.csv`` beside it."""
    out = Path(out)
    with out.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULTS_HEADER)
        for r in table.records:
            w.writerow(r.row())
    with summary_path(out).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for s in table.summary():
            w.writerow([s["method"], s["count"], s["failed"]]
                       + [f"{s[k]:.4f}" for k in SUMMARY_HEADER[3:]])
    if table.failures:
        with out.with_name(out.stem + "_failures" + out.suffix).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["instance", "method", "error"])
            for f in table.failures:
                w.writerow([f.instance, f.method, f.error])


def read_results(path) -> list[BenchmarkRecord]:
    """Parse a results CSV, checking the header and that each DEV matches BK and ub."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RESULTS_HEADER:
            raise SchemaError(f"{path}: unexpected header", [f"line 1: got {header}"])
        records, problems = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(RESULTS_HEADER):
                problems.append(f"line {lineno}: expected {len(RESULTS_HEADER)} fields")
                continue
            try:
                rec = BenchmarkRecord(row[0], float(row[1]), float(row[2]), float(row[3]),
                                      float(row[4]), row[5],
                                      float(row[6]) if row[6] else None,
                                      int(row[7]) if row[7] else None, row[8])
            except ValueError as exc:
                problems.append(f"line {lineno}: {exc}")
                continue
            if rec.bk_provenance not in ("dp_exact", "best_of_heuristics"):
                problems.append(f"line {lineno}: unknown bk_provenance {rec.bk_provenance!r}")
            if f"{dev_percent(rec.ub, rec.BK):.2f}" != row[3]:
                problems.append(f"line {lineno}: dev_pct {row[3]} does not match BK and ub")
            records.append(rec)
    if problems:
        raise SchemaError(f"{path}: invalid results", problems)
    return records


# -- benchmark ---------------------------------------------------------------

def _solve_instance(path, methods, model, step, rho):
    """Run every method on one instance; returns (name, results, failures, bk, provenance)."""
    from .oracle import solve_tdtsp_exact

    G = load_instance(path)
    results, failures = {}, []
    for m in methods:
        try:
            results[m] = run_method(G, m, model, step, rho)
        except TdboundError as exc:
            failures.append(Failure(G.name, m.value, f"{type(exc).__name__}: {exc}"))
    if G.n <= MAX_EXACT_CUSTOMERS:
        _, bk = solve_tdtsp_exact(G)
        prov = "dp_exact"
    elif results:
        bk = min(r.ub for r in results.values())
        prov = "best_of_heuristics"
    else:
        bk, prov = None, None
    return G.name, results, failures, bk, prov


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_benchmark(directory, methods, model=None, out=None, step: float = DEFAULT_STEP,
                  rho: float = None, workers: int = None) -> ResultsTable:
    """Solve every instance in ``directory`` with every method.

    With more than one method the best-known value is the DP optimum for
    ``n <= MAX_EXACT_CUSTOMERS``, otherwise the best upper bound found. A
    method or instance that fails is recorded and the run moves on. Rows are
    ordered by (instance, method).
    """
    methods = [Method.parse(m) if isinstance(m, str) else m for m in methods]
    paths = instance_paths(directory)
    workers = workers or worker_count()
    records, failures = [], []

    def collect(path, outcome):
        name, results, fails, bk, prov = outcome
        failures.extend(fails)
        for m, res in results.items():
            records.append(BenchmarkRecord(name, bk, res.ub, dev_percent(res.ub, bk), res.wall_time,
                                           m.value, res.zeta_star,
                                           res.omega_size if res.zeta_star is not None else None, prov))

    if workers > 1 and len(paths) > 1:
        with ProcessPoolExecutor(workers) as pool:
            futs = [(p, pool.submit(_solve_instance, p, methods, model, step, rho)) for p in paths]
            outcomes = []
            for p, fut in futs:
                try:
                    outcomes.append((p, fut.result()))
                except (TdboundError, OSError) as exc:
                    failures.extend(Failure(p.stem, m.value, f"{type(exc).__name__}: {exc}") for m in methods)
    else:
        outcomes = []
        for p in paths:
            try:
                outcomes.append((p, _solve_instance(p, methods, model, step, rho)))
            except (TdboundError, OSError) as exc:
                failures.extend(Failure(p.stem, m.value, f"{type(exc).__name__}: {exc}") for m in methods)
    for p, outcome in outcomes:
        collect(p, outcome)

    records.sort(key=lambda r: (r.instance, r.method))
    failures.sort(key=lambda f: (f.instance, f.method))
    table = ResultsTable(records, failures)
    if out is not None:
        write_results(table, out)
    return table

