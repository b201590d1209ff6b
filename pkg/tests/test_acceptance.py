"""Acceptance criteria 1-9.

Each test prints one line ``ACCEPTANCE <n>: PASS|FAIL - <details>``. Run
only this file with ``pytest tests/test_acceptance.py -v -s`` or directly
with ``python tests/test_acceptance.py``. Set ``TDBOUND_WORKERS`` to spread
instance-level work over processes.
"""
from __future__ import annotations

import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import random_fifo_graph  # noqa: E402
from test_lp import vertex_oracle  # noqa: E402

from tdbound.atsp import atsp_branch_and_bound, atsp_subtour_cuts, brute_force_atsp  # noqa: E402
from tdbound.bounds import (Discretization, dev_percent, htsp_baseline, mlpl_htsp,  # noqa: E402
                            pl_htsp)
from tdbound.fitlp import OmegaSelection, fit_auxiliary  # noqa: E402
from tdbound.generator import GeneratorConfig, generate_instance  # noqa: E402
from tdbound.io import (BenchmarkRecord, ResultsTable, load_instance, load_model,  # noqa: E402
                        read_results, save_instance, save_model, write_results)
from tdbound.learn import (kmeans_fit, make_labels, train_from_instances,  # noqa: E402
                           zone_counts)
from tdbound.lp import LinearProgram, solve_lp  # noqa: E402
from tdbound.oracle import brute_force_tdtsp, solve_tdtsp_exact  # noqa: E402
from tdbound.tdgraph import (SpeedProfile, TimeGrid, auxiliary_duration,  # noqa: E402
                             departure_times, igp_time, path_duration)

START = time.perf_counter()
BUDGET_S = 20 * 60
FAMILY = 7                  # city used for the quality and speed benchmarks
RESULTS = {}


def workers() -> int:
    return max(1, int(os.environ.get("TDBOUND_WORKERS", "1")))


def pmap(fn, items):
    items = list(items)
    if workers() > 1 and len(items) > 1:
        with ProcessPoolExecutor(workers()) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def report(n: int, ok: bool, detail: str):
    RESULTS[n] = ok
    line = f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    sys.__stdout__.write("\n" + line + "\n")
    sys.__stdout__.flush()
    return ok


@pytest.fixture(scope="module")
def family_model():
    """ETA model for FAMILY, trained on 200 exactly solved n=10 siblings."""
    train = [generate_instance(GeneratorConfig(n=10, seed=FAMILY, index=i, perturbation=0.3))
             for i in range(200)]
    return train_from_instances(train, 6, seed=0)


# -- 1 ----------------------------------------------------------------------

def _perfect_case(index):
    G = generate_instance(GeneratorConfig(n=10, periods=4, seed=31, index=index, perturbation=0.0))
    bp = np.array(G.provenance["profile_breakpoints"])
    covered = bool(np.all(np.isin(bp, Discretization(5, G.horizon).points)))
    res = pl_htsp(G)
    opt = solve_tdtsp_exact(G)[1]
    return covered, res.zeta_star, abs(res.ub - opt) / opt, res.wall_time


def test_1_perfect_fit_exactness():
    rows = pmap(_perfect_case, range(20))
    covered = all(r[0] for r in rows)
    zeta = max(r[1] for r in rows)
    dev = max(r[2] for r in rows)
    slowest = max(r[3] for r in rows)
    ok = covered and zeta <= 1e-6 and dev <= 1e-6 and slowest < 5.0
    report(1, ok, f"20 instances: max zeta*={zeta:.2e}, max |ub-opt|/opt={dev:.2e}, "
                  f"slowest PL-HTSP {slowest:.2f}s, breakpoints sampled={covered}")
    assert ok


# -- 2 ----------------------------------------------------------------------

def _soundness_family(seed):
    model = train_from_instances(
        [generate_instance(GeneratorConfig(n=8, seed=seed, index=1000 + k, perturbation=0.2))
         for k in range(40)], 6, seed=0)
    out = []
    for i in range(50):
        G = generate_instance(GeneratorConfig(n=6 + i % 5, seed=seed, index=i,
                                              perturbation=0.1 if i % 2 == 0 else 0.3))
        opt = solve_tdtsp_exact(G)[1]
        for res in (htsp_baseline(G), pl_htsp(G), mlpl_htsp(G, model)):
            out.append((G.name, res.method.value, res.ub - opt))
    return out


def test_2_soundness():
    rows = [r for fam in pmap(_soundness_family, range(2001, 2005)) for r in fam]
    bad = [r for r in rows if r[2] < -1e-9]
    worst = min(r[2] for r in rows)
    ok = not bad and len(rows) == 600
    report(2, ok, f"200 instances x 3 methods: {len(bad)} violations, min ub-opt={worst:.3g}")
    assert ok, bad[:5]


# -- 3 ----------------------------------------------------------------------

def _dp_vs_bf(seed):
    rng = np.random.default_rng([3, seed])
    G = random_fifo_graph(rng, 1 + seed % 8)
    return solve_tdtsp_exact(G)[1] == brute_force_tdtsp(G)[1]


def test_3_oracle_equivalence():
    tdtsp = pmap(_dp_vs_bf, range(300))
    rng = np.random.default_rng(33)
    atsp_ok = 0
    for _ in range(200):
        N = int(rng.integers(3, 10))
        c = rng.integers(1, 200, (N, N)).astype(float)
        bf = brute_force_atsp(c).cost
        atsp_ok += atsp_branch_and_bound(c).cost == bf and atsp_subtour_cuts(c).cost == bf
    ok = all(tdtsp) and atsp_ok == 200
    report(3, ok, f"DP = brute force on {sum(tdtsp)}/300 TDTSP instances; "
                  f"ATSP = brute force on {atsp_ok}/200 matrices")
    assert ok


# -- 4 ----------------------------------------------------------------------

def test_4_ranking_invariance():
    rng = np.random.default_rng(44)
    graphs = []
    for k in range(4):
        G = generate_instance(GeneratorConfig(n=10, seed=41, index=k, perturbation=0.3))
        sel = OmegaSelection.uniform(np.arange(0, 481, 10.0), G.vertices, G.horizon)
        graphs.append(fit_auxiliary(G, sel)[2])
    checked = violations = 0
    for p in range(1000):
        a = graphs[p % len(graphs)]
        n1 = a.n + 1
        paths = [list(rng.permutation(n1)[:rng.integers(2, n1 + 1)]) for _ in range(2)]
        lens = [sum(a.lengths[u, w] for u, w in zip(q, q[1:])) for q in paths]
        for t in rng.uniform(0, 2 * 480, 10):
            z = [auxiliary_duration(a, q, t) for q in paths]
            if abs(lens[0] - lens[1]) <= 1e-9:
                violations += abs(z[0] - z[1]) > 1e-8
                continue
            checked += 1
            if abs(z[0] - z[1]) > 1e-8 and (lens[0] < lens[1]) != (z[0] < z[1]):
                violations += 1
            elif abs(z[0] - z[1]) <= 1e-8 and abs(lens[0] - lens[1]) > 1e-6:
                violations += 1
    ok = violations == 0
    report(4, ok, f"1000 path pairs x 10 start times on 4 fitted graphs: "
                  f"{checked} non-tie comparisons, {violations} disagreements")
    assert ok


# -- 5 ----------------------------------------------------------------------

def _quality_case(args):
    index, model = args
    G = generate_instance(GeneratorConfig(n=10, seed=FAMILY, index=100000 + index, perturbation=0.3))
    bk = solve_tdtsp_exact(G)[1]
    return [dev_percent(r.ub, bk) for r in (htsp_baseline(G), pl_htsp(G), mlpl_htsp(G, model))]


def test_5_quality_ordering(family_model):
    devs = np.array(pmap(_quality_case, [(i, family_model) for i in range(50)]))
    h, p, m = devs.mean(axis=0)
    ok = p <= h and m <= p + 0.5
    report(5, ok, f"mean DEV over 50 instances: HTSP {h:.3f}%, PL-HTSP {p:.3f}%, "
                  f"MLPL-HTSP {m:.3f}% (need PL <= HTSP and MLPL <= PL + 0.5)")
    assert ok


# -- 6 ----------------------------------------------------------------------

def _speed_case(args):
    index, model = args
    G = generate_instance(GeneratorConfig(n=30, seed=FAMILY, index=200000 + index, perturbation=0.3))
    p = pl_htsp(G, step=5)
    m = mlpl_htsp(G, model, step=5)
    return p.lp_rows, m.lp_rows, p.wall_time, m.wall_time


def test_6_speed_ordering(family_model):
    rows = np.array(pmap(_speed_case, [(i, family_model) for i in range(10)]))
    rows_ok = bool(np.all(rows[:, 1] < rows[:, 0]))
    tp, tm = np.median(rows[:, 2]), np.median(rows[:, 3])
    ok = rows_ok and tm <= 0.5 * tp
    report(6, ok, f"n=30, 10 instances: LP rows PL {int(np.median(rows[:, 0]))} vs MLPL "
                  f"{int(np.median(rows[:, 1]))} (median), median time PL {tp:.2f}s vs MLPL {tm:.2f}s "
                  f"(ratio {tm / tp:.2f})")
    assert ok


# -- 7 ----------------------------------------------------------------------

def test_7_dev_fixtures():
    a = round(dev_percent(387.43, 379.27), 2)
    b = round(dev_percent(274.14, 286.66), 2)
    ok = a == 2.15 and b == -4.37
    report(7, ok, f"dev_percent(387.43, 379.27)={a:.2f}, dev_percent(274.14, 286.66)={b:.2f}")
    assert ok


# -- 8 ----------------------------------------------------------------------

def _fifo_closure(rng):
    for _ in range(100):
        G = random_fifo_graph(rng, 5)
        p = [0, *rng.permutation(np.arange(1, 6)), 0]
        for _ in range(10):
            t1, t2 = np.sort(rng.uniform(0, 700, 2))
            if t1 + path_duration(G, p, t1) > t2 + path_duration(G, p, t2) + 1e-9:
                return False
    return True


def _igp_conservation(rng):
    worst = 0.0
    for _ in range(10_000):
        H = int(rng.integers(1, 7))
        bp = np.concatenate([[0.0], np.sort(rng.uniform(1, 479, H - 1)), [480.0]])
        prof = SpeedProfile(TimeGrid(bp), rng.uniform(0.05, 2.0, H))
        L, t = rng.uniform(0.01, 300), rng.uniform(0, 960)
        worst = max(worst, abs(prof.integral(t, t + igp_time(prof, L, t)) - L) / max(1.0, L))
    return worst <= 1e-9, worst


def _kmeans_monotone(rng):
    for seed in range(20):
        z = kmeans_fit(rng.uniform(0, 20, (200, 2)), 6, seed=seed)
        if np.any(np.diff(z.objective_trace) > 1e-9):
            return False
    return True


def _label_identity():
    for i in range(30):
        G = generate_instance(GeneratorConfig(n=8, seed=81, index=i, perturbation=0.3))
        zoning = kmeans_fit(G.coordinates[1:], 4, seed=i)
        tour = tuple(np.random.default_rng(i).permutation(np.arange(1, 9)) .tolist())
        ex = make_labels(G, tour, zoning)
        lhs = np.sum(ex.counts[ex.mask] * ex.targets[ex.mask]) / G.n
        if abs(lhs - np.mean(departure_times(G, tour)[1:-1])) > 1e-9 * max(1.0, lhs):
            return False
    return True


def _lp_oracle(rng):
    worst = 0.0
    for _ in range(100):
        c = rng.uniform(-5, 5, 3)
        A = rng.uniform(-3, 5, (3, 3))
        b = rng.uniform(1, 10, 3)
        lo, hi = np.zeros(3), rng.uniform(2, 8, 3)
        want = vertex_oracle(c, A, b, lo, hi)
        got = solve_lp(LinearProgram(c, None, None, lo, hi, A_ub=A, b_ub=b), "simplex").objective
        worst = max(worst, abs(got - want))
    return worst <= 1e-6, worst


def _round_trips():
    with tempfile.TemporaryDirectory() as d:
        d = Path(d)
        for i in range(5):
            G = generate_instance(GeneratorConfig(n=6, seed=85, index=i, perturbation=0.3))
            save_instance(G, d / "g.jsonl")
            back = load_instance(d / "g.jsonl")
            if back.arcs != G.arcs or not np.array_equal(back.coordinates, G.coordinates):
                return False
        graphs = [generate_instance(GeneratorConfig(n=6, seed=85, index=i, perturbation=0.3))
                  for i in range(10)]
        model = train_from_instances(graphs, 3, seed=0)
        save_model(model, d / "m.json")
        m2 = load_model(d / "m.json")
        counts = zone_counts(model.zoning, graphs[0])
        if not np.array_equal(m2.predict(counts), model.predict(counts)):
            return False
        recs = [BenchmarkRecord("a", 100.0, 103.125, dev_percent(103.125, 100.0), 0.5, "HTSP",
                                None, None, "dp_exact"),
                BenchmarkRecord("b", 80.0, 79.5, dev_percent(79.5, 80.0), 1.25, "PL_HTSP",
                                0.75, 97, "best_of_heuristics")]
        write_results(ResultsTable(recs, []), d / "r.csv")
        back = read_results(d / "r.csv")
        return [(r.instance, r.BK, r.ub, r.zeta_star, r.omega_size) for r in back] == \
               [(r.instance, r.BK, r.ub, r.zeta_star, r.omega_size) for r in recs]


def test_8_property_suites():
    rng = np.random.default_rng(88)
    fifo = _fifo_closure(rng)
    igp, igp_worst = _igp_conservation(rng)
    km = _kmeans_monotone(rng)
    labels = _label_identity()
    lp, lp_worst = _lp_oracle(rng)
    io = _round_trips()
    ok = all([fifo, igp, km, labels, lp, io])
    report(8, ok, f"FIFO closure {fifo}, IGP conservation {igp} (worst {igp_worst:.1e}), "
                  f"k-means monotone {km}, label identity {labels}, "
                  f"LP vs vertices {lp} (worst {lp_worst:.1e}), round trips {io}")
    assert ok


# -- 9 ----------------------------------------------------------------------

def test_9_runtime_envelope():
    elapsed = time.perf_counter() - START
    ran = sorted(RESULTS)
    ok = elapsed < BUDGET_S and ran == list(range(1, 9))
    report(9, ok, f"criteria {ran} took {elapsed / 60:.1f} min on {workers()} worker(s) "
                  f"(budget {BUDGET_S // 60} min)")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
