"""Command-line entry point: generate, train, solve, bench."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bounds import Method, dev_percent, optimality_diagnostic, run_method
from .config import DEFAULT_STEP, MAX_EXACT_CUSTOMERS
from .errors import CapacityError, TdboundError
from .generator import GeneratorConfig, generate_instance, instance_name
from .io import (instance_paths, load_instance, load_model, run_benchmark, save_instance,
                 save_model, summary_path)
from .learn import error_report, train_from_instances
from .oracle import solve_tdtsp_exact

EXIT_OK, EXIT_INPUT, EXIT_CAPACITY = 0, 2, 3


def _rho(text: str):
    if text == "auto":
        return None
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("rho must be 'auto' or a positive number") from None
    if not value > 0:
        raise argparse.ArgumentTypeError("rho must be positive")
    return value


def _positive(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def cmd_generate(args) -> int:
    cfg = {}
    if args.config:
        cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    for key in ("n", "seed", "perturbation"):
        if getattr(args, key) is not None:
            cfg[key] = getattr(args, key)
    base = GeneratorConfig.from_dict(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k in range(args.count):
        c = GeneratorConfig.from_dict({**base.to_dict(), "index": base.index + k})
        path = out / f"{instance_name(c.seed, c.index)}.jsonl"
        save_instance(generate_instance(c), path)
        print(path)
    return EXIT_OK


def cmd_train(args) -> int:
    paths = instance_paths(args.instances)
    if not paths:
        print(f"no *.jsonl instances in {args.instances}", file=sys.stderr)
        return EXIT_INPUT
    graphs = [load_instance(p) for p in paths]
    too_big = [G.name for G in graphs if G.n > MAX_EXACT_CUSTOMERS]
    if too_big:
        raise CapacityError(f"labels need exact solutions; instances above {MAX_EXACT_CUSTOMERS} "
                            f"customers: {too_big[:5]}")
    model = train_from_instances(graphs, args.k, args.seed)
    save_model(model, args.model_out)
    report = error_report(model)
    Path(args.model_out).with_suffix(".report.txt").write_text(report + "\n", encoding="utf-8")
    print(report)
    return EXIT_OK


def cmd_solve(args) -> int:
    G = load_instance(args.instance)
    method = Method.parse(args.method)
    model = load_model(args.model) if args.model else None
    res = run_method(G, method, model, args.step_minutes, args.rho)
    print(f"instance {G.name}  method {method.value}")
    print(f"tour 0 {' '.join(map(str, res.tour))} 0")
    print(f"ub={res.ub:.4f}  time={res.wall_time:.3f}s")
    if res.zeta_star is not None:
        print(f"zeta_star={res.zeta_star:.6g}  omega_size={res.omega_size}  lp_rows={res.lp_rows}")
        diag = optimality_diagnostic(res, G, args.step_minutes)
        print(f"optimality evidence: {'yes' if diag.evidence else 'no'}")
    if G.n <= MAX_EXACT_CUSTOMERS:
        _, bk = solve_tdtsp_exact(G)
        print(f"BK={bk:.4f} (dp_exact)  DEV={dev_percent(res.ub, bk):.2f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    methods = [Method.parse(m) for m in args.methods.split(",") if m.strip()]
    model = load_model(args.model) if args.model else None
    if Method.MLPL_HTSP in methods and model is None:
        print("MLPL-HTSP needs --model", file=sys.stderr)
        return EXIT_INPUT
    table = run_benchmark(args.dir, methods, model, args.out, args.step_minutes, args.rho)
    print(f"{len(table.records)} rows written to {args.out}; summary in {summary_path(args.out)}")
    for s in table.summary():
        print(f"{s['method']:<10} n={s['count']:<4} failed={s['failed']:<3} "
              f"avg DEV={s['avg_dev_pct']:.2f}%  avg time={s['avg_time_s']:.3f}s")
    for f in table.failures:
        print(f"FAILED {f.instance} {f.method}: {f.error}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tdbound", description="Upper bounds for the time-dependent TSP.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write seeded synthetic instances")
    g.add_argument("--config", help="JSON file of generator options")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--n", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--perturbation", type=float)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="fit the zone ETA model on solved instances")
    t.add_argument("--instances", required=True, help="directory of training instances")
    t.add_argument("--k", type=int, default=6, help="number of zones")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--model-out", required=True)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("solve", help="bound one instance")
    s.add_argument("--instance", required=True)
    s.add_argument("--method", choices=["htsp", "pl", "mlpl"], default="pl")
    s.add_argument("--model")
    s.add_argument("--step-minutes", type=_positive, default=DEFAULT_STEP)
    s.add_argument("--rho", type=_rho, default=None, help="'auto' or a positive number")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="bound every instance in a directory")
    b.add_argument("--dir", required=True)
    b.add_argument("--methods", default="htsp,pl")
    b.add_argument("--model")
    b.add_argument("--out", required=True)
    b.add_argument("--step-minutes", type=_positive, default=DEFAULT_STEP)
    b.add_argument("--rho", type=_rho, default=None)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (TdboundError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        for line in getattr(exc, "problems", [])[:20]:
            print(f"  {line}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
