"""Command-line entry point.

Structured records go to stdout (one JSON object per line); tables and
diagnostics go to stderr.  Exit codes: 0 success, 1 internal error,
2 invalid parameters, 3 infeasible sizes or a size cap.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .adversary import AdversarySpec, exhaustive_strong_search
from .concentration import lemma2_audit
from .experiments import ExperimentConfig, csv_text, replicate, run_experiment, write_records
from .graph import (CapExceededError, CounterexampleParams, InfeasibleSizesError,
                    graph_from_spec, resolve_sizes, validate_params, write_edge_list)

SEED_ENV = "OPINIONSIM_SEED"
EXIT_OK, EXIT_INTERNAL, EXIT_INVALID, EXIT_INFEASIBLE = 0, 1, 2, 3


def _load_json(arg: str) -> dict:
    """Inline JSON, or a path to a JSON file."""
    text = arg if arg.lstrip().startswith("{") else Path(arg).read_text()
    return json.loads(text)


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True, separators=(",", ":")))


def _note(text: str) -> None:
    print(text, file=sys.stderr)


def cmd_validate(args) -> int:
    params = CounterexampleParams(args.mu, args.delta, args.eps1, args.eps2, args.d)
    report = validate_params(params)
    out = report.as_dict()
    out["p_IJ"], out["p_IP"] = params.p_ij, params.p_ip
    if args.n is not None:
        sizes = resolve_sizes(params, args.n)
        out["sizes"] = dict(zip("IJOPD", sizes.as_tuple()))
    _emit(out)
    _note(str(report))
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_gen(args) -> int:
    graph = graph_from_spec(_load_json(args.spec))
    if args.out == "-":
        write_edge_list(graph, sys.stdout)
    else:
        with open(args.out, "w") as fh:
            write_edge_list(graph, fh)
        _emit({"n": graph.n, "m": graph.num_edges, "mode": graph.mode, "out": args.out})
    return EXIT_OK


def cmd_run(args) -> int:
    config = ExperimentConfig(
        graph=_load_json(args.spec),
        adversary=AdversarySpec.from_dict(_load_json(args.adversary)),
        mode=args.mode, trials=args.trials, seed=args.seed,
        scenario=args.scenario,
    )
    records, summary = run_experiment(config, jobs=args.jobs)
    if args.out in (None, "-"):
        write_records(records, sys.stdout, timing=args.timing)
    else:
        with open(args.out, "w") as fh:
            write_records(records, fh, timing=args.timing)
    _emit({"summary": json.loads(summary.to_json())})
    if args.csv:
        Path(args.csv).write_text(csv_text([summary]))
    _note(csv_text([summary]).rstrip())
    return EXIT_OK


def cmd_search(args) -> int:
    graph = graph_from_spec(_load_json(args.spec))
    res = exhaustive_strong_search(graph, args.mu, args.delta, args.mode)
    _emit({"mode": args.mode, "e1": res.assignment.e1.tolist(), "e0": res.assignment.e0.tolist(),
           "probability": str(res.probability), "probability_float": float(res.probability),
           "assignments_checked": res.checked})
    _note(f"worst case P(OneMajority) = {res.probability} over {res.checked} assignments")
    return EXIT_OK


def cmd_audit(args) -> int:
    report = lemma2_audit(args.n, args.p, args.eps, args.sets, args.seed)
    _emit(report.as_dict())
    _note(report.table())
    return EXIT_OK


def cmd_replicate(args) -> int:
    report = replicate(args.preset, trials=args.trials, seed=args.seed, jobs=args.jobs)
    for s in report.summaries:
        _emit(json.loads(s.to_json()))
    if args.csv:
        Path(args.csv).write_text(csv_text(report.summaries))
    _note(report.table())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    default_seed = int(os.environ.get(SEED_ENV, "0"))
    parser = argparse.ArgumentParser(prog="opinionsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check counterexample parameters")
    for flag in ("mu", "delta", "eps1", "eps2", "d"):
        p.add_argument(f"--{flag}", type=float, required=True)
    p.add_argument("--n", type=int)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("gen", help="build a graph and write its edge list")
    p.add_argument("--spec", required=True, help="graph spec (JSON file or inline JSON)")
    p.add_argument("--out", required=True, help="edge-list path, or - for stdout")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="Monte Carlo trials of one scenario")
    p.add_argument("--spec", required=True)
    p.add_argument("--adversary", required=True, help="adversary spec (JSON file or inline)")
    p.add_argument("--mode", choices=("iterative", "noniterative"), required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=default_seed)
    p.add_argument("--out", help="trial records (JSON lines); stdout when omitted")
    p.add_argument("--csv", help="also write the summary as a CSV row here")
    p.add_argument("--scenario", default="custom")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--timing", action="store_true", help="include wall time in records")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("search", help="exact worst-case strong adversary (n <= 16)")
    p.add_argument("--spec", required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--mode", choices=("iterative", "noniterative"), required=True)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("audit", help="edge-distribution audit of G(n, p)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--sets", type=int, default=100)
    p.add_argument("--seed", type=int, default=default_seed)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("replicate", help="run a canned scenario pair")
    p.add_argument("preset", choices=("fig1", "counterexample", "star_expander"))
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, default=default_seed)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_replicate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (InfeasibleSizesError, CapExceededError) as exc:
        _note(f"error: {exc}")
        return EXIT_INFEASIBLE
    except (ValueError, KeyError, json.JSONDecodeError, FileNotFoundError) as exc:
        _note(f"error: {exc}")
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        _note(f"internal error: {exc!r}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
