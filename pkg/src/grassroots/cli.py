"""Command-line scenario runner and trace inspector.

    grassroots run <scenario> [--seed N] [--max-ticks N] [--out DIR]
    grassroots inspect <trace> --query Q [--agent A] [--anchor H]

``run`` accepts a path or the name of a bundled scenario (see
``grassroots run --list``).  Exit codes: 0 success, 2 parse error,
3 invariant violation.
"""

from __future__ import annotations

import argparse
import os
import sys
from importlib import resources
from pathlib import Path

from .errors import ScenarioError
from .report import query, replay_trace, run_scenario
from .scenario import parse_scenario

QUERIES = ("feed", "ledger", "graph", "equivocations", "order")


def bundled_scenarios() -> dict[str, str]:
    out = {}
    root = resources.files("grassroots") / "scenarios"
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".scn"):
            out[entry.name[:-4]] = entry.read_text()
    return out


def _load_scenario_text(spec: str) -> str:
    path = Path(spec)
    if path.exists():
        return path.read_text()
    bundled = bundled_scenarios()
    if spec in bundled:
        return bundled[spec]
    raise FileNotFoundError(f"no such scenario file or bundled name: {spec}")


def cmd_run(args: argparse.Namespace) -> int:
    if args.list:
        for name in bundled_scenarios():
            print(name)
        return 0
    if args.scenario is None:
        print("error: scenario required", file=sys.stderr)
        return 2
    try:
        text = _load_scenario_text(args.scenario)
        sc = parse_scenario(text)
    except (FileNotFoundError, ScenarioError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    result = run_scenario(sc, seed=args.seed, max_ticks=args.max_ticks)
    out_dir = Path(args.out or os.environ.get("GRASSROOTS_OUT", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "trace.txt").write_text(result.trace_text)
    for name, text_dump in result.dumps.items():
        (out_dir / f"{name}.txt").write_text(text_dump + "\n")
    (out_dir / "summary.txt").write_text(result.sim.summary() + "\n")
    print(result.sim.summary())
    if not result.ok:
        for v in result.violations:
            print(f"invariant violated: {v}", file=sys.stderr)
        return 3
    return 0


def cmd_inspect(args: argparse.Namespace) -> int:
    try:
        trace_text = Path(args.trace).read_text()
        result = replay_trace(trace_text)
    except (FileNotFoundError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        print(query(result, args.query, agent=args.agent, anchor=args.anchor))
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="grassroots", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and write artifacts")
    p_run.add_argument("scenario", nargs="?", help="path or bundled scenario name")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--max-ticks", type=int, default=None)
    p_run.add_argument("--out", default=None, help="output dir (default $GRASSROOTS_OUT or .)")
    p_run.add_argument("--list", action="store_true", help="list bundled scenarios")
    p_run.set_defaults(fn=cmd_run)

    p_ins = sub.add_parser("inspect", help="replay a trace and print a view")
    p_ins.add_argument("trace")
    p_ins.add_argument("--query", required=True, choices=QUERIES)
    p_ins.add_argument("--agent", default=None)
    p_ins.add_argument("--anchor", default=None)
    p_ins.set_defaults(fn=cmd_inspect)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
