"""Command-line front end: solve, validate, dtg-dump, and gen subcommands."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .bench import PlanDocument, gen_scalability, validate_plan
from .dtg import build_dtgs, dump_dtgs, merge_shared_transitions, shared_transitions
from .parser import AgentFilePair, MadlError, ground_task
from .runtime import RunConfig, solve

EXIT_SOLUTION = 0
EXIT_INPUT_ERROR = 1
EXIT_UNSOLVABLE = 2
EXIT_TIMEOUT = 3


def _agent_spec(raw: str) -> AgentFilePair:
    try:
        agent, files = raw.split("=", 1)
        domain_file, problem_file = files.split(",", 1)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected <id>=<domain-file>,<problem-file>, got {raw!r}")
    return AgentFilePair(agent,
                         Path(domain_file).read_text(),
                         Path(problem_file).read_text(),
                         domain_file, problem_file)


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fmap",
        description="Distributed cooperative multi-agent planner")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_agents(p):
        p.add_argument("--agent", dest="agents", action="append", required=True,
                       type=_agent_spec, metavar="ID=DOMAIN,PROBLEM",
                       help="agent id with its domain and problem file (repeatable)")

    p_solve = sub.add_parser("solve", help="run the distributed search")
    add_agents(p_solve)
    p_solve.add_argument("--timeout", type=float, default=120.0, metavar="S")
    p_solve.add_argument("--node-limit", type=int, default=500_000)
    p_solve.add_argument("--seed", type=int, default=0)
    p_solve.add_argument("--parallelism", type=int, default=1)
    p_solve.add_argument("--trace", type=int, choices=(0, 1, 2), default=0)
    p_solve.add_argument("--out", type=Path, default=None,
                         help="write the plan document here")

    p_validate = sub.add_parser("validate", help="check a plan document")
    add_agents(p_validate)
    p_validate.add_argument("--plan", type=Path, required=True)

    p_dump = sub.add_parser("dtg-dump", help="print each agent's transition graphs")
    add_agents(p_dump)

    p_gen = sub.add_parser("gen", help="emit a generated task's agent files")
    p_gen.add_argument("--kind", choices=("logistics", "satellite"), required=True)
    p_gen.add_argument("--agents", dest="n_agents", type=int, required=True)
    p_gen.add_argument("--out", type=Path, required=True)
    return parser


def _write_trace(lines: list[str], level: int):
    if level <= 0 or not lines:
        return
    for line in lines:
        print(line, file=sys.stderr)
    trace_dir = os.environ.get("FMAP_TRACE_DIR")
    if trace_dir:
        path = Path(trace_dir) / "fmap-trace.log"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n")


def cmd_solve(args) -> int:
    try:
        task = ground_task(args.agents)
    except MadlError as err:
        for line in err.diagnostics:
            print(line, file=sys.stderr)
        return EXIT_INPUT_ERROR
    config = RunConfig(seed=args.seed, parallelism=args.parallelism,
                       timeout_s=args.timeout, node_limit=args.node_limit,
                       trace_level=args.trace)
    result = solve(task, config)
    trace = result.trace if args.trace >= 2 else [
        l for l in result.trace if "event=announce" not in l]
    _write_trace(trace, args.trace)
    for line in result.stats.as_lines():
        print(line)
    if result.status == "solution":
        document = PlanDocument.from_plan(task, result.plan)
        text = document.render()
        if args.out:
            args.out.write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_SOLUTION
    if result.status == "unsolvable":
        print("unsolvable")
        return EXIT_UNSOLVABLE
    print("timeout")
    return EXIT_TIMEOUT


def cmd_validate(args) -> int:
    try:
        document = PlanDocument.parse(args.plan.read_text())
        verdict = validate_plan(args.agents, document)
    except (MadlError, ValueError) as err:
        print(err, file=sys.stderr)
        return EXIT_INPUT_ERROR
    print(verdict.label)
    for line in verdict.diagnostics:
        print(line)
    return EXIT_SOLUTION if verdict.valid else EXIT_UNSOLVABLE


def cmd_dtg_dump(args) -> int:
    try:
        task = ground_task(args.agents)
    except MadlError as err:
        for line in err.diagnostics:
            print(line, file=sys.stderr)
        return EXIT_INPUT_ERROR
    for agent in task.agents:
        view = task.views[agent]
        dtgs = build_dtgs(view)
        for other in task.agents:
            if other != agent:
                merge_shared_transitions(dtgs, other,
                                         shared_transitions(task.views[other], agent))
        print(f"agent {agent}")
        for line in dump_dtgs(dtgs, task.variable_name, task.value_name):
            print(f"  {line}")
    return EXIT_SOLUTION


def cmd_gen(args) -> int:
    try:
        pairs = gen_scalability(args.kind, args.n_agents)
    except ValueError as err:
        print(err, file=sys.stderr)
        return EXIT_INPUT_ERROR
    args.out.mkdir(parents=True, exist_ok=True)
    for pair in pairs:
        (args.out / f"{pair.agent}-domain.pddl").write_text(pair.domain_text)
        (args.out / f"{pair.agent}-problem.pddl").write_text(pair.problem_text)
    print(f"wrote {2 * len(pairs)} files to {args.out}")
    return EXIT_SOLUTION


def main(argv: list[str] | None = None) -> int:
    parser = build_arg_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; the contract here is 1.
        return EXIT_INPUT_ERROR if exc.code else EXIT_SOLUTION
    handlers = {"solve": cmd_solve, "validate": cmd_validate,
                "dtg-dump": cmd_dtg_dump, "gen": cmd_gen}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
