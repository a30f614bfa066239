"""
blocksbench command line.

    python cli.py serve                      # REST simulation service
    python cli.py mcp --url http://...       # MCP gateway on stdio
    python cli.py solve scenarios/cat1/s01.json
    python cli.py validate scenarios/
    python cli.py regen suite.json --check scenarios/   # frozen-seed regeneration check
    python cli.py bench run --agent oracle --categories 1-5 --transport mcp --out report.json

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any

from blocks_world import WorldState, misplaced_count, render_ascii
from config import CliConfig
from harness import (
    CategorySummary,
    TransportFailure,
    emit_report,
    in_process_client,
    open_transport,
    render_table,
    run_suite,
    select_scenarios,
)
from oracle import PlanRejected, Solved, Unsolvable, plan_stats, prove_unsolvable, solve
from scenarios import (
    CATEGORY_NAMES,
    GenerationExhausted,
    GeneratorSpec,
    Scenario,
    SchemaError,
    ScenarioStore,
    check_category,
    dump_scenario,
    generate_scenario,
    load_manifest,
    load_scenario,
    recompute_metadata,
    regenerate_suite,
    regeneration_drift,
)
from sim_client import SimClient, UpstreamError
from verifier import Plan, PlanSchemaError

logger = logging.getLogger("blocksbench")

RUNTIME_ERRORS = (
    SchemaError,
    PlanSchemaError,
    PlanRejected,
    GenerationExhausted,
    UpstreamError,
    TransportFailure,
    OSError,
    ValueError,
)


def emit(args: argparse.Namespace, payload: Any, text: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text)


def read_scenario(path: str) -> Scenario:
    document = json.loads(Path(path).read_text())
    # documents without metadata are ad-hoc instances
    return load_scenario(document, custom=isinstance(document, dict) and "metadata" not in document)


def parse_categories(raw: str) -> set[int]:
    """'1-5', '2', '1,3,5' or a mix."""
    chosen: set[int] = set()
    for part in raw.split(","):
        part = part.strip()
        try:
            if "-" in part:
                low, high = (int(v) for v in part.split("-", 1))
                chosen.update(range(low, high + 1))
            elif part:
                chosen.add(int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad category list '{raw}'") from None
    unknown = chosen - set(CATEGORY_NAMES)
    if unknown or not chosen:
        raise argparse.ArgumentTypeError(f"categories must be within 1-5, got '{raw}'")
    return chosen


# =============================================================================
# Subcommands
# =============================================================================


def cmd_serve(args, config: CliConfig) -> int:
    from server import serve

    serve(config)
    return 0


def cmd_mcp(args, config: CliConfig) -> int:
    from mcp_gateway import McpGateway, serve_stdio

    # stdout belongs to the protocol
    print(f"blocksbench MCP gateway -> {config.url}", file=sys.stderr)
    serve_stdio(McpGateway(SimClient(config.url, config.timeout)))
    return 0


def cmd_solve(args, config: CliConfig) -> int:
    scenario = read_scenario(args.scenario)
    result = solve(scenario.initial, scenario.goal, scenario.constraint_set, config.budgets)

    if isinstance(result, Solved):
        lines = [f"{i}. {action.describe()}" for i, action in enumerate(result.plan.steps, 1)]
        lines.append(f"length: {result.length} ({'optimal' if result.optimal else 'not proven optimal'})")
        emit(args, {"status": "solved", "length": result.length, "optimal": result.optimal,
                    "explored_states": result.explored_states, **result.plan.to_json()}, "\n".join(lines))
        return 0
    if isinstance(result, Unsolvable):
        emit(args, {"status": "unsolvable", "reason": result.reason, "explored_states": result.explored_states},
             f"no plan exists: {result.reason or 'the reachable state space contains no goal state'}")
        return 0
    payload = {"status": "resource_limit", "states": result.states, "depth": result.depth}
    if result.best_plan is not None:
        payload.update(result.best_plan.to_json())
    emit(args, payload, f"search budget exhausted after {result.states} states (depth {result.depth})")
    return 1


def cmd_prove_impossible(args, config: CliConfig) -> int:
    scenario = read_scenario(args.scenario)
    result = prove_unsolvable(scenario.initial, scenario.goal, scenario.constraint_set, config.budgets)
    if isinstance(result, Unsolvable):
        emit(args, {"unsolvable": True, "explored_states": result.explored_states},
             f"unsolvable: all {result.explored_states} reachable states miss the goal")
        return 0
    if isinstance(result, Solved):
        emit(args, {"unsolvable": False, "length": result.length},
             f"solvable: a plan of {result.length} steps exists")
    else:
        emit(args, {"unsolvable": None, "states": result.states},
             f"undecided: budget exhausted after {result.states} states")
    return 1


def cmd_stats(args, config: CliConfig) -> int:
    scenario = read_scenario(args.scenario)
    if args.plan:
        plan = Plan.from_json(json.loads(Path(args.plan).read_text()))
        stats = plan_stats(scenario.initial, scenario.goal, scenario.constraint_set, plan)
        emit(args, stats.to_json(),
             f"length {stats.length}: {stats.constructive} constructive, {stats.non_constructive} non-constructive")
        return 0
    metadata = recompute_metadata(scenario, config.budgets)
    emit(args, {"id": scenario.id, **metadata.to_json()},
         "\n".join(f"{key}: {value}" for key, value in metadata.to_json().items()))
    return 0


def cmd_gen(args, config: CliConfig) -> int:
    spec = GeneratorSpec(
        category=args.category,
        block_count=args.blocks,
        positions=args.positions,
        seed=config.seed,
        size_profile=args.sizes,
        max_attempts=args.attempts,
    )
    scenario = generate_scenario(spec)
    document = dump_scenario(scenario)
    if args.out:
        Path(args.out).write_text(document)
        logger.info("wrote %s", args.out)
    else:
        print(document, end="")
    return 0


def cmd_regen(args, config: CliConfig) -> int:
    specs = load_manifest(Path(args.manifest).read_bytes())
    if args.check:
        drift = regeneration_drift(specs, ScenarioStore(args.check))
        lines = drift + [f"{len(specs)} frozen scenarios checked, {len(drift)} drifted"]
        emit(args, {"checked": len(specs), "drift": drift}, "\n".join(lines))
        return 0 if not drift else 1
    written = regenerate_suite(specs, args.out)
    emit(args, {"written": [str(p) for p in written]}, "\n".join(str(p) for p in written))
    return 0


def cmd_validate(args, config: CliConfig) -> int:
    store = ScenarioStore(args.directory or config.scenarios)
    problems: dict[str, list[str]] = {}
    counts = {c: 0 for c in CATEGORY_NAMES}
    for scenario in store:
        counts[scenario.category] = counts.get(scenario.category, 0) + 1
        recomputed = recompute_metadata(scenario, config.budgets)
        issues = check_category(scenario, recomputed, config.budgets)
        if scenario.metadata != recomputed:
            issues.append(f"stored metadata {scenario.metadata.to_json()} != recomputed {recomputed.to_json()}")
        if issues:
            problems[scenario.id] = issues
        logger.info("%s: %s", scenario.id, "ok" if not issues else "; ".join(issues))

    suite = [f"category {c} has {n} scenarios, expected 10" for c, n in sorted(counts.items()) if n != 10]
    lines = [f"{sid}: {issue}" for sid, issues in problems.items() for issue in issues] + suite
    lines.append(f"{len(store)} scenarios checked, {len(problems)} with problems")
    emit(args, {"scenarios": len(store), "counts": counts, "problems": problems, "suite": suite}, "\n".join(lines))
    return 0 if not problems and not suite else 1


def cmd_bench_run(args, config: CliConfig) -> int:
    from agents import create_agent
    from orchestration import SimulationOrchestrator

    if args.in_process:
        client = in_process_client(SimulationOrchestrator(ScenarioStore(config.scenarios), config.phase_delay))
        gateway_command = None
    else:
        client = SimClient(config.url, config.timeout)
        client.health()
        gateway_command = [sys.executable, str(Path(__file__).resolve()), "mcp", "--url", config.url]

    transport = open_transport(args.transport, client, gateway_command if args.transport == "mcp" else None)
    try:
        scenario_ids = select_scenarios(client, args.categories)
        result = run_suite(create_agent(args.agent, config.budgets), scenario_ids, transport, seed=config.seed)
    finally:
        transport.close()

    fmt = "json" if args.json else args.format
    document = emit_report(result, fmt)
    if args.out:
        Path(args.out).write_text(document)
        logger.info("report written to %s", args.out)
        print(render_table(result.summaries), end="")
    else:
        print(document, end="")
    return 1 if result.invariant_failures else 0


def cmd_bench_table(args, config: CliConfig) -> int:
    report = json.loads(Path(args.report).read_text())
    summaries = [CategorySummary.from_json(s) for s in report["summaries"]]
    emit(args, report["summaries"], render_table(summaries).rstrip("\n"))
    return 0


def cmd_render(args, config: CliConfig) -> int:
    scenario = read_scenario(args.scenario)
    goal_state = WorldState.from_stacks(scenario.goal.stacks, scenario.blocks)
    text = "\n".join([
        f"{scenario.id} (category {scenario.category}, {scenario.constraint_set.value})",
        f"misplaced blocks: {misplaced_count(scenario.initial, scenario.goal)}",
        "",
        "initial:",
        render_ascii(scenario.initial),
        "",
        f"goal: {scenario.goal.description}",
        render_ascii(goal_state),
    ])
    emit(args, {"id": scenario.id, "initial": scenario.initial.to_json(), "goal": scenario.goal.to_json()}, text)
    return 0


# =============================================================================
# Parser
# =============================================================================


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="Machine-readable output")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR (env BLOCKSBENCH_LOG_LEVEL)")
    common.add_argument("--max-states", type=int, help="Oracle state budget (env BLOCKSBENCH_MAX_STATES)")
    common.add_argument("--max-depth", type=int, help="Oracle depth budget (env BLOCKSBENCH_MAX_DEPTH)")
    common.add_argument("--seed", type=int, help="Seed for generation and run manifests (env BLOCKSBENCH_SEED)")

    parser = argparse.ArgumentParser(
        prog="blocksbench",
        description="Blocksworld simulation, MCP gateway, oracle planner and evaluation harness.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="command")

    serve = subparsers.add_parser("serve", parents=[common], help="Run the REST simulation service")
    serve.add_argument("--host", help="Bind address (env BLOCKSBENCH_HOST)")
    serve.add_argument("--port", type=int, help="Port (env BLOCKSBENCH_PORT)")
    serve.add_argument("--scenarios", help="Scenario directory (env BLOCKSBENCH_SCENARIOS)")
    serve.add_argument("--phase-delay", type=float, help="Seconds per transient gripper phase")
    serve.set_defaults(handler=cmd_serve)

    mcp = subparsers.add_parser("mcp", parents=[common], help="Run the MCP gateway on stdin/stdout")
    mcp.add_argument("--url", help="Simulation service URL (env BLOCKSBENCH_URL)")
    mcp.add_argument("--timeout", type=float, help="HTTP timeout in seconds")
    mcp.set_defaults(handler=cmd_mcp)

    solve_parser = subparsers.add_parser("solve", parents=[common], help="Print an optimal plan for a scenario file")
    solve_parser.add_argument("scenario", help="Scenario JSON file")
    solve_parser.set_defaults(handler=cmd_solve)

    prove = subparsers.add_parser("prove-impossible", parents=[common],
                                  help="Close the reachable state set and report whether the goal is in it")
    prove.add_argument("scenario", help="Scenario JSON file")
    prove.set_defaults(handler=cmd_prove_impossible)

    stats = subparsers.add_parser("stats", parents=[common], help="Scenario metadata, or statistics of a given plan")
    stats.add_argument("scenario", help="Scenario JSON file")
    stats.add_argument("--plan", help="Plan JSON file ({\"steps\": [...]}) to classify")
    stats.set_defaults(handler=cmd_stats)

    gen = subparsers.add_parser("gen", parents=[common], help="Generate a scenario of a category")
    gen.add_argument("--category", type=int, required=True, choices=sorted(CATEGORY_NAMES))
    gen.add_argument("--blocks", type=int, required=True)
    gen.add_argument("--positions", type=int, required=True)
    gen.add_argument("--sizes", choices=["distinct", "uniform"], help="Block size profile")
    gen.add_argument("--attempts", type=int, default=200, help="Rejection-sampling attempts")
    gen.add_argument("--out", help="Write the scenario here instead of stdout")
    gen.set_defaults(handler=cmd_gen)

    validate = subparsers.add_parser("validate", parents=[common],
                                     help="Load every scenario and recompute its metadata")
    validate.add_argument("directory", nargs="?", help="Scenario directory (default: shipped suite)")
    validate.set_defaults(handler=cmd_validate)

    regen = subparsers.add_parser("regen", parents=[common], help="Rebuild a frozen suite from its generator manifest")
    regen.add_argument("manifest", help="Manifest JSON: {\"scenarios\": [{id, category, blocks, positions, seed}]}")
    target = regen.add_mutually_exclusive_group(required=True)
    target.add_argument("--out", metavar="DIRECTORY", help="Directory to write the suite into")
    target.add_argument("--check", metavar="DIRECTORY", help="Compare against the files in DIRECTORY instead of writing")
    regen.set_defaults(handler=cmd_regen)

    bench = subparsers.add_parser("bench", help="Evaluation harness")
    bench_commands = bench.add_subparsers(dest="bench_command", required=True, metavar="command")

    run = bench_commands.add_parser("run", parents=[common], help="Run an agent over the suite")
    run.add_argument("--agent", default="oracle", choices=["oracle", "reveal", "greedy"])
    run.add_argument("--categories", type=parse_categories, default=None, help="e.g. 1-5, 2 or 1,3")
    run.add_argument("--transport", default="mcp", choices=["mcp", "rest"])
    run.add_argument("--format", default="json", choices=["json", "markdown"])
    run.add_argument("--out", help="Write the report here (a summary table still goes to stdout)")
    run.add_argument("--url", help="Simulation service URL (env BLOCKSBENCH_URL)")
    run.add_argument("--scenarios", help="Scenario directory for --in-process runs")
    run.add_argument("--in-process", action="store_true", help="Run the service and gateway inside this process")
    run.set_defaults(handler=cmd_bench_run)

    table = bench_commands.add_parser("table", parents=[common], help="Render a saved JSON report as a table")
    table.add_argument("report", help="Report JSON written by 'bench run'")
    table.set_defaults(handler=cmd_bench_table)

    render = subparsers.add_parser("render", parents=[common], help="ASCII view of a scenario's initial and goal state")
    render.add_argument("scenario", help="Scenario JSON file")
    render.set_defaults(handler=cmd_render)

    return parser


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        config = CliConfig.from_env().with_flags(
            port=getattr(args, "port", None),
            host=getattr(args, "host", None),
            url=getattr(args, "url", None),
            scenarios=getattr(args, "scenarios", None),
            seed=args.seed,
            max_states=args.max_states,
            max_depth=args.max_depth,
            phase_delay=getattr(args, "phase_delay", None),
            timeout=getattr(args, "timeout", None),
            log_level=args.log_level.upper() if args.log_level else None,
            json_output=args.json or None,
        )
    except ValueError as exc:
        print(f"blocksbench: {exc}", file=sys.stderr)
        return 2

    logging.basicConfig(
        level=getattr(logging, config.log_level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    try:
        return args.handler(args, config)
    except RUNTIME_ERRORS as exc:
        logger.error("%s failed: %s", args.command, exc)
        print(f"blocksbench {args.command}: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
