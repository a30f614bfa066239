"""
Evaluation harness - runs agents through scenarios and reports per-category metrics.

An episode is one agent on one scenario in a fresh session. The harness starts
and stops sessions over REST itself; the agent only sees its ToolBox, which
reaches the simulation either through the MCP gateway or REST directly.
"""

from __future__ import annotations

import json
import logging
import platform
import re
import time
from dataclasses import asdict, dataclass, field
from importlib import metadata
from typing import Any, Protocol

from agents import AgentVerdict, ToolReply
from config import VERSION
from mcp_gateway import PROTOCOL_VERSION, UPSTREAM_ERROR, VIOLATION_PREFIX, McpGateway, StdioRpcClient
from scenarios import CATEGORY_NAMES
from sim_client import SimClient, SimResponse, UpstreamError

logger = logging.getLogger(__name__)

CATEGORIES = tuple(CATEGORY_NAMES)


class TransportFailure(Exception):
    """The agent's channel to the simulation broke mid-episode."""


# =============================================================================
# Transports
# =============================================================================


class Transport(Protocol):
    name: str

    def start(self, scenario_id: str) -> dict: ...
    def stop(self) -> None: ...
    def final_status(self) -> dict: ...
    def call(self, tool: str, args: dict) -> ToolReply: ...
    def close(self) -> None: ...


class _SessionControl:
    """Session start/stop and ground-truth status, always over REST."""

    def __init__(self, client: SimClient):
        self.client = client

    def start(self, scenario_id: str) -> dict:
        try:
            response = self.client.start(scenario_id, force=True)
        except UpstreamError as exc:
            raise TransportFailure(str(exc)) from exc
        if not response.success:
            raise TransportFailure(f"could not start {scenario_id}: {_error_text(response)}")
        return response.data

    def stop(self) -> None:
        try:
            self.client.stop()
        except UpstreamError as exc:
            raise TransportFailure(str(exc)) from exc

    def final_status(self) -> dict:
        try:
            response = self.client.status()
        except UpstreamError as exc:
            raise TransportFailure(str(exc)) from exc
        if not response.success:
            raise TransportFailure(f"status unavailable: {_error_text(response)}")
        return response.data


    def close(self) -> None:
        pass


class RestTransport(_SessionControl):
    name = "rest"

    def call(self, tool: str, args: dict) -> ToolReply:
        try:
            if tool == "get_rules":
                response = self.client.rules()
                return _reply(response, lambda data: data["rules"])
            if tool == "get_status":
                response = self.client.status()
                return _reply(response, lambda data: json.dumps(data, indent=2))
            if tool == "verify_plan":
                response = self.client.verify({"steps": args.get("steps")})
                return _reply(response, lambda data: data["message"])
            if tool in ("pick_up", "put_down", "stack", "unstack"):
                response = self.client.action(tool, args.get("block", ""), args.get("target"))
                return _reply(response, lambda data: data["message"])
        except UpstreamError as exc:
            raise TransportFailure(str(exc)) from exc
        return ToolReply(False, f"Unknown tool: {tool}")


def _error_text(response: SimResponse) -> str:
    return (response.error or {}).get("message", f"HTTP {response.status_code}")


def _reply(response: SimResponse, render) -> ToolReply:
    if response.success:
        return ToolReply(True, render(response.data), data=response.data)
    error = response.error or {}
    if error.get("rule_id") and not response.is_client_error:
        text = f"{VIOLATION_PREFIX} ({error['rule_id']}): {error.get('message')}"
    else:
        text = error.get("message", "request failed")
    return ToolReply(False, text, error=error)


class InProcessRpc:
    """JSON-RPC requests straight into a McpGateway object, no subprocess."""

    def __init__(self, gateway: McpGateway):
        self._gateway = gateway
        self._next_id = 0

    def request(self, method: str, params: dict | None = None) -> dict:
        self._next_id += 1
        message = {"jsonrpc": "2.0", "id": self._next_id, "method": method}
        if params is not None:
            message["params"] = params
        return self._gateway.handle_message(message)

    def notify(self, method: str, params: dict | None = None) -> None:
        message = {"jsonrpc": "2.0", "method": method}
        if params is not None:
            message["params"] = params
        self._gateway.handle_message(message)

    def close(self) -> None:
        pass


class McpTransport(_SessionControl):
    name = "mcp"

    def __init__(self, client: SimClient, rpc: InProcessRpc | StdioRpcClient):
        super().__init__(client)
        self._rpc = rpc
        response = rpc.request("initialize", {
            "protocolVersion": PROTOCOL_VERSION,
            "capabilities": {},
            "clientInfo": {"name": "blocksbench-harness", "version": VERSION},
        })
        if "error" in response:
            raise TransportFailure(f"MCP initialize failed: {response['error']['message']}")
        rpc.notify("notifications/initialized")

    def call(self, tool: str, args: dict) -> ToolReply:
        response = self._rpc.request("tools/call", {"name": tool, "arguments": args})
        if "error" in response:
            error = response["error"]
            if error["code"] == UPSTREAM_ERROR:
                raise TransportFailure(error["message"])
            return ToolReply(False, error["message"], error=error)

        result = response["result"]
        text = "".join(part.get("text", "") for part in result.get("content", []))
        structured = result.get("structuredContent")
        if result.get("isError") or text.startswith(VIOLATION_PREFIX):
            return ToolReply(False, text, error=structured)
        return ToolReply(True, text, data=structured)

    def close(self) -> None:
        self._rpc.close()


def open_transport(kind: str, client: SimClient, gateway_command: list[str] | None = None) -> Transport:
    """
    REST straight through `client`, or MCP through a gateway: in-process by
    default, a child process running `gateway_command` when one is given.
    """
    if kind == "rest":
        return RestTransport(client)
    if kind == "mcp":
        rpc = StdioRpcClient(gateway_command) if gateway_command else InProcessRpc(McpGateway(client))
        return McpTransport(client, rpc)
    raise ValueError(f"Unknown transport '{kind}' (choose rest or mcp)")


# =============================================================================
# Tool accounting
# =============================================================================


class ToolBox:
    """What an agent holds during an episode: tool execution plus bookkeeping."""

    def __init__(self, transport: Transport):
        self._transport = transport
        self.tool_calls: dict[str, int] = {}
        self._plans: set[str] = set()

    def execute_tool(self, tool_call: dict) -> ToolReply:
        tool = tool_call.get("tool", "")
        args = tool_call.get("args") or {}
        self.tool_calls[tool] = self.tool_calls.get(tool, 0) + 1
        if tool == "verify_plan":
            self._plans.add(json.dumps(args.get("steps"), sort_keys=True))
        reply = self._transport.call(tool, args)
        logger.debug("%s %s -> %s", tool, args, "ok" if reply.ok else reply.text)
        return reply

    @property
    def attempts(self) -> int:
        """Distinct plans submitted to verify_plan."""
        return len(self._plans)


# =============================================================================
# Reports
# =============================================================================


@dataclass
class EpisodeReport:
    scenario_id: str
    category: int | str
    success: bool
    declared_impossible: bool
    wall_time: float
    attempts: int
    actions_executed: int
    tool_calls: dict[str, int] = field(default_factory=dict)
    outcome: str = ""
    reason: str = ""
    goal_reached: bool = False

    def to_json(self) -> dict:
        data = asdict(self)
        data["tool_calls"] = dict(sorted(self.tool_calls.items()))
        return data


@dataclass
class CategorySummary:
    category: int
    n: int
    success_rate: float
    mean_time: float
    mean_attempts: float
    mean_actions: float
    mean_tool_calls: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "CategorySummary":
        return cls(**data)


@dataclass
class SuiteResult:
    manifest: dict
    reports: list[EpisodeReport]
    invariant_failures: list[str] = field(default_factory=list)

    @property
    def summaries(self) -> list[CategorySummary]:
        return aggregate(self.reports)


def check_invariants(report: EpisodeReport) -> list[str]:
    """Internal consistency of one report; any entry means a harness defect."""
    problems = []
    where = report.scenario_id
    if report.success and report.category == 3 and not report.declared_impossible:
        problems.append(f"{where}: success on an impossible scenario without an impossibility judgment")
    if report.success and report.category != 3 and not report.goal_reached:
        problems.append(f"{where}: marked success but the final status is not the goal")
    if report.declared_impossible and report.goal_reached:
        problems.append(f"{where}: declared impossible although the goal was reached")
    if report.attempts > report.tool_calls.get("verify_plan", 0):
        problems.append(f"{where}: more attempts than verify_plan calls")
    return problems


# =============================================================================
# Episodes
# =============================================================================


def _category_of(scenario_id: str) -> int:
    """Category from a suite id like "cat2/s07"; 0 when the id says nothing."""
    match = re.match(r"cat(\d+)/", scenario_id)
    return int(match.group(1)) if match else 0


def run_episode(agent, scenario_id: str, transport: Transport) -> EpisodeReport:
    """One agent, one scenario, fresh session. Agent and transport failures are recorded."""
    try:
        summary = transport.start(scenario_id)
    except TransportFailure as exc:
        logger.warning("%s: could not start: %s", scenario_id, exc)
        return EpisodeReport(
            scenario_id=scenario_id, category=_category_of(scenario_id), success=False,
            declared_impossible=False, wall_time=0.0, attempts=0, actions_executed=0,
            tool_calls={}, outcome="error", reason=str(exc), goal_reached=False,
        )
    category = summary["category"]
    tools = ToolBox(transport)

    started = time.perf_counter()
    try:
        verdict = agent.decide(tools)
    except TransportFailure as exc:
        logger.warning("%s: transport failed: %s", scenario_id, exc)
        verdict = AgentVerdict("error", str(exc))
    wall_time = time.perf_counter() - started

    try:
        final = transport.final_status()
    except TransportFailure as exc:
        logger.warning("%s: final status unavailable: %s", scenario_id, exc)
        final = {}
        verdict = AgentVerdict("error", str(exc))
    try:
        transport.stop()
    except TransportFailure as exc:
        logger.warning("%s: stop failed: %s", scenario_id, exc)

    goal_reached = bool(final.get("goal_reached"))
    declared = verdict.declared_impossible
    success = declared if category == 3 else goal_reached
    report = EpisodeReport(
        scenario_id=scenario_id,
        category=category,
        success=success,
        declared_impossible=declared,
        wall_time=round(wall_time, 4),
        attempts=tools.attempts,
        actions_executed=final.get("actions_executed", 0),
        tool_calls=dict(tools.tool_calls),
        outcome=verdict.outcome,
        reason=verdict.reason,
        goal_reached=goal_reached,
    )
    logger.info(
        "%s: %s (%s) in %.2fs, %d attempts, %d actions",
        scenario_id, "success" if success else "failure", verdict.outcome,
        wall_time, report.attempts, report.actions_executed,
    )
    return report


def select_scenarios(client: SimClient, categories: set[int] | None = None) -> list[str]:
    response = client.scenarios()
    if not response.success:
        raise TransportFailure(f"scenario catalog unavailable: {_error_text(response)}")
    return sorted(
        entry["id"] for entry in response.data["scenarios"]
        if categories is None or entry["category"] in categories
    )


def versions() -> dict[str, str]:
    found = {"python": platform.python_version(), "blocksbench": VERSION}
    for package in ("fastapi", "pydantic", "requests"):
        try:
            found[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            found[package] = "unknown"
    return found


def run_suite(agent, scenario_ids: list[str], transport: Transport, seed: int = 0) -> SuiteResult:
    """Episodes run one after another against the single live session."""
    reports = [run_episode(agent, scenario_id, transport) for scenario_id in scenario_ids]
    manifest = {
        "seed": seed,
        "agent": agent.name,
        "transport": transport.name,
        "scenarios": len(scenario_ids),
        "versions": versions(),
    }
    failures = [problem for report in reports for problem in check_invariants(report)]
    for problem in failures:
        logger.error("invariant check failed: %s", problem)
    return SuiteResult(manifest, reports, failures)


# =============================================================================
# Aggregation & Rendering
# =============================================================================


def _mean(values: list[float]) -> float:
    return round(sum(values) / len(values), 4) if values else 0.0


def aggregate(reports: list[EpisodeReport]) -> list[CategorySummary]:
    summaries = []
    for category in CATEGORIES:
        group = [r for r in reports if r.category == category]
        if not group:
            logger.warning("no episodes for category %d; row omitted", category)
            continue
        tools = sorted({tool for r in group for tool in r.tool_calls})
        summaries.append(CategorySummary(
            category=category,
            n=len(group),
            success_rate=round(100 * sum(r.success for r in group) / len(group), 2),
            mean_time=_mean([r.wall_time for r in group]),
            mean_attempts=_mean([r.attempts for r in group]),
            mean_actions=_mean([r.actions_executed for r in group]),
            mean_tool_calls={tool: _mean([r.tool_calls.get(tool, 0) for r in group]) for tool in tools},
        ))
    return summaries


def emit_report(result: SuiteResult, fmt: str = "json") -> str:
    summaries = result.summaries
    if fmt == "json":
        document = {
            "manifest": result.manifest,
            "summaries": [s.to_json() for s in summaries],
            "episodes": [r.to_json() for r in result.reports],
            "invariant_failures": result.invariant_failures,
        }
        return json.dumps(document, indent=2, sort_keys=True) + "\n"
    if fmt == "markdown":
        return render_table(summaries)
    raise ValueError(f"Unknown report format '{fmt}' (choose json or markdown)")


def render_table(summaries: list[CategorySummary]) -> str:
    """Metrics as rows, one column per category; missing categories show '-'."""
    by_category = {s.category: s for s in summaries}
    tools = sorted({tool for s in summaries for tool in s.mean_tool_calls})

    def row(label: str, value) -> str:
        cells = [value(by_category[c]) if c in by_category else "-" for c in CATEGORIES]
        return "| " + " | ".join([label, *cells]) + " |"

    lines = [
        "| Metric | " + " | ".join(f"C{c} {CATEGORY_NAMES[c]}" for c in CATEGORIES) + " |",
        "|---" * (len(CATEGORIES) + 1) + "|",
        row("Scenarios", lambda s: str(s.n)),
        row("Success rate", lambda s: f"{s.success_rate:.0f} %"),
        row("Mean time (s)", lambda s: f"{s.mean_time:.2f}"),
        row("Mean attempts", lambda s: f"{s.mean_attempts:.1f}"),
        row("Mean actions", lambda s: f"{s.mean_actions:.1f}"),
    ]
    for tool in tools:
        lines.append(row(f"Mean {tool} calls", lambda s, t=tool: f"{s.mean_tool_calls.get(t, 0.0):.1f}"))
    return "\n".join(lines) + "\n"


def in_process_client(orchestrator) -> SimClient:
    """A SimClient wired to an in-process app, for runs without a server."""
    from fastapi.testclient import TestClient

    from server import create_app

    return SimClient("http://testserver", session=TestClient(create_app(orchestrator)))
