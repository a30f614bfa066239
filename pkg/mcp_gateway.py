"""
MCP Gateway - exposes the simulation as seven MCP tools over stdio JSON-RPC 2.0.

The gateway holds no world state: every tool call is forwarded to the REST
service through SimClient. Rule violations come back as ordinary tool results
(isError false) so agents can read the explanation and adapt.

stdout carries protocol messages only; diagnostics go to logging (stderr).
"""

from __future__ import annotations

import json
import logging
import subprocess
import sys
from typing import Any, Callable, TextIO

from config import VERSION
from sim_client import SimClient, SimResponse, UpstreamError

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = "2025-06-18"
SUPPORTED_VERSIONS = ("2024-11-05", "2025-03-26", "2025-06-18")
SERVER_INFO = {"name": "blocksbench-mcp", "version": VERSION}
VIOLATION_PREFIX = "Action rejected"

PARSE_ERROR = -32700
INVALID_REQUEST = -32600
METHOD_NOT_FOUND = -32601
INVALID_PARAMS = -32602
INTERNAL_ERROR = -32603
UPSTREAM_ERROR = -32000

# =============================================================================
# Tool Definitions
# =============================================================================

_NO_ARGS = {"type": "object", "properties": {}, "required": [], "additionalProperties": False}
_BLOCK = {"type": "string", "description": "Name of the block to move, e.g. \"A\""}
_TARGET = {"type": "string", "description": "Name of the block directly below, e.g. \"B\""}


def _describe(functionality: str, preconditions: str, effects: str, arguments: str, response: str) -> str:
    return (
        f"Functionality: {functionality}\n"
        f"Preconditions: {preconditions}\n"
        f"Effects: {effects}\n"
        f"Arguments: {arguments}\n"
        f"Response format: {response}"
    )


_ACTION_RESPONSE = (
    "On success a confirmation message and the new observation "
    "(positions bottom-to-top, visible blocks, gripper). If a rule is broken the "
    "text starts with \"Action rejected\" followed by the rule id and an English "
    "explanation; the world is unchanged."
)

TOOLS: list[dict] = [
    {
        "name": "get_rules",
        "description": _describe(
            "Returns a natural language description of the current problem instance: the available "
            "actions, the active constraints and the number of table positions.",
            "A scenario is running.",
            "None; reading the rules never changes the world.",
            "None.",
            "Plain text rules.",
        ),
        "inputSchema": _NO_ARGS,
    },
    {
        "name": "get_status",
        "description": _describe(
            "Returns the current state as JSON: stacks per table position, visible block properties "
            "(name, size), the gripper state, the goal and whether it is reached.",
            "A scenario is running.",
            "None; reading the status never changes the world.",
            "None.",
            "JSON object with positions (bottom-to-top, hidden blocks shown as \"unknown\"), blocks, "
            "gripper, phase, goal, goal_reached and actions_executed.",
        ),
        "inputSchema": _NO_ARGS,
    },
    {
        "name": "verify_plan",
        "description": _describe(
            "Checks a complete action sequence against the current state and constraints without "
            "executing it, and identifies the first incorrect action.",
            "A scenario is running.",
            "None; the simulation state is not modified.",
            "steps: list of {\"action\": \"pick_up|put_down|stack|unstack\", \"block\": name, "
            "\"target\": name (stack and unstack only)}.",
            "JSON with verified (bool), reaches_goal when verified, otherwise first_bad_index "
            "(0-based) and rule_id, plus an English message.",
        ),
        "inputSchema": {
            "type": "object",
            "properties": {
                "steps": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "action": {"type": "string", "enum": ["pick_up", "put_down", "stack", "unstack"]},
                            "block": {"type": "string"},
                            "target": {"type": "string"},
                        },
                        "required": ["action", "block"],
                    },
                }
            },
            "required": ["steps"],
        },
    },
    {
        "name": "pick_up",
        "description": _describe(
            "Grasps a block and removes it directly from the table surface.",
            "The gripper is empty and the block stands alone on the table with nothing on top of it.",
            "The block is held by the gripper and its table position becomes free.",
            "block: the block to grasp.",
            _ACTION_RESPONSE,
        ),
        "inputSchema": {"type": "object", "properties": {"block": _BLOCK}, "required": ["block"]},
    },
    {
        "name": "put_down",
        "description": _describe(
            "Places the held block on the table at the lowest-numbered free position.",
            "The robot holds the block and at least one table position is free.",
            "The block stands alone on the table and the gripper is empty.",
            "block: the held block.",
            _ACTION_RESPONSE,
        ),
        "inputSchema": {"type": "object", "properties": {"block": _BLOCK}, "required": ["block"]},
    },
    {
        "name": "stack",
        "description": _describe(
            "Places the held block on top of the target block.",
            "the robot holds the block and the target block is located on top of a stack "
            "(nothing rests on it). With block sizes active the block must not be larger than the target.",
            "The block rests directly on the target and the gripper is empty.",
            "block: the held block; target: the block to place it on.",
            _ACTION_RESPONSE,
        ),
        "inputSchema": {
            "type": "object",
            "properties": {"block": _BLOCK, "target": _TARGET},
            "required": ["block", "target"],
        },
    },
    {
        "name": "unstack",
        "description": _describe(
            "Lifts a block from directly on top of the target block.",
            "The gripper is empty, the block rests directly on the target and nothing is on top of the block.",
            "The block is held by the gripper and the target becomes the top of its stack.",
            "block: the block to lift; target: the block it currently rests on.",
            _ACTION_RESPONSE,
        ),
        "inputSchema": {
            "type": "object",
            "properties": {"block": _BLOCK, "target": _TARGET},
            "required": ["block", "target"],
        },
    },
]

TOOL_NAMES = tuple(t["name"] for t in TOOLS)
ACTION_TOOLS = ("pick_up", "put_down", "stack", "unstack")


class JsonRpcError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


def _error(request_id: Any, code: int, message: str) -> dict:
    return {"jsonrpc": "2.0", "id": request_id, "error": {"code": code, "message": message}}


def _result(request_id: Any, result: dict) -> dict:
    return {"jsonrpc": "2.0", "id": request_id, "result": result}


# =============================================================================
# Gateway
# =============================================================================


class McpGateway:
    def __init__(self, client: SimClient):
        self._client = client
        self._initialized = False

    def handle_line(self, line: str) -> dict | None:
        try:
            message = json.loads(line)
        except json.JSONDecodeError as exc:
            return _error(None, PARSE_ERROR, f"Parse error: {exc.msg}")
        return self.handle_message(message)

    def handle_message(self, message: Any) -> dict | None:
        """One JSON-RPC message in, one response out (None for notifications)."""
        if not isinstance(message, dict):
            return _error(None, INVALID_REQUEST, "Invalid Request: expected a JSON object")
        request_id = message.get("id")
        is_notification = "id" not in message
        method = message.get("method")
        if message.get("jsonrpc") != "2.0" or not isinstance(method, str):
            if is_notification and isinstance(method, str):
                return None
            return _error(request_id, INVALID_REQUEST, "Invalid Request: needs jsonrpc \"2.0\" and a method")

        if is_notification:
            if method == "notifications/initialized":
                logger.info("client confirmed initialization")
            return None

        params = message.get("params") or {}
        try:
            if not isinstance(params, dict):
                raise JsonRpcError(INVALID_PARAMS, "params must be an object")
            if method == "initialize":
                return _result(request_id, self.handle_initialize(params))
            if method == "ping":
                return _result(request_id, {})
            if not self._initialized:
                raise JsonRpcError(INVALID_REQUEST, "Server not initialized")
            if method == "tools/list":
                return _result(request_id, self.handle_tools_list())
            if method == "tools/call":
                return _result(request_id, self.handle_tools_call(params.get("name"), params.get("arguments") or {}))
            raise JsonRpcError(METHOD_NOT_FOUND, f"Method not found: {method}")
        except JsonRpcError as exc:
            return _error(request_id, exc.code, exc.message)
        except UpstreamError as exc:
            return _error(request_id, UPSTREAM_ERROR, str(exc))
        except Exception as exc:
            logger.exception("unexpected error handling %s", method)
            return _error(request_id, INTERNAL_ERROR, f"Internal error: {exc}")

    # ---- Protocol methods ----

    def handle_initialize(self, params: dict) -> dict:
        requested = params.get("protocolVersion")
        self._initialized = True
        return {
            "protocolVersion": requested if requested in SUPPORTED_VERSIONS else PROTOCOL_VERSION,
            "capabilities": {"tools": {"listChanged": False}},
            "serverInfo": SERVER_INFO,
        }

    def handle_tools_list(self) -> dict:
        return {"tools": TOOLS}

    def handle_tools_call(self, name: Any, arguments: Any) -> dict:
        if name not in TOOL_NAMES:
            raise JsonRpcError(INVALID_PARAMS, f"Unknown tool: {name}")
        if not isinstance(arguments, dict):
            raise JsonRpcError(INVALID_PARAMS, "arguments must be an object")

        if name == "get_rules":
            response = self._client.rules()
            return self._to_result(response, lambda data: data["rules"])
        if name == "get_status":
            response = self._client.status()
            return self._to_result(response, lambda data: json.dumps(data, indent=2))
        if name == "verify_plan":
            steps = arguments.get("steps")
            if not isinstance(steps, list):
                raise JsonRpcError(INVALID_PARAMS, "verify_plan needs a 'steps' list")
            response = self._client.verify({"steps": steps})
            return self._to_result(response, lambda data: data["message"])

        block = arguments.get("block")
        target = arguments.get("target")
        if not isinstance(block, str) or not block:
            raise JsonRpcError(INVALID_PARAMS, f"{name} needs a 'block' string")
        if name in ("stack", "unstack") and (not isinstance(target, str) or not target):
            raise JsonRpcError(INVALID_PARAMS, f"{name} needs a 'target' string")
        if name in ("pick_up", "put_down"):
            target = None
        response = self._client.action(name, block, target)
        return self._to_result(response, _action_text)

    def _to_result(self, response: SimResponse, render: Callable[[Any], str]) -> dict:
        if response.success:
            return {
                "content": [{"type": "text", "text": render(response.data)}],
                "structuredContent": response.data,
                "isError": False,
            }
        error = response.error or {"message": "unknown error"}
        if response.is_client_error:
            return {
                "content": [{"type": "text", "text": error.get("message", "request failed")}],
                "structuredContent": error,
                "isError": True,
            }
        # rule violation: information for the agent, not a failure of the tool
        text = f"{VIOLATION_PREFIX} ({error.get('rule_id')}): {error.get('message')}"
        return {"content": [{"type": "text", "text": text}], "structuredContent": error, "isError": False}


def _action_text(data: dict) -> str:
    return f"{data['message']}\n{json.dumps(data['observation'], indent=2)}"


# =============================================================================
# Stdio Transport
# =============================================================================


def serve_stdio(gateway: McpGateway, stdin: TextIO | None = None, stdout: TextIO | None = None) -> None:
    """Newline-delimited JSON-RPC until EOF; a bad line never stops the loop."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        response = gateway.handle_line(line)
        if response is not None:
            stdout.write(json.dumps(response) + "\n")
            stdout.flush()
    logger.info("stdin closed, gateway exiting")


class StdioRpcClient:
    """Client side of the stdio transport: runs the gateway as a child process."""

    def __init__(self, command: list[str]):
        self._proc = subprocess.Popen(
            command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._next_id = 0

    def request(self, method: str, params: dict | None = None) -> dict:
        self._next_id += 1
        message = {"jsonrpc": "2.0", "id": self._next_id, "method": method}
        if params is not None:
            message["params"] = params
        self._send(message)
        line = self._proc.stdout.readline()
        if not line:
            raise UpstreamError("MCP gateway process closed its output")
        return json.loads(line)

    def notify(self, method: str, params: dict | None = None) -> None:
        message = {"jsonrpc": "2.0", "method": method}
        if params is not None:
            message["params"] = params
        self._send(message)

    def _send(self, message: dict) -> None:
        self._proc.stdin.write(json.dumps(message) + "\n")
        self._proc.stdin.flush()

    def close(self) -> None:
        if self._proc.stdin:
            self._proc.stdin.close()
        self._proc.wait(timeout=10)
