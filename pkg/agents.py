"""
Scripted reference agents for the Blocksworld benchmark.

Agents talk to the simulation only through tool calls of the form
{"tool": "stack", "args": {"block": "A", "target": "B"}}, executed by the
harness ToolBox over REST or MCP. Every agent follows the same workflow:
read rules, read status, plan, verify, revise if needed, execute, confirm.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Protocol

from blocks_world import Action, Block, GoalSpec, GripperStatus, WorldState, in_position_blocks
from constraints import UNKNOWN, ConstraintSetId
from oracle import DEFAULT_BUDGETS, Budgets, ResourceLimit, Unsolvable, solve

logger = logging.getLogger(__name__)


class HiddenBlocks(ValueError):
    """The status still reports blocks as unknown."""


@dataclass(frozen=True)
class ToolReply:
    ok: bool
    text: str
    data: dict | None = None
    error: dict | None = None


class Tools(Protocol):
    def execute_tool(self, tool_call: dict) -> ToolReply: ...


@dataclass(frozen=True)
class AgentVerdict:
    """How an episode ended: "solved", "impossible", "gave_up", or "error" when the transport broke."""

    outcome: str
    reason: str = ""

    @property
    def declared_impossible(self) -> bool:
        return self.outcome == "impossible"


# =============================================================================
# Status Parsing
# =============================================================================


def state_from_status(status: dict) -> WorldState:
    positions = status["positions"]
    if any(name == UNKNOWN for stack in positions for name in stack):
        raise HiddenBlocks("status still contains unknown blocks")
    blocks = [Block(b["name"], b.get("size", 1)) for b in status["blocks"]]
    gripper = status["gripper"]
    holding = gripper.get("block") if gripper.get("state") == "holding" else None
    return WorldState.from_stacks(positions, blocks, len(positions), holding)


def goal_from_status(status: dict) -> GoalSpec:
    goal = status["goal"]
    return GoalSpec.from_stacks(goal["stacks"], goal.get("description", ""))


def action_call(action: Action) -> dict:
    args = {"block": action.block}
    if action.target is not None:
        args["target"] = action.target
    return {"tool": action.kind.value, "args": args}


# =============================================================================
# Oracle Agent
# =============================================================================


class OracleAgent:
    """Plans with the oracle on the observed state; declares impossibility on proof."""

    name = "oracle"

    def __init__(self, budgets: Budgets = DEFAULT_BUDGETS):
        self.budgets = budgets

    def decide(self, tools: Tools) -> AgentVerdict:
        tools.execute_tool({"tool": "get_rules"})
        status = tools.execute_tool({"tool": "get_status"}).data
        try:
            state = self._believed_state(tools, status)
        except HiddenBlocks as exc:
            return AgentVerdict("gave_up", str(exc))
        if state is None:
            return AgentVerdict("gave_up", "could not uncover the hidden blocks")
        return self._plan_and_execute(tools, state, goal_from_status(status), ConstraintSetId(status["constraint_set"]))

    def _believed_state(self, tools: Tools, status: dict) -> WorldState | None:
        return state_from_status(status)

    def _plan_and_execute(self, tools: Tools, state: WorldState, goal: GoalSpec, cs: ConstraintSetId) -> AgentVerdict:
        result = solve(state, goal, cs, self.budgets)
        if isinstance(result, Unsolvable):
            logger.info("%s agent: goal is unreachable (%s)", self.name, result.reason or "closure")
            return AgentVerdict("impossible", result.reason or "the reachable state space contains no goal state")
        if isinstance(result, ResourceLimit):
            if result.best_plan is None:
                return AgentVerdict("gave_up", "search budget exhausted")
            plan = result.best_plan
        else:
            plan = result.plan

        reply = tools.execute_tool({"tool": "verify_plan", "args": {"steps": plan.to_json()["steps"]}})
        if not reply.ok or not reply.data.get("verified") or not reply.data.get("reaches_goal"):
            return AgentVerdict("gave_up", f"plan did not verify: {reply.text}")

        for action in plan.steps:
            reply = tools.execute_tool(action_call(action))
            if not reply.ok:
                return AgentVerdict("gave_up", f"{action.describe()} was rejected: {reply.text}")

        final = tools.execute_tool({"tool": "get_status"}).data
        if final.get("goal_reached"):
            return AgentVerdict("solved")
        return AgentVerdict("gave_up", "plan executed but the goal is not reached")


# =============================================================================
# Reveal Agent
# =============================================================================


class RevealAgent(OracleAgent):
    """
    Uncovers hidden blocks by moving stack tops aside, remembering everything it
    has seen, then plans on the reconstructed state.
    """

    name = "reveal"

    def _believed_state(self, tools: Tools, status: dict) -> WorldState | None:
        belief: list[list[str | None]] = [
            [None if name == UNKNOWN else name for name in stack] for stack in status["positions"]
        ]
        sizes = {b["name"]: b.get("size", 1) for b in status["blocks"]}
        budget = sum(name is None for stack in belief for name in stack)

        while any(name is None for stack in belief for name in stack):
            if budget <= 0:
                return None
            budget -= 1
            source = next(i for i, stack in enumerate(belief) if None in stack)
            top, below = belief[source][-1], belief[source][-2]
            if not tools.execute_tool(action_call(Action.unstack(top, below))).ok:
                return None
            belief[source].pop()

            free = next((i for i, stack in enumerate(belief) if not stack), None)
            if free is not None:
                placed = tools.execute_tool(action_call(Action.put_down(top))).ok
                destination = free
            else:
                others = [i for i, stack in enumerate(belief) if i != source and stack]
                if not others:
                    return None
                # prefer stacks with nothing left to uncover, then the shortest
                destination = min(others, key=lambda i: (None in belief[i], len(belief[i]), i))
                placed = tools.execute_tool(action_call(Action.stack(top, belief[destination][-1]))).ok
            if not placed:
                return None
            belief[destination].append(top)

            status = tools.execute_tool({"tool": "get_status"}).data
            sizes.update({b["name"]: b.get("size", 1) for b in status["blocks"]})
            for stack, seen in zip(belief, status["positions"]):
                for i, name in enumerate(seen):
                    if name != UNKNOWN:
                        stack[i] = name

        blocks = [Block(name, sizes.get(name, 1)) for stack in belief for name in stack]
        return WorldState.from_stacks(belief, blocks, len(belief))


# =============================================================================
# Greedy Agent
# =============================================================================


class GreedyAgent:
    """
    Naive baseline: only ever moves a block straight into its goal position,
    never verifies, and gives up when no such move exists.
    """

    name = "greedy"

    def __init__(self, max_steps: int = 200):
        self.max_steps = max_steps

    def decide(self, tools: Tools) -> AgentVerdict:
        tools.execute_tool({"tool": "get_rules"})
        for _ in range(self.max_steps):
            status = tools.execute_tool({"tool": "get_status"}).data
            if status.get("goal_reached"):
                return AgentVerdict("solved")
            try:
                state = state_from_status(status)
            except HiddenBlocks as exc:
                return AgentVerdict("gave_up", str(exc))
            moves = self._constructive_move(state, goal_from_status(status))
            if not moves:
                return AgentVerdict("gave_up", "no constructive move available")
            for action in moves:
                if not tools.execute_tool(action_call(action)).ok:
                    return AgentVerdict("gave_up", f"{action.describe()} was rejected")
        return AgentVerdict("gave_up", "step limit reached")

    def _constructive_move(self, state: WorldState, goal: GoalSpec) -> list[Action]:
        placed = in_position_blocks(state, goal)
        if state.holding is not None:
            move = _placement_after(state, goal, state.holding, placed)
            return [move] if move else []

        for position, stack in enumerate(state.stacks):
            if not stack or stack[-1] in placed:
                continue
            name = stack[-1]
            if name not in goal.support:
                continue
            if goal.support[name] is None and len(stack) == 1:
                continue  # on the table already
            grab = Action.pick_up(name) if len(stack) == 1 else Action.unstack(name, stack[-2])
            held = WorldState(
                tuple(s[:-1] if i == position else s for i, s in enumerate(state.stacks)),
                GripperStatus(name),
                state.blocks,
            )
            move = _placement_after(held, goal, name, placed)
            if move is not None:
                return [grab, move]
        return []


def _placement_after(held: WorldState, goal: GoalSpec, name: str, placed: frozenset[str]) -> Action | None:
    if name not in goal.support:
        return None
    support = goal.support[name]
    if support is None:
        return Action.put_down(name) if held.free_position() is not None else None
    if support in placed and held.is_clear(support):
        return Action.stack(name, support)
    return None


# =============================================================================
# Adapter for external agents
# =============================================================================


class AgentAdapter:
    """
    Plug-in point for agents driven from outside (for instance an LLM loop).

    Subclasses implement the callbacks; `decide` runs them against the tools:
    start(rules) once, then observe(status) / act() until act returns
    {"tool": "done"} or {"tool": "declare_impossible"}, then finish(verdict).
    """

    name = "adapter"

    def __init__(self, max_steps: int = 500):
        self.max_steps = max_steps

    def start(self, rules: str) -> None:
        pass

    def observe(self, reply: ToolReply) -> None:
        pass

    def act(self) -> dict:
        raise NotImplementedError

    def finish(self, verdict: AgentVerdict) -> None:
        pass

    def decide(self, tools: Tools) -> AgentVerdict:
        self.start(tools.execute_tool({"tool": "get_rules"}).text)
        verdict = AgentVerdict("gave_up", "step limit reached")
        for _ in range(self.max_steps):
            tool_call = self.act()
            tool = tool_call.get("tool")
            if tool == "done":
                verdict = AgentVerdict("solved")
                break
            if tool == "declare_impossible":
                verdict = AgentVerdict("impossible", tool_call.get("args", {}).get("reason", ""))
                break
            self.observe(tools.execute_tool(tool_call))
        self.finish(verdict)
        return verdict


AGENTS = {
    "oracle": OracleAgent,
    "reveal": RevealAgent,
    "greedy": GreedyAgent,
}


def create_agent(name: str, budgets: Budgets = DEFAULT_BUDGETS):
    if name not in AGENTS:
        raise ValueError(f"Unknown agent '{name}' (choose from {', '.join(AGENTS)})")
    if name == "greedy":
        return GreedyAgent()
    return AGENTS[name](budgets)
