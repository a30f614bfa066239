"""
Oracle Planner Module

Ground-truth solver for scenarios:
- breadth-first search for small instances (optimal, or a closure proof of
  unsolvability)
- IDA* with an admissible heuristic and a transposition table for larger ones
- plan statistics (constructive vs non-constructive actions)

Search runs on canonical states: the non-empty stacks sorted, plus the held
block. Goals ignore positions and put_down always takes the lowest free
position, so permuting whole stacks never changes what is reachable.
The oracle always plans on the true state, also under partial observability.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Union

from blocks_world import (
    Action,
    ActionClass,
    BlockSetMismatch,
    GoalSpec,
    WorldState,
    apply_action,
    classify_action,
)
from constraints import ConstraintSetId, enforces_size_order
from verifier import Plan, Rejected, verify_plan

logger = logging.getLogger(__name__)

Stacks = tuple[tuple[str, ...], ...]
Key = tuple[Stacks, Union[str, None]]

# =============================================================================
# Data Models
# =============================================================================


@dataclass(frozen=True)
class Budgets:
    """Search limits: stored/expanded states, plan depth, and the BFS cut-over."""

    max_states: int = 5_000_000
    max_depth: int = 120
    bfs_block_limit: int = 6


DEFAULT_BUDGETS = Budgets()


@dataclass(frozen=True)
class Solved:
    plan: Plan
    optimal: bool
    explored_states: int = 0

    @property
    def length(self) -> int:
        return len(self.plan)


@dataclass(frozen=True)
class Unsolvable:
    explored_states: int
    reason: str = ""


@dataclass(frozen=True)
class ResourceLimit:
    states: int
    depth: int
    best_plan: Plan | None = None


SolveResult = Union[Solved, Unsolvable, ResourceLimit]


@dataclass(frozen=True)
class PlanStats:
    length: int
    constructive: int
    non_constructive: int

    def to_json(self) -> dict:
        return {
            "length": self.length,
            "constructive": self.constructive,
            "non_constructive": self.non_constructive,
        }


class PlanRejected(ValueError):
    """plan_stats was given a plan that does not verify."""

    def __init__(self, verdict: Rejected):
        super().__init__(verdict.message)
        self.verdict = verdict


class _BudgetExceeded(Exception):
    pass


# =============================================================================
# Search Space
# =============================================================================


def canonical_key(state: WorldState) -> Key:
    return tuple(sorted(s for s in state.stacks if s)), state.holding


class _SearchSpace:
    def __init__(self, initial: WorldState, goal: GoalSpec, cs: ConstraintSetId):
        self.positions = initial.positions
        self.sizes = initial.sizes
        self.size_rule = enforces_size_order(cs)
        self.goal_support = goal.support
        self.goal_below = goal.tower_below
        self.goal_key: Key = (tuple(sorted(s for s in goal.stacks if s)), None)
        self.start = canonical_key(initial)
        self._estimates: dict[Key, int] = {}

    def successors(self, key: Key) -> list[tuple[Action, Key]]:
        stacks, held = key
        result = []
        if held is None:
            for i, stack in enumerate(stacks):
                x = stack[-1]
                if len(stack) == 1:
                    result.append((Action.pick_up(x), (stacks[:i] + stacks[i + 1:], x)))
                else:
                    rest = tuple(sorted(stacks[:i] + (stack[:-1],) + stacks[i + 1:]))
                    result.append((Action.unstack(x, stack[-2]), (rest, x)))
            return result

        if len(stacks) < self.positions:
            result.append((Action.put_down(held), (tuple(sorted(stacks + ((held,),))), None)))
        for i, stack in enumerate(stacks):
            y = stack[-1]
            if self.size_rule and self.sizes[held] > self.sizes[y]:
                continue
            grown = tuple(sorted(stacks[:i] + (stack + (held,),) + stacks[i + 1:]))
            result.append((Action.stack(held, y), (grown, None)))
        return result

    def estimate(self, key: Key) -> int:
        cached = self._estimates.get(key)
        if cached is None:
            cached = _estimate(key, self.goal_support, self.goal_below)
            self._estimates[key] = cached
        return cached


def _estimate(key: Key, support: dict, tower_below: dict) -> int:
    """
    2 per misplaced block on the table, 2 more when a block beneath it belongs
    to its goal tower (its first placement cannot be final), 1 for a held block.
    """
    stacks, held = key
    h = 1 if held is not None else 0
    for stack in stacks:
        settled = True
        for i, name in enumerate(stack):
            if settled and support[name] == (stack[i - 1] if i else None):
                continue
            settled = False
            h += 2
            chain = tower_below[name]
            if chain and any(stack[j] in chain for j in range(i)):
                h += 2
    return h


def heuristic(state: WorldState, goal: GoalSpec) -> int:
    """Admissible lower bound on the remaining number of actions."""
    return _estimate(canonical_key(state), goal.support, goal.tower_below)


def _rebuild(parents: dict, key: Key) -> Plan:
    actions = []
    while parents[key] is not None:
        key, action = parents[key]
        actions.append(action)
    return Plan(tuple(reversed(actions)))


# =============================================================================
# Structural Prechecks
# =============================================================================


def structural_obstacle(initial: WorldState, goal: GoalSpec, cs: ConstraintSetId) -> str | None:
    """A reason the goal can never be reached, found without searching."""
    if initial.block_names != goal.block_names:
        missing = sorted(initial.block_names ^ goal.block_names)
        raise BlockSetMismatch(f"state and goal disagree on blocks: {', '.join(missing)}")

    needed = sum(1 for s in goal.stacks if s)
    if needed > initial.positions:
        return f"the goal needs {needed} stacks but the table has only {initial.positions} positions"

    if enforces_size_order(cs):
        in_place = {(s[i - 1], s[i]) for s in initial.stacks for i in range(1, len(s))}
        for stack in goal.stacks:
            for below, above in zip(stack, stack[1:]):
                if initial.size_of(above) > initial.size_of(below) and (below, above) not in in_place:
                    return (
                        f"the goal puts {above} (size {initial.size_of(above)}) on "
                        f"{below} (size {initial.size_of(below)}), which the size rule forbids"
                    )
    return None


# =============================================================================
# Search
# =============================================================================


def _bfs(space: _SearchSpace, budgets: Budgets) -> SolveResult:
    start = space.start
    parents: dict[Key, tuple[Key, Action] | None] = {start: None}
    if start == space.goal_key:
        return Solved(Plan(), True, 1)

    frontier = deque([(start, 0)])
    truncated = False
    while frontier:
        key, depth = frontier.popleft()
        if depth >= budgets.max_depth:
            truncated = True
            continue
        for action, child in space.successors(key):
            if child in parents:
                continue
            parents[child] = (key, action)
            if child == space.goal_key:
                return Solved(_rebuild(parents, child), True, len(parents))
            if len(parents) > budgets.max_states:
                return ResourceLimit(len(parents), depth + 1)
            frontier.append((child, depth + 1))

    if truncated:
        return ResourceLimit(len(parents), budgets.max_depth)
    return Unsolvable(len(parents), "every reachable state was explored without reaching the goal")


def _ida_star(space: _SearchSpace, budgets: Budgets) -> SolveResult:
    path: list[Action] = []
    expanded = 0
    threshold = space.estimate(space.start)

    def search(key: Key, g: int, seen: dict[Key, int]) -> float | None:
        nonlocal expanded
        f = g + space.estimate(key)
        if f > threshold:
            return f
        if key == space.goal_key:
            return None
        if seen.get(key, math.inf) <= g:
            return math.inf
        seen[key] = g
        expanded += 1
        if expanded > budgets.max_states:
            raise _BudgetExceeded()

        minimum = math.inf
        children = sorted(space.successors(key), key=lambda c: space.estimate(c[1]))
        for action, child in children:
            path.append(action)
            t = search(child, g + 1, seen)
            if t is None:
                return None
            path.pop()
            minimum = min(minimum, t)
        return minimum

    while True:
        if threshold > budgets.max_depth:
            return ResourceLimit(expanded, budgets.max_depth, _greedy_plan(space))
        seen: dict[Key, int] = {}
        try:
            t = search(space.start, 0, seen)
        except _BudgetExceeded:
            return ResourceLimit(expanded, threshold, _greedy_plan(space))
        if t is None:
            return Solved(Plan(tuple(path)), True, expanded)
        if t == math.inf:
            return Unsolvable(len(seen), "every reachable state was explored without reaching the goal")
        logger.debug("IDA* threshold %d -> %d after %d expansions", threshold, t, expanded)
        threshold = int(t)


def _greedy_plan(space: _SearchSpace, limit: int = 200_000) -> Plan | None:
    """Best-first on the heuristic alone; an upper bound when the exact search gives up."""
    counter = itertools.count()
    parents: dict[Key, tuple[Key, Action] | None] = {space.start: None}
    heap = [(space.estimate(space.start), next(counter), space.start)]
    while heap and len(parents) < limit:
        _, _, key = heapq.heappop(heap)
        if key == space.goal_key:
            return _rebuild(parents, key)
        for action, child in space.successors(key):
            if child not in parents:
                parents[child] = (key, action)
                heapq.heappush(heap, (space.estimate(child), next(counter), child))
    return None


def solve(
    initial: WorldState,
    goal: GoalSpec,
    cs: ConstraintSetId,
    budgets: Budgets = DEFAULT_BUDGETS,
) -> SolveResult:
    reason = structural_obstacle(initial, goal, cs)
    if reason is not None:
        logger.info("unsolvable by precheck: %s", reason)
        return Unsolvable(0, reason)

    space = _SearchSpace(initial, goal, cs)
    if len(initial.sizes) <= budgets.bfs_block_limit:
        result = _bfs(space, budgets)
    else:
        result = _ida_star(space, budgets)
    logger.info("solve %s blocks=%d -> %s", cs.value, len(initial.sizes), type(result).__name__)
    return result


def prove_unsolvable(
    initial: WorldState,
    goal: GoalSpec,
    cs: ConstraintSetId,
    budgets: Budgets = DEFAULT_BUDGETS,
) -> SolveResult:
    """Close the reachable set by BFS, with no structural shortcut."""
    structural_obstacle(initial, goal, cs)  # block-set check only
    return _bfs(_SearchSpace(initial, goal, cs), budgets)


def min_solution_length(
    initial: WorldState,
    goal: GoalSpec,
    cs: ConstraintSetId,
    budgets: Budgets = DEFAULT_BUDGETS,
) -> int | Unsolvable | ResourceLimit:
    result = solve(initial, goal, cs, budgets)
    if isinstance(result, Solved):
        return result.length
    return result


def plan_stats(initial: WorldState, goal: GoalSpec, cs: ConstraintSetId, plan: Plan) -> PlanStats:
    verdict = verify_plan(initial, goal, plan, cs)
    if isinstance(verdict, Rejected):
        raise PlanRejected(verdict)
    constructive = 0
    state = initial
    for action in plan.steps:
        if classify_action(state, action, goal) is ActionClass.CONSTRUCTIVE:
            constructive += 1
        state = apply_action(state, action)
    return PlanStats(len(plan), constructive, len(plan) - constructive)
