"""
Blocksworld Domain Module

Pure world model for the benchmark:
- Blocks, gripper status and world states (stacks stored bottom-to-top)
- The four primitive actions and their transition function
- Goal testing and the misplaced / constructive-action analyses
- ASCII rendering for debugging

Nothing in here mutates its inputs; every operation returns a new value.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterable, Mapping, Sequence

# =============================================================================
# Errors
# =============================================================================


class DomainError(Exception):
    """Structural failure of an action. `rule_id` is the machine identifier."""

    rule_id = "domain_error"

    def __init__(
        self,
        message: str,
        *,
        block: str | None = None,
        target: str | None = None,
        other: str | None = None,
    ):
        super().__init__(message)
        self.block = block
        self.target = target
        self.other = other  # covering block, held block or actual support


class GripperOccupied(DomainError):
    rule_id = "gripper_occupied"


class GripperEmpty(DomainError):
    rule_id = "gripper_empty"


class BlockNotClear(DomainError):
    rule_id = "block_not_clear"


class BlockNotOnTable(DomainError):
    rule_id = "block_not_on_table"


class NotOnTarget(DomainError):
    rule_id = "not_on_target"


class NoFreePosition(DomainError):
    rule_id = "no_free_position"


class UnknownBlock(DomainError):
    rule_id = "unknown_block"


class HeldBlockMismatch(DomainError):
    rule_id = "held_mismatch"


class BlockSetMismatch(ValueError):
    """State and goal do not cover the same blocks."""


class InvalidState(ValueError):
    """A stack layout that breaks conservation or the position limit."""


# =============================================================================
# Data Models
# =============================================================================


@dataclass(frozen=True)
class Block:
    """A named block; `size` is an abstract width (1 when sizes are unused)."""

    name: str
    size: int = 1

    def __post_init__(self):
        if not self.name:
            raise ValueError("Block name must be a nonempty string")
        if self.size < 1:
            raise ValueError(f"Block '{self.name}' has size {self.size}; sizes start at 1")

    def to_json(self) -> dict:
        return {"name": self.name, "size": self.size}


@dataclass(frozen=True)
class GripperStatus:
    """Idle when `block` is None, otherwise holding that block."""

    block: str | None = None

    @property
    def is_idle(self) -> bool:
        return self.block is None

    def to_json(self) -> dict:
        if self.block is None:
            return {"state": "idle"}
        return {"state": "holding", "block": self.block}


class ActionKind(Enum):
    """The four primitive actions."""

    PICK_UP = "pick_up"
    PUT_DOWN = "put_down"
    STACK = "stack"
    UNSTACK = "unstack"

    @property
    def takes_target(self) -> bool:
        return self in (ActionKind.STACK, ActionKind.UNSTACK)

    @property
    def acquires(self) -> bool:
        """True for actions that move a block into the gripper."""
        return self in (ActionKind.PICK_UP, ActionKind.UNSTACK)


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    block: str
    target: str | None = None

    def __post_init__(self):
        if self.kind.takes_target and self.target is None:
            raise ValueError(f"{self.kind.value} needs a target block")
        if not self.kind.takes_target and self.target is not None:
            raise ValueError(f"{self.kind.value} takes no target block")
        if self.target is not None and self.target == self.block:
            raise ValueError(f"{self.kind.value} needs two different blocks, got '{self.block}' twice")

    @classmethod
    def pick_up(cls, block: str) -> "Action":
        return cls(ActionKind.PICK_UP, block)

    @classmethod
    def put_down(cls, block: str) -> "Action":
        return cls(ActionKind.PUT_DOWN, block)

    @classmethod
    def stack(cls, block: str, target: str) -> "Action":
        return cls(ActionKind.STACK, block, target)

    @classmethod
    def unstack(cls, block: str, target: str) -> "Action":
        return cls(ActionKind.UNSTACK, block, target)

    @classmethod
    def from_json(cls, data: Mapping) -> "Action":
        """Parse one plan step: {"action": ..., "block": ..., "target"?: ...}."""
        if not isinstance(data, Mapping):
            raise ValueError("step must be an object")
        try:
            kind = ActionKind(data.get("action"))
        except ValueError:
            raise ValueError(f"unknown action {data.get('action')!r}") from None
        block = data.get("block")
        if not isinstance(block, str) or not block:
            raise ValueError("'block' must be a nonempty string")
        target = data.get("target")
        if kind.takes_target and (not isinstance(target, str) or not target):
            raise ValueError(f"{kind.value} requires a 'target' block")
        if not kind.takes_target and "target" in data:
            raise ValueError(f"{kind.value} does not accept a 'target'")
        return cls(kind, block, target)

    def to_json(self) -> dict:
        data = {"action": self.kind.value, "block": self.block}
        if self.target is not None:
            data["target"] = self.target
        return data

    def describe(self) -> str:
        if self.target is None:
            return f"{self.kind.value}({self.block})"
        return f"{self.kind.value}({self.block}, {self.target})"


class ActionClass(Enum):
    CONSTRUCTIVE = "constructive"
    NON_CONSTRUCTIVE = "non_constructive"


@dataclass(frozen=True)
class GoalSpec:
    """Goal stacks, bottom-to-top. Matching ignores which position a stack uses."""

    stacks: tuple[tuple[str, ...], ...]
    description: str = ""

    @classmethod
    def from_stacks(cls, stacks: Iterable[Sequence[str]], description: str = "") -> "GoalSpec":
        return cls(tuple(tuple(s) for s in stacks), description)

    @cached_property
    def block_names(self) -> frozenset[str]:
        return frozenset(name for stack in self.stacks for name in stack)

    @cached_property
    def support(self) -> dict[str, str | None]:
        """block -> block directly below it in the goal (None for the table)."""
        below: dict[str, str | None] = {}
        for stack in self.stacks:
            for i, name in enumerate(stack):
                below[name] = stack[i - 1] if i else None
        return below

    @cached_property
    def tower_below(self) -> dict[str, frozenset[str]]:
        """block -> every block beneath it in its goal tower."""
        chains: dict[str, frozenset[str]] = {}
        for stack in self.stacks:
            for i, name in enumerate(stack):
                chains[name] = frozenset(stack[:i])
        return chains

    def to_json(self) -> dict:
        return {"stacks": [list(s) for s in self.stacks], "description": self.description}


@dataclass(frozen=True)
class WorldState:
    """
    One stack per table position (bottom-to-top, possibly empty) plus the gripper.
    The number of positions never changes for a scenario.
    """

    stacks: tuple[tuple[str, ...], ...]
    gripper: GripperStatus
    blocks: tuple[Block, ...]

    @classmethod
    def from_stacks(
        cls,
        stacks: Iterable[Sequence[str]],
        blocks: Iterable[Block] | None = None,
        positions: int | None = None,
        holding: str | None = None,
    ) -> "WorldState":
        """Build a state and check conservation and the position limit."""
        columns = [tuple(s) for s in stacks]
        if positions is None:
            positions = len(columns)
        occupied = [s for s in columns if s]
        if len(columns) > positions:
            if len(occupied) > positions:
                raise InvalidState(f"{len(occupied)} stacks do not fit on {positions} positions")
            columns = occupied
        columns += [()] * (positions - len(columns))

        placed = [name for s in columns for name in s]
        if holding is not None:
            placed.append(holding)
        if blocks is None:
            blocks = [Block(name) for name in sorted(placed)]
        registry = tuple(sorted(blocks, key=lambda b: b.name))
        names = [b.name for b in registry]
        if len(set(names)) != len(names):
            duplicates = sorted(n for n, c in Counter(names).items() if c > 1)
            raise InvalidState(f"duplicate block names: {', '.join(duplicates)}")
        counts = Counter(placed)
        repeated = sorted(n for n, c in counts.items() if c > 1)
        if repeated:
            raise InvalidState(f"blocks placed more than once: {', '.join(repeated)}")
        if set(counts) != set(names):
            missing = sorted(set(names) - set(counts))
            extra = sorted(set(counts) - set(names))
            raise InvalidState(f"placement does not match the block list (missing {missing}, unknown {extra})")
        return cls(tuple(columns), GripperStatus(holding), registry)

    @property
    def positions(self) -> int:
        return len(self.stacks)

    @property
    def holding(self) -> str | None:
        return self.gripper.block

    @cached_property
    def sizes(self) -> dict[str, int]:
        return {b.name: b.size for b in self.blocks}

    @cached_property
    def block_names(self) -> frozenset[str]:
        return frozenset(self.sizes)

    def size_of(self, name: str) -> int:
        return self.sizes[name]

    def top(self, position: int) -> str | None:
        stack = self.stacks[position]
        return stack[-1] if stack else None

    def is_clear(self, name: str) -> bool:
        return any(stack and stack[-1] == name for stack in self.stacks)

    def free_position(self) -> int | None:
        """Lowest-indexed empty position, or None when the table is full."""
        for i, stack in enumerate(self.stacks):
            if not stack:
                return i
        return None

    def nonempty_stacks(self) -> list[tuple[str, ...]]:
        return [s for s in self.stacks if s]

    def to_json(self) -> dict:
        return {"stacks": [list(s) for s in self.stacks], "gripper": self.gripper.to_json()}


# =============================================================================
# Helpers
# =============================================================================


def block_names(count: int) -> list[str]:
    """A..Z, then A1, A2, ... for larger scenarios."""
    names = []
    for i in range(count):
        names.append(chr(ord("A") + i) if i < 26 else f"A{i - 25}")
    return names


def stack_of(state: WorldState, name: str) -> tuple[int, int] | None:
    """(position, height index) of a block on the table, None if held or unknown."""
    for position, stack in enumerate(state.stacks):
        if name in stack:
            return position, stack.index(name)
    return None


def _replace_stack(
    stacks: tuple[tuple[str, ...], ...], position: int, new: tuple[str, ...]
) -> tuple[tuple[str, ...], ...]:
    return stacks[:position] + (new,) + stacks[position + 1:]


# =============================================================================
# Transition Function
# =============================================================================


def apply_action(state: WorldState, action: Action) -> WorldState:
    """
    Successor state for one primitive action.

    Only structural preconditions are checked here (gripper, topness, table
    space). Constraint-set rules such as size ordering live in constraints.py.
    """
    for name in (action.block, action.target):
        if name is not None and name not in state.sizes:
            raise UnknownBlock(f"unknown block '{name}'", block=name)

    x, y = action.block, action.target
    held = state.holding

    if action.kind.acquires:
        if held is not None:
            raise GripperOccupied(f"gripper already holds '{held}'", block=x, other=held)
        located = stack_of(state, x)
        position, index = located  # idle gripper: every block is on the table
        stack = state.stacks[position]
        if index != len(stack) - 1:
            raise BlockNotClear(f"'{x}' is covered by '{stack[index + 1]}'", block=x, other=stack[index + 1])
        below = stack[index - 1] if index else None

        if action.kind is ActionKind.PICK_UP:
            if below is not None:
                raise BlockNotOnTable(f"'{x}' rests on '{below}'", block=x, other=below)
        elif below != y:
            raise NotOnTarget(f"'{x}' is not directly on '{y}'", block=x, target=y, other=below)

        stacks = _replace_stack(state.stacks, position, stack[:-1])
        return WorldState(stacks, GripperStatus(x), state.blocks)

    # put_down / stack
    if held is None:
        raise GripperEmpty("gripper is empty", block=x)
    if held != x:
        raise HeldBlockMismatch(f"gripper holds '{held}', not '{x}'", block=x, other=held)

    if action.kind is ActionKind.PUT_DOWN:
        position = state.free_position()
        if position is None:
            raise NoFreePosition(f"all {state.positions} positions are occupied", block=x)
        stacks = _replace_stack(state.stacks, position, (x,))
        return WorldState(stacks, GripperStatus(None), state.blocks)

    located = stack_of(state, y)
    position, index = located
    stack = state.stacks[position]
    if index != len(stack) - 1:
        raise BlockNotClear(f"'{y}' is covered by '{stack[index + 1]}'", block=x, target=y, other=stack[index + 1])
    stacks = _replace_stack(state.stacks, position, stack + (x,))
    return WorldState(stacks, GripperStatus(None), state.blocks)


# =============================================================================
# Goal Analysis
# =============================================================================


def is_goal(state: WorldState, goal: GoalSpec) -> bool:
    if state.holding is not None:
        return False
    return Counter(state.nonempty_stacks()) == Counter(s for s in goal.stacks if s)


def in_position_blocks(state: WorldState, goal: GoalSpec) -> frozenset[str]:
    """
    Blocks at their goal position: on the table where the goal has them at the
    bottom, or directly on their goal support which is itself in position.
    A held block is never in position.
    """
    support = goal.support
    placed: set[str] = set()
    for stack in state.stacks:
        for i, name in enumerate(stack):
            below = stack[i - 1] if i else None
            if name not in support or support[name] != below:
                break
            placed.add(name)
    return frozenset(placed)


def misplaced_count(state: WorldState, goal: GoalSpec) -> int:
    if state.block_names != goal.block_names:
        missing = sorted(state.block_names ^ goal.block_names)
        raise BlockSetMismatch(f"state and goal disagree on blocks: {', '.join(missing)}")
    return len(state.block_names) - len(in_position_blocks(state, goal))


def classify_action(state_before: WorldState, action: Action, goal: GoalSpec) -> ActionClass:
    """Constructive iff the moved block ends up in position."""
    after = apply_action(state_before, action)
    if action.kind.acquires:
        return ActionClass.NON_CONSTRUCTIVE
    if action.block in in_position_blocks(after, goal):
        return ActionClass.CONSTRUCTIVE
    return ActionClass.NON_CONSTRUCTIVE


# =============================================================================
# Rendering
# =============================================================================


def render_ascii(state: WorldState) -> str:
    """One column per position, highest block first, gripper line on top."""
    width = max([len(name) for name in state.sizes] + [2]) + 2
    lines = ["gripper: idle" if state.holding is None else f"gripper: holding {state.holding}"]
    height = max((len(s) for s in state.stacks), default=0)
    for level in range(height - 1, -1, -1):
        cells = []
        for stack in state.stacks:
            cells.append(f"[{stack[level]}]".center(width) if level < len(stack) else " " * width)
        lines.append(" ".join(cells).rstrip())
    lines.append(" ".join("=" * width for _ in state.stacks))
    lines.append(" ".join(f"p{i}".center(width) for i in range(state.positions)).rstrip())
    return "\n".join(lines)
