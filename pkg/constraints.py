"""
Constraint Engine Module

Validates actions against the active constraint set before they run:
- base physics (the structural rules of blocks_world.apply_action)
- block_size: a block may only go on an equally sized or larger block
- partial_observability: same physics, but only the top two blocks of a
  stack are visible to the agent

Violations carry a stable rule_id plus an English explanation.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from blocks_world import (
    Action,
    ActionKind,
    Block,
    DomainError,
    GripperStatus,
    WorldState,
    apply_action,
)

UNKNOWN = "unknown"
VISIBLE_DEPTH = 2

RULE_IDS = frozenset({
    "gripper_occupied",
    "gripper_empty",
    "block_not_clear",
    "block_not_on_table",
    "not_on_target",
    "no_free_position",
    "held_mismatch",
    "unknown_block",
    "size_order",
    "malformed",
})


class ConstraintSetId(Enum):
    BASE = "base"
    BLOCK_SIZE = "block_size"
    PARTIAL_OBSERVABILITY = "partial_observability"


def enforces_size_order(cs: ConstraintSetId) -> bool:
    return cs is ConstraintSetId.BLOCK_SIZE


def masks_observation(cs: ConstraintSetId) -> bool:
    return cs is ConstraintSetId.PARTIAL_OBSERVABILITY


# =============================================================================
# Data Models
# =============================================================================


@dataclass(frozen=True)
class Violation:
    rule_id: str
    message: str
    action: Action | None = None

    def __post_init__(self):
        if self.rule_id not in RULE_IDS:
            raise ValueError(f"Unknown rule_id '{self.rule_id}'")
        if not self.message:
            raise ValueError("Violation message must not be empty")

    def to_json(self) -> dict:
        data = {"rule_id": self.rule_id, "message": self.message}
        if self.action is not None:
            data["action"] = self.action.to_json()
        return data


@dataclass(frozen=True)
class Observation:
    """What the agent may see: masked stacks, visible block properties, gripper."""

    positions: tuple[tuple[str, ...], ...]
    blocks: tuple[Block, ...]
    gripper: GripperStatus
    constraint_set: ConstraintSetId

    def to_json(self) -> dict:
        return {
            "positions": [list(s) for s in self.positions],
            "blocks": [b.to_json() for b in self.blocks],
            "gripper": self.gripper.to_json(),
        }


# =============================================================================
# Observation Masking
# =============================================================================


def hidden_blocks(state: WorldState, cs: ConstraintSetId) -> frozenset[str]:
    if not masks_observation(cs):
        return frozenset()
    return frozenset(name for stack in state.stacks for name in stack[:-VISIBLE_DEPTH])


def observe(state: WorldState, cs: ConstraintSetId) -> Observation:
    hidden = hidden_blocks(state, cs)
    positions = tuple(
        tuple(UNKNOWN if name in hidden else name for name in stack) for stack in state.stacks
    )
    visible = tuple(b for b in state.blocks if b.name not in hidden)
    return Observation(positions, visible, state.gripper, cs)


# =============================================================================
# Validation
# =============================================================================


def validate(state: WorldState, action: Action, cs: ConstraintSetId) -> Violation | None:
    """None when the action is legal under `cs`, otherwise the first broken rule."""
    hidden = hidden_blocks(state, cs)
    # a hidden block always has two blocks above it, so naming one can never
    # succeed; answer exactly as for a name that does not exist
    for name in (action.block, action.target):
        if name is not None and (name in hidden or name not in state.sizes):
            return Violation("unknown_block", _no_such_block(name, cs), action)
    try:
        apply_action(state, action)
    except DomainError as exc:
        return Violation(exc.rule_id, _explain(exc, action, state), action)

    if enforces_size_order(cs) and action.kind is ActionKind.STACK:
        moving, target = state.size_of(action.block), state.size_of(action.target)
        if moving > target:
            return Violation(
                "size_order",
                f"{_name(action.block)} (size {moving}) is larger than "
                f"{_name(action.target)} (size {target}); only smaller or equally "
                f"sized blocks can be placed on larger ones.",
                action,
            )
    return None


def _name(block: str | None) -> str:
    return "nothing" if block is None else block


def _no_such_block(name: str, cs: ConstraintSetId) -> str:
    if masks_observation(cs):
        return f"There is no visible block named {name}."
    return f"There is no block named {name}."


def _explain(exc: DomainError, action: Action, state: WorldState) -> str:
    x = _name(action.block)
    y = _name(action.target)
    other = _name(exc.other)
    verb = action.kind.value

    if exc.rule_id == "gripper_occupied":
        return f"The gripper is already holding {other}; put it down or stack it before trying to {verb} {x}."
    if exc.rule_id == "gripper_empty":
        return f"The gripper is empty; {verb} needs {x} to be held first."
    if exc.rule_id == "held_mismatch":
        return f"The gripper is holding {other}, not {x}."
    if exc.rule_id == "block_not_clear":
        if action.kind is ActionKind.STACK:
            return f"{y} is not clear: {other} is on top of it, so {x} cannot be stacked there."
        return f"{x} is not clear: {other} is on top of it, and only a block with nothing on it can be moved."
    if exc.rule_id == "block_not_on_table":
        return (
            f"pick_up only lifts a block standing alone on the table; {x} rests on {other}, "
            f"use unstack({x}, {other}) instead."
        )
    if exc.rule_id == "not_on_target":
        where = "stands on the table" if exc.other is None else f"rests on {other}"
        return f"{x} is not directly on {y}; it {where}."
    if exc.rule_id == "no_free_position":
        return (
            f"All {state.positions} table positions are occupied, so {x} cannot be put down; "
            f"stack it on another block instead."
        )
    return str(exc)


# =============================================================================
# Rules Text
# =============================================================================


def describe_rules(cs: ConstraintSetId, positions: int) -> str:
    lines = [
        f"Blocksworld rules (constraint set: {cs.value})",
        "",
        f"The table has {positions} fixed positions. Each position holds at most one stack of blocks.",
        "Stacks are listed bottom-to-top.",
        "",
        "Actions:",
        "- pick_up(block): grasps a block that stands alone on the table and lifts it into the gripper.",
        "- put_down(block): places the held block on the table at the lowest-numbered free position.",
        "- stack(block, target): places the held block on top of target, which must be the top block of a stack.",
        "- unstack(block, target): lifts block from directly on top of target into the gripper.",
        "",
        "Constraints:",
        "1. Only one block can be manipulated at a time; the gripper holds at most one block.",
        "2. A block can only be moved if no other block rests on top of it.",
        "3. At most one block can rest directly on top of another block.",
        f"4. Blocks stand on the table only at the {positions} fixed positions; "
        f"put_down needs a free position.",
    ]
    if enforces_size_order(cs):
        lines.append(
            "5. Block sizes: only smaller or equally sized blocks can be placed on larger ones "
            "(stack(x, y) needs size(x) <= size(y))."
        )
    if masks_observation(cs):
        lines += [
            "",
            "Observation: only the names of the top two blocks in each stack are visible; "
            f'all other blocks are reported as "{UNKNOWN}". Actions still follow the true state.',
        ]
    return "\n".join(lines) + "\n"
