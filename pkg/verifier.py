"""
Plan verification.

Dry-runs a complete action sequence on a copy of the state and reports the
first step that breaks a rule. The live state is never touched; under partial
observability the check still runs against the true state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Union

from blocks_world import Action, GoalSpec, WorldState, apply_action, is_goal
from constraints import ConstraintSetId, Violation, validate


class PlanSchemaError(ValueError):
    """The plan document itself is not a plan (not an object, no step list)."""


@dataclass(frozen=True)
class MalformedStep:
    """A step that could not be parsed; verification rejects at its index."""

    raw: Any
    reason: str


PlanStep = Union[Action, MalformedStep]


@dataclass(frozen=True)
class Plan:
    steps: tuple[PlanStep, ...] = ()

    @classmethod
    def of(cls, *actions: Action) -> "Plan":
        return cls(tuple(actions))

    @classmethod
    def from_json(cls, data: Any) -> "Plan":
        """Accepts {"steps": [...]} or a bare list of steps."""
        if isinstance(data, dict):
            if "steps" not in data:
                raise PlanSchemaError("plan object needs a 'steps' list")
            data = data["steps"]
        if not isinstance(data, list):
            raise PlanSchemaError("'steps' must be a list")
        steps: list[PlanStep] = []
        for raw in data:
            try:
                steps.append(Action.from_json(raw))
            except ValueError as exc:
                steps.append(MalformedStep(raw, str(exc)))
        return cls(tuple(steps))

    def to_json(self) -> dict:
        return {"steps": [s.to_json() if isinstance(s, Action) else s.raw for s in self.steps]}

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class Verified:
    reaches_goal: bool
    steps: int = 0
    final_state: WorldState | None = field(default=None, compare=False, repr=False)

    @property
    def message(self) -> str:
        if self.reaches_goal:
            return f"Plan verified; reaches goal ({self.steps} steps)."
        return f"Plan verified; all {self.steps} steps are executable but the goal is not reached."

    def to_json(self) -> dict:
        return {"verified": True, "reaches_goal": self.reaches_goal, "message": self.message}


@dataclass(frozen=True)
class Rejected:
    first_bad_index: int
    violation: Violation

    @property
    def message(self) -> str:
        step = self.violation.action.describe() if self.violation.action else "the step"
        return f"Step {self.first_bad_index + 1} ({step}) is invalid: {self.violation.message}"

    def to_json(self) -> dict:
        return {
            "verified": False,
            "first_bad_index": self.first_bad_index,
            "rule_id": self.violation.rule_id,
            "message": self.message,
        }


PlanVerdict = Union[Verified, Rejected]


def verify_plan(state: WorldState, goal: GoalSpec, plan: Plan, cs: ConstraintSetId) -> PlanVerdict:
    current = state
    for index, step in enumerate(plan.steps):
        if isinstance(step, MalformedStep):
            return Rejected(index, Violation("malformed", f"the step could not be read: {step.reason}."))
        violation = validate(current, step, cs)
        if violation is not None:
            return Rejected(index, violation)
        current = apply_action(current, step)
    return Verified(is_goal(current, goal), len(plan.steps), current)
