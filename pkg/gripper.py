"""
Gripper state machine.

idle -> picking -> holding -> releasing -> idle. Acquire actions (pick_up,
unstack) run GraspStart + GraspDone, place actions (put_down, stack) run
ReleaseStart + ReleaseDone, so between actions the gripper is idle or holding.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from enum import Enum
from typing import Union

from blocks_world import Action

logger = logging.getLogger(__name__)


class PhaseName(Enum):
    IDLE = "idle"
    PICKING = "picking"
    HOLDING = "holding"
    RELEASING = "releasing"


@dataclass(frozen=True)
class GripperPhase:
    name: PhaseName
    block: str | None = None

    @classmethod
    def idle(cls) -> "GripperPhase":
        return cls(PhaseName.IDLE)

    @property
    def is_transient(self) -> bool:
        return self.name in (PhaseName.PICKING, PhaseName.RELEASING)

    def to_json(self) -> dict:
        return {"phase": self.name.value, "block": self.block}


@dataclass(frozen=True)
class GraspStart:
    block: str


@dataclass(frozen=True)
class GraspDone:
    pass


@dataclass(frozen=True)
class ReleaseStart:
    pass


@dataclass(frozen=True)
class ReleaseDone:
    pass


GripperEvent = Union[GraspStart, GraspDone, ReleaseStart, ReleaseDone]


class InvalidTransition(Exception):
    def __init__(self, phase: GripperPhase, event: GripperEvent):
        super().__init__(f"{type(event).__name__} is not allowed while {phase.name.value}")
        self.phase = phase
        self.event = event


def transition(phase: GripperPhase, event: GripperEvent) -> GripperPhase:
    if isinstance(event, GraspStart) and phase.name is PhaseName.IDLE:
        return GripperPhase(PhaseName.PICKING, event.block)
    if isinstance(event, GraspDone) and phase.name is PhaseName.PICKING:
        return GripperPhase(PhaseName.HOLDING, phase.block)
    if isinstance(event, ReleaseStart) and phase.name is PhaseName.HOLDING:
        return GripperPhase(PhaseName.RELEASING, phase.block)
    if isinstance(event, ReleaseDone) and phase.name is PhaseName.RELEASING:
        return GripperPhase.idle()
    raise InvalidTransition(phase, event)


class Gripper:
    """
    The single gripper of a simulation session.

    `phase_delay` (seconds) is slept in each transient phase; 0 keeps
    execution instantaneous.
    """

    def __init__(self, phase_delay: float = 0.0):
        self._phase = GripperPhase.idle()
        self._phase_delay = phase_delay
        self._last_phases: list[GripperPhase] = []

    @property
    def phase(self) -> GripperPhase:
        return self._phase

    @property
    def last_phases(self) -> list[GripperPhase]:
        return list(self._last_phases)

    def reset(self, holding: str | None = None) -> None:
        self._phase = GripperPhase.idle() if holding is None else GripperPhase(PhaseName.HOLDING, holding)
        self._last_phases = []

    def run(self, action: Action) -> GripperPhase:
        """Drive the phase pair for one executed action."""
        if action.kind.acquires:
            events = [GraspStart(action.block), GraspDone()]
        else:
            events = [ReleaseStart(), ReleaseDone()]
        phases = []
        for event in events:
            self._phase = transition(self._phase, event)
            phases.append(self._phase)
            if self._phase.is_transient and self._phase_delay > 0:
                time.sleep(self._phase_delay)
        self._last_phases = phases
        logger.debug("gripper %s -> %s", action.describe(), self._phase.name.value)
        return self._phase
