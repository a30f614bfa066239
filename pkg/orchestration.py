"""
Simulation Orchestrator Module

Owns the single live Blocksworld session:
- Starts/stops sessions from the scenario store or inline documents
- Validates actions against the active constraint set before running them
- Drives the gripper state machine and commits state changes
- Logs every executed action for replay/analysis
- Answers status, rules and plan-verification queries without side effects
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from datetime import datetime, timezone

from blocks_world import Action, WorldState, apply_action, is_goal
from constraints import describe_rules, observe, validate
from gripper import Gripper
from scenarios import CUSTOM, Scenario, ScenarioStore, load_scenario
from verifier import Plan, PlanVerdict, verify_plan

logger = logging.getLogger(__name__)

# =============================================================================
# Errors
# =============================================================================


class SessionError(Exception):
    """Base class for session lifecycle failures; `code` is the machine id."""

    code = "session_error"


class NoActiveSession(SessionError):
    code = "no_active_session"

    def __init__(self):
        super().__init__("No simulation is running; start a scenario first.")


class AlreadyRunning(SessionError):
    code = "already_running"

    def __init__(self, scenario_id: str):
        super().__init__(f"Scenario '{scenario_id}' is already running; stop it or start with force.")
        self.scenario_id = scenario_id


class UnknownScenario(SessionError):
    code = "unknown_scenario"

    def __init__(self, scenario_id: str):
        super().__init__(f"Unknown scenario '{scenario_id}'")
        self.scenario_id = scenario_id


# =============================================================================
# Data Models
# =============================================================================


@dataclass(frozen=True)
class ActionLogEntry:
    """One executed (validated) action."""

    index: int
    timestamp: str
    action: Action

    def to_json(self) -> dict:
        return {"index": self.index, "timestamp": self.timestamp, "action": self.action.to_json()}


@dataclass(frozen=True)
class ActionResult:
    success: bool
    message: str
    observation: dict
    rule_id: str | None = None
    goal_reached: bool = False


# =============================================================================
# Simulation Orchestrator
# =============================================================================


class SimulationOrchestrator:
    """
    Central controller for one live simulation.

    Responsibilities:
    - Register and look up scenarios
    - Start/stop the session and reset the gripper
    - Validate, execute and log actions under one lock
    - Serve masked status, rules text and dry-run verification

    Reads take the same lock as writes, so a status or rules payload is
    always one consistent snapshot of scenario, state, gripper and log.
    Reads are short and one agent drives a session, so readers queue.
    """

    def __init__(self, store: ScenarioStore | None = None, phase_delay: float = 0.0):
        self._store = store
        self._extra: dict[str, Scenario] = {}
        self._lock = threading.RLock()
        self._gripper = Gripper(phase_delay)
        self._scenario: Scenario | None = None
        self._state: WorldState | None = None
        self._log: list[ActionLogEntry] = []

    # -------------------------------------------------------------------------
    # Registration
    # -------------------------------------------------------------------------

    def register_scenario(self, scenario: Scenario) -> None:
        """Make a scenario startable by id in addition to the store."""
        if scenario.id in self._extra or (self._store is not None and scenario.id in self._store):
            raise ValueError(f"Scenario '{scenario.id}' is already registered")
        self._extra[scenario.id] = scenario

    def list_scenarios(self) -> list[dict]:
        entries = self._store.catalog() if self._store is not None else []
        entries += [s.catalog_entry() for s in self._extra.values()]
        return sorted(entries, key=lambda e: e["id"])

    def _lookup(self, scenario_id: str) -> Scenario:
        if scenario_id in self._extra:
            return self._extra[scenario_id]
        if self._store is not None and scenario_id in self._store:
            return self._store.get(scenario_id)
        raise UnknownScenario(scenario_id)

    # -------------------------------------------------------------------------
    # Lifecycle
    # -------------------------------------------------------------------------

    def start(
        self,
        scenario_id: str | None = None,
        document: dict | None = None,
        force: bool = False,
    ) -> dict:
        """Start a stored scenario by id, or an inline document (category "custom")."""
        if (scenario_id is None) == (document is None):
            raise ValueError("Give exactly one of scenario_id or an inline scenario document")
        scenario = self._lookup(scenario_id) if document is None else load_scenario(document, custom=True)

        with self._lock:
            if self._scenario is not None and not force:
                raise AlreadyRunning(self._scenario.id)
            self._scenario = scenario
            self._state = scenario.initial
            self._gripper.reset(scenario.initial.holding)
            self._log = []
            logger.info("session started: %s (%s)", scenario.id, scenario.constraint_set.value)
            return self._summary()

    def stop(self) -> dict:
        with self._lock:
            if self._scenario is None:
                raise NoActiveSession()
            summary = {**self._summary(), "running": False}
            logger.info("session stopped: %s after %d actions", self._scenario.id, len(self._log))
            self._scenario = None
            self._state = None
            self._gripper.reset()
            return summary

    def _summary(self) -> dict:
        s = self._scenario
        return {
            "running": True,
            "scenario": s.id,
            "category": s.category,
            "constraint_set": s.constraint_set.value,
            "positions": s.positions,
        }

    def _require_session(self) -> tuple[Scenario, WorldState]:
        if self._scenario is None or self._state is None:
            raise NoActiveSession()
        return self._scenario, self._state

    # -------------------------------------------------------------------------
    # Action Execution
    # -------------------------------------------------------------------------

    def execute(self, action: Action) -> ActionResult:
        """
        Validate and run one action. A rule violation is a normal result
        (success=False) and leaves the state untouched.
        """
        with self._lock:
            scenario, state = self._require_session()
            cs = scenario.constraint_set
            violation = validate(state, action, cs)
            if violation is not None:
                logger.info("rejected %s: %s", action.describe(), violation.rule_id)
                return ActionResult(
                    success=False,
                    message=violation.message,
                    observation=observe(state, cs).to_json(),
                    rule_id=violation.rule_id,
                    goal_reached=is_goal(state, scenario.goal),
                )

            self._gripper.run(action)
            self._state = apply_action(state, action)
            self._log.append(ActionLogEntry(len(self._log), _now(), action))
            reached = is_goal(self._state, scenario.goal)
            logger.info("executed %s (#%d)%s", action.describe(), len(self._log), " - goal reached" if reached else "")
            return ActionResult(
                success=True,
                message=f"{action.describe()} executed.",
                observation=observe(self._state, cs).to_json(),
                goal_reached=reached,
            )

    # -------------------------------------------------------------------------
    # Queries
    # -------------------------------------------------------------------------

    def status(self) -> dict:
        with self._lock:
            scenario, state = self._require_session()
            observation = observe(state, scenario.constraint_set)
            return {
                **observation.to_json(),
                "position_count": state.positions,
                "phase": self._gripper.phase.to_json(),
                "last_phases": [p.to_json() for p in self._gripper.last_phases],
                "scenario": scenario.id,
                "category": scenario.category,
                "constraint_set": scenario.constraint_set.value,
                "goal": scenario.goal.to_json(),
                "goal_reached": is_goal(state, scenario.goal),
                "actions_executed": len(self._log),
            }

    def rules(self) -> dict:
        with self._lock:
            scenario, state = self._require_session()
            return {
                "rules": describe_rules(scenario.constraint_set, state.positions),
                "constraint_set": scenario.constraint_set.value,
            }

    def verify(self, plan: Plan) -> PlanVerdict:
        """Dry-run `plan` on the live true state; nothing is committed."""
        with self._lock:
            scenario, state = self._require_session()
        verdict = verify_plan(state, scenario.goal, plan, scenario.constraint_set)
        logger.info("verified %d-step plan: %s", len(plan), verdict.to_json()["verified"])
        return verdict

    def get_log(self) -> list[ActionLogEntry]:
        with self._lock:
            return list(self._log)

    def replay(self) -> WorldState:
        """Re-run the action log from the scenario's initial state."""
        with self._lock:
            scenario, _ = self._require_session()
            log = list(self._log)
        state = scenario.initial
        for entry in log:
            state = apply_action(state, entry.action)
        return state

    @property
    def is_running(self) -> bool:
        return self._scenario is not None

    @property
    def scenario(self) -> Scenario | None:
        return self._scenario

    @property
    def state(self) -> WorldState | None:
        """The true (unmasked) live state."""
        return self._state

    @property
    def is_custom(self) -> bool:
        return self._scenario is not None and self._scenario.category == CUSTOM


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()
