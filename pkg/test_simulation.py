"""
Tests for the simulation orchestrator: session lifecycle, action execution,
masking and the action log.
Run with: pytest test_simulation.py
"""

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from blocks_world import Action, ActionKind, apply_action
from orchestration import AlreadyRunning, NoActiveSession, SimulationOrchestrator, UnknownScenario
from scenarios import CUSTOM, ScenarioStore, load_scenario
from verifier import Plan, Rejected, Verified

STORE = ScenarioStore(Path(__file__).with_name("scenarios"))

SUSSMAN_PLAN = Plan.of(
    Action.unstack("C", "A"),
    Action.put_down("C"),
    Action.pick_up("B"),
    Action.stack("B", "C"),
    Action.pick_up("A"),
    Action.stack("A", "B"),
)


def sussman_document() -> dict:
    return {
        "constraint_set": "base",
        "positions": 3,
        "blocks": [{"name": n} for n in "ABC"],
        "initial": {"stacks": [["A", "C"], ["B"], []]},
        "goal": {"stacks": [["C", "B", "A"]]},
    }


def running(scenario_id: str = "cat1/s01") -> SimulationOrchestrator:
    orchestrator = SimulationOrchestrator(STORE)
    orchestrator.start(scenario_id)
    return orchestrator


def test_start_and_stop():
    """A session starts from the scenario's initial state and stops cleanly."""
    orchestrator = SimulationOrchestrator(STORE)
    summary = orchestrator.start("cat1/s01")
    assert summary == {"running": True, "scenario": "cat1/s01", "category": 1,
                       "constraint_set": "base", "positions": 3}
    assert orchestrator.state == STORE.get("cat1/s01").initial
    assert orchestrator.stop()["running"] is False
    assert not orchestrator.is_running


def test_session_errors():
    orchestrator = SimulationOrchestrator(STORE)
    with pytest.raises(NoActiveSession):
        orchestrator.status()
    with pytest.raises(UnknownScenario):
        orchestrator.start("cat9/s99")
    orchestrator.start("cat1/s01")
    with pytest.raises(AlreadyRunning):
        orchestrator.start("cat1/s02")
    assert orchestrator.start("cat1/s02", force=True)["scenario"] == "cat1/s02"
    with pytest.raises(ValueError):
        orchestrator.start()


def test_execute_plan_reaches_goal():
    """The Sussman anomaly solved step by step through the session."""
    orchestrator = SimulationOrchestrator()
    assert orchestrator.start(document=sussman_document())["category"] == CUSTOM
    assert orchestrator.is_custom
    results = [orchestrator.execute(step) for step in SUSSMAN_PLAN.steps]
    assert all(r.success for r in results)
    assert results[-1].goal_reached
    status = orchestrator.status()
    assert status["goal_reached"] and status["actions_executed"] == 6
    assert [entry.index for entry in orchestrator.get_log()] == list(range(6))
    assert orchestrator.replay() == orchestrator.state


def test_violation_leaves_state_untouched():
    orchestrator = SimulationOrchestrator()
    orchestrator.start(document=sussman_document())
    before = orchestrator.state
    result = orchestrator.execute(Action.pick_up("A"))
    assert not result.success
    assert result.rule_id == "block_not_clear"
    assert orchestrator.state == before
    assert orchestrator.get_log() == []


def test_status_masks_hidden_blocks():
    orchestrator = running("cat5/s01")
    status = orchestrator.status()
    assert status["positions"][0] == ["unknown", "B", "C"]
    assert {b["name"] for b in status["blocks"]} == {"B", "C"}
    assert status["constraint_set"] == "partial_observability"
    rules = orchestrator.rules()
    assert "unknown" in rules["rules"]
    assert rules["constraint_set"] == "partial_observability"


def test_status_phase_follows_gripper():
    orchestrator = running("cat1/s01")
    orchestrator.execute(Action.unstack("C", "A"))
    status = orchestrator.status()
    assert status["gripper"] == {"state": "holding", "block": "C"}
    assert status["phase"] == {"phase": "holding", "block": "C"}


def test_status_reports_last_gripper_phases():
    orchestrator = running("cat1/s01")
    assert orchestrator.status()["last_phases"] == []
    orchestrator.execute(Action.unstack("C", "A"))
    assert orchestrator.status()["last_phases"] == [
        {"phase": "picking", "block": "C"},
        {"phase": "holding", "block": "C"},
    ]
    orchestrator.execute(Action.put_down("C"))
    assert [p["phase"] for p in orchestrator.status()["last_phases"]] == ["releasing", "idle"]
    orchestrator.execute(Action.put_down("C"))  # rejected: the phases stay those of the last executed action
    assert [p["phase"] for p in orchestrator.status()["last_phases"]] == ["releasing", "idle"]



def test_verify_does_not_mutate():
    orchestrator = SimulationOrchestrator()
    orchestrator.start(document=sussman_document())
    before = orchestrator.status()
    assert isinstance(orchestrator.verify(SUSSMAN_PLAN), Verified)
    rejected = orchestrator.verify(Plan.of(Action.pick_up("A")))
    assert isinstance(rejected, Rejected) and rejected.first_bad_index == 0
    assert orchestrator.status() == before


def test_register_scenario():
    orchestrator = SimulationOrchestrator(STORE)
    extra = load_scenario({**sussman_document(), "id": "extra/sussman"}, custom=True)
    orchestrator.register_scenario(extra)
    assert "extra/sussman" in [entry["id"] for entry in orchestrator.list_scenarios()]
    with pytest.raises(ValueError):
        orchestrator.register_scenario(extra)
    assert orchestrator.start("extra/sussman")["scenario"] == "extra/sussman"


# ---- concurrency ----

@st.composite
def actions(draw):
    kind = draw(st.sampled_from(list(ActionKind)))
    block = draw(st.sampled_from("ABC"))
    target = draw(st.sampled_from([n for n in "ABC" if n != block])) if kind.takes_target else None
    return Action(kind, block, target)


@given(st.lists(actions(), min_size=1, max_size=30), st.integers(min_value=2, max_value=6))
def test_concurrent_execute_and_status_keep_a_replayable_log(script, threads):
    orchestrator = running("cat1/s01")
    initial = orchestrator.scenario.initial

    def worker(chunk):
        seen = []
        for action in chunk:
            orchestrator.execute(action)
            seen.append(orchestrator.status())
        return seen

    with ThreadPoolExecutor(max_workers=threads) as pool:
        snapshots = [s for seen in pool.map(worker, [script[i::threads] for i in range(threads)]) for s in seen]

    log = orchestrator.get_log()
    assert orchestrator.replay() == orchestrator.state
    assert orchestrator.status()["actions_executed"] == len(log)
    assert [entry.index for entry in log] == list(range(len(log)))
    # every snapshot is the replay of a prefix of the final log
    for status in snapshots:
        state = initial
        for entry in log[:status["actions_executed"]]:
            state = apply_action(state, entry.action)
        assert status["positions"] == [list(s) for s in state.stacks]
        assert status["gripper"] == state.gripper.to_json()
