"""
Tests for the Blocksworld domain core.
Run with: pytest test_blocks_world.py
"""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from blocks_world import (
    Action,
    ActionClass,
    ActionKind,
    Block,
    BlockNotClear,
    BlockNotOnTable,
    DomainError,
    GoalSpec,
    GripperEmpty,
    GripperOccupied,
    HeldBlockMismatch,
    InvalidState,
    NoFreePosition,
    NotOnTarget,
    UnknownBlock,
    WorldState,
    apply_action,
    block_names,
    classify_action,
    in_position_blocks,
    is_goal,
    misplaced_count,
    render_ascii,
)


def sussman() -> WorldState:
    return WorldState.from_stacks([["A", "C"], ["B"], []])


SUSSMAN_GOAL = GoalSpec.from_stacks([["C", "B", "A"]])


# ---- construction ----

def test_from_stacks_pads_positions():
    state = WorldState.from_stacks([["A"]], positions=3)
    assert state.stacks == (("A",), (), ())
    assert state.free_position() == 1


def test_from_stacks_rejects_duplicates_and_overflow():
    with pytest.raises(InvalidState):
        WorldState.from_stacks([["A", "A"]], positions=3)
    with pytest.raises(InvalidState):
        WorldState.from_stacks([["A"], ["B"], ["C"]], positions=2)
    with pytest.raises(InvalidState):
        WorldState.from_stacks([["A"]], [Block("A"), Block("B")], positions=3)


def test_block_rejects_bad_values():
    with pytest.raises(ValueError):
        Block("")
    with pytest.raises(ValueError):
        Block("A", 0)


def test_block_names_alphabet():
    assert block_names(3) == ["A", "B", "C"]
    assert block_names(28)[-2:] == ["A1", "A2"]


def test_action_json_and_describe():
    action = Action.stack("A", "B")
    assert action.to_json() == {"action": "stack", "block": "A", "target": "B"}
    assert Action.from_json(action.to_json()) == action
    assert action.describe() == "stack(A, B)"
    assert Action.pick_up("C").describe() == "pick_up(C)"


def test_action_shape_errors():
    with pytest.raises(ValueError):
        Action(ActionKind.STACK, "A")
    with pytest.raises(ValueError):
        Action(ActionKind.PICK_UP, "A", "B")
    with pytest.raises(ValueError):
        Action.unstack("A", "A")
    with pytest.raises(ValueError):
        Action.from_json({"action": "fly", "block": "A"})
    with pytest.raises(ValueError):
        Action.from_json({"action": "put_down", "block": "A", "target": "B"})


# ---- transitions ----

def test_unstack_then_put_down():
    state = apply_action(sussman(), Action.unstack("C", "A"))
    assert state.holding == "C"
    assert state.stacks == (("A",), ("B",), ())
    state = apply_action(state, Action.put_down("C"))
    assert state.holding is None
    assert state.stacks == (("A",), ("B",), ("C",))


def test_put_down_uses_lowest_free_position():
    state = WorldState.from_stacks([[], ["B"], []], positions=3, holding="A",
                                   blocks=[Block("A"), Block("B")])
    assert apply_action(state, Action.put_down("A")).stacks == (("A",), ("B",), ())


@pytest.mark.parametrize(
    "state, action, error",
    [
        (WorldState.from_stacks([["A"]], positions=3, holding="B", blocks=[Block("A"), Block("B")]),
         Action.pick_up("A"), GripperOccupied),
        (WorldState.from_stacks([["A", "B"]], positions=3), Action.pick_up("A"), BlockNotClear),
        (WorldState.from_stacks([["A", "B"]], positions=3), Action.pick_up("B"), BlockNotOnTable),
        (WorldState.from_stacks([["A", "B"], ["C"]], positions=3), Action.unstack("B", "C"), NotOnTarget),
        (WorldState.from_stacks([["A"]], positions=3), Action.put_down("A"), GripperEmpty),
        (WorldState.from_stacks([["A"]], positions=3, holding="B", blocks=[Block("A"), Block("B")]),
         Action.put_down("A"), HeldBlockMismatch),
        (WorldState.from_stacks([["A"], ["B"]], positions=2, holding="C"), Action.put_down("C"), NoFreePosition),
        (WorldState.from_stacks([["A"]], positions=3), Action.pick_up("Z"), UnknownBlock),
    ],
)
def test_structural_violations(state, action, error):
    with pytest.raises(error) as info:
        apply_action(state, action)
    assert info.value.rule_id == error.rule_id


def test_stack_onto_covered_block_is_rejected():
    state = WorldState.from_stacks([["A", "B"]], positions=3, holding="C")
    with pytest.raises(BlockNotClear):
        apply_action(state, Action.stack("C", "A"))


# ---- goal analysis ----

def test_goal_ignores_position_order():
    goal = GoalSpec.from_stacks([["A"], ["B", "C"]])
    assert is_goal(WorldState.from_stacks([["B", "C"], [], ["A"]]), goal)
    assert not is_goal(WorldState.from_stacks([["B"], ["C"], ["A"]]), goal)


def test_held_block_is_never_goal():
    goal = GoalSpec.from_stacks([["A"], ["B"]])
    state = WorldState.from_stacks([["A"]], positions=3, holding="B")
    assert not is_goal(state, goal)
    assert "B" not in in_position_blocks(state, goal)


def test_misplaced_count_sussman():
    assert in_position_blocks(sussman(), SUSSMAN_GOAL) == frozenset()
    assert misplaced_count(sussman(), SUSSMAN_GOAL) == 3


def test_in_position_is_recursive():
    goal = GoalSpec.from_stacks([["A", "B", "C"]])
    state = WorldState.from_stacks([["A", "B"], ["C"]], positions=3)
    assert in_position_blocks(state, goal) == {"A", "B"}
    assert misplaced_count(state, goal) == 1
    broken = WorldState.from_stacks([["D", "B"], ["A"], ["C"]], positions=3)
    goal4 = GoalSpec.from_stacks([["A", "B", "C"], ["D"]])
    assert in_position_blocks(broken, goal4) == {"D", "A"}


def test_classify_action():
    state = apply_action(sussman(), Action.unstack("C", "A"))
    assert classify_action(sussman(), Action.unstack("C", "A"), SUSSMAN_GOAL) is ActionClass.NON_CONSTRUCTIVE
    # C belongs on the table
    assert classify_action(state, Action.put_down("C"), SUSSMAN_GOAL) is ActionClass.CONSTRUCTIVE
    held_b = WorldState.from_stacks([["A"], ["C"]], positions=3, holding="B")
    assert classify_action(held_b, Action.stack("B", "C"), SUSSMAN_GOAL) is ActionClass.CONSTRUCTIVE
    assert classify_action(held_b, Action.stack("B", "A"), SUSSMAN_GOAL) is ActionClass.NON_CONSTRUCTIVE


def test_render_ascii():
    state = WorldState.from_stacks([["A", "B", "C"], []])
    picture = render_ascii(state)
    assert picture.splitlines()[0] == "gripper: idle"
    assert "[C]" in picture.splitlines()[1]


# ---- properties ----

@st.composite
def states(draw):
    count = draw(st.integers(min_value=1, max_value=7))
    names = block_names(count)
    order = draw(st.permutations(names))
    positions = draw(st.integers(min_value=1, max_value=5))
    stacks = [[] for _ in range(positions)]
    for name in order:
        stacks[draw(st.integers(min_value=0, max_value=positions - 1))].append(name)
    return WorldState.from_stacks(stacks, positions=positions)


@given(states(), st.data())
def test_random_walks_conserve_blocks(state, data):
    names = sorted(state.block_names)
    for _ in range(30):
        kind = data.draw(st.sampled_from(list(ActionKind)))
        block = data.draw(st.sampled_from(names))
        target = data.draw(st.sampled_from(names)) if kind.takes_target else None
        if target == block:
            continue
        try:
            state = apply_action(state, Action(kind, block, target))
        except DomainError:
            continue
        placed = [n for s in state.stacks for n in s] + ([state.holding] if state.holding else [])
        assert sorted(placed) == names
        assert len(state.stacks) <= state.positions
