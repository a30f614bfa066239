"""
Scenario Store Module

Scenario JSON documents and the shipped suite:
- Loading with schema/invariant validation (errors carry a JSON pointer)
- Metadata recomputation through the oracle planner
- Category predicates and the suite envelope
- A seeded generator that rejection-samples new instances

Layout on disk: scenarios/cat{1..5}/sNN.json, ids "catN/sNN".
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterator

from blocks_world import (
    Block,
    GoalSpec,
    InvalidState,
    WorldState,
    block_names,
    misplaced_count,
)
from constraints import ConstraintSetId
from oracle import (
    DEFAULT_BUDGETS,
    Budgets,
    PlanRejected,
    ResourceLimit,
    Solved,
    Unsolvable,
    plan_stats,
    solve,
)

logger = logging.getLogger(__name__)

CUSTOM = "custom"

CATEGORY_NAMES = {
    1: "Basic",
    2: "Non-constructive actions",
    3: "Impossible",
    4: "Additional constraints",
    5: "Partial observability",
}

CATEGORY_CONSTRAINTS = {
    1: (ConstraintSetId.BASE,),
    2: (ConstraintSetId.BASE,),
    3: (ConstraintSetId.BASE, ConstraintSetId.BLOCK_SIZE),
    4: (ConstraintSetId.BLOCK_SIZE,),
    5: (ConstraintSetId.PARTIAL_OBSERVABILITY,),
}

# Suite envelope
MIN_BLOCKS, MAX_BLOCKS = 3, 20
MIN_POSITIONS, MAX_POSITIONS = 3, 6
MAX_MISPLACED = 10
MIN_LENGTH, MAX_LENGTH = 4, 80
MAX_NON_CONSTRUCTIVE = 60

# =============================================================================
# Errors
# =============================================================================


class SchemaError(ValueError):
    """A scenario document that does not load. `pointer` is a JSON pointer."""

    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer
        self.reason = message


class GenerationExhausted(RuntimeError):
    pass


# =============================================================================
# Data Models
# =============================================================================


@dataclass(frozen=True)
class ScenarioMetadata:
    min_solution_length: int | None
    length_is_upper_bound: bool
    block_count: int
    stack_positions: int
    misplaced_blocks: int
    non_constructive_in_optimal: int | None

    def to_json(self) -> dict:
        return {
            "min_solution_length": self.min_solution_length,
            "length_is_upper_bound": self.length_is_upper_bound,
            "block_count": self.block_count,
            "stack_positions": self.stack_positions,
            "misplaced_blocks": self.misplaced_blocks,
            "non_constructive_in_optimal": self.non_constructive_in_optimal,
        }


@dataclass(frozen=True)
class Scenario:
    id: str
    category: int | str  # 1..5, or "custom" for inline documents
    constraint_set: ConstraintSetId
    positions: int
    blocks: tuple[Block, ...]
    initial: WorldState
    goal: GoalSpec
    metadata: ScenarioMetadata | None = None

    @property
    def block_count(self) -> int:
        return len(self.blocks)

    def catalog_entry(self) -> dict:
        return {
            "id": self.id,
            "category": self.category,
            "constraint_set": self.constraint_set.value,
            "block_count": self.block_count,
        }


# =============================================================================
# Loading
# =============================================================================


def describe_goal(stacks) -> str:
    """"Stack A on B; place C alone on the table." for [[B, A], [C]]."""
    parts = []
    for stack in stacks:
        if not stack:
            continue
        if len(stack) == 1:
            parts.append(f"place {stack[0]} alone on the table")
        else:
            parts.append("stack " + " on ".join(reversed(stack)))
    if not parts:
        return ""
    text = "; ".join(parts)
    return text[0].upper() + text[1:] + "."


def _require(condition: bool, pointer: str, message: str) -> None:
    if not condition:
        raise SchemaError(pointer, message)


def _read_stacks(raw: Any, pointer: str) -> list[list[str]]:
    _require(isinstance(raw, list), pointer, "expected a list of stacks")
    stacks = []
    for i, stack in enumerate(raw):
        _require(isinstance(stack, list), f"{pointer}/{i}", "expected a list of block names")
        for j, name in enumerate(stack):
            _require(isinstance(name, str) and bool(name), f"{pointer}/{i}/{j}", "expected a block name")
        stacks.append(list(stack))
    return stacks


def _read_int(doc: dict, key: str, pointer: str, *, minimum: int = 0, nullable: bool = False) -> int | None:
    value = doc.get(key)
    if value is None and nullable:
        return None
    _require(
        isinstance(value, int) and not isinstance(value, bool) and value >= minimum,
        f"{pointer}/{key}",
        f"expected an integer >= {minimum}",
    )
    return value


def _read_metadata(raw: Any) -> ScenarioMetadata:
    _require(isinstance(raw, dict), "/metadata", "expected an object")
    upper = raw.get("length_is_upper_bound", False)
    _require(isinstance(upper, bool), "/metadata/length_is_upper_bound", "expected a boolean")
    return ScenarioMetadata(
        min_solution_length=_read_int(raw, "min_solution_length", "/metadata", nullable=True),
        length_is_upper_bound=upper,
        block_count=_read_int(raw, "block_count", "/metadata"),
        stack_positions=_read_int(raw, "stack_positions", "/metadata"),
        misplaced_blocks=_read_int(raw, "misplaced_blocks", "/metadata"),
        non_constructive_in_optimal=_read_int(raw, "non_constructive_in_optimal", "/metadata", nullable=True),
    )


def load_scenario(source: bytes | str | dict, *, custom: bool = False) -> Scenario:
    """
    Parse and validate one scenario document.

    With `custom=True` (inline documents posted to the service) id, category
    and metadata are optional and the category is reported as "custom".
    """
    if isinstance(source, dict):
        doc = source
    else:
        try:
            doc = json.loads(source)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise SchemaError("", f"not valid JSON: {exc}") from None
    _require(isinstance(doc, dict), "", "a scenario must be a JSON object")

    scenario_id = doc.get("id", CUSTOM if custom else None)
    _require(isinstance(scenario_id, str) and bool(scenario_id), "/id", "expected a nonempty string")

    if custom:
        category: int | str = CUSTOM
    else:
        category = doc.get("category")
        _require(
            isinstance(category, int) and not isinstance(category, bool) and category in CATEGORY_NAMES,
            "/category",
            "expected an integer category 1..5",
        )

    try:
        cs = ConstraintSetId(doc.get("constraint_set"))
    except ValueError:
        valid = ", ".join(c.value for c in ConstraintSetId)
        raise SchemaError("/constraint_set", f"expected one of {valid}") from None
    if not custom:
        _require(
            cs in CATEGORY_CONSTRAINTS[category],
            "/constraint_set",
            f"category {category} does not allow constraint set '{cs.value}'",
        )

    positions = _read_int(doc, "positions", "", minimum=1)

    raw_blocks = doc.get("blocks")
    _require(isinstance(raw_blocks, list) and bool(raw_blocks), "/blocks", "expected a nonempty list of blocks")
    blocks = []
    seen: set[str] = set()
    for i, raw in enumerate(raw_blocks):
        _require(isinstance(raw, dict), f"/blocks/{i}", "expected an object with name and size")
        name = raw.get("name")
        _require(isinstance(name, str) and bool(name), f"/blocks/{i}/name", "expected a nonempty string")
        _require(name not in seen, f"/blocks/{i}/name", f"duplicate block name '{name}'")
        size = raw.get("size", 1)
        _require(isinstance(size, int) and not isinstance(size, bool) and size >= 1, f"/blocks/{i}/size", "expected an integer >= 1")
        seen.add(name)
        blocks.append(Block(name, size))

    initial_doc = doc.get("initial")
    _require(isinstance(initial_doc, dict), "/initial", "expected an object")
    stacks = _read_stacks(initial_doc.get("stacks"), "/initial/stacks")
    gripper = initial_doc.get("gripper", {"state": "idle"})
    _require(isinstance(gripper, dict), "/initial/gripper", "expected an object")
    holding = None
    if gripper.get("state") == "holding":
        holding = gripper.get("block")
        _require(isinstance(holding, str) and bool(holding), "/initial/gripper/block", "expected a block name")
    else:
        _require(gripper.get("state") == "idle", "/initial/gripper/state", "expected 'idle' or 'holding'")
    try:
        initial = WorldState.from_stacks(stacks, blocks, positions, holding)
    except InvalidState as exc:
        raise SchemaError("/initial/stacks", str(exc)) from None

    goal_doc = doc.get("goal")
    _require(isinstance(goal_doc, dict), "/goal", "expected an object")
    goal_stacks = [s for s in _read_stacks(goal_doc.get("stacks"), "/goal/stacks") if s]
    goal_names = [name for s in goal_stacks for name in s]
    _require(len(goal_names) == len(set(goal_names)), "/goal", "a block appears in more than one goal place")
    missing = sorted(seen - set(goal_names))
    unknown = sorted(set(goal_names) - seen)
    _require(not missing, "/goal", f"goal omits blocks: {', '.join(missing)}")
    _require(not unknown, "/goal", f"goal names unknown blocks: {', '.join(unknown)}")
    description = goal_doc.get("description") or describe_goal(goal_stacks)
    _require(isinstance(description, str), "/goal/description", "expected a string")
    goal = GoalSpec.from_stacks(goal_stacks, description)

    metadata = None
    if doc.get("metadata") is not None:
        metadata = _read_metadata(doc["metadata"])
    elif not custom:
        raise SchemaError("/metadata", "expected an object")

    return Scenario(
        id=scenario_id,
        category=category,
        constraint_set=cs,
        positions=positions,
        blocks=initial.blocks,
        initial=initial,
        goal=goal,
        metadata=metadata,
    )


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "id": s.id,
        "category": s.category,
        "constraint_set": s.constraint_set.value,
        "positions": s.positions,
        "blocks": [b.to_json() for b in s.blocks],
        "initial": s.initial.to_json(),
        "goal": s.goal.to_json(),
        "metadata": s.metadata.to_json() if s.metadata else None,
    }


def dump_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2) + "\n"


# =============================================================================
# Store
# =============================================================================


class ScenarioStore:
    """Read-only catalog of every scenario file under `root`, ordered by id."""

    def __init__(self, root: Path | str):
        self._root = Path(root)
        self._scenarios: dict[str, Scenario] = {}
        self._paths: dict[str, Path] = {}
        for path in sorted(self._root.glob("cat*/*.json")):
            try:
                scenario = load_scenario(path.read_bytes())
            except SchemaError as exc:
                raise SchemaError(exc.pointer, f"{path}: {exc.reason}") from None
            if scenario.id in self._scenarios:
                raise ValueError(f"Scenario '{scenario.id}' is defined twice")
            self._scenarios[scenario.id] = scenario
            self._paths[scenario.id] = path
        logger.info("loaded %d scenarios from %s", len(self._scenarios), self._root)

    @property
    def root(self) -> Path:
        return self._root

    def get(self, scenario_id: str) -> Scenario:
        return self._scenarios[scenario_id]

    def path_of(self, scenario_id: str) -> Path:
        return self._paths[scenario_id]

    def __contains__(self, scenario_id: object) -> bool:
        return scenario_id in self._scenarios

    def __len__(self) -> int:
        return len(self._scenarios)

    def __iter__(self) -> Iterator[Scenario]:
        return iter(self._scenarios[k] for k in self.ids())

    def ids(self, categories: set[int] | None = None) -> list[str]:
        return sorted(
            k for k, s in self._scenarios.items() if categories is None or s.category in categories
        )

    def catalog(self) -> list[dict]:
        return [self._scenarios[k].catalog_entry() for k in self.ids()]


# =============================================================================
# Metadata & Category Predicates
# =============================================================================


def recompute_metadata(s: Scenario, budgets: Budgets = DEFAULT_BUDGETS) -> ScenarioMetadata:
    misplaced = misplaced_count(s.initial, s.goal)
    result = solve(s.initial, s.goal, s.constraint_set, budgets)
    common = dict(block_count=s.block_count, stack_positions=s.positions, misplaced_blocks=misplaced)

    if isinstance(result, Solved):
        stats = plan_stats(s.initial, s.goal, s.constraint_set, result.plan)
        return ScenarioMetadata(result.length, False, non_constructive_in_optimal=stats.non_constructive, **common)
    if isinstance(result, Unsolvable):
        return ScenarioMetadata(None, False, non_constructive_in_optimal=None, **common)

    logger.warning("budget exhausted on %s after %d states", s.id, result.states)
    if result.best_plan is None:
        return ScenarioMetadata(None, True, non_constructive_in_optimal=None, **common)
    try:
        stats = plan_stats(s.initial, s.goal, s.constraint_set, result.best_plan)
    except PlanRejected:
        return ScenarioMetadata(None, True, non_constructive_in_optimal=None, **common)
    return ScenarioMetadata(len(result.best_plan), True, non_constructive_in_optimal=stats.non_constructive, **common)


def check_envelope(s: Scenario, metadata: ScenarioMetadata) -> list[str]:
    problems = []
    if not MIN_BLOCKS <= s.block_count <= MAX_BLOCKS:
        problems.append(f"{s.block_count} blocks is outside {MIN_BLOCKS}..{MAX_BLOCKS}")
    if not MIN_POSITIONS <= s.positions <= MAX_POSITIONS:
        problems.append(f"{s.positions} positions is outside {MIN_POSITIONS}..{MAX_POSITIONS}")
    if metadata.misplaced_blocks > MAX_MISPLACED:
        problems.append(f"{metadata.misplaced_blocks} misplaced blocks exceeds {MAX_MISPLACED}")
    length = metadata.min_solution_length
    if length is not None and not MIN_LENGTH <= length <= MAX_LENGTH:
        problems.append(f"solution length {length} is outside {MIN_LENGTH}..{MAX_LENGTH}")
    nc = metadata.non_constructive_in_optimal
    if nc is not None and not 0 <= nc <= MAX_NON_CONSTRUCTIVE:
        problems.append(f"{nc} non-constructive actions is outside 0..{MAX_NON_CONSTRUCTIVE}")
    return problems


def check_category(
    s: Scenario,
    metadata: ScenarioMetadata | None = None,
    budgets: Budgets = DEFAULT_BUDGETS,
) -> list[str]:
    """Category predicate failures for `s`; an empty list means the scenario fits."""
    if s.category == CUSTOM:
        return []
    if metadata is None:
        metadata = recompute_metadata(s, budgets)

    problems = []
    if s.constraint_set not in CATEGORY_CONSTRAINTS[s.category]:
        problems.append(f"category {s.category} does not allow constraint set '{s.constraint_set.value}'")
    problems += check_envelope(s, metadata)

    length = metadata.min_solution_length
    if s.category == 3:
        if length is not None or metadata.length_is_upper_bound:
            problems.append("an impossible scenario must be proven unsolvable")
        return problems

    if length is None:
        problems.append("no solution found")
        return problems
    if metadata.length_is_upper_bound:
        problems.append("the optimum could not be established within the search budget")

    if s.category == 1 and length != 2 * metadata.misplaced_blocks:
        problems.append(f"optimal length {length} needs moves beyond one per misplaced block")
    if s.category == 2 and length <= 2 * metadata.misplaced_blocks:
        problems.append("the optimal plan needs no non-constructive placement")
    if s.category == 4:
        unconstrained = solve(s.initial, s.goal, ConstraintSetId.BASE, budgets)
        if not isinstance(unconstrained, Solved) or unconstrained.length >= length:
            problems.append("the size rule does not force a longer plan than base physics")
    if s.category == 5 and not any(len(stack) >= 3 for stack in s.initial.stacks):
        problems.append("no stack is tall enough to hide a block")
    return problems


# =============================================================================
# Generator
# =============================================================================


@dataclass(frozen=True)
class GeneratorSpec:
    category: int
    block_count: int
    positions: int
    seed: int = 0
    size_profile: str | None = None  # "distinct" | "uniform"; category 4 defaults to distinct
    max_attempts: int = 200
    budgets: Budgets = field(default_factory=lambda: Budgets(max_states=500_000))
    scenario_id: str | None = None  # pins the id of a frozen suite entry


def _random_layout(rng: random.Random, names: list[str], max_stacks: int, min_stacks: int = 1) -> list[list[str]]:
    order = list(names)
    rng.shuffle(order)
    count = rng.randint(min_stacks, min(max_stacks, len(order)))
    cuts = sorted(rng.sample(range(1, len(order)), count - 1))
    bounds = [0] + cuts + [len(order)]
    return [order[a:b] for a, b in zip(bounds, bounds[1:])]


def _by_size(stacks: list[list[str]], sizes: dict[str, int]) -> list[list[str]]:
    """Reorder each stack so no block sits on a smaller one."""
    return [sorted(stack, key=lambda n: -sizes[n]) for stack in stacks]


def _candidate(spec: GeneratorSpec, rng: random.Random) -> Scenario:
    names = block_names(spec.block_count)
    cs = {1: ConstraintSetId.BASE, 2: ConstraintSetId.BASE, 4: ConstraintSetId.BLOCK_SIZE,
          5: ConstraintSetId.PARTIAL_OBSERVABILITY}.get(spec.category)
    if spec.category == 3:
        base_possible = spec.block_count > spec.positions
        cs = ConstraintSetId.BASE if base_possible and rng.random() < 0.6 else ConstraintSetId.BLOCK_SIZE

    profile = spec.size_profile or ("distinct" if cs is ConstraintSetId.BLOCK_SIZE else "uniform")
    if profile == "distinct":
        values = list(range(1, spec.block_count + 1))
        rng.shuffle(values)
        sizes = dict(zip(names, values))
    else:
        sizes = {n: 1 for n in names}

    initial = _random_layout(rng, names, spec.positions)
    if spec.category == 3 and cs is ConstraintSetId.BASE:
        goal = _random_layout(rng, names, spec.block_count, min_stacks=spec.positions + 1)
    else:
        goal = _random_layout(rng, names, spec.positions)

    if cs is ConstraintSetId.BLOCK_SIZE:
        initial = _by_size(initial, sizes)
        goal = _by_size(goal, sizes)
        if spec.category == 3:
            towers = [s for s in goal if len(s) >= 2]
            if not towers:
                merged = goal.pop(0) + goal.pop(0)
                goal.append(merged)
                towers = [merged]
            towers[0].reverse()  # larger blocks above smaller ones

    blocks = [Block(n, sizes[n]) for n in names]
    state = WorldState.from_stacks(initial, blocks, spec.positions)
    return Scenario(
        id=spec.scenario_id or f"gen/c{spec.category}-n{spec.block_count}-p{spec.positions}-s{spec.seed}",
        category=spec.category,
        constraint_set=cs,
        positions=spec.positions,
        blocks=state.blocks,
        initial=state,
        goal=GoalSpec.from_stacks(goal, describe_goal(goal)),
    )


def generate_scenario(spec: GeneratorSpec) -> Scenario:
    """Rejection-sample a scenario of `spec.category`; deterministic in the seed."""
    if spec.category not in CATEGORY_NAMES:
        raise ValueError(f"Unknown category {spec.category}")
    if not MIN_BLOCKS <= spec.block_count <= MAX_BLOCKS:
        raise ValueError(f"block_count must be within {MIN_BLOCKS}..{MAX_BLOCKS}")
    if not MIN_POSITIONS <= spec.positions <= MAX_POSITIONS:
        raise ValueError(f"positions must be within {MIN_POSITIONS}..{MAX_POSITIONS}")

    rng = random.Random(f"blocksbench:{spec.category}:{spec.block_count}:{spec.positions}:{spec.seed}")
    for attempt in range(spec.max_attempts):
        candidate = _candidate(spec, rng)
        metadata = recompute_metadata(candidate, spec.budgets)
        problems = check_category(candidate, metadata, spec.budgets)
        if not problems:
            logger.info("generated %s after %d attempts", candidate.id, attempt + 1)
            return replace(candidate, metadata=metadata)
        logger.debug("attempt %d rejected: %s", attempt, "; ".join(problems))
    raise GenerationExhausted(
        f"no category {spec.category} scenario with {spec.block_count} blocks on "
        f"{spec.positions} positions after {spec.max_attempts} attempts"
    )


# =============================================================================
# Frozen Suites
# =============================================================================


def load_manifest(source: bytes | str | dict) -> list[GeneratorSpec]:
    """
    Frozen generator settings, one entry per suite file:
    {"scenarios": [{"id": "cat1/s01", "category": 1, "blocks": 4, "positions": 3, "seed": 7}]}
    """
    if isinstance(source, dict):
        doc = source
    else:
        try:
            doc = json.loads(source)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise SchemaError("", f"not valid JSON: {exc}") from None
    _require(isinstance(doc, dict) and isinstance(doc.get("scenarios"), list), "/scenarios", "expected a list")

    specs = []
    for i, entry in enumerate(doc["scenarios"]):
        pointer = f"/scenarios/{i}"
        _require(isinstance(entry, dict), pointer, "expected an object")
        _require(isinstance(entry.get("id"), str) and bool(entry["id"]), f"{pointer}/id", "expected a scenario id")
        sizes = entry.get("sizes")
        _require(sizes in (None, "distinct", "uniform"), f"{pointer}/sizes", "expected 'distinct' or 'uniform'")
        specs.append(GeneratorSpec(
            category=_read_int(entry, "category", pointer, minimum=1),
            block_count=_read_int(entry, "blocks", pointer, minimum=1),
            positions=_read_int(entry, "positions", pointer, minimum=1),
            seed=_read_int(entry, "seed", pointer),
            size_profile=sizes,
            max_attempts=_read_int(entry, "attempts", pointer, minimum=1, nullable=True) or 200,
            scenario_id=entry["id"],
        ))
    return specs


def regenerate_suite(specs: list[GeneratorSpec], root: Path | str) -> list[Path]:
    """Write every frozen entry to root/<id>.json; same manifest, same bytes."""
    written = []
    for spec in specs:
        path = Path(root) / f"{spec.scenario_id}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dump_scenario(generate_scenario(spec)))
        written.append(path)
    logger.info("regenerated %d scenarios under %s", len(written), root)
    return written


def regeneration_drift(specs: list[GeneratorSpec], store: ScenarioStore) -> list[str]:
    """Entries whose stored file differs from what the generator produces now."""
    drift = []
    for spec in specs:
        if spec.scenario_id not in store:
            drift.append(f"{spec.scenario_id}: not in {store.root}")
            continue
        expected = dump_scenario(generate_scenario(spec))
        if store.path_of(spec.scenario_id).read_text() != expected:
            drift.append(f"{spec.scenario_id}: stored file differs from its regeneration")
    return drift
