"""Declarative missions: goal predicates, success checking, catalog loading.

A mission briefs the human operator; the robot side never sees it. Goal
conditions are conjunctive within a subgoal and across subgoals; a class
selector is satisfied when any instance of that class meets the condition.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from arena.core.affordances import AffordanceProperty
from arena.core.registry import ClassRegistry
from arena.core.world import WorldState, load_scene
from arena.errors import (
    CatalogError,
    DuplicateId,
    OverrideUnlicensed,
    SceneNotFound,
    SchemaError,
    SelectorUnresolvable,
)

MISSION_SCHEMA = "arena-mission/1"

CONDITION_TYPES = ("state_equals", "contained_in", "held_by", "in_room")


@dataclass(frozen=True, slots=True)
class Selector:
    """Match by exact instance id, or by class (any instance of it)."""

    instance: Optional[str] = None
    class_name: Optional[str] = None

    def __post_init__(self):
        if (self.instance is None) == (self.class_name is None):
            raise SchemaError("selector needs exactly one of 'instance' / 'class'")

    def matches(self, state: WorldState) -> list[str]:
        if self.instance is not None:
            if self.instance not in state.objects:
                raise SelectorUnresolvable(f"unknown instance {self.instance!r}")
            return [self.instance]
        ids = sorted(
            iid for iid, obj in state.objects.items()
            if obj.class_name == self.class_name
        )
        if not ids:
            raise SelectorUnresolvable(f"no instance of class {self.class_name!r}")
        return ids

    def to_doc(self) -> dict:
        if self.instance is not None:
            return {"instance": self.instance}
        return {"class": self.class_name}

    @staticmethod
    def from_doc(doc: dict) -> "Selector":
        if not isinstance(doc, dict):
            raise SchemaError("selector must be an object")
        return Selector(instance=doc.get("instance"), class_name=doc.get("class"))


@dataclass(frozen=True, slots=True)
class GoalCondition:
    kind: str
    target: Selector
    key: Optional[str] = None        # state_equals
    value: object = None             # state_equals
    receptacle: Optional[Selector] = None  # contained_in
    room: Optional[str] = None       # in_room

    def __post_init__(self):
        if self.kind not in CONDITION_TYPES:
            raise SchemaError(f"unknown condition type {self.kind!r}")

    def holds(self, state: WorldState) -> bool:
        candidates = self.target.matches(state)
        if self.kind == "state_equals":
            return any(
                state.objects[iid].states.get(self.key) == self.value
                for iid in candidates
            )
        if self.kind == "held_by":
            return any(state.objects[iid].held for iid in candidates)
        if self.kind == "in_room":
            return any(state.effective_room(iid) == self.room for iid in candidates)
        # contained_in
        receptacles = set(self.receptacle.matches(state))
        return any(
            state.objects[iid].contained_in in receptacles for iid in candidates
        )

    def to_doc(self) -> dict:
        doc: dict = {"type": self.kind, "target": self.target.to_doc()}
        if self.kind == "state_equals":
            doc["key"] = self.key
            doc["value"] = self.value
        elif self.kind == "contained_in":
            doc["receptacle"] = self.receptacle.to_doc()
        elif self.kind == "in_room":
            doc["room"] = self.room
        return doc

    @staticmethod
    def from_doc(doc: dict) -> "GoalCondition":
        kind = doc.get("type")
        if kind not in CONDITION_TYPES:
            raise SchemaError(f"unknown condition type {kind!r}")
        return GoalCondition(
            kind=kind,
            target=Selector.from_doc(doc.get("target", {})),
            key=doc.get("key"),
            value=doc.get("value"),
            receptacle=Selector.from_doc(doc["receptacle"]) if kind == "contained_in" else None,
            room=doc.get("room"),
        )


@dataclass(frozen=True, slots=True)
class Subgoal:
    description: str
    conditions: tuple[GoalCondition, ...]

    def holds(self, state: WorldState) -> bool:
        return all(c.holds(state) for c in self.conditions)


@dataclass(frozen=True, slots=True)
class StateOverride:
    instance: str
    states: dict[str, object]


@dataclass(frozen=True, slots=True)
class MissionSpec:
    mission_id: str
    title: str
    user_briefing: str
    scene_id: str
    subgoals: tuple[Subgoal, ...]
    scene_overrides: tuple[StateOverride, ...] = ()
    tags: tuple[str, ...] = ("seen",)

    @property
    def seen(self) -> bool:
        return "seen" in self.tags

    def to_doc(self) -> dict:
        return {
            "schema": MISSION_SCHEMA,
            "mission_id": self.mission_id,
            "title": self.title,
            "user_briefing": self.user_briefing,
            "scene_id": self.scene_id,
            "tags": list(self.tags),
            "scene_overrides": [
                {"instance": o.instance, "states": dict(o.states)}
                for o in self.scene_overrides
            ],
            "subgoals": [
                {
                    "description": sg.description,
                    "conditions": [c.to_doc() for c in sg.conditions],
                }
                for sg in self.subgoals
            ],
        }


@dataclass(frozen=True, slots=True)
class MissionStatus:
    subgoals: tuple[bool, ...]
    overall: bool
    completed_tick: Optional[int] = None

    def to_doc(self) -> dict:
        return {
            "subgoals": list(self.subgoals),
            "overall": self.overall,
            "completed_tick": self.completed_tick,
        }


def mission_from_doc(doc: dict) -> MissionSpec:
    if not isinstance(doc, dict) or doc.get("schema") != MISSION_SCHEMA:
        raise SchemaError(f"expected schema {MISSION_SCHEMA!r}")
    for key in ("mission_id", "title", "user_briefing", "scene_id", "subgoals"):
        if key not in doc:
            raise SchemaError(f"mission missing {key!r}")
    subgoals = []
    for sg in doc["subgoals"]:
        conditions = tuple(GoalCondition.from_doc(c) for c in sg.get("conditions", []))
        if not conditions:
            raise SchemaError("subgoal without conditions")
        subgoals.append(Subgoal(description=sg.get("description", ""), conditions=conditions))
    if not subgoals:
        raise SchemaError("mission needs at least one subgoal")
    tags = tuple(doc.get("tags", ["seen"]))
    if not any(t in ("seen", "unseen") for t in tags):
        raise SchemaError("mission tags must include 'seen' or 'unseen'")
    overrides = tuple(
        StateOverride(instance=o["instance"], states=dict(o.get("states", {})))
        for o in doc.get("scene_overrides", [])
    )
    return MissionSpec(
        mission_id=doc["mission_id"],
        title=doc["title"],
        user_briefing=doc["user_briefing"],
        scene_id=doc["scene_id"],
        subgoals=tuple(subgoals),
        scene_overrides=overrides,
        tags=tags,
    )


def canonical_mission_bytes(spec: MissionSpec) -> bytes:
    return (json.dumps(spec.to_doc(), indent=2, sort_keys=True) + "\n").encode("utf-8")


# -- operations ---------------------------------------------------------------

class SceneIndex:
    """Resolves scene ids to documents under a directory of `*.scene.json`."""

    def __init__(self, scene_dir: str | Path):
        self.scene_dir = Path(scene_dir)

    def load(self, scene_id: str, registry: ClassRegistry) -> WorldState:
        path = self.scene_dir / f"{scene_id}.scene.json"
        if not path.exists():
            raise SceneNotFound(f"no scene {scene_id!r} under {self.scene_dir}")
        return load_scene(path, registry)


def apply_overrides(state: WorldState, overrides: tuple[StateOverride, ...]) -> WorldState:
    """Patch initial object states, enforcing affordance licensing."""
    from dataclasses import replace as _replace

    for override in overrides:
        obj = state.objects.get(override.instance)
        if obj is None:
            raise SelectorUnresolvable(
                f"override target {override.instance!r} not in scene"
            )
        licensed = state.cls(obj).licensed_state_keys()
        new_states = dict(obj.states)
        for key, value in override.states.items():
            if key not in licensed:
                raise OverrideUnlicensed(
                    f"{override.instance!r}: state {key!r} not licensed by "
                    f"class {obj.class_name!r}"
                )
            new_states[key] = value
        state = state.with_object(_replace(obj, states=new_states))
    return state


def init_mission(
    spec: MissionSpec,
    registry: ClassRegistry,
    scenes: SceneIndex,
) -> WorldState:
    """Load the mission's scene and apply its initial-state overrides."""
    return apply_overrides(scenes.load(spec.scene_id, registry), spec.scene_overrides)


def check_goals(state: WorldState, spec: MissionSpec) -> MissionStatus:
    """Evaluate every subgoal against a state; pure, state untouched."""
    flags = tuple(sg.holds(state) for sg in spec.subgoals)
    overall = all(flags)
    return MissionStatus(
        subgoals=flags,
        overall=overall,
        completed_tick=state.tick if overall else None,
    )


def validate_mission(spec: MissionSpec, registry: ClassRegistry, scenes: SceneIndex):
    """Structural checks that need the world: selectors resolve, state keys
    licensed, and the mission does not start solved."""
    state = init_mission(spec, registry, scenes)
    for sg in spec.subgoals:
        for cond in sg.conditions:
            ids = cond.target.matches(state)
            if cond.kind == "state_equals":
                for iid in ids:
                    licensed = state.cls_of(iid).licensed_state_keys()
                    if cond.key not in licensed:
                        raise SchemaError(
                            f"mission {spec.mission_id!r}: key {cond.key!r} not "
                            f"licensed for {iid!r}"
                        )
            elif cond.kind == "contained_in":
                for rid in cond.receptacle.matches(state):
                    if not state.cls_of(rid).has(AffordanceProperty.RECEPTACLE):
                        raise SchemaError(
                            f"mission {spec.mission_id!r}: {rid!r} is not a receptacle"
                        )
            elif cond.kind == "in_room":
                if cond.room not in state.scene.rooms:
                    raise SchemaError(
                        f"mission {spec.mission_id!r}: unknown room {cond.room!r}"
                    )
    if check_goals(state, spec).overall:
        raise SchemaError(f"mission {spec.mission_id!r} starts already solved")


def load_catalog(
    directory: str | Path,
    registry: Optional[ClassRegistry] = None,
    scenes: Optional[SceneIndex] = None,
) -> list[MissionSpec]:
    """Load every `*.mission.json` under a directory, atomically.

    Any file failing validation aborts the whole load; error messages are
    aggregated per file. With a registry and scene index supplied, world-level
    validation (selector resolution, never-starts-solved) runs as well.
    """
    directory = Path(directory)
    specs: dict[str, MissionSpec] = {}
    errors: list[str] = []
    for path in sorted(directory.glob("*.mission.json")):
        try:
            spec = mission_from_doc(json.loads(path.read_text(encoding="utf-8")))
            if spec.mission_id in specs:
                raise DuplicateId(f"duplicate mission_id {spec.mission_id!r}")
            if registry is not None and scenes is not None:
                validate_mission(spec, registry, scenes)
            specs[spec.mission_id] = spec
        except Exception as exc:  # aggregate, fail atomically
            errors.append(f"{path.name}: {exc}")
    if errors:
        raise CatalogError("; ".join(errors))
    return [specs[mid] for mid in sorted(specs)]


def goal_referenced_instances(spec: MissionSpec, state: WorldState) -> frozenset[str]:
    """Instance ids a mission's conditions talk about (class selectors expand)."""
    out: set[str] = set()
    for sg in spec.subgoals:
        for cond in sg.conditions:
            out.update(cond.target.matches(state))
            if cond.receptacle is not None:
                out.update(cond.receptacle.matches(state))
    return frozenset(out)
