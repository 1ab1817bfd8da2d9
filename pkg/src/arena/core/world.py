"""World state: rooms, object instances, agent pose, loading, diffing, hashing.

A WorldState is an immutable value. Mutating operations live in
`arena.core.engine` and return fresh states; nothing here writes in place
after construction.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from arena.core.affordances import AffordanceProperty
from arena.core.actions import DeltaEntry, StateDelta
from arena.core.registry import ClassRegistry, ObjectClass, load_registry
from arena.errors import DanglingReference, DuplicateId, SceneMismatch, SchemaError

SCENE_SCHEMA = "arena-scene/1"

HEADINGS = ("N", "E", "S", "W")
PITCHES = ("up", "level", "down")

Vec3 = tuple[float, float, float]


@dataclass(frozen=True, slots=True)
class Viewpoint:
    node_id: str
    room: str
    pos: tuple[float, float]  # global (x, z) meters


@dataclass(frozen=True, slots=True)
class Room:
    room_id: str
    name: str
    origin: tuple[float, float]
    size: tuple[float, float]


@dataclass(frozen=True, slots=True)
class SceneGraph:
    """Static scene structure shared by every state derived from one scene."""

    scene_id: str
    rooms: dict[str, Room]
    viewpoints: dict[str, Viewpoint]
    adjacency: dict[str, tuple[str, ...]]
    registry: ClassRegistry

    def room_viewpoints(self, room_id: str) -> list[Viewpoint]:
        return [v for v in self.viewpoints.values() if v.room == room_id]


@dataclass(frozen=True, slots=True)
class AgentPose:
    room: str
    viewpoint: str
    heading: str = "N"
    pitch: str = "level"

    def __post_init__(self):
        if self.heading not in HEADINGS:
            raise ValueError(f"bad heading {self.heading!r}")
        if self.pitch not in PITCHES:
            raise ValueError(f"bad pitch {self.pitch!r}")


@dataclass(frozen=True, slots=True)
class ObjectInstance:
    instance_id: str
    class_name: str
    room: str
    pos: Vec3                      # box center, global meters
    size: Vec3                     # full extents
    states: dict[str, object]      # treated as immutable after construction
    contained_in: Optional[str] = None
    held: bool = False


@dataclass(frozen=True, slots=True)
class WorldState:
    scene: SceneGraph
    objects: dict[str, ObjectInstance]
    agent: AgentPose
    tick: int = 0

    def cls(self, instance: ObjectInstance) -> ObjectClass:
        return self.scene.registry[instance.class_name]

    def cls_of(self, instance_id: str) -> ObjectClass:
        return self.cls(self.objects[instance_id])

    def held_instance(self) -> Optional[ObjectInstance]:
        for obj in self.objects.values():
            if obj.held:
                return obj
        return None

    def contents_of(self, instance_id: str) -> list[ObjectInstance]:
        return [o for o in self.objects.values() if o.contained_in == instance_id]

    def effective_room(self, instance_id: str) -> str:
        obj = self.objects[instance_id]
        return self.agent.room if obj.held else obj.room

    def with_object(self, obj: ObjectInstance, *, tick: Optional[int] = None) -> "WorldState":
        objects = dict(self.objects)
        objects[obj.instance_id] = obj
        return replace(self, objects=objects, tick=self.tick if tick is None else tick)


# -- scene loading ------------------------------------------------------------

def _require(doc: dict, key: str, context: str):
    if key not in doc:
        raise SchemaError(f"{context}: missing {key!r}")
    return doc[key]


def load_scene(
    path_or_doc: str | Path | dict,
    registry: ClassRegistry,
) -> WorldState:
    """Build a WorldState from a scene document (path or parsed dict).

    Validates the schema version, resolves every room/class/containment
    reference, and rejects duplicate ids. The result has tick 0 and satisfies
    every world invariant.
    """
    if isinstance(path_or_doc, (str, Path)):
        doc = json.loads(Path(path_or_doc).read_text(encoding="utf-8"))
    else:
        doc = path_or_doc
    if not isinstance(doc, dict) or doc.get("schema") != SCENE_SCHEMA:
        raise SchemaError(f"expected schema {SCENE_SCHEMA!r}")
    scene_id = _require(doc, "scene_id", "scene")

    rooms: dict[str, Room] = {}
    viewpoints: dict[str, Viewpoint] = {}
    edges: list[tuple[str, str]] = []
    for rdoc in _require(doc, "rooms", "scene"):
        rid = _require(rdoc, "id", "room")
        if rid in rooms:
            raise DuplicateId(f"duplicate room {rid!r}")
        origin = tuple(rdoc.get("origin", [0.0, 0.0]))
        rooms[rid] = Room(
            room_id=rid,
            name=rdoc.get("name", rid),
            origin=(float(origin[0]), float(origin[1])),
            size=tuple(float(v) for v in rdoc.get("size", [8.0, 8.0])),
        )
        for vdoc in rdoc.get("viewpoints", []):
            vid = _require(vdoc, "id", f"viewpoint in {rid}")
            if vid in viewpoints:
                raise DuplicateId(f"duplicate viewpoint {vid!r}")
            viewpoints[vid] = Viewpoint(
                node_id=vid,
                room=rid,
                pos=(origin[0] + float(vdoc["x"]), origin[1] + float(vdoc["z"])),
            )
        for a, b in rdoc.get("edges", []):
            edges.append((a, b))
    for a, b in doc.get("transitions", []):
        edges.append((a, b))

    adjacency: dict[str, set[str]] = {vid: set() for vid in viewpoints}
    for a, b in edges:
        if a not in viewpoints or b not in viewpoints:
            raise DanglingReference(f"edge ({a!r}, {b!r}) references unknown viewpoint")
        adjacency[a].add(b)
        adjacency[b].add(a)
    graph = SceneGraph(
        scene_id=scene_id,
        rooms=rooms,
        viewpoints=viewpoints,
        adjacency={vid: tuple(sorted(nbrs)) for vid, nbrs in adjacency.items()},
        registry=registry,
    )

    objects: dict[str, ObjectInstance] = {}
    for odoc in doc.get("objects", []):
        iid = _require(odoc, "id", "object")
        if iid in objects:
            raise DuplicateId(f"duplicate instance {iid!r}")
        class_name = _require(odoc, "class", f"object {iid}")
        cls = registry.get(class_name)
        if cls is None:
            raise DanglingReference(f"object {iid!r}: unknown class {class_name!r}")
        room_id = _require(odoc, "room", f"object {iid}")
        room = rooms.get(room_id)
        if room is None:
            raise DanglingReference(f"object {iid!r}: unknown room {room_id!r}")
        pos_local = odoc.get("pos", [0.0, 0.0, 0.0])
        pos: Vec3 = (
            room.origin[0] + float(pos_local[0]),
            float(pos_local[1]),
            room.origin[1] + float(pos_local[2]),
        )
        size: Vec3 = tuple(float(v) for v in odoc.get("size", [0.3, 0.3, 0.3]))
        states = dict(cls.default_states)
        licensed = cls.licensed_state_keys()
        for key, value in odoc.get("states", {}).items():
            if key not in licensed:
                raise SchemaError(
                    f"object {iid!r}: state {key!r} not licensed by class {class_name!r}"
                )
            states[key] = value
        objects[iid] = ObjectInstance(
            instance_id=iid,
            class_name=class_name,
            room=room_id,
            pos=pos,
            size=size,
            states=states,
            contained_in=odoc.get("contained_in"),
            held=False,
        )

    for obj in objects.values():
        if obj.contained_in is not None:
            container = objects.get(obj.contained_in)
            if container is None:
                raise DanglingReference(
                    f"object {obj.instance_id!r} contained in unknown {obj.contained_in!r}"
                )
            if not registry[container.class_name].has(AffordanceProperty.RECEPTACLE):
                raise SchemaError(
                    f"object {obj.instance_id!r} contained in non-receptacle"
                )
    _check_acyclic(objects)

    agent_doc = _require(doc, "agent", "scene")
    agent = AgentPose(
        room=agent_doc["room"],
        viewpoint=agent_doc["viewpoint"],
        heading=agent_doc.get("heading", "N"),
        pitch=agent_doc.get("pitch", "level"),
    )
    if agent.viewpoint not in viewpoints:
        raise DanglingReference(f"agent viewpoint {agent.viewpoint!r} unknown")
    if viewpoints[agent.viewpoint].room != agent.room:
        raise SchemaError("agent viewpoint lies outside the agent's room")

    return WorldState(scene=graph, objects=objects, agent=agent, tick=0)


def _check_acyclic(objects: dict[str, ObjectInstance]):
    for start in objects:
        seen = set()
        cur: Optional[str] = start
        while cur is not None:
            if cur in seen:
                raise SchemaError(f"containment cycle through {start!r}")
            seen.add(cur)
            cur = objects[cur].contained_in


# -- diffing and hashing ------------------------------------------------------

def diff_states(a: WorldState, b: WorldState) -> StateDelta:
    """Object-level differences between two states of the same scene.

    Covers state keys plus containment and held; agent pose and tick are
    deliberately outside the delta.
    """
    if a.scene.scene_id != b.scene.scene_id or a.objects.keys() != b.objects.keys():
        raise SceneMismatch("states are not from the same scene")
    entries: set[DeltaEntry] = set()
    for iid, oa in a.objects.items():
        ob = b.objects[iid]
        for key in oa.states.keys() | ob.states.keys():
            va, vb = oa.states.get(key), ob.states.get(key)
            if va != vb:
                entries.add((iid, key, va, vb))
        if oa.contained_in != ob.contained_in:
            entries.add((iid, "contained_in", oa.contained_in, ob.contained_in))
        if oa.held != ob.held:
            entries.add((iid, "held", oa.held, ob.held))
    return StateDelta(frozenset(entries))


def state_doc(state: WorldState) -> dict:
    """Canonical JSON-able snapshot of the dynamic parts of a state."""
    return {
        "scene_id": state.scene.scene_id,
        "tick": state.tick,
        "agent": {
            "room": state.agent.room,
            "viewpoint": state.agent.viewpoint,
            "heading": state.agent.heading,
            "pitch": state.agent.pitch,
        },
        "objects": {
            iid: {
                "class": o.class_name,
                "room": o.room,
                "pos": list(o.pos),
                "size": list(o.size),
                "states": {k: o.states[k] for k in sorted(o.states)},
                "contained_in": o.contained_in,
                "held": o.held,
            }
            for iid, o in sorted(state.objects.items())
        },
    }


def state_hash(state: WorldState) -> str:
    """sha256 over the canonical snapshot; equal states hash equal."""
    payload = json.dumps(state_doc(state), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def restore_state(scene: SceneGraph, doc: dict) -> WorldState:
    """Rebuild a WorldState from a `state_doc` snapshot against its scene."""
    objects = {}
    for iid, od in doc["objects"].items():
        objects[iid] = ObjectInstance(
            instance_id=iid,
            class_name=od["class"],
            room=od["room"],
            pos=tuple(od["pos"]),
            size=tuple(od["size"]),
            states=dict(od["states"]),
            contained_in=od.get("contained_in"),
            held=bool(od.get("held", False)),
        )
    a = doc["agent"]
    return WorldState(
        scene=scene,
        objects=objects,
        agent=AgentPose(room=a["room"], viewpoint=a["viewpoint"],
                        heading=a["heading"], pitch=a["pitch"]),
        tick=int(doc["tick"]),
    )
