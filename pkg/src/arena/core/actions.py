"""Action and result types for the simulator."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Optional, Union

from arena.core.affordances import INTERACTION_VERBS
from arena.errors import SchemaError

if TYPE_CHECKING:
    from arena.core.render import Observation

NAVIGATION_KINDS: tuple[str, ...] = (
    "MoveForward", "MoveBackward", "RotateLeft", "RotateRight",
    "LookUp", "LookDown", "GotoViewpoint", "GotoRoom",
)
USER_INTERACTION_KINDS: tuple[str, ...] = ("Dialog", "Highlight")
ALL_KINDS: tuple[str, ...] = (
    NAVIGATION_KINDS + tuple(INTERACTION_VERBS) + USER_INTERACTION_KINDS + ("Stop",)
)

# The restricted verb set used for offline evaluation instances.
EDH_INTERACTION_VERBS: tuple[str, ...] = (
    "Pickup", "Place", "Open", "Close", "ToggleOn", "ToggleOff", "Slice", "Pour",
)

# Target of an interaction: an instance id, or an (x, y) raster coordinate.
Target = Union[str, tuple[int, int]]


@dataclass(frozen=True, slots=True)
class Action:
    """One robot action; `kind` selects which optional fields apply."""

    kind: str
    target: Optional[Target] = None      # interaction verbs, Highlight
    text: Optional[str] = None           # Dialog
    room: Optional[str] = None           # GotoRoom
    viewpoint: Optional[str] = None      # GotoViewpoint

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise ValueError(f"unknown action kind {self.kind!r}")

    @property
    def is_interaction(self) -> bool:
        return self.kind in INTERACTION_VERBS

    @property
    def is_navigation(self) -> bool:
        return self.kind in NAVIGATION_KINDS

    @property
    def ends_turn(self) -> bool:
        return self.kind in ("Stop", "Dialog")


def action_to_doc(action: Action) -> dict:
    doc: dict = {"type": action.kind}
    if action.target is not None:
        if isinstance(action.target, str):
            doc["target"] = {"instance": action.target}
        else:
            x, y = action.target
            doc["target"] = {"x": int(x), "y": int(y)}
    if action.text is not None:
        doc["text"] = action.text
    if action.room is not None:
        doc["room"] = action.room
    if action.viewpoint is not None:
        doc["viewpoint"] = action.viewpoint
    return doc


def action_from_doc(doc: dict) -> Action:
    if not isinstance(doc, dict) or "type" not in doc:
        raise SchemaError("action document must carry a 'type'")
    kind = doc["type"]
    if kind not in ALL_KINDS:
        raise SchemaError(f"unknown action type {kind!r}")
    target: Optional[Target] = None
    raw = doc.get("target")
    if raw is not None:
        if not isinstance(raw, dict):
            raise SchemaError("action target must be an object")
        if "instance" in raw:
            target = str(raw["instance"])
        elif "x" in raw and "y" in raw:
            target = (int(raw["x"]), int(raw["y"]))
        else:
            raise SchemaError("action target needs 'instance' or 'x'/'y'")
    return Action(
        kind=kind,
        target=target,
        text=doc.get("text"),
        room=doc.get("room"),
        viewpoint=doc.get("viewpoint"),
    )


class FailureCode(str, Enum):
    ACTION_NOT_APPLICABLE = "ActionNotApplicable"
    TARGET_NOT_VISIBLE = "TargetNotVisible"
    TARGET_NOT_RESOLVABLE = "TargetNotResolvable"
    HAND_OCCUPIED = "HandOccupied"
    HAND_EMPTY = "HandEmpty"
    RECEPTACLE_CLOSED = "ReceptacleClosed"
    NAVIGATION_BLOCKED = "NavigationBlocked"
    DECOR_TARGET = "DecorTarget"


# One recorded difference: (instance id, key, old, new). `key` is a state key
# or the pseudo-keys "held" / "contained_in".
DeltaEntry = tuple[str, str, object, object]


@dataclass(frozen=True, slots=True)
class StateDelta:
    """An unordered set of state differences with old != new per entry."""

    entries: frozenset[DeltaEntry] = frozenset()

    def __post_init__(self):
        for (_, _, old, new) in self.entries:
            if old == new:
                raise ValueError("delta entry with old == new")

    def __len__(self) -> int:
        return len(self.entries)

    def __bool__(self) -> bool:
        return bool(self.entries)

    def __contains__(self, entry: DeltaEntry) -> bool:
        return entry in self.entries

    def issubset(self, other: "StateDelta") -> bool:
        return self.entries.issubset(other.entries)

    def intersection_size(self, other: "StateDelta") -> int:
        return len(self.entries & other.entries)

    def union(self, other: "StateDelta") -> "StateDelta":
        return StateDelta(self.entries | other.entries)

    def sorted_entries(self) -> list[DeltaEntry]:
        return sorted(self.entries, key=lambda e: (e[0], e[1], repr(e[2]), repr(e[3])))

    def to_doc(self) -> list[list]:
        return [list(e) for e in self.sorted_entries()]

    @staticmethod
    def from_doc(doc: list) -> "StateDelta":
        return StateDelta(frozenset((str(a), str(b), c, d) for a, b, c, d in doc))


EMPTY_DELTA = StateDelta()


@dataclass(slots=True)
class ActionResult:
    """Outcome of one applied action.

    `frames` holds the observation(s) to stream: one per traversed hop for
    multi-hop navigation, otherwise the single post-action view (the failure
    frame when ok is false). Empty when the caller disabled frame rendering.
    """

    ok: bool
    failure_code: Optional[FailureCode] = None
    state_delta: StateDelta = EMPTY_DELTA
    frames: list["Observation"] = field(default_factory=list)

    def __post_init__(self):
        if self.ok == (self.failure_code is not None):
            raise ValueError("ok XOR failure_code violated")
        if not self.ok and self.state_delta:
            raise ValueError("failed action with non-empty delta")
