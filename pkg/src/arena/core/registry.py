"""Object class registry: data-driven class definitions with affordances."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from arena.core.affordances import (
    AffordanceProperty,
    PROPERTY_STATE_KEYS,
    SLICED_STATE_KEY,
)
from arena.errors import DuplicateId, SchemaError

REGISTRY_SCHEMA = "arena-classes/1"


@dataclass(frozen=True, slots=True)
class ObjectClass:
    """One object class: its surface forms, affordances, and default states."""

    class_name: str
    synonyms: tuple[str, ...]
    properties: frozenset[AffordanceProperty]
    sliceable: bool = False
    markers: tuple[str, ...] = ()
    default_states: dict[str, object] = field(default_factory=dict)

    def licensed_state_keys(self) -> frozenset[str]:
        keys = {PROPERTY_STATE_KEYS[p] for p in self.properties if p in PROPERTY_STATE_KEYS}
        if self.sliceable:
            keys.add(SLICED_STATE_KEY)
        return frozenset(keys)

    def has(self, prop: AffordanceProperty) -> bool:
        return prop in self.properties


ClassRegistry = dict[str, ObjectClass]


def build_class(doc: dict) -> ObjectClass:
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise SchemaError("class entry missing 'name'")
    synonyms = doc.get("synonyms")
    if not isinstance(synonyms, list) or not synonyms:
        raise SchemaError(f"class {name!r}: synonyms must be a non-empty list")
    try:
        props = frozenset(AffordanceProperty(p) for p in doc.get("properties", []))
    except ValueError as exc:
        raise SchemaError(f"class {name!r}: {exc}") from exc
    sliceable = bool(doc.get("sliceable", False))
    markers = tuple(doc.get("markers", []))

    cls = ObjectClass(
        class_name=name,
        synonyms=tuple(s.lower() for s in synonyms),
        properties=props,
        sliceable=sliceable,
        markers=markers,
    )
    licensed = cls.licensed_state_keys()
    defaults = {key: False for key in sorted(licensed)}
    for key, value in doc.get("default_states", {}).items():
        if key not in licensed:
            raise SchemaError(
                f"class {name!r}: default state {key!r} not licensed by properties"
            )
        defaults[key] = value
    cls.default_states.update(defaults)
    return cls


def load_registry(path: str | Path) -> ClassRegistry:
    """Load a class registry document, validating schema and uniqueness."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("schema") != REGISTRY_SCHEMA:
        raise SchemaError(
            f"expected schema {REGISTRY_SCHEMA!r}, got {doc.get('schema')!r}"
        )
    registry: ClassRegistry = {}
    for entry in doc.get("classes", []):
        cls = build_class(entry)
        if cls.class_name in registry:
            raise DuplicateId(f"duplicate class {cls.class_name!r}")
        registry[cls.class_name] = cls
    return registry
