"""The affordance machine: object properties, verbs, and licensed transitions.

Every non-decor property licenses exactly one canonical interaction verb and
one result state. A few properties carry a complementary verb (Open/Close,
ToggleOn/ToggleOff, Fill/Pour) and Clean doubles as the disinfectant for
infectable objects; `transition_for` always reports the canonical pair.
"""

from __future__ import annotations

from enum import Enum

from arena.errors import DecorHasNoAction


class AffordanceProperty(str, Enum):
    PICKUPABLE = "pickupable"
    OPENABLE = "openable"
    BREAKABLE = "breakable"
    RECEPTACLE = "receptacle"
    TOGGLEABLE = "toggleable"
    POWERABLE = "powerable"
    DIRTYABLE = "dirtyable"
    HEATABLE = "heatable"
    EATABLE = "eatable"
    CHILLABLE = "chillable"
    FILLABLE = "fillable"
    COOKABLE = "cookable"
    INFECTABLE = "infectable"
    DECOR = "decor"


ACTIONABLE_PROPERTIES: tuple[AffordanceProperty, ...] = tuple(
    p for p in AffordanceProperty if p is not AffordanceProperty.DECOR
)

# Sentinel result value for Place: the new `contained_in` is the receptacle's
# instance id, known only at apply time.
CONTAINED_IN_TARGET = "<target>"

# property -> (canonical verb, result state key, result value)
TRANSITION_TABLE: dict[AffordanceProperty, tuple[str, str, object]] = {
    AffordanceProperty.PICKUPABLE: ("Pickup", "held", True),
    AffordanceProperty.OPENABLE: ("Open", "isOpen", True),
    AffordanceProperty.BREAKABLE: ("Break", "isBroken", True),
    AffordanceProperty.RECEPTACLE: ("Place", "contained_in", CONTAINED_IN_TARGET),
    AffordanceProperty.TOGGLEABLE: ("ToggleOn", "isToggledOn", True),
    AffordanceProperty.POWERABLE: ("Power", "isPowered", True),
    AffordanceProperty.DIRTYABLE: ("Clean", "isDirty", False),
    AffordanceProperty.HEATABLE: ("Heat", "isHeated", True),
    AffordanceProperty.EATABLE: ("Eat", "isEaten", True),
    AffordanceProperty.CHILLABLE: ("Chill", "isChilled", True),
    AffordanceProperty.FILLABLE: ("Fill", "isFilled", True),
    AffordanceProperty.COOKABLE: ("Cook", "isCooked", True),
    AffordanceProperty.INFECTABLE: ("Clean", "isInfected", False),
}

# State keys induced by each property on instances of a class. pickupable,
# receptacle, and decor manifest through `held` / `contained_in` rather than
# a per-instance boolean.
PROPERTY_STATE_KEYS: dict[AffordanceProperty, str] = {
    AffordanceProperty.OPENABLE: "isOpen",
    AffordanceProperty.BREAKABLE: "isBroken",
    AffordanceProperty.TOGGLEABLE: "isToggledOn",
    AffordanceProperty.POWERABLE: "isPowered",
    AffordanceProperty.DIRTYABLE: "isDirty",
    AffordanceProperty.HEATABLE: "isHeated",
    AffordanceProperty.EATABLE: "isEaten",
    AffordanceProperty.CHILLABLE: "isChilled",
    AffordanceProperty.FILLABLE: "isFilled",
    AffordanceProperty.COOKABLE: "isCooked",
    AffordanceProperty.INFECTABLE: "isInfected",
}

SLICED_STATE_KEY = "isSliced"

# Every verb an interaction action may carry, including complements and the
# tool-gated Slice (licensed by a class's `sliceable` flag, not a property).
INTERACTION_VERBS: tuple[str, ...] = (
    "Pickup", "Place", "Open", "Close", "ToggleOn", "ToggleOff",
    "Slice", "Pour", "Break", "Heat", "Chill", "Fill", "Clean", "Cook",
    "Eat", "Power",
)

# verb -> property that licenses it (Slice handled separately).
VERB_LICENSE: dict[str, AffordanceProperty] = {
    "Pickup": AffordanceProperty.PICKUPABLE,
    "Place": AffordanceProperty.RECEPTACLE,
    "Open": AffordanceProperty.OPENABLE,
    "Close": AffordanceProperty.OPENABLE,
    "ToggleOn": AffordanceProperty.TOGGLEABLE,
    "ToggleOff": AffordanceProperty.TOGGLEABLE,
    "Pour": AffordanceProperty.FILLABLE,
    "Break": AffordanceProperty.BREAKABLE,
    "Heat": AffordanceProperty.HEATABLE,
    "Chill": AffordanceProperty.CHILLABLE,
    "Fill": AffordanceProperty.FILLABLE,
    "Cook": AffordanceProperty.COOKABLE,
    "Eat": AffordanceProperty.EATABLE,
    "Power": AffordanceProperty.POWERABLE,
}

KNIFE_MARKER = "tool:knife"


def transition_for(prop: AffordanceProperty) -> tuple[str, str, object]:
    """Canonical (verb, result state key, result value) for a property.

    Raises DecorHasNoAction for decor; total over the 13 actionable
    properties.
    """
    if prop is AffordanceProperty.DECOR:
        raise DecorHasNoAction("decor licenses no interaction verb")
    return TRANSITION_TABLE[prop]
