"""Deterministic discrete simulator: affordances, world state, rendering."""

from arena.core.actions import (
    Action,
    ActionResult,
    EDH_INTERACTION_VERBS,
    FailureCode,
    StateDelta,
    action_from_doc,
    action_to_doc,
)
from arena.core.affordances import (
    ACTIONABLE_PROPERTIES,
    AffordanceProperty,
    CONTAINED_IN_TARGET,
    TRANSITION_TABLE,
    transition_for,
)
from arena.core.engine import apply_action
from arena.core.registry import ClassRegistry, ObjectClass, load_registry
from arena.core.render import (
    DEFAULT_RASTER,
    FAR_PLANE,
    INTERACTION_RANGE,
    Observation,
    VisibleObject,
    object_at,
    render_observation,
)
from arena.core.world import (
    AgentPose,
    ObjectInstance,
    SceneGraph,
    WorldState,
    diff_states,
    load_scene,
    restore_state,
    state_doc,
    state_hash,
)

__all__ = [
    "ACTIONABLE_PROPERTIES",
    "Action",
    "ActionResult",
    "AffordanceProperty",
    "AgentPose",
    "CONTAINED_IN_TARGET",
    "ClassRegistry",
    "DEFAULT_RASTER",
    "EDH_INTERACTION_VERBS",
    "FAR_PLANE",
    "FailureCode",
    "INTERACTION_RANGE",
    "ObjectClass",
    "ObjectInstance",
    "Observation",
    "SceneGraph",
    "StateDelta",
    "TRANSITION_TABLE",
    "VisibleObject",
    "WorldState",
    "action_from_doc",
    "action_to_doc",
    "apply_action",
    "diff_states",
    "load_registry",
    "load_scene",
    "object_at",
    "render_observation",
    "restore_state",
    "state_doc",
    "state_hash",
    "transition_for",
]
