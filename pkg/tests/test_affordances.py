"""The affordance machine: one verb and one result state per property."""

from __future__ import annotations

import pytest

from arena.core import (
    ACTIONABLE_PROPERTIES,
    Action,
    AffordanceProperty,
    CONTAINED_IN_TARGET,
    FailureCode,
    apply_action,
    transition_for,
)
from arena.errors import DecorHasNoAction

# a fixture instance per property whose canonical transition can fire as-is
PROPERTY_FIXTURE = {
    AffordanceProperty.PICKUPABLE: "spanner_1",
    AffordanceProperty.OPENABLE: "cabinet_1",
    AffordanceProperty.BREAKABLE: "jar_1",
    AffordanceProperty.RECEPTACLE: "trash_can_1",
    AffordanceProperty.TOGGLEABLE: "lamp_lab",
    AffordanceProperty.POWERABLE: "printer_3d_1",
    AffordanceProperty.DIRTYABLE: "plate_1",
    AffordanceProperty.HEATABLE: "soup_1",
    AffordanceProperty.EATABLE: "apple_1",
    AffordanceProperty.CHILLABLE: "soda_1",
    AffordanceProperty.FILLABLE: "mug_1",
    AffordanceProperty.COOKABLE: "potato_1",
    AffordanceProperty.INFECTABLE: "petri_dish_1",
}


def test_totality_over_actionable_properties():
    assert len(ACTIONABLE_PROPERTIES) == 13
    for prop in ACTIONABLE_PROPERTIES:
        verb, key, value = transition_for(prop)
        assert verb and key


def test_decor_has_no_action():
    with pytest.raises(DecorHasNoAction):
        transition_for(AffordanceProperty.DECOR)


def test_fourteen_members():
    assert len(AffordanceProperty) == 14


def test_documented_pairs():
    assert transition_for(AffordanceProperty.BREAKABLE) == ("Break", "isBroken", True)
    assert transition_for(AffordanceProperty.TOGGLEABLE) == ("ToggleOn", "isToggledOn", True)
    assert transition_for(AffordanceProperty.OPENABLE) == ("Open", "isOpen", True)
    assert transition_for(AffordanceProperty.DIRTYABLE) == ("Clean", "isDirty", False)


def test_verb_state_pairs_unique():
    pairs = [transition_for(p)[:2] for p in ACTIONABLE_PROPERTIES]
    assert len(set(pairs)) == len(pairs)
    # verbs collide only for Clean, which doubles as the disinfectant
    verbs = [transition_for(p)[0] for p in ACTIONABLE_PROPERTIES]
    non_clean = [v for v in verbs if v != "Clean"]
    assert len(set(non_clean)) == len(non_clean)
    assert verbs.count("Clean") == 2


def _prepare(world, prop, iid):
    """Make the canonical transition fireable (power things, pick up, etc.)."""
    from dataclasses import replace

    obj = world.objects[iid]
    states = dict(obj.states)
    if prop is AffordanceProperty.DIRTYABLE:
        states["isDirty"] = True
    if prop is AffordanceProperty.INFECTABLE:
        states["isInfected"] = True
    world = world.with_object(replace(obj, states=states))
    # expose targets hidden inside closed containers
    cur = obj.contained_in
    while cur is not None:
        container = world.objects[cur]
        if "isOpen" in container.states and not container.states["isOpen"]:
            patched = dict(container.states)
            patched["isOpen"] = True
            world = world.with_object(replace(container, states=patched))
        cur = container.contained_in
    # park the agent next to the object, facing it
    target = world.objects[iid]
    vps = world.scene.room_viewpoints(target.room)
    best = min(vps, key=lambda v: ((v.pos[0] - target.pos[0]) ** 2
                                   + (v.pos[1] - target.pos[2]) ** 2, v.node_id))
    for heading in ("N", "E", "S", "W"):
        probe = replace(world, agent=replace(
            world.agent, room=target.room, viewpoint=best.node_id, heading=heading))
        from arena.core import render_observation
        seen = render_observation(probe, 96, 54).find(iid)
        if seen is not None and seen.depth <= 1.5:
            return probe
    raise AssertionError(f"fixture object {iid} not reachable")


@pytest.mark.parametrize("prop", [p for p in ACTIONABLE_PROPERTIES])
def test_apply_action_realizes_canonical_transition(lab_world, prop):
    iid = PROPERTY_FIXTURE[prop]
    verb, key, value = transition_for(prop)
    world = _prepare(lab_world, prop, iid)

    if prop is AffordanceProperty.RECEPTACLE:
        # Place requires something in hand; the result lands on the held item
        world = _prepare(world, AffordanceProperty.PICKUPABLE, "spanner_1")
        world, result = apply_action(world, Action("Pickup", target="spanner_1"))
        assert result.ok
        world = _prepare(world, prop, iid)
        world, result = apply_action(world, Action(verb, target=iid))
        assert result.ok, result.failure_code
        assert world.objects["spanner_1"].contained_in == iid
        assert value is CONTAINED_IN_TARGET
        return

    # the cabinet starts closed and contains items; opening is direct
    world, result = apply_action(world, Action(verb, target=iid))
    assert result.ok, (iid, verb, result.failure_code)
    obj = world.objects[iid]
    if key == "held":
        assert obj.held is value
    else:
        assert obj.states[key] == value


def test_decor_rejects_all_interaction_verbs(lab_world):
    from arena.core.affordances import INTERACTION_VERBS
    for verb in INTERACTION_VERBS:
        _, result = apply_action(lab_world, Action(verb, target="poster_lab"))
        assert not result.ok
        assert result.failure_code is FailureCode.DECOR_TARGET
