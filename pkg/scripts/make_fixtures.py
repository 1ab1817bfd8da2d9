#!/usr/bin/env python3
"""Regenerate the shipped fixture data and the golden test artifacts.

Everything committed under src/arena/data/ and tests/golden/ comes from this
script. It is deliberately strict: every mission must be solvable by its
scripted solution, every transcript must drive the baseline agent to mission
completion through the real orchestrator, and every interactable object must
be reachable (visible within interaction range from some viewpoint/heading).
Run it after changing the simulator, the baseline grammar, or the fixtures.
"""

from __future__ import annotations

import json
import shutil
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))

from arena.baseline import BaselineAgent, MAX_ROUNDS_PER_TURN
from arena.core.actions import Action, action_to_doc
from arena.core.affordances import AffordanceProperty
from arena.core.engine import apply_action
from arena.core.registry import load_registry
from arena.core.render import INTERACTION_RANGE, render_observation
from arena.core.world import load_scene, state_hash
from arena.metrics import RecordStore
from arena.missions import SceneIndex, check_goals, init_mission, load_catalog
from arena.orchestrator import (
    LocalInferenceClient,
    SessionService,
    SessionStore,
    TurnLimits,
)

DATA = REPO / "src" / "arena" / "data"
GOLDEN = REPO / "tests" / "golden"

RASTER = (96, 54)


# ---------------------------------------------------------------------------
# class registry
# ---------------------------------------------------------------------------

def registry_doc() -> dict:
    P = AffordanceProperty

    def c(name, synonyms, properties, sliceable=False, markers=(), defaults=None):
        doc = {
            "name": name,
            "synonyms": synonyms,
            "properties": [p.value for p in properties],
        }
        if sliceable:
            doc["sliceable"] = True
        if markers:
            doc["markers"] = list(markers)
        if defaults:
            doc["default_states"] = defaults
        return doc

    classes = [
        # portables
        c("mug", ["mug", "cup"], [P.PICKUPABLE, P.FILLABLE]),
        c("bowl", ["bowl"], [P.PICKUPABLE, P.BREAKABLE, P.DIRTYABLE]),
        c("plate", ["plate", "dish"], [P.PICKUPABLE, P.DIRTYABLE]),
        c("knife", ["knife"], [P.PICKUPABLE], markers=["tool:knife"]),
        c("fork", ["fork"], [P.PICKUPABLE]),
        c("bread", ["bread", "loaf"], [P.PICKUPABLE, P.EATABLE], sliceable=True),
        c("potato", ["potato"], [P.PICKUPABLE, P.COOKABLE, P.EATABLE], sliceable=True),
        c("apple", ["apple"], [P.PICKUPABLE, P.EATABLE], sliceable=True),
        c("banana", ["banana"], [P.PICKUPABLE, P.EATABLE], sliceable=True),
        c("carrot", ["carrot"], [P.PICKUPABLE, P.COOKABLE, P.EATABLE], sliceable=True),
        c("soup", ["soup", "bowl of soup"], [P.PICKUPABLE, P.HEATABLE, P.EATABLE]),
        c("pie", ["pie"], [P.PICKUPABLE, P.HEATABLE, P.COOKABLE, P.EATABLE]),
        c("soda_can", ["soda can", "soda", "can"], [P.PICKUPABLE, P.CHILLABLE]),
        c("spanner", ["spanner", "wrench"], [P.PICKUPABLE]),
        c("hammer", ["hammer"], [P.PICKUPABLE]),
        c("screwdriver", ["screwdriver"], [P.PICKUPABLE]),
        c("jar", ["jar"], [P.PICKUPABLE, P.BREAKABLE]),
        c("vase", ["vase"], [P.PICKUPABLE, P.BREAKABLE]),
        c("sponge", ["sponge"], [P.PICKUPABLE]),
        c("petri_dish", ["petri dish", "dish sample"], [P.PICKUPABLE, P.INFECTABLE]),
        c("sample_vial", ["vial", "sample"], [P.PICKUPABLE, P.INFECTABLE, P.CHILLABLE]),
        c("pan", ["pan", "frying pan"], [P.PICKUPABLE, P.RECEPTACLE, P.DIRTYABLE]),
        c("pot", ["pot"], [P.PICKUPABLE, P.RECEPTACLE, P.FILLABLE, P.DIRTYABLE]),
        c("laptop", ["laptop", "computer"],
          [P.PICKUPABLE, P.OPENABLE, P.TOGGLEABLE, P.POWERABLE]),
        c("first_aid_kit", ["first aid kit", "med kit"],
          [P.PICKUPABLE, P.OPENABLE, P.RECEPTACLE]),
        # furniture and appliances
        c("fridge", ["fridge", "refrigerator"], [P.RECEPTACLE, P.OPENABLE]),
        c("cabinet", ["cabinet", "cupboard"], [P.RECEPTACLE, P.OPENABLE]),
        c("microwave", ["microwave", "microwave oven"],
          [P.RECEPTACLE, P.OPENABLE, P.TOGGLEABLE]),
        c("table", ["table"], [P.RECEPTACLE]),
        c("desk", ["desk"], [P.RECEPTACLE]),
        c("counter", ["counter", "countertop"], [P.RECEPTACLE]),
        c("shelf", ["shelf", "shelves"], [P.RECEPTACLE]),
        c("trash_can", ["trash can", "trash", "bin"], [P.RECEPTACLE]),
        c("printer_3d", ["3d printer", "printer"],
          [P.TOGGLEABLE, P.POWERABLE, P.BREAKABLE]),
        c("monitor", ["monitor", "screen"], [P.TOGGLEABLE, P.POWERABLE]),
        c("lamp", ["lamp", "light"], [P.TOGGLEABLE]),
        c("fan", ["fan"], [P.TOGGLEABLE, P.POWERABLE]),
        c("heater", ["heater", "space heater"], [P.TOGGLEABLE, P.POWERABLE]),
        c("robot_arm", ["robot arm", "arm"], [P.TOGGLEABLE, P.BREAKABLE]),
        c("water_cooler", ["water cooler", "cooler"], [P.FILLABLE, P.TOGGLEABLE]),
        c("coffee_maker", ["coffee maker", "coffee machine"],
          [P.FILLABLE, P.TOGGLEABLE, P.POWERABLE]),
        # decor
        c("poster", ["poster"], [P.DECOR]),
        c("painting", ["painting", "picture"], [P.DECOR]),
        c("plant", ["plant", "potted plant"], [P.DECOR]),
        c("rug", ["rug", "carpet"], [P.DECOR]),
        c("clock", ["clock"], [P.DECOR]),
        c("whiteboard", ["whiteboard", "board"], [P.DECOR]),
    ]
    return {"schema": "arena-classes/1", "classes": classes}


# ---------------------------------------------------------------------------
# scene
# ---------------------------------------------------------------------------

def _grid_viewpoints(prefix):
    vps = []
    for iz, z in enumerate((2, 4, 6), start=1):
        for ix, x in enumerate((2, 4, 6), start=1):
            vps.append({"id": f"{prefix}_{ix}{iz}", "x": float(x), "z": float(z)})
    edges = []
    for iz in (1, 2, 3):
        for ix in (1, 2, 3):
            if ix < 3:
                edges.append([f"{prefix}_{ix}{iz}", f"{prefix}_{ix + 1}{iz}"])
            if iz < 3:
                edges.append([f"{prefix}_{ix}{iz}", f"{prefix}_{ix}{iz + 1}"])
    return vps, edges


def scene_doc() -> dict:
    def obj(iid, cls, room, pos, size, contained_in=None, states=None):
        doc = {"id": iid, "class": cls, "room": room,
               "pos": list(pos), "size": list(size)}
        if contained_in:
            doc["contained_in"] = contained_in
        if states:
            doc["states"] = states
        return doc

    rooms = []
    for rid, name, origin in (
        ("robotics_lab", "Robotics Lab", [0.0, 0.0]),
        ("break_room", "Break Room", [10.0, 0.0]),
        ("office", "Main Office", [20.0, 0.0]),
    ):
        prefix = {"robotics_lab": "lab", "break_room": "br", "office": "of"}[rid]
        vps, edges = _grid_viewpoints(prefix)
        rooms.append({
            "id": rid, "name": name, "origin": origin, "size": [8.0, 8.0],
            "viewpoints": vps, "edges": edges,
        })

    objects = [
        # robotics lab -----------------------------------------------------
        obj("printer_3d_1", "printer_3d", "robotics_lab",
            (1.2, 1.0, 4.0), (0.6, 0.8, 0.5)),
        obj("cabinet_1", "cabinet", "robotics_lab",
            (4.0, 1.1, 0.8), (0.9, 1.6, 0.5)),
        obj("jar_1", "jar", "robotics_lab",
            (3.8, 1.0, 0.8), (0.14, 0.2, 0.14), contained_in="cabinet_1"),
        obj("hammer_1", "hammer", "robotics_lab",
            (4.2, 1.0, 0.8), (0.3, 0.08, 0.1), contained_in="cabinet_1"),
        obj("screwdriver_1", "screwdriver", "robotics_lab",
            (4.0, 0.7, 0.8), (0.22, 0.04, 0.04), contained_in="cabinet_1"),
        obj("table_lab", "table", "robotics_lab",
            (4.0, 0.4, 5.2), (2.4, 0.8, 0.7)),
        obj("bowl_broken", "bowl", "robotics_lab",
            (3.65, 0.92, 5.2), (0.22, 0.12, 0.22), contained_in="table_lab"),
        obj("lamp_lab", "lamp", "robotics_lab",
            (4.0, 1.05, 5.2), (0.22, 0.5, 0.22), contained_in="table_lab"),
        obj("spanner_1", "spanner", "robotics_lab",
            (4.35, 0.88, 5.2), (0.28, 0.06, 0.1), contained_in="table_lab"),
        obj("trash_can_1", "trash_can", "robotics_lab",
            (2.8, 0.5, 6.9), (0.5, 1.0, 0.5)),
        obj("robot_arm_1", "robot_arm", "robotics_lab",
            (6.9, 1.0, 2.0), (0.5, 0.9, 0.5)),
        obj("petri_dish_1", "petri_dish", "robotics_lab",
            (6.9, 0.98, 4.35), (0.16, 0.05, 0.16)),
        obj("whiteboard_1", "whiteboard", "robotics_lab",
            (2.0, 1.4, 0.1), (1.6, 1.0, 0.08)),
        obj("poster_lab", "poster", "robotics_lab",
            (0.1, 1.5, 6.0), (0.06, 0.9, 0.7)),
        # break room ---------------------------------------------------------
        obj("fridge_1", "fridge", "break_room",
            (0.7, 0.9, 6.0), (0.8, 1.8, 0.8)),
        obj("counter_1", "counter", "break_room",
            (3.6, 0.45, 6.9), (3.2, 0.9, 0.6)),
        obj("bowl_fresh", "bowl", "break_room",
            (2.35, 0.97, 6.9), (0.22, 0.12, 0.22), contained_in="counter_1"),
        obj("knife_1", "knife", "break_room",
            (2.0, 0.93, 6.9), (0.25, 0.04, 0.05), contained_in="counter_1"),
        obj("mug_1", "mug", "break_room",
            (3.8, 0.97, 6.9), (0.1, 0.12, 0.1), contained_in="counter_1"),
        obj("soda_1", "soda_can", "break_room",
            (4.0, 0.96, 6.9), (0.07, 0.13, 0.07), contained_in="counter_1"),
        obj("bread_1", "bread", "break_room",
            (4.2, 0.96, 6.9), (0.24, 0.12, 0.12), contained_in="counter_1"),
        obj("potato_1", "potato", "break_room",
            (4.42, 0.94, 6.9), (0.09, 0.08, 0.09), contained_in="counter_1"),
        obj("table_break", "table", "break_room",
            (4.0, 0.4, 3.0), (1.6, 0.8, 0.7)),
        obj("soup_1", "soup", "break_room",
            (3.7, 0.92, 3.0), (0.18, 0.1, 0.18), contained_in="table_break"),
        obj("plate_1", "plate", "break_room",
            (4.0, 0.9, 3.0), (0.2, 0.04, 0.2), contained_in="table_break"),
        obj("apple_1", "apple", "break_room",
            (4.3, 0.92, 3.0), (0.09, 0.09, 0.09), contained_in="table_break"),
        obj("microwave_1", "microwave", "break_room",
            (6.9, 1.0, 4.0), (0.6, 0.45, 0.45)),
        obj("water_cooler_1", "water_cooler", "break_room",
            (6.0, 0.9, 0.9), (0.4, 1.3, 0.4)),
        obj("plant_1", "plant", "break_room",
            (0.7, 0.5, 0.7), (0.4, 1.0, 0.4)),
        obj("poster_break", "poster", "break_room",
            (3.0, 1.4, 7.95), (0.7, 0.9, 0.06)),
        # office ------------------------------------------------------------
        obj("desk_1", "desk", "office",
            (4.0, 0.4, 4.9), (1.6, 0.8, 0.8)),
        obj("laptop_1", "laptop", "office",
            (4.0, 0.92, 4.9), (0.35, 0.25, 0.25), contained_in="desk_1"),
        obj("lamp_office", "lamp", "office",
            (3.7, 1.02, 4.9), (0.22, 0.45, 0.22), contained_in="desk_1"),
        obj("monitor_1", "monitor", "office",
            (4.3, 1.0, 4.9), (0.45, 0.4, 0.12), contained_in="desk_1"),
        obj("shelf_1", "shelf", "office",
            (6.9, 1.0, 4.0), (0.8, 1.8, 0.35)),
        obj("first_aid_1", "first_aid_kit", "office",
            (6.9, 1.25, 4.0), (0.3, 0.2, 0.2), contained_in="shelf_1"),
        obj("fan_1", "fan", "office",
            (1.1, 1.0, 2.0), (0.45, 0.6, 0.3)),
        obj("heater_1", "heater", "office",
            (4.0, 0.6, 0.85), (0.5, 0.7, 0.25)),
        obj("painting_1", "painting", "office",
            (2.0, 1.4, 7.95), (0.8, 0.6, 0.06)),
        obj("clock_1", "clock", "office",
            (6.0, 1.5, 7.95), (0.35, 0.35, 0.08)),
    ]

    return {
        "schema": "arena-scene/1",
        "scene_id": "lab",
        "rooms": rooms,
        "transitions": [["lab_32", "br_12"], ["br_32", "of_12"]],
        "agent": {"room": "robotics_lab", "viewpoint": "lab_22",
                  "heading": "N", "pitch": "level"},
        "objects": objects,
    }


# ---------------------------------------------------------------------------
# missions
# ---------------------------------------------------------------------------

def se(target, key, value):
    return {"type": "state_equals", "target": target, "key": key, "value": value}


def ci(target, receptacle):
    return {"type": "contained_in", "target": target, "receptacle": receptacle}


def mission_docs() -> list[dict]:
    def m(mission_id, title, briefing, subgoals, tags=("seen",), overrides=()):
        return {
            "schema": "arena-mission/1",
            "mission_id": mission_id,
            "title": title,
            "user_briefing": briefing,
            "scene_id": "lab",
            "tags": list(tags),
            "scene_overrides": list(overrides),
            "subgoals": subgoals,
        }

    return [
        m("repair_bowl", "Repair the bowl situation",
          "The bowl on the lab table is cracked beyond saving. Throw it in the "
          "trash can, then fetch the fresh bowl from the break room counter and "
          "set it on the lab table.",
          [
              {"description": "Dispose of the cracked bowl in the trash can",
               "conditions": [ci({"instance": "bowl_broken"}, {"instance": "trash_can_1"})]},
              {"description": "Put the fresh bowl on the lab table",
               "conditions": [ci({"instance": "bowl_fresh"}, {"instance": "table_lab"})]},
          ],
          overrides=[{"instance": "bowl_broken", "states": {"isBroken": True}}]),
        m("fill_mug", "Morning refill",
          "Fill the mug that is sitting on the break room counter.",
          [{"description": "Fill the mug",
            "conditions": [se({"instance": "mug_1"}, "isFilled", True)]}]),
        m("heat_soup", "Lunch service",
          "The soup on the break room table has gone cold. Heat it up.",
          [{"description": "Heat the soup",
            "conditions": [se({"instance": "soup_1"}, "isHeated", True)]}]),
        m("chill_soda", "Cold drinks policy",
          "Chill the soda can from the break room counter and stow it in the fridge.",
          [
              {"description": "Chill the soda can",
               "conditions": [se({"instance": "soda_1"}, "isChilled", True)]},
              {"description": "Put the soda can in the fridge",
               "conditions": [ci({"instance": "soda_1"}, {"instance": "fridge_1"})]},
          ]),
        m("toggle_printer", "Print job",
          "Power up the 3D printer in the robotics lab and switch it on.",
          [
              {"description": "Power the 3D printer",
               "conditions": [se({"instance": "printer_3d_1"}, "isPowered", True)]},
              {"description": "Switch the 3D printer on",
               "conditions": [se({"instance": "printer_3d_1"}, "isToggledOn", True)]},
          ]),
        m("clean_plate", "Dish duty",
          "Someone left a dirty plate on the break room table. Clean it.",
          [{"description": "Clean the plate",
            "conditions": [se({"instance": "plate_1"}, "isDirty", False)]}],
          overrides=[{"instance": "plate_1", "states": {"isDirty": True}}]),
        m("slice_bread", "Sandwich prep",
          "Slice the bread on the break room counter. The knife is at the end "
          "of the counter.",
          [{"description": "Slice the bread",
            "conditions": [se({"instance": "bread_1"}, "isSliced", True)]}]),
        m("spanner_delivery", "Tool run",
          "Get the spanner from the robotics lab and leave it on the office desk.",
          [{"description": "Put the spanner on the office desk",
            "conditions": [ci({"instance": "spanner_1"}, {"instance": "desk_1"})]}]),
        # unseen ------------------------------------------------------------
        m("cook_potato", "Field rations",
          "Slice the potato from the break room counter, then cook it.",
          [
              {"description": "Slice the potato",
               "conditions": [se({"instance": "potato_1"}, "isSliced", True)]},
              {"description": "Cook the potato",
               "conditions": [se({"instance": "potato_1"}, "isCooked", True)]},
          ], tags=("unseen",)),
        m("disinfect_dish", "Containment breach",
          "A petri dish in the robotics lab is contaminated. Disinfect it.",
          [{"description": "Disinfect the petri dish",
            "conditions": [se({"instance": "petri_dish_1"}, "isInfected", False)]}],
          tags=("unseen",),
          overrides=[{"instance": "petri_dish_1", "states": {"isInfected": True}}]),
        m("snack_time", "Snack break",
          "Eat the apple on the break room table.",
          [{"description": "Eat the apple",
            "conditions": [se({"instance": "apple_1"}, "isEaten", True)]}],
          tags=("unseen",)),
        m("smash_jar", "Controlled demolition",
          "The sample jar in the lab cabinet is compromised. Open the cabinet "
          "and break the jar.",
          [{"description": "Break the jar",
            "conditions": [se({"instance": "jar_1"}, "isBroken", True)]}],
          tags=("unseen",)),
        m("lab_lockdown", "Lights out",
          "Lock down the lab for the night: close the cabinet and turn off the "
          "table lamp.",
          [
              {"description": "Close the cabinet",
               "conditions": [se({"instance": "cabinet_1"}, "isOpen", False)]},
              {"description": "Turn off the lamp",
               "conditions": [se({"instance": "lamp_lab"}, "isToggledOn", False)]},
          ],
          tags=("unseen",),
          overrides=[
              {"instance": "cabinet_1", "states": {"isOpen": True}},
              {"instance": "lamp_lab", "states": {"isToggledOn": True}},
          ]),
    ]


# ---------------------------------------------------------------------------
# scripted solutions (verified by simulation)
# ---------------------------------------------------------------------------

class Solver:
    """Builds a working action script by simulating as it goes."""

    def __init__(self, world):
        self.world = world
        self.actions: list[Action] = []

    def _do(self, action: Action):
        self.world, result = apply_action(self.world, action, raster=RASTER,
                                          render_frames=False)
        if not result.ok:
            raise RuntimeError(
                f"solution step failed: {action} -> {result.failure_code}"
            )
        self.actions.append(action)

    def _visible_in_range(self, iid) -> bool:
        obs = render_observation(self.world, *RASTER)
        seen = obs.find(iid)
        return seen is not None and seen.depth <= INTERACTION_RANGE

    def goto_and_face(self, iid: str):
        scene = self.world.scene
        target = self.world.objects[iid]
        room_vps = scene.room_viewpoints(target.room)
        best = min(room_vps, key=lambda v: (
            (v.pos[0] - target.pos[0]) ** 2 + (v.pos[1] - target.pos[2]) ** 2,
            v.node_id,
        ))
        if self.world.agent.viewpoint != best.node_id:
            self._do(Action("GotoViewpoint", viewpoint=best.node_id))
        for _ in range(4):
            if self._visible_in_range(iid):
                return
            self._do(Action("RotateRight"))
        raise RuntimeError(f"{iid} not visible from {best.node_id} at any heading")

    def interact(self, verb: str, iid: str):
        self.goto_and_face(iid)
        if verb == "Place":
            target = self.world.objects[iid]
            cls = self.world.cls(target)
            if cls.has(AffordanceProperty.OPENABLE) and not target.states.get("isOpen"):
                self._do(Action("Open", target=iid))
        self._do(Action(verb, target=iid))


SOLUTION_STEPS: dict[str, list[tuple[str, str]]] = {
    "repair_bowl": [("Pickup", "bowl_broken"), ("Place", "trash_can_1"),
                    ("Pickup", "bowl_fresh"), ("Place", "table_lab")],
    "fill_mug": [("Fill", "mug_1")],
    "heat_soup": [("Heat", "soup_1")],
    "chill_soda": [("Chill", "soda_1"), ("Pickup", "soda_1"), ("Place", "fridge_1")],
    "toggle_printer": [("Power", "printer_3d_1"), ("ToggleOn", "printer_3d_1")],
    "clean_plate": [("Clean", "plate_1")],
    "slice_bread": [("Pickup", "knife_1"), ("Slice", "bread_1")],
    "spanner_delivery": [("Pickup", "spanner_1"), ("Place", "desk_1")],
    "cook_potato": [("Pickup", "knife_1"), ("Slice", "potato_1"), ("Cook", "potato_1")],
    "disinfect_dish": [("Clean", "petri_dish_1")],
    "snack_time": [("Eat", "apple_1")],
    "smash_jar": [("Open", "cabinet_1"), ("Break", "jar_1")],
    "lab_lockdown": [("Close", "cabinet_1"), ("ToggleOff", "lamp_lab")],
}


def build_solutions(catalog, registry, scenes) -> dict[str, dict]:
    solutions = {}
    for spec in catalog:
        world = init_mission(spec, registry, scenes)
        solver = Solver(world)
        for verb, iid in SOLUTION_STEPS[spec.mission_id]:
            solver.interact(verb, iid)
        status = check_goals(solver.world, spec)
        if not status.overall:
            raise RuntimeError(f"{spec.mission_id}: solution does not complete "
                               f"({status.subgoals})")
        solutions[spec.mission_id] = {
            "mission_id": spec.mission_id,
            "actions": [action_to_doc(a) for a in solver.actions],
            "completed_tick": solver.world.tick,
            "final_hash": state_hash(solver.world),
        }
        print(f"  solution {spec.mission_id}: {len(solver.actions)} actions, "
              f"tick {solver.world.tick}")
    return solutions


# ---------------------------------------------------------------------------
# golden transcripts (verified against the real orchestrator + baseline)
# ---------------------------------------------------------------------------

TRANSCRIPTS: dict[str, dict] = {
    "repair_bowl": {
        "utterances": [
            "pick up the bowl",
            "put the bowl in the trash can",
            "go to the break room",
            "pick up the bowl",
            "put the bowl on the table in the robotics lab",
        ],
        "rating": 5,
    },
    "fill_mug": {
        "utterances": [
            "go to the break room",
            "go to the counter",
            "fill the mug",
        ],
        "rating": 4,
    },
    "heat_soup": {
        "utterances": [
            "go to the break room",
            "go to the table",
            "heat the soup",
        ],
        "rating": 5,
    },
    "chill_soda": {
        "utterances": [
            "go to the break room",
            "go to the counter",
            "chill the soda can",
            "go to the fridge",
            "put the soda can in the fridge",
        ],
        "rating": 4,
    },
    "toggle_printer": {
        "utterances": [
            "power on the 3d printer",
            "turn the 3d printer on",
        ],
        "rating": 5,
    },
    "clean_plate": {
        "utterances": [
            "go to the break room",
            "go to the table",
            "clean the plate",
        ],
        "rating": 4,
    },
    "slice_bread": {
        "utterances": [
            "go to the break room",
            "go to the counter",
            "pick up the knife",
            "slice the bread",
        ],
        "rating": 5,
    },
    "spanner_delivery": {
        "utterances": [
            "pick up the spanner",
            "go to the office",
            "put the spanner on the desk",
        ],
        "rating": 5,
    },
    "cook_potato": {
        "utterances": [
            "go to the break room",
            "go to the counter",
            "pick up the knife",
            "slice the potato",
            "cook the potato",
        ],
        "rating": 4,
    },
    "disinfect_dish": {
        "utterances": [
            "disinfect the petri dish",
        ],
        "rating": 5,
    },
    "snack_time": {
        "utterances": [
            "go to the break room",
            "go to the table",
            "eat the apple",
        ],
        "rating": 3,
    },
    "smash_jar": {
        "utterances": [
            "open the cabinet",
            "break the jar",
        ],
        "rating": 4,
    },
    "lab_lockdown": {
        "utterances": [
            "close the cabinet",
            "turn the lamp off",
        ],
        "rating": 5,
    },
}


def make_service(tmp: Path, registry, scenes, catalog, clock=None, ids=None):
    scene_graph = scenes.load("lab", registry).scene
    agent = BaselineAgent(scene_graph, registry)
    ticker = {"t": 1_700_000_000.0}

    def fake_clock():
        ticker["t"] += 1.0
        return ticker["t"]

    counter = {"n": 0}

    def fake_ids():
        counter["n"] += 1
        return f"sess-{counter['n']:04d}"

    return SessionService(
        catalog=catalog,
        registry=registry,
        scenes=scenes,
        inference=LocalInferenceClient(agent.infer),
        store=SessionStore(tmp / "sessions.sqlite"),
        metrics=RecordStore(tmp / "records.ndjson"),
        limits=TurnLimits(),
        raster=RASTER,
        clock=clock or fake_clock,
        id_factory=ids or fake_ids,
    )


def verify_transcripts(registry, scenes, catalog, tmpdir: Path) -> dict[str, dict]:
    """Drive every transcript through the in-process orchestrator."""
    verified = {}
    for spec in catalog:
        transcript = TRANSCRIPTS[spec.mission_id]
        tmp = tmpdir / spec.mission_id
        tmp.mkdir(parents=True, exist_ok=True)
        service = make_service(tmp, registry, scenes, catalog)
        session, _ = service.create_session(spec.mission_id)
        turns = []
        for text in transcript["utterances"]:
            if service._get(session.session_id).status != "active":
                raise RuntimeError(
                    f"{spec.mission_id}: utterance {text!r} after session closed"
                )
            record = service.handle_utterance(session.session_id, text)
            rounds = len(record["roundtrips"])
            if rounds > MAX_ROUNDS_PER_TURN:
                raise RuntimeError(
                    f"{spec.mission_id}: turn {record['turn_index']} took "
                    f"{rounds} responses"
                )
            turns.append(record)
        sess = service._get(session.session_id)
        if sess.status != "mission_complete":
            state = json.dumps(turns[-1], indent=1)[:2000]
            raise RuntimeError(
                f"{spec.mission_id}: transcript did not complete the mission "
                f"(status {sess.status})\nlast turn: {state}"
            )
        service.submit_rating(session.session_id, transcript["rating"])
        verified[spec.mission_id] = {
            "mission_id": spec.mission_id,
            "utterances": transcript["utterances"],
            "rating": transcript["rating"],
            "turns_to_complete": len(turns),
            "completed_tick": sess.completed_tick,
        }
        print(f"  transcript {spec.mission_id}: {len(turns)} turns, "
              f"tick {sess.completed_tick}")
    return verified


def export_golden_log(registry, scenes, catalog, tmpdir: Path) -> dict:
    """A committed session log: the repair_bowl transcript, exported."""
    tmp = tmpdir / "golden_log"
    tmp.mkdir(parents=True, exist_ok=True)
    service = make_service(tmp, registry, scenes, catalog)
    session, _ = service.create_session("repair_bowl")
    for text in TRANSCRIPTS["repair_bowl"]["utterances"]:
        if service._get(session.session_id).status != "active":
            break
        service.handle_utterance(session.session_id, text)
    service.submit_rating(session.session_id, 5)
    return service.export_session_log(session.session_id)


def record_event_stream(registry, scenes, catalog, tmpdir: Path) -> dict:
    """A committed server event stream for headless console tests."""
    tmp = tmpdir / "event_stream"
    tmp.mkdir(parents=True, exist_ok=True)
    service = make_service(tmp, registry, scenes, catalog)
    mission_id = "heat_soup"
    session, _ = service.create_session(mission_id)
    for text in TRANSCRIPTS[mission_id]["utterances"]:
        if service._get(session.session_id).status != "active":
            break
        service.handle_utterance(session.session_id, text)
    service.submit_rating(session.session_id, TRANSCRIPTS[mission_id]["rating"])
    events = list(service.subscribe(session.session_id, from_start=True))
    mission = service.catalog[mission_id].to_doc()
    return {
        "mission": mission,
        "utterances": TRANSCRIPTS[mission_id]["utterances"],
        "events": events,
    }


# ---------------------------------------------------------------------------
# geometry audit
# ---------------------------------------------------------------------------

def audit_reachability(world):
    """Every non-decor object must be visible within range from somewhere."""
    from dataclasses import replace as dc_replace

    scene = world.scene
    failures = []
    for iid in sorted(world.objects):
        obj = world.objects[iid]
        cls = world.cls(obj)
        if cls.has(AffordanceProperty.DECOR):
            continue
        opened = world
        # audit as if every openable container were open
        for other_id, other in world.objects.items():
            ocls = world.cls(other)
            if ocls.has(AffordanceProperty.OPENABLE) and not other.states.get("isOpen"):
                patched = dict(other.states)
                patched["isOpen"] = True
                opened = opened.with_object(dc_replace(other, states=patched))
        # the baseline approaches via the nearest viewpoint, so reachability
        # must hold exactly there
        nearest = min(
            scene.room_viewpoints(obj.room),
            key=lambda v: ((v.pos[0] - obj.pos[0]) ** 2
                           + (v.pos[1] - obj.pos[2]) ** 2, v.node_id),
        )
        reachable = False
        for heading in ("N", "E", "S", "W"):
            probe = dc_replace(
                opened,
                agent=dc_replace(opened.agent, room=obj.room,
                                 viewpoint=nearest.node_id, heading=heading),
            )
            obs = render_observation(probe, *RASTER)
            seen = obs.find(iid)
            if seen is not None and seen.depth <= INTERACTION_RANGE:
                reachable = True
                break
        if not reachable:
            failures.append(iid)
    if failures:
        raise RuntimeError(f"unreachable interactables: {failures}")
    print(f"  geometry audit passed for {sum(1 for _ in world.objects)} objects")


# ---------------------------------------------------------------------------
# main
# ---------------------------------------------------------------------------

def write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def main() -> int:
    import tempfile

    print("writing registry and scene...")
    write_json(DATA / "registry.json", registry_doc())
    write_json(DATA / "scenes" / "lab.scene.json", scene_doc())

    registry = load_registry(DATA / "registry.json")
    scenes = SceneIndex(DATA / "scenes")
    world = load_scene(DATA / "scenes" / "lab.scene.json", registry)
    print(f"  scene `lab`: {len(world.objects)} objects, "
          f"{len(world.scene.viewpoints)} viewpoints")
    audit_reachability(world)

    print("writing missions...")
    if (DATA / "missions").exists():
        shutil.rmtree(DATA / "missions")
    for doc in mission_docs():
        write_json(DATA / "missions" / f"{doc['mission_id']}.mission.json", doc)
    catalog = load_catalog(DATA / "missions", registry, scenes)
    seen = sum(1 for m in catalog if m.seen)
    print(f"  catalog: {len(catalog)} missions ({seen} seen, "
          f"{len(catalog) - seen} unseen)")
    assert seen == 8 and len(catalog) - seen == 5

    print("building scripted solutions...")
    solutions = build_solutions(catalog, registry, scenes)
    if (DATA / "solutions").exists():
        shutil.rmtree(DATA / "solutions")
    for mission_id, doc in solutions.items():
        write_json(DATA / "solutions" / f"{mission_id}.json", doc)

    print("verifying golden transcripts against the live stack...")
    with tempfile.TemporaryDirectory() as tmpdir:
        verified = verify_transcripts(registry, scenes, catalog, Path(tmpdir))
        golden_log = export_golden_log(registry, scenes, catalog, Path(tmpdir))
        event_stream = record_event_stream(registry, scenes, catalog, Path(tmpdir))
    write_json(REPO / "frontend" / "tests" / "fixtures" / "event_stream.json",
               event_stream)
    if (DATA / "transcripts").exists():
        shutil.rmtree(DATA / "transcripts")
    for mission_id, doc in verified.items():
        write_json(DATA / "transcripts" / f"{mission_id}.json", doc)

    print("writing golden artifacts...")
    write_json(GOLDEN / "scene_hash.json",
               {"lab": state_hash(world)})
    write_json(GOLDEN / "mission_hashes.json", {
        spec.mission_id: state_hash(init_mission(spec, registry, scenes))
        for spec in catalog
    })
    write_json(GOLDEN / "solutions_meta.json", {
        mission_id: {"actions": len(doc["actions"]),
                     "completed_tick": doc["completed_tick"],
                     "final_hash": doc["final_hash"]}
        for mission_id, doc in solutions.items()
    })
    write_json(GOLDEN / "logs" / "repair_bowl.log.json", golden_log)

    from arena.edh import SessionLog, extract_edh_instances
    log = SessionLog.from_doc(golden_log)
    mission_index = {m.mission_id: m for m in catalog}
    instances = extract_edh_instances(log, registry, scenes, mission_index)
    write_json(GOLDEN / "edh_expectations.json", {
        "repair_bowl_log_instances": len(instances),
        "instance_ids": [i.instance_id for i in instances],
        "expected_changes": {
            i.instance_id: i.expected_changes.to_doc() for i in instances
        },
    })
    print(f"  golden log yields {len(instances)} EDH instance(s)")

    from arena.synth import synthetic_competition_records
    from arena.metrics import emit_leaderboard
    from datetime import date
    records = synthetic_competition_records()
    roster = sorted({r.team_id for r in records})
    _, report = emit_leaderboard(records, date(2023, 3, 22), roster, salt="fixture")
    write_json(GOLDEN / "leaderboard.json", report)
    print("done.")
    return 0


if __name__ == "__main__":
    sys.exit(main())
