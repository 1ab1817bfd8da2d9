"""Shipped rule-based inference agent: keyword grammar plus visual memory.

The agent never sees mission briefings or simulator state. It works from the
utterance, the egocentric observation, its own sighting memory, and the static
deployment map (rooms, viewpoints, class lexicon). Object positions are
triangulated from mask center, depth, and pose, as an RGBD view affords.
Failures surface through the per-session action history (ok flags), and the
agent recovers round by round: rotating toward remembered sightings, scanning
an unfamiliar room, or opening a likely receptacle before giving up and
asking the user.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from arena.core.actions import Action
from arena.core.affordances import AffordanceProperty
from arena.core.engine import _hop_heading, shortest_path
from arena.core.registry import ClassRegistry
from arena.core.render import (
    EYE_HEIGHT,
    HORIZONTAL_FOV_DEG,
    INTERACTION_RANGE,
    Observation,
    VisibleObject,
    camera_basis,
)
from arena.core.world import SceneGraph
from arena.protocol import InferenceRequest, InferenceResponse, validate_response

FALLBACK_DIALOG = (
    "I can help with actions like picking up or opening objects — what should I do?"
)
NOT_FOUND_DIALOG = "I can't find the {noun} right now. Can you guide me?"
AMBIGUOUS_DIALOG = "I see more than one {noun}. Which one do you mean?"
DONE_DIALOG = "Done!"
GIVE_UP_DIALOG = "I'm stuck on that one. Could you break it into smaller steps?"

MAX_ROUNDS_PER_TURN = 5
BATCH_LIMIT = 10
SCAN_LIMIT = 3  # rotations spent looking around per plan step

_VERB_PHRASES: list[tuple[str, str]] = [
    ("pick up", "Pickup"), ("take", "Pickup"), ("grab", "Pickup"),
    ("fetch", "Pickup"), ("get me", "Pickup"), ("get", "Pickup"),
    ("put", "Place"), ("place", "Place"),
    ("open", "Open"), ("close", "Close"), ("shut", "Close"),
    ("turn on", "ToggleOn"), ("switch on", "ToggleOn"), ("toggle on", "ToggleOn"),
    ("turn off", "ToggleOff"), ("switch off", "ToggleOff"), ("toggle off", "ToggleOff"),
    ("toggle", "ToggleOn"),
    ("slice", "Slice"), ("cut", "Slice"),
    ("pour out", "Pour"), ("pour", "Pour"), ("empty", "Pour"),
    ("break", "Break"), ("smash", "Break"),
    ("heat up", "Heat"), ("heat", "Heat"), ("warm up", "Heat"), ("warm", "Heat"),
    ("microwave", "Heat"),
    ("chill", "Chill"), ("cool down", "Chill"), ("cool", "Chill"),
    ("fill", "Fill"),
    ("clean", "Clean"), ("wash", "Clean"), ("wipe", "Clean"),
    ("disinfect", "Clean"), ("sanitize", "Clean"),
    ("cook", "Cook"), ("eat", "Eat"),
    ("power on", "Power"), ("power off", "Power"), ("power up", "Power"),
    ("power", "Power"), ("plug in", "Power"), ("unplug", "Power"),
    ("highlight", "Highlight"), ("point at", "Highlight"), ("show me", "Highlight"),
    ("go to", "_goto"), ("goto", "_goto"), ("walk to", "_goto"),
    ("navigate to", "_goto"), ("head to", "_goto"), ("move to", "_goto"),
    ("stop", "_stop"), ("cancel", "_stop"), ("never mind", "_stop"),
]

_HEADING_ORDER = ("N", "E", "S", "W")


@dataclass(frozen=True, slots=True)
class GroundingLexicon:
    """Surface forms for nouns, verbs, and rooms of one deployment."""

    noun_to_class: dict[str, str]
    verb_phrases: tuple[tuple[str, str], ...]
    room_names: dict[str, str]

    @staticmethod
    def build(registry: ClassRegistry, scene: SceneGraph) -> "GroundingLexicon":
        nouns: dict[str, str] = {}
        for cls in registry.values():
            for syn in cls.synonyms:
                nouns.setdefault(syn.lower(), cls.class_name)
        rooms: dict[str, str] = {}
        for room in scene.rooms.values():
            rooms[room.name.lower()] = room.room_id
            rooms[room.room_id.replace("_", " ").lower()] = room.room_id
        phrases = tuple(sorted(_VERB_PHRASES, key=lambda p: -len(p[0])))
        return GroundingLexicon(noun_to_class=nouns, verb_phrases=phrases, room_names=rooms)

    def find_noun(self, text: str) -> Optional[tuple[str, str]]:
        """Longest synonym occurring in `text` -> (surface form, class)."""
        best: Optional[tuple[str, str]] = None
        for syn, cls in self.noun_to_class.items():
            if re.search(rf"\b{re.escape(syn)}\b", text):
                if best is None or (len(syn), syn) > (len(best[0]), best[0]):
                    best = (syn, cls)
        return best

    def find_room(self, text: str) -> Optional[tuple[str, str]]:
        best: Optional[tuple[str, str]] = None
        for name, rid in self.room_names.items():
            if re.search(rf"\b{re.escape(name)}\b", text):
                if best is None or (len(name), name) > (len(best[0]), best[0]):
                    best = (name, rid)
        return best


# -- visual memory --------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class Sighting:
    instance_id: str
    class_name: str
    room: str
    viewpoint: str     # best viewpoint to interact from
    tick: int
    pos: tuple[float, float]


@dataclass(frozen=True, slots=True)
class VisualMemory:
    """Last-seen beliefs per instance, derived purely from observations."""

    scene: SceneGraph
    sightings: dict[str, Sighting] = field(default_factory=dict)

    def lookup_class(self, class_name: str) -> list[Sighting]:
        hits = [s for s in self.sightings.values() if s.class_name == class_name]
        return sorted(hits, key=lambda s: (-s.tick, s.instance_id))

    def room_map(self) -> dict[str, dict[str, tuple[list[str], str, int]]]:
        """room -> class -> (instance ids, freshest viewpoint, freshest tick)."""
        out: dict[str, dict[str, tuple[list[str], str, int]]] = {}
        for s in sorted(self.sightings.values(), key=lambda s: (s.tick, s.instance_id)):
            by_class = out.setdefault(s.room, {})
            ids, _, _ = by_class.get(s.class_name, ([], s.viewpoint, s.tick))
            if s.instance_id not in ids:
                ids = ids + [s.instance_id]
            by_class[s.class_name] = (ids, s.viewpoint, s.tick)
        return out


def estimate_position(scene: SceneGraph, obs: Observation,
                      seen: VisibleObject) -> tuple[float, float]:
    """Triangulate an object's floor position from mask center + depth."""
    vp = scene.viewpoints[obs.pose_viewpoint]
    eye = np.array([vp.pos[0], EYE_HEIGHT, vp.pos[1]])
    r, u, f = camera_basis(obs.pose_heading, obs.pose_pitch)
    fx = (obs.width / 2.0) / math.tan(math.radians(HORIZONTAL_FOV_DEG) / 2.0)
    x0, y0, x1, y1 = seen.bbox
    cu = (x0 + x1) / 2.0 + 0.5
    cv = (y0 + y1) / 2.0 + 0.5
    cz = seen.depth
    cx = (cu - obs.width / 2.0) * cz / fx
    cy = (obs.height / 2.0 - cv) * cz / fx
    world = eye + cx * r + cy * u + cz * f
    return float(world[0]), float(world[2])


def nearest_viewpoint(scene: SceneGraph, room: str, pos: tuple[float, float]) -> str:
    candidates = scene.room_viewpoints(room) or list(scene.viewpoints.values())
    return min(
        candidates,
        key=lambda v: ((v.pos[0] - pos[0]) ** 2 + (v.pos[1] - pos[1]) ** 2, v.node_id),
    ).node_id


def update_visual_memory(belief: VisualMemory, obs: Observation) -> VisualMemory:
    """Fold an observation into memory; the latest sighting of an id wins."""
    sightings = dict(belief.sightings)
    for seen in obs.visible:
        pos = estimate_position(belief.scene, obs, seen)
        sightings[seen.instance_id] = Sighting(
            instance_id=seen.instance_id,
            class_name=seen.class_name,
            room=obs.pose_room,
            viewpoint=nearest_viewpoint(belief.scene, obs.pose_room, pos),
            tick=obs.tick,
            pos=pos,
        )
    return replace(belief, sightings=sightings)


# -- pose helpers ------------------------------------------------------------------

def heading_toward(frm: tuple[float, float], to: tuple[float, float], fallback: str) -> str:
    dx, dz = to[0] - frm[0], to[1] - frm[1]
    if dx == 0 and dz == 0:
        return fallback
    if abs(dx) >= abs(dz):
        return "E" if dx > 0 else "W"
    return "N" if dz > 0 else "S"


def rotations_between(current: str, desired: str) -> list[Action]:
    diff = (_HEADING_ORDER.index(desired) - _HEADING_ORDER.index(current)) % 4
    if diff == 0:
        return []
    if diff == 1:
        return [Action("RotateRight")]
    if diff == 2:
        return [Action("RotateRight"), Action("RotateRight")]
    return [Action("RotateLeft")]


def predict_arrival(scene: SceneGraph, start_vp: str, goal_vp: str,
                    fallback_heading: str) -> str:
    """Heading the simulator will leave the agent with after GotoViewpoint.

    Best effort from the public map; a wrong guess only costs a recovery
    rotation on the next round.
    """
    path = shortest_path(scene, start_vp, lambda v: v == goal_vp)
    if not path or len(path) < 2:
        return fallback_heading
    return _hop_heading(scene.viewpoints[path[-2]].pos,
                        scene.viewpoints[path[-1]].pos, fallback_heading)


# -- utterance parsing ----------------------------------------------------------

# plan steps: ("goto_room", room) | ("face", class) | ("verb", verb, class) | ("stop",)
Step = tuple

_CLAUSE_SPLIT = re.compile(r"\s*(?:,|;|\band then\b|\bthen\b|\band\b)\s*")


def parse_utterance(text: str, lexicon: GroundingLexicon,
                    last_noun: Optional[str] = None) -> Optional[list[Step]]:
    """Turn an utterance into plan steps; None when out of grammar."""
    text = text.lower().strip().rstrip(".!?")
    if not text:
        return None
    steps: list[Step] = []
    noun_context = last_noun
    for clause in _CLAUSE_SPLIT.split(text):
        clause = clause.strip()
        if not clause:
            continue
        parsed = _parse_clause(clause, lexicon, noun_context)
        if parsed is None:
            return None
        clause_steps, noun_context = parsed
        steps.extend(clause_steps)
    return steps or None


_PARTICLE_VERBS = [
    (re.compile(r"(?:please\s+)?turn\s+(.+?)\s+on$"), "ToggleOn"),
    (re.compile(r"(?:please\s+)?turn\s+(.+?)\s+off$"), "ToggleOff"),
    (re.compile(r"(?:please\s+)?switch\s+(.+?)\s+on$"), "ToggleOn"),
    (re.compile(r"(?:please\s+)?switch\s+(.+?)\s+off$"), "ToggleOff"),
    (re.compile(r"(?:please\s+)?power\s+(.+?)\s+(?:on|off|up)$"), "Power"),
]


def _parse_clause(clause, lexicon, noun_context) -> Optional[tuple[list[Step], Optional[str]]]:
    verb = None
    rest = clause
    for pattern, v in _PARTICLE_VERBS:  # "turn the lamp off" style
        m = pattern.match(clause)
        if m:
            verb, rest = v, m.group(1)
            break
    if verb is None:
        for phrase, v in lexicon.verb_phrases:
            m = re.match(rf"(?:please\s+)?(?:robot[, ]+)?{re.escape(phrase)}\b\s*(.*)$", clause)
            if m:
                verb, rest = v, m.group(1)
                break
    if verb is None:
        return None
    if verb == "_stop":
        return [("stop",)], noun_context

    steps: list[Step] = []
    room_hit = lexicon.find_room(rest)
    if room_hit is not None:
        steps.append(("goto_room", room_hit[1]))
        # drop the room phrase so noun grounding sees only the object words
        rest = re.sub(rf"\b(?:in|from|inside|at|to)\s+the\s+{re.escape(room_hit[0])}\b", " ", rest)
        rest = re.sub(rf"\b{re.escape(room_hit[0])}\b", " ", rest)

    noun = None
    hit = lexicon.find_noun(rest)
    if hit is not None:
        noun = hit[1]
    elif re.search(r"\b(it|that|them)\b", rest) and noun_context:
        noun = noun_context

    if verb == "_goto":
        if noun is None:
            # bare "go to the break room"
            return (steps, noun_context) if steps else None
        steps.append(("face", noun))
        return steps, noun

    if verb == "Place":
        # "put the mug in(to)/on the fridge": item before the preposition,
        # receptacle after it.
        m = re.match(r"(.*?)\b(?:in|into|inside|on|onto)\b\s+(?:the\s+)?(.*)$", rest)
        if m:
            item_hit = lexicon.find_noun(m.group(1))
            recept_hit = lexicon.find_noun(m.group(2))
            if recept_hit is None:
                return None
            if item_hit is not None:
                steps.append(("verb", "Pickup", item_hit[1]))
            steps.append(("verb", "Place", recept_hit[1]))
            return steps, recept_hit[1]
        if noun is None:
            return None
        steps.append(("verb", "Place", noun))
        return steps, noun

    if noun is None:
        return None
    steps.append(("verb", verb, noun))
    return steps, noun


# -- the agent --------------------------------------------------------------------

@dataclass(slots=True)
class _TurnState:
    plan: list[Step] = field(default_factory=list)
    rounds: int = 0
    scans: int = 0
    last_batch: tuple = ()


@dataclass(slots=True)
class _SessionState:
    belief: VisualMemory
    turn: _TurnState = field(default_factory=_TurnState)
    last_noun: Optional[str] = None
    counter: int = 0
    opened: set = field(default_factory=set)  # receptacles tried this session


class BaselineAgent:
    """Deterministic grammar-driven agent; one instance serves many sessions."""

    def __init__(self, scene: SceneGraph, registry: ClassRegistry,
                 lexicon: Optional[GroundingLexicon] = None):
        self.scene = scene
        self.registry = registry
        self.lexicon = lexicon or GroundingLexicon.build(registry, scene)
        self._sessions: dict[str, _SessionState] = {}

    # -- public entry ---------------------------------------------------------

    def infer(self, req: InferenceRequest) -> InferenceResponse:
        sess = self._sessions.get(req.session_id)
        if sess is None:
            sess = _SessionState(belief=VisualMemory(scene=self.scene))
            self._sessions[req.session_id] = sess
        sess.belief = update_visual_memory(sess.belief, req.observation)

        if req.previous_response_id is None:  # a fresh user turn
            sess.turn = _TurnState()
            plan = parse_utterance(req.utterance, self.lexicon, sess.last_noun)
            if plan is None:
                return self._respond(sess, [], dialog=FALLBACK_DIALOG)
            sess.turn.plan = plan
            for step in plan:
                if step[0] in ("face", "verb"):
                    sess.last_noun = step[-1]
        sess.turn.rounds += 1
        if req.mode != "edh" and sess.turn.rounds >= MAX_ROUNDS_PER_TURN:
            # the final permitted response must end the turn
            if sess.turn.plan:
                sess.turn.plan = []
                return self._respond(sess, [], dialog=GIVE_UP_DIALOG)
            return self._respond(sess, [], dialog=DONE_DIALOG)
        return self._advance(req, sess)

    # -- planning machinery -----------------------------------------------------

    def _advance(self, req, sess) -> InferenceResponse:
        actions: list[Action] = []
        turn = sess.turn
        # a single step emits at most 5 actions (goto, 2 rotations, open, verb)
        while turn.plan and len(actions) <= BATCH_LIMIT - 6:
            step = turn.plan[0]
            emitted, done, response = self._emit_step(req, sess, step, actions)
            if response is not None:
                return response
            if done:
                turn.plan.pop(0)
                turn.scans = 0
            actions.extend(emitted)
            if not done:
                break  # needs a fresh observation before regrounding

        if not turn.plan and not actions:
            if req.mode == "edh":
                return self._respond(sess, [Action("Stop")])
            return self._respond(sess, [], dialog=DONE_DIALOG)
        batch = tuple((a.kind, a.target, a.room, a.viewpoint) for a in actions)
        only_rotation = all(a.kind in ("RotateLeft", "RotateRight") for a in actions)
        if batch and batch == turn.last_batch and not only_rotation:
            # no progress since the last round; ask for help instead of looping
            turn.plan = []
            return self._respond(sess, [], dialog=GIVE_UP_DIALOG)
        turn.last_batch = batch
        return self._respond(sess, actions)

    def _emit_step(self, req, sess, step, pending) -> tuple[list[Action], bool, Optional[InferenceResponse]]:
        """Translate one plan step given the current view.

        Returns (actions, step_done, final_response). A non-None response
        short-circuits the turn (clarifications). step_done false means the
        emitted actions must execute before the step can be retried.
        """
        kind = step[0]
        obs = req.observation
        if kind == "stop":
            return [Action("Stop")], True, None
        if kind == "goto_room":
            room = step[1]
            if obs.pose_room == room and not pending:
                return [], True, None
            return [Action("GotoRoom", room=room)], True, None

        noun = step[-1]
        verb = step[1] if kind == "verb" else None
        if pending:
            # regrounding against a stale view is unsound; wait a round
            return [], False, None

        if verb == "Pickup" and self._held_class(req) == noun:
            return [], True, None  # already carrying one

        surface = self._surface(noun)
        candidates = [v for v in obs.visible if v.class_name == noun]
        if len(candidates) > 1:
            candidates.sort(key=lambda v: (v.depth, v.instance_id))
            best = candidates[0]
            acts = [Action("Highlight", target=best.instance_id),
                    Action("Dialog", text=AMBIGUOUS_DIALOG.format(noun=surface))]
            sess.turn.plan = []
            return [], True, self._respond(sess, acts)
        if len(candidates) == 1:
            seen = candidates[0]
            pos = estimate_position(self.scene, obs, seen)
            actions, arrival = self._approach(obs, pos, seen.depth)
            if kind == "face":
                return actions, True, None
            actions += self._verb_actions(verb, seen.instance_id, noun)
            return actions, True, None

        # not visible: memory (skipping things this robot stowed away itself,
        # which the user is unlikely to mean), then the closed receptacle at
        # arm's length, then a look-around, then a wider receptacle search
        stowed = self._stowed_ids(req)
        remembered = [s for s in sess.belief.lookup_class(noun)
                      if s.instance_id not in stowed]
        in_room = [s for s in remembered if s.room == obs.pose_room]
        if in_room:
            sighting = in_room[0]
            if sighting.viewpoint != obs.pose_viewpoint:
                return self._goto_sighting(obs, sighting), False, None
            vp_pos = self.scene.viewpoints[obs.pose_viewpoint].pos
            want = heading_toward(vp_pos, sighting.pos, obs.pose_heading)
            if want != obs.pose_heading:
                acts = rotations_between(obs.pose_heading, want)
                if kind == "face":
                    return acts, True, None
                return acts + self._verb_actions(verb, sighting.instance_id, noun), True, None
            # staring at its last known spot and it is gone: search below
        elif remembered:
            return self._goto_sighting(obs, remembered[0]), False, None
        quick = self._receptacle_search(req, sess, noun, within_range=True)
        if quick is not None:
            return quick, False, None
        if sess.turn.scans < SCAN_LIMIT:
            sess.turn.scans += 1
            return [Action("RotateRight")], False, None
        search = self._receptacle_search(req, sess, noun, within_range=False)
        if search is not None:
            return search, False, None
        recalled = self._remembered_receptacle(req, sess, noun)
        if recalled is not None:
            return recalled, False, None
        sess.turn.plan = []
        return [], True, self._respond(
            sess, [], dialog=NOT_FOUND_DIALOG.format(noun=surface))

    def _approach(self, obs, pos: tuple[float, float],
                  depth: float) -> tuple[list[Action], str]:
        """Navigate near a target and face it; returns (actions, end heading)."""
        best_vp = nearest_viewpoint(self.scene, obs.pose_room, pos)
        actions: list[Action] = []
        heading = obs.pose_heading
        vp = obs.pose_viewpoint
        if depth > INTERACTION_RANGE and best_vp != obs.pose_viewpoint:
            actions.append(Action("GotoViewpoint", viewpoint=best_vp))
            heading = predict_arrival(self.scene, vp, best_vp, heading)
            vp = best_vp
        want = heading_toward(self.scene.viewpoints[vp].pos, pos, heading)
        if want != heading:
            actions += rotations_between(heading, want)
            heading = want
        return actions, heading

    def _verb_actions(self, verb: str, instance_id: str, noun: str) -> list[Action]:
        actions = []
        if verb == "Place":
            cls = self.registry.get(noun)
            if cls is not None and cls.has(AffordanceProperty.OPENABLE):
                # harmless when already open; required when it is not
                actions.append(Action("Open", target=instance_id))
        actions.append(Action(verb, target=instance_id))
        return actions

    def _goto_sighting(self, obs, sighting: Sighting) -> list[Action]:
        heading = predict_arrival(
            self.scene, obs.pose_viewpoint, sighting.viewpoint, obs.pose_heading
        )
        want = heading_toward(
            self.scene.viewpoints[sighting.viewpoint].pos, sighting.pos, heading
        )
        acts = [Action("GotoViewpoint", viewpoint=sighting.viewpoint)]
        acts += rotations_between(heading, want)
        return acts

    def _receptacle_search(self, req, sess, noun: str,
                           within_range: bool) -> Optional[list[Action]]:
        """Open the nearest unopened openable receptacle, if worth trying."""
        cls = self.registry.get(noun)
        if cls is None or not cls.has(AffordanceProperty.PICKUPABLE):
            return None  # non-portable things don't hide in receptacles
        obs = req.observation
        openable = [
            v for v in obs.visible
            if v.instance_id not in sess.opened
            and self._is_openable_receptacle(v.class_name)
            and (not within_range or v.depth <= INTERACTION_RANGE)
        ]
        if not openable:
            return None
        openable.sort(key=lambda v: (v.depth, v.instance_id))
        recept = openable[0]
        sess.opened.add(recept.instance_id)
        pos = estimate_position(self.scene, obs, recept)
        actions, _ = self._approach(obs, pos, recept.depth)
        actions.append(Action("Open", target=recept.instance_id))
        return actions

    def _remembered_receptacle(self, req, sess, noun: str) -> Optional[list[Action]]:
        """Walk to a remembered openable receptacle in this room and open it."""
        cls = self.registry.get(noun)
        if cls is None or not cls.has(AffordanceProperty.PICKUPABLE):
            return None
        obs = req.observation
        here = self.scene.viewpoints[obs.pose_viewpoint].pos
        candidates = sorted(
            (s for s in sess.belief.sightings.values()
             if s.room == obs.pose_room
             and s.instance_id not in sess.opened
             and self._is_openable_receptacle(s.class_name)),
            key=lambda s: ((s.pos[0] - here[0]) ** 2 + (s.pos[1] - here[1]) ** 2,
                           s.instance_id),
        )
        if not candidates:
            return None
        sighting = candidates[0]
        sess.opened.add(sighting.instance_id)
        actions = self._goto_sighting(obs, sighting)
        actions.append(Action("Open", target=sighting.instance_id))
        return actions

    def _stowed_ids(self, req) -> set:
        """Instances this robot placed somewhere itself during the session."""
        held: Optional[str] = None
        stowed: set = set()
        for action, ok in req.action_history:
            if not ok:
                continue
            if action.kind == "Pickup" and isinstance(action.target, str):
                held = action.target
                stowed.discard(held)  # picked back up
            elif action.kind == "Place" and held is not None:
                stowed.add(held)
                held = None
        return stowed

    def _held_class(self, req) -> Optional[str]:
        held: Optional[str] = None
        for action, ok in req.action_history:
            if not ok:
                continue
            if action.kind == "Pickup" and isinstance(action.target, str):
                held = action.target
            elif action.kind == "Place":
                held = None
        if held is None:
            return None
        sighting = None
        for s in req.observation.visible:
            if s.instance_id == held:
                sighting = s.class_name
        if sighting:
            return sighting
        # fall back to memory / prefix matching on the instance id
        for s in self._sessions[req.session_id].belief.sightings.values():
            if s.instance_id == held:
                return s.class_name
        return None

    def _is_openable_receptacle(self, class_name: str) -> bool:
        cls = self.registry.get(class_name)
        if cls is None:
            return False
        return cls.has(AffordanceProperty.OPENABLE) and cls.has(AffordanceProperty.RECEPTACLE)

    def _surface(self, class_name: str) -> str:
        cls = self.registry.get(class_name)
        return cls.synonyms[0] if cls else class_name

    def _respond(self, sess, actions: list[Action],
                 dialog: Optional[str] = None) -> InferenceResponse:
        sess.counter += 1
        turn_complete = (not actions) or actions[-1].ends_turn
        resp = InferenceResponse(
            response_id=f"b-{sess.counter:04d}",
            actions=actions,
            dialog=dialog,
            turn_complete=turn_complete,
        )
        validate_response(resp)
        return resp
