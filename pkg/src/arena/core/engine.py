"""Action application: navigation, affordance-gated interactions, failures.

`apply_action` is a pure transition: it never mutates its input and always
returns a fresh state whose tick advanced by one, failed attempts included.
"""

from __future__ import annotations

from collections import deque
from dataclasses import replace
from typing import Optional

from arena.core.actions import Action, ActionResult, FailureCode, StateDelta, DeltaEntry
from arena.core.affordances import (
    AffordanceProperty,
    KNIFE_MARKER,
    VERB_LICENSE,
)
from arena.core.render import (
    DEFAULT_RASTER,
    INTERACTION_RANGE,
    Observation,
    render_observation,
)
from arena.core.world import AgentPose, ObjectInstance, WorldState

_LEFT = {"N": "W", "W": "S", "S": "E", "E": "N"}
_RIGHT = {"N": "E", "E": "S", "S": "W", "W": "N"}
_HEADING_VEC = {"N": (0.0, 1.0), "E": (1.0, 0.0), "S": (0.0, -1.0), "W": (-1.0, 0.0)}


def apply_action(
    state: WorldState,
    action: Action,
    raster: tuple[int, int] = DEFAULT_RASTER,
    render_frames: bool = True,
) -> tuple[WorldState, ActionResult]:
    """Apply one action, returning (new state, result).

    Coordinate targets resolve against the observation of `state` rendered at
    `raster` dimensions, i.e. the view the actor just saw. With
    `render_frames` false the result's frames list is empty (cheaper for bulk
    replay); the state transition is identical either way.
    """
    outcome = _dispatch(state, action, raster)
    if isinstance(outcome, FailureCode):
        post = replace(state, tick=state.tick + 1)
        frames = [render_observation(post, *raster)] if render_frames else []
        return post, ActionResult(ok=False, failure_code=outcome, frames=frames)

    post, delta, hop_poses = outcome
    post = replace(post, tick=state.tick + 1)
    frames: list[Observation] = []
    if render_frames:
        for pose in hop_poses:
            frames.append(render_observation(replace(post, agent=pose), *raster))
        frames.append(render_observation(post, *raster))
    return post, ActionResult(ok=True, state_delta=delta, frames=frames)


_Success = tuple[WorldState, StateDelta, list[AgentPose]]


def _dispatch(state, action, raster) -> _Success | FailureCode:
    kind = action.kind
    if kind == "Stop" or kind == "Dialog":
        return state, StateDelta(), []
    if kind == "Highlight":
        resolved = _resolve_target(state, action, raster)
        if isinstance(resolved, FailureCode):
            return resolved
        return state, StateDelta(), []
    if action.is_navigation:
        return _navigate(state, action)
    return _interact(state, action, raster)


# -- navigation ---------------------------------------------------------------

def _navigate(state, action) -> _Success | FailureCode:
    agent = state.agent
    kind = action.kind
    if kind == "RotateLeft":
        return replace(state, agent=replace(agent, heading=_LEFT[agent.heading])), StateDelta(), []
    if kind == "RotateRight":
        return replace(state, agent=replace(agent, heading=_RIGHT[agent.heading])), StateDelta(), []
    if kind == "LookUp":
        nxt = {"down": "level", "level": "up"}.get(agent.pitch)
        if nxt is None:
            return FailureCode.NAVIGATION_BLOCKED
        return replace(state, agent=replace(agent, pitch=nxt)), StateDelta(), []
    if kind == "LookDown":
        nxt = {"up": "level", "level": "down"}.get(agent.pitch)
        if nxt is None:
            return FailureCode.NAVIGATION_BLOCKED
        return replace(state, agent=replace(agent, pitch=nxt)), StateDelta(), []
    if kind in ("MoveForward", "MoveBackward"):
        sign = 1.0 if kind == "MoveForward" else -1.0
        hx, hz = _HEADING_VEC[agent.heading]
        nxt = _step_neighbor(state.scene, agent.viewpoint, (sign * hx, sign * hz))
        if nxt is None:
            return FailureCode.NAVIGATION_BLOCKED
        vp = state.scene.viewpoints[nxt]
        return replace(state, agent=replace(agent, viewpoint=nxt, room=vp.room)), StateDelta(), []
    if kind == "GotoViewpoint":
        goal = action.viewpoint
        if goal is None or goal not in state.scene.viewpoints:
            return FailureCode.TARGET_NOT_RESOLVABLE
        path = shortest_path(state.scene, agent.viewpoint, lambda v: v == goal)
        if path is None:
            return FailureCode.NAVIGATION_BLOCKED
        return _walk(state, path)
    if kind == "GotoRoom":
        goal = action.room
        if goal is None or goal not in state.scene.rooms:
            return FailureCode.TARGET_NOT_RESOLVABLE
        if agent.room == goal:
            return state, StateDelta(), []
        path = shortest_path(state.scene, agent.viewpoint,
                             lambda v: state.scene.viewpoints[v].room == goal)
        if path is None:
            return FailureCode.NAVIGATION_BLOCKED
        return _walk(state, path)
    raise AssertionError(f"unhandled navigation {kind!r}")


def _step_neighbor(scene, viewpoint: str, direction: tuple[float, float]) -> Optional[str]:
    """Neighbor along the dominant `direction`, if any; ties prefer closer id."""
    cur = scene.viewpoints[viewpoint].pos
    best: tuple[float, str] | None = None
    for nbr in scene.adjacency.get(viewpoint, ()):
        pos = scene.viewpoints[nbr].pos
        dx, dz = pos[0] - cur[0], pos[1] - cur[1]
        dot = dx * direction[0] + dz * direction[1]
        cross = dx * direction[1] - dz * direction[0]
        if dot > 0 and dot >= abs(cross):
            key = (-dot, nbr)
            if best is None or key < best:
                best = key
    return best[1] if best else None


def shortest_path(scene, start: str, is_goal) -> Optional[list[str]]:
    """Deterministic BFS over the viewpoint graph (public deployment data)."""
    if is_goal(start):
        return [start]
    parent: dict[str, str] = {start: start}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for nbr in scene.adjacency.get(cur, ()):
            if nbr in parent:
                continue
            parent[nbr] = cur
            if is_goal(nbr):
                path = [nbr]
                while path[-1] != start:
                    path.append(parent[path[-1]])
                return list(reversed(path))
            queue.append(nbr)
    return None


def _hop_heading(frm: tuple[float, float], to: tuple[float, float], fallback: str) -> str:
    dx, dz = to[0] - frm[0], to[1] - frm[1]
    if dx == 0 and dz == 0:
        return fallback
    if abs(dx) >= abs(dz):
        return "E" if dx > 0 else "W"
    return "N" if dz > 0 else "S"


def _walk(state, path: list[str]) -> _Success:
    """Traverse a viewpoint path; one frame pose per intermediate hop."""
    agent = state.agent
    poses: list[AgentPose] = []
    heading = agent.heading
    for prev, nxt in zip(path, path[1:]):
        heading = _hop_heading(state.scene.viewpoints[prev].pos,
                               state.scene.viewpoints[nxt].pos, heading)
        vp = state.scene.viewpoints[nxt]
        poses.append(AgentPose(room=vp.room, viewpoint=nxt,
                               heading=heading, pitch=agent.pitch))
    final = poses.pop() if poses else replace(agent)
    return replace(state, agent=final), StateDelta(), poses


# -- interactions -------------------------------------------------------------

def _subtree(state, root: str) -> list[str]:
    """Instance ids transitively contained in `root` (root excluded)."""
    out: list[str] = []
    frontier = [root]
    while frontier:
        cur = frontier.pop()
        for obj in state.objects.values():
            if obj.contained_in == cur:
                out.append(obj.instance_id)
                frontier.append(obj.instance_id)
    return out


def _resolve_target(state, action, raster) -> str | FailureCode:
    target = action.target
    if target is None:
        return FailureCode.TARGET_NOT_RESOLVABLE
    if isinstance(target, str):
        if target not in state.objects:
            return FailureCode.TARGET_NOT_RESOLVABLE
        return target
    x, y = target
    obs = render_observation(state, *raster)
    if not (0 <= x < obs.width and 0 <= y < obs.height):
        return FailureCode.TARGET_NOT_RESOLVABLE
    iid = obs.instance_at(x, y)
    return iid if iid is not None else FailureCode.TARGET_NOT_RESOLVABLE


def _interact(state, action, raster) -> _Success | FailureCode:
    verb = action.kind
    resolved = _resolve_target(state, action, raster)
    if isinstance(resolved, FailureCode):
        return resolved
    target = state.objects[resolved]
    cls = state.cls(target)

    if verb == "Slice":
        licensed = cls.sliceable
    elif verb == "Clean":  # doubles as the disinfectant
        licensed = (cls.has(AffordanceProperty.DIRTYABLE)
                    or cls.has(AffordanceProperty.INFECTABLE))
    else:
        licensed = cls.has(VERB_LICENSE[verb])
    if not licensed:
        if cls.has(AffordanceProperty.DECOR):
            return FailureCode.DECOR_TARGET
        return FailureCode.ACTION_NOT_APPLICABLE

    held = state.held_instance()
    if verb == "Pickup" and held is not None:
        return FailureCode.HAND_OCCUPIED
    if verb in ("Place", "Slice") and held is None:
        return FailureCode.HAND_EMPTY
    if verb == "Slice" and KNIFE_MARKER not in state.cls(held).markers:
        return FailureCode.ACTION_NOT_APPLICABLE

    obs = render_observation(state, *raster)
    seen = obs.find(resolved)
    if seen is None or seen.depth > INTERACTION_RANGE:
        return FailureCode.TARGET_NOT_VISIBLE

    return _apply_verb(state, verb, target, held)


def _apply_verb(state, verb, target: ObjectInstance, held) -> _Success | FailureCode:
    iid = target.instance_id

    if verb == "Pickup":
        entries: set[DeltaEntry] = {(iid, "held", False, True)}
        obj = replace(target, held=True)
        if target.contained_in is not None:
            entries.add((iid, "contained_in", target.contained_in, None))
            obj = replace(obj, contained_in=None)
        return state.with_object(obj), StateDelta(frozenset(entries)), []

    if verb == "Place":
        cls = state.cls(target)
        if cls.has(AffordanceProperty.OPENABLE) and not target.states.get("isOpen", False):
            return FailureCode.RECEPTACLE_CLOSED
        item = replace(held, held=False, contained_in=iid, room=target.room, pos=target.pos)
        entries = {
            (held.instance_id, "held", True, False),
            (held.instance_id, "contained_in", None, iid),
        }
        post = state.with_object(item)
        # Anything riding inside the placed item moves rooms with it.
        for carried in _subtree(state, held.instance_id):
            post = post.with_object(replace(post.objects[carried],
                                            room=target.room, pos=target.pos))
        return post, StateDelta(frozenset(entries)), []

    # Remaining verbs flip state keys on the target.
    changes: list[tuple[str, object, object]] = []
    states = target.states

    def flip(key: str, want: object):
        cur = states.get(key)
        if cur != want:
            changes.append((key, cur, want))

    if verb == "Open":
        flip("isOpen", True)
    elif verb == "Close":
        flip("isOpen", False)
    elif verb == "ToggleOn":
        cls = state.cls(target)
        if cls.has(AffordanceProperty.POWERABLE) and not states.get("isPowered", False):
            return FailureCode.ACTION_NOT_APPLICABLE
        flip("isToggledOn", True)
    elif verb == "ToggleOff":
        flip("isToggledOn", False)
    elif verb == "Power":
        flip("isPowered", not states.get("isPowered", False))
    elif verb == "Break":
        flip("isBroken", True)
    elif verb == "Heat":
        flip("isHeated", True)
        if states.get("isChilled"):
            changes.append(("isChilled", True, False))
    elif verb == "Chill":
        flip("isChilled", True)
        if states.get("isHeated"):
            changes.append(("isHeated", True, False))
    elif verb == "Fill":
        flip("isFilled", True)
    elif verb == "Pour":
        flip("isFilled", False)
    elif verb == "Clean":
        if states.get("isDirty"):
            changes.append(("isDirty", True, False))
        if states.get("isInfected"):
            changes.append(("isInfected", True, False))
    elif verb == "Cook":
        flip("isCooked", True)
    elif verb == "Eat":
        flip("isEaten", True)
    elif verb == "Slice":
        flip("isSliced", True)
    else:
        raise AssertionError(f"unhandled verb {verb!r}")

    if verb == "Heat" and not any(k == "isHeated" for k, _, _ in changes):
        return FailureCode.ACTION_NOT_APPLICABLE
    if verb == "Chill" and not any(k == "isChilled" for k, _, _ in changes):
        return FailureCode.ACTION_NOT_APPLICABLE
    if not changes:
        return FailureCode.ACTION_NOT_APPLICABLE

    new_states = dict(states)
    entries = set()
    for key, old, new in changes:
        new_states[key] = new
        entries.add((iid, key, old, new))
    return (
        state.with_object(replace(target, states=new_states)),
        StateDelta(frozenset(entries)),
        [],
    )
