"""Egocentric symbolic rendering: instance + depth rasters from a world state.

The model is a pinhole camera over axis-aligned boxes. Each renderable object
projects to a screen rectangle with one scalar depth (camera-forward distance
of its box center). A cell is owned by the minimum (depth, instance id) among
the objects covering it, except that an object never paints over cells also
covered by something it (transitively) contains: contents of an open
receptacle draw in front of their container. Held objects, their contents,
and the contents of closed openable receptacles do not render at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from arena.core.affordances import AffordanceProperty
from arena.core.world import ObjectInstance, WorldState
from arena.errors import CoordinateOutOfBounds

EYE_HEIGHT = 1.0
HORIZONTAL_FOV_DEG = 60.0
PITCH_ANGLE_DEG = 30.0
NEAR_PLANE = 0.1
FAR_PLANE = 10.0
DEFAULT_RASTER = (96, 54)
INTERACTION_RANGE = 1.5

_HEADING_VEC = {
    "N": (0.0, 1.0),
    "E": (1.0, 0.0),
    "S": (0.0, -1.0),
    "W": (-1.0, 0.0),
}
_PITCH_SIGN = {"up": 1.0, "level": 0.0, "down": -1.0}


@dataclass(frozen=True, slots=True)
class VisibleObject:
    instance_id: str
    class_name: str
    cells: int
    bbox: tuple[int, int, int, int]  # x0, y0, x1, y1 inclusive
    depth: float


@dataclass(frozen=True, slots=True)
class Observation:
    width: int
    height: int
    ids: tuple[str, ...]
    raster: np.ndarray        # (h, w) int32, index into ids, -1 empty
    depth: np.ndarray         # (h, w) float32, FAR_PLANE where empty
    visible: tuple[VisibleObject, ...]
    pose_room: str
    pose_viewpoint: str
    pose_heading: str
    pose_pitch: str
    tick: int

    def instance_at(self, x: int, y: int) -> str | None:
        idx = int(self.raster[y, x])
        return None if idx < 0 else self.ids[idx]

    def visible_ids(self) -> frozenset[str]:
        return frozenset(self.ids)

    def find(self, instance_id: str) -> VisibleObject | None:
        for v in self.visible:
            if v.instance_id == instance_id:
                return v
        return None


def camera_basis(heading: str, pitch: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Right, up, forward unit vectors for a pose."""
    hx, hz = _HEADING_VEC[heading]
    a = math.radians(PITCH_ANGLE_DEG) * _PITCH_SIGN[pitch]
    f = np.array([hx * math.cos(a), math.sin(a), hz * math.cos(a)])
    r = np.array([hz, 0.0, -hx])
    u = np.cross(f, r)
    return r, u, f


def is_renderable(state: WorldState, obj: ObjectInstance) -> bool:
    """Whether an object participates in rendering for the current pose."""
    if obj.held:
        return False
    if obj.room != state.agent.room:
        return False
    cur = obj.contained_in
    while cur is not None:
        container = state.objects[cur]
        if container.held:
            return False
        cls = state.cls(container)
        if cls.has(AffordanceProperty.OPENABLE) and not container.states.get("isOpen", False):
            return False
        cur = container.contained_in
    return True


def project_box(
    eye: np.ndarray,
    basis: tuple[np.ndarray, np.ndarray, np.ndarray],
    obj: ObjectInstance,
    width: int,
    height: int,
) -> tuple[int, int, int, int, float] | None:
    """Covered cell range (col0, col1, row0, row1 inclusive) and depth.

    Returns None when the box is behind the near plane, beyond the far
    plane, or projects to no cell.
    """
    r, u, f = basis
    center = np.array(obj.pos)
    depth = float(np.dot(center - eye, f))
    if depth <= NEAR_PLANE or depth > FAR_PLANE:
        return None
    hx, hy, hz = obj.size[0] / 2.0, obj.size[1] / 2.0, obj.size[2] / 2.0
    corners = center + np.array(
        [[sx * hx, sy * hy, sz * hz]
         for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]
    )
    d = corners - eye
    cx = d @ r
    cy = d @ u
    cz = np.maximum(d @ f, NEAR_PLANE + 1e-9)
    fx = (width / 2.0) / math.tan(math.radians(HORIZONTAL_FOV_DEG) / 2.0)
    us = width / 2.0 + fx * cx / cz
    vs = height / 2.0 - fx * cy / cz
    col0 = max(0, math.ceil(float(us.min()) - 0.5))
    col1 = min(width - 1, math.floor(float(us.max()) - 0.5))
    row0 = max(0, math.ceil(float(vs.min()) - 0.5))
    row1 = min(height - 1, math.floor(float(vs.max()) - 0.5))
    if col0 > col1 or row0 > row1:
        return None
    return col0, col1, row0, row1, depth


def render_observation(state: WorldState, width: int = DEFAULT_RASTER[0],
                       height: int = DEFAULT_RASTER[1]) -> Observation:
    """Pure render of the agent's current view; same inputs, identical rasters."""
    if width < 16 or height < 16:
        raise ValueError("raster dimensions must be at least 16")
    vp = state.scene.viewpoints[state.agent.viewpoint]
    eye = np.array([vp.pos[0], EYE_HEIGHT, vp.pos[1]])
    basis = camera_basis(state.agent.heading, state.agent.pitch)

    projected: dict[str, tuple[int, int, int, int, float]] = {}
    for iid in sorted(state.objects):
        obj = state.objects[iid]
        if not is_renderable(state, obj):
            continue
        rect = project_box(eye, basis, obj, width, height)
        if rect is not None:
            projected[iid] = rect

    # Cells covered by an object's own contents are ceded to them.
    subtract: dict[str, list[tuple[int, int, int, int]]] = {iid: [] for iid in projected}
    for iid in projected:
        cur = state.objects[iid].contained_in
        while cur is not None:
            if cur in projected:
                subtract[cur].append(projected[iid][:4])
            cur = state.objects[cur].contained_in

    raster = np.full((height, width), -1, dtype=np.int32)
    depth_r = np.full((height, width), FAR_PLANE, dtype=np.float32)
    order = sorted(projected, key=lambda i: (projected[i][4], i), reverse=True)
    scratch = np.empty((height, width), dtype=bool)
    paint_index = {iid: k for k, iid in enumerate(sorted(projected))}
    for iid in order:
        col0, col1, row0, row1, depth = projected[iid]
        scratch[:] = False
        scratch[row0:row1 + 1, col0:col1 + 1] = True
        for (c0, c1, r0, r1) in subtract[iid]:
            scratch[r0:r1 + 1, c0:c1 + 1] = False
        raster[scratch] = paint_index[iid]
        depth_r[scratch] = depth

    winners = sorted(iid for iid in projected
                     if np.any(raster == paint_index[iid]))
    remap = np.full(len(projected) + 1, -1, dtype=np.int32)
    for new_idx, iid in enumerate(winners):
        remap[paint_index[iid]] = new_idx
    final = np.where(raster >= 0, remap[raster], -1).astype(np.int32)

    visible = []
    for new_idx, iid in enumerate(winners):
        ys, xs = np.nonzero(final == new_idx)
        visible.append(VisibleObject(
            instance_id=iid,
            class_name=state.objects[iid].class_name,
            cells=int(len(xs)),
            bbox=(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())),
            depth=projected[iid][4],
        ))

    final.setflags(write=False)
    depth_r.setflags(write=False)
    return Observation(
        width=width,
        height=height,
        ids=tuple(winners),
        raster=final,
        depth=depth_r,
        visible=tuple(visible),
        pose_room=state.agent.room,
        pose_viewpoint=state.agent.viewpoint,
        pose_heading=state.agent.heading,
        pose_pitch=state.agent.pitch,
        tick=state.tick,
    )


def object_at(obs: Observation, x: int, y: int) -> str | None:
    """Instance id at a raster cell, or None for empty cells."""
    if not (0 <= x < obs.width and 0 <= y < obs.height):
        raise CoordinateOutOfBounds(f"({x}, {y}) outside {obs.width}x{obs.height}")
    return obs.instance_at(x, y)
