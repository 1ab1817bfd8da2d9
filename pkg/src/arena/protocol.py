"""Wire contract between the orchestrator and action-inference services.

Payloads are UTF-8 JSON tagged with `"schema": "simbot-infer/1"` and a
`"type"` discriminator. Unknown fields are ignored for forward compatibility.

Response validity: a response either keeps acting or ends the turn.
  - actions non-empty: the `dialog` field must be absent, and turn_complete
    must equal "the last action is Stop or Dialog" (those verbs end a turn).
  - actions empty: turn_complete must be true; `dialog` optionally carries
    final speech.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from arena.core.actions import Action, action_from_doc, action_to_doc
from arena.core.render import FAR_PLANE, Observation, VisibleObject
from arena.errors import MalformedPayload, SchemaVersionUnsupported, SchemaError

WIRE_SCHEMA = "simbot-infer/1"
MAX_ACTIONS_PER_RESPONSE = 10


# -- observation codec ----------------------------------------------------------

def observation_to_doc(obs: Observation) -> dict:
    """Compact encoding: visible-object table plus run-length encoded raster.

    Depth is uniform per object mask, so the depth raster is reconstructible
    from the table; empty cells sit at the far plane.
    """
    runs: list[list[int]] = []
    flat = np.asarray(obs.raster).ravel()
    if flat.size:
        prev = int(flat[0])
        count = 1
        for v in flat[1:]:
            v = int(v)
            if v == prev:
                count += 1
            else:
                runs.append([count, prev])
                prev = v
                count = 1
        runs.append([count, prev])
    return {
        "width": obs.width,
        "height": obs.height,
        "tick": obs.tick,
        "pose": {
            "room": obs.pose_room,
            "viewpoint": obs.pose_viewpoint,
            "heading": obs.pose_heading,
            "pitch": obs.pose_pitch,
        },
        "visible": [
            {
                "id": v.instance_id,
                "class": v.class_name,
                "cells": v.cells,
                "bbox": list(v.bbox),
                "depth": round(v.depth, 6),
            }
            for v in obs.visible
        ],
        "raster_rle": runs,
    }


def observation_from_doc(doc: dict) -> Observation:
    width, height = int(doc["width"]), int(doc["height"])
    visible = tuple(
        VisibleObject(
            instance_id=v["id"],
            class_name=v.get("class", ""),
            cells=int(v["cells"]),
            bbox=tuple(int(b) for b in v["bbox"]),
            depth=float(v["depth"]),
        )
        for v in doc.get("visible", [])
    )
    flat = np.full(width * height, -1, dtype=np.int32)
    pos = 0
    for count, value in doc.get("raster_rle", []):
        flat[pos:pos + count] = value
        pos += count
    if pos != width * height:
        raise MalformedPayload("raster run lengths do not cover the frame")
    raster = flat.reshape(height, width)
    depth = np.full((height, width), FAR_PLANE, dtype=np.float32)
    for idx, v in enumerate(visible):
        depth[raster == idx] = v.depth
    raster.setflags(write=False)
    depth.setflags(write=False)
    pose = doc.get("pose", {})
    return Observation(
        width=width,
        height=height,
        ids=tuple(v.instance_id for v in visible),
        raster=raster,
        depth=depth,
        visible=visible,
        pose_room=pose.get("room", ""),
        pose_viewpoint=pose.get("viewpoint", ""),
        pose_heading=pose.get("heading", "N"),
        pose_pitch=pose.get("pitch", "level"),
        tick=int(doc.get("tick", 0)),
    )


# -- request / response ---------------------------------------------------------

Speaker = str  # "user" | "robot" (online) or "commander" | "follower" (offline)


@dataclass(slots=True)
class InferenceRequest:
    session_id: str
    turn_index: int
    utterance: str
    observation: Observation
    dialog_history: list[tuple[Speaker, str]] = field(default_factory=list)
    action_history: list[tuple[Action, bool]] = field(default_factory=list)
    previous_response_id: Optional[str] = None
    alternatives: list[str] = field(default_factory=list)  # n-best hypotheses
    mode: str = "online"  # "online" | "edh"

    def to_doc(self) -> dict:
        return {
            "schema": WIRE_SCHEMA,
            "type": "request",
            "session_id": self.session_id,
            "turn_index": self.turn_index,
            "utterance": self.utterance,
            "observation": observation_to_doc(self.observation),
            "dialog_history": [[s, t] for s, t in self.dialog_history],
            "action_history": [[action_to_doc(a), ok] for a, ok in self.action_history],
            "previous_response_id": self.previous_response_id,
            "alternatives": list(self.alternatives),
            "mode": self.mode,
        }

    def digest(self) -> str:
        payload = json.dumps(self.to_doc(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass(slots=True)
class InferenceResponse:
    response_id: str
    actions: list[Action] = field(default_factory=list)
    dialog: Optional[str] = None
    turn_complete: bool = False

    def to_doc(self) -> dict:
        return {
            "schema": WIRE_SCHEMA,
            "type": "response",
            "response_id": self.response_id,
            "actions": [action_to_doc(a) for a in self.actions],
            "dialog": self.dialog,
            "turn_complete": self.turn_complete,
        }


def validate_response(resp: InferenceResponse):
    if len(resp.actions) > MAX_ACTIONS_PER_RESPONSE:
        raise MalformedPayload(
            f"response carries {len(resp.actions)} actions (max {MAX_ACTIONS_PER_RESPONSE})"
        )
    if resp.actions:
        if resp.dialog is not None:
            raise MalformedPayload("dialog field requires an empty action list")
        ends = resp.actions[-1].ends_turn
        if any(a.ends_turn for a in resp.actions[:-1]):
            raise MalformedPayload("turn-ending action before the end of the batch")
        if resp.turn_complete != ends:
            raise MalformedPayload(
                "turn_complete must mirror a trailing Stop/Dialog action"
            )
    else:
        if not resp.turn_complete:
            raise MalformedPayload("empty action list requires turn_complete")


def parse_wire(payload: bytes | str) -> Union[InferenceRequest, InferenceResponse]:
    """Parse either wire message; schema-validated, unknown fields ignored."""
    if isinstance(payload, bytes):
        try:
            payload = payload.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedPayload(f"payload is not UTF-8: {exc}") from exc
    try:
        doc = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise MalformedPayload(f"payload is not JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedPayload("payload must be a JSON object")
    schema = doc.get("schema")
    if schema != WIRE_SCHEMA:
        raise SchemaVersionUnsupported(f"unsupported schema {schema!r}")
    kind = doc.get("type")
    if kind == "request":
        return _request_from_doc(doc)
    if kind == "response":
        return _response_from_doc(doc)
    raise MalformedPayload(f"unknown message type {kind!r}")


def _request_from_doc(doc: dict) -> InferenceRequest:
    try:
        utterance = doc["utterance"]
        if not isinstance(utterance, str) or not utterance:
            raise MalformedPayload("utterance must be a non-empty string")
        return InferenceRequest(
            session_id=str(doc["session_id"]),
            turn_index=int(doc["turn_index"]),
            utterance=utterance,
            observation=observation_from_doc(doc["observation"]),
            dialog_history=[(s, t) for s, t in doc.get("dialog_history", [])],
            action_history=[
                (action_from_doc(a), bool(ok))
                for a, ok in doc.get("action_history", [])
            ],
            previous_response_id=doc.get("previous_response_id"),
            alternatives=[str(a) for a in doc.get("alternatives", [])],
            mode=doc.get("mode", "online"),
        )
    except MalformedPayload:
        raise
    except (KeyError, TypeError, ValueError, SchemaError) as exc:
        raise MalformedPayload(f"bad request: {exc}") from exc


def _response_from_doc(doc: dict) -> InferenceResponse:
    try:
        resp = InferenceResponse(
            response_id=str(doc["response_id"]),
            actions=[action_from_doc(a) for a in doc.get("actions", [])],
            dialog=doc.get("dialog"),
            turn_complete=bool(doc.get("turn_complete", False)),
        )
    except (KeyError, TypeError, ValueError, SchemaError) as exc:
        raise MalformedPayload(f"bad response: {exc}") from exc
    validate_response(resp)
    return resp


def serialize(msg: Union[InferenceRequest, InferenceResponse]) -> bytes:
    return json.dumps(msg.to_doc(), sort_keys=True).encode("utf-8")
