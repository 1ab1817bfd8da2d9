"""Wire protocol: parsing, validity rules, and the observation codec."""

from __future__ import annotations

import json

import numpy as np
import pytest

from arena.core import Action, render_observation
from arena.errors import MalformedPayload, SchemaVersionUnsupported
from arena.protocol import (
    InferenceRequest,
    InferenceResponse,
    observation_from_doc,
    observation_to_doc,
    parse_wire,
    serialize,
    validate_response,
)


@pytest.fixture()
def request_fixture(lab_world):
    obs = render_observation(lab_world, 96, 54)
    return InferenceRequest(
        session_id="s-1",
        turn_index=0,
        utterance="pick up the mug",
        observation=obs,
        dialog_history=[("user", "pick up the mug")],
        action_history=[(Action("RotateLeft"), True)],
        previous_response_id=None,
    )


def test_request_round_trip(request_fixture):
    wire = serialize(request_fixture)
    parsed = parse_wire(wire)
    assert isinstance(parsed, InferenceRequest)
    # canonical round trip modulo key order
    assert json.loads(serialize(parsed)) == json.loads(wire)


def test_response_round_trip():
    resp = InferenceResponse(
        response_id="r-1",
        actions=[Action("GotoViewpoint", viewpoint="v1"),
                 Action("Pickup", target="mug_1")],
        turn_complete=False,
    )
    parsed = parse_wire(serialize(resp))
    assert isinstance(parsed, InferenceResponse)
    assert json.loads(serialize(parsed)) == json.loads(serialize(resp))


def test_unknown_fields_ignored(request_fixture):
    doc = request_fixture.to_doc()
    doc["experimental_field"] = {"nested": True}
    parsed = parse_wire(json.dumps(doc))
    assert isinstance(parsed, InferenceRequest)


def test_actions_with_dialog_field_rejected():
    doc = {
        "schema": "simbot-infer/1", "type": "response", "response_id": "r",
        "actions": [{"type": "Pickup", "target": {"instance": "mug_1"}}],
        "dialog": "done", "turn_complete": True,
    }
    with pytest.raises(MalformedPayload):
        parse_wire(json.dumps(doc))


def test_turn_complete_must_mirror_trailing_stop():
    base = {"schema": "simbot-infer/1", "type": "response", "response_id": "r"}
    # acting batch claiming completion
    doc = dict(base, actions=[{"type": "MoveForward"}], turn_complete=True)
    with pytest.raises(MalformedPayload):
        parse_wire(json.dumps(doc))
    # trailing Stop without completion
    doc = dict(base, actions=[{"type": "MoveForward"}, {"type": "Stop"}],
               turn_complete=False)
    with pytest.raises(MalformedPayload):
        parse_wire(json.dumps(doc))
    # the consistent forms pass
    parse_wire(json.dumps(dict(base, actions=[{"type": "MoveForward"}],
                               turn_complete=False)))
    parse_wire(json.dumps(dict(base, actions=[{"type": "Stop"}],
                               turn_complete=True)))


def test_empty_actions_require_turn_complete():
    doc = {"schema": "simbot-infer/1", "type": "response", "response_id": "r",
           "actions": [], "turn_complete": False}
    with pytest.raises(MalformedPayload):
        parse_wire(json.dumps(doc))


def test_stop_mid_batch_rejected():
    doc = {"schema": "simbot-infer/1", "type": "response", "response_id": "r",
           "actions": [{"type": "Stop"}, {"type": "MoveForward"}],
           "turn_complete": True}
    with pytest.raises(MalformedPayload):
        parse_wire(json.dumps(doc))


def test_highlight_plus_dialog_action_is_valid():
    resp = InferenceResponse(
        response_id="r",
        actions=[Action("Highlight", target="mug_1"),
                 Action("Dialog", text="Which one do you mean?")],
        turn_complete=True,
    )
    validate_response(resp)
    parsed = parse_wire(serialize(resp))
    assert parsed.turn_complete


def test_truncated_payload(request_fixture):
    wire = serialize(request_fixture)
    with pytest.raises(MalformedPayload):
        parse_wire(wire[: len(wire) // 2])


def test_non_utf8_payload():
    with pytest.raises(MalformedPayload):
        parse_wire(b"\xff\xfe\x00bad")


def test_unsupported_schema(request_fixture):
    doc = request_fixture.to_doc()
    doc["schema"] = "simbot-infer/99"
    with pytest.raises(SchemaVersionUnsupported):
        parse_wire(json.dumps(doc))


def test_empty_utterance_rejected(request_fixture):
    doc = request_fixture.to_doc()
    doc["utterance"] = ""
    with pytest.raises(MalformedPayload):
        parse_wire(json.dumps(doc))


def test_action_cap():
    actions = [Action("MoveForward")] * 11
    resp = InferenceResponse(response_id="r", actions=actions, turn_complete=False)
    with pytest.raises(MalformedPayload):
        validate_response(resp)


def test_observation_codec_round_trip(lab_world):
    obs = render_observation(lab_world, 96, 54)
    doc = observation_to_doc(obs)
    back = observation_from_doc(doc)
    assert back.width == obs.width and back.height == obs.height
    assert back.ids == obs.ids
    assert (np.asarray(back.raster) == np.asarray(obs.raster)).all()
    # depth is uniform per mask, so it reconstructs exactly up to rounding
    assert np.allclose(np.asarray(back.depth), np.asarray(obs.depth), atol=1e-5)
    assert back.pose_viewpoint == obs.pose_viewpoint
    assert [v.instance_id for v in back.visible] == [v.instance_id for v in obs.visible]


def test_observation_codec_rejects_bad_rle(lab_world):
    obs = render_observation(lab_world, 32, 18)
    doc = observation_to_doc(obs)
    doc["raster_rle"] = doc["raster_rle"][:-1]  # drop a run
    with pytest.raises(MalformedPayload):
        observation_from_doc(doc)


def test_request_digest_stable(request_fixture):
    assert request_fixture.digest() == request_fixture.digest()
    other = parse_wire(serialize(request_fixture))
    assert other.digest() == request_fixture.digest()
