"""The HTTP surfaces: orchestrator API, event stream, inference service."""

from __future__ import annotations

import json
import threading
import urllib.error
import urllib.request

import pytest

from arena.baseline import BaselineAgent
from arena.client import HttpInferenceClient, OrchestratorClient
from arena.core import Action, render_observation
from arena.protocol import InferenceRequest, serialize
from arena.server import inference_server, orchestrator_server
from tests.conftest import build_service, load_transcript


@pytest.fixture()
def stack(tmp_path, registry, scenes, catalog):
    """Orchestrator over HTTP with the baseline wired in-process."""
    service = build_service(tmp_path, registry, scenes, catalog)
    server = orchestrator_server(service).start()
    client = OrchestratorClient(server.url)
    yield service, server, client
    server.stop()


@pytest.fixture()
def infer_stack(registry, scenes, lab_scene_graph):
    agent = BaselineAgent(lab_scene_graph, registry)
    server = inference_server(agent.infer).start()
    yield agent, server
    server.stop()


def test_healthz(stack):
    _, server, _ = stack
    with urllib.request.urlopen(f"{server.url}/healthz", timeout=5) as resp:
        assert json.loads(resp.read()) == {"ok": True}


def test_missions_endpoint(stack, catalog):
    _, _, client = stack
    missions = client.missions()
    assert len(missions) == len(catalog)
    assert all("user_briefing" in m for m in missions)


def test_session_lifecycle_over_http(stack):
    service, _, client = stack
    created = client.create_session("heat_soup")
    sid = created["session_id"]
    assert created["mission"]["mission_id"] == "heat_soup"
    assert created["observation"]["width"] == 96

    for text in load_transcript("heat_soup")["utterances"]:
        if client.session(sid)["status"] != "active":
            break
        record = client.utterance(sid, text)
        assert record["turn_index"] >= 0
    assert client.session(sid)["status"] == "mission_complete"

    rated = client.rate(sid, 5, "great")
    assert rated["rating"] == {"score": 5, "comment": "great"}

    log = client.export_log(sid)
    assert log["schema"] == "arena-log/1"
    assert log["recorded_final_hash"]


def test_error_mapping(stack):
    _, server, client = stack
    with pytest.raises(urllib.error.HTTPError) as err:
        client.create_session("nope")
    assert err.value.code == 404
    body = json.loads(err.value.read())
    assert body["error"] == "MissionNotFound"

    created = client.create_session("fill_mug")
    with pytest.raises(urllib.error.HTTPError) as err:
        client.rate(created["session_id"], 9)
    assert err.value.code in (400, 409)

    with pytest.raises(urllib.error.HTTPError) as err:
        client.utterance(created["session_id"], "   ")
    assert err.value.code == 400


def test_event_stream_live(stack):
    _, server, client = stack
    created = client.create_session("heat_soup")
    sid = created["session_id"]

    collected = []
    ready = threading.Event()

    def consume():
        for event in client.events(sid, replay=True, timeout_s=30):
            collected.append(event)
            if event["event"] == "mission_complete":
                break
        ready.set()

    thread = threading.Thread(target=consume, daemon=True)
    thread.start()
    for text in load_transcript("heat_soup")["utterances"]:
        if client.session(sid)["status"] != "active":
            break
        client.utterance(sid, text)
    assert ready.wait(timeout=30), "stream never delivered mission_complete"
    kinds = [e["event"] for e in collected]
    assert kinds[0] == "frame"
    assert "mic_open" in kinds
    assert "turn_ended" in kinds
    assert kinds[-1] == "mission_complete"


def test_event_stream_closes_after_rating(stack):
    _, server, client = stack
    created = client.create_session("fill_mug")
    sid = created["session_id"]
    client.end(sid)
    client.rate(sid, 3)
    events = list(client.events(sid, replay=True, timeout_s=10))
    assert events, "closed stream still replays history"
    assert events[0]["event"] == "frame"


def test_static_console_serving(tmp_path, registry, scenes, catalog):
    static = tmp_path / "static"
    static.mkdir()
    (static / "index.html").write_text("<html><body>console</body></html>")
    (static / "app.js").write_text("console.log('hi')")
    service = build_service(tmp_path, registry, scenes, catalog)
    server = orchestrator_server(service, static_dir=static).start()
    try:
        with urllib.request.urlopen(f"{server.url}/", timeout=5) as resp:
            assert b"console" in resp.read()
            assert resp.headers["Content-Type"] == "text/html"
        with urllib.request.urlopen(f"{server.url}/app.js", timeout=5) as resp:
            assert resp.headers["Content-Type"] == "text/javascript"
        with pytest.raises(urllib.error.HTTPError):
            urllib.request.urlopen(f"{server.url}/../secrets", timeout=5)
    finally:
        server.stop()


# -- inference service ---------------------------------------------------------------

def test_infer_service_round_trip(infer_stack, lab_world):
    _, server = infer_stack
    client = HttpInferenceClient(server.url)
    assert client.healthy()
    obs = render_observation(lab_world, 96, 54)
    request = InferenceRequest(
        session_id="http-1",
        turn_index=0,
        utterance="pick up the spanner",
        observation=obs,
        dialog_history=[("user", "pick up the spanner")],
    )
    response = client.infer(request, deadline_ms=5000)
    assert response.actions
    assert response.actions[-1].kind == "Pickup"


def test_infer_service_rejects_garbage(infer_stack):
    _, server = infer_stack
    req = urllib.request.Request(
        f"{server.url}/infer", data=b"{not json",
        headers={"Content-Type": "application/json"}, method="POST",
    )
    with pytest.raises(urllib.error.HTTPError) as err:
        urllib.request.urlopen(req, timeout=5)
    assert err.value.code == 400


def test_infer_service_rejects_response_payload(infer_stack):
    from arena.protocol import InferenceResponse
    _, server = infer_stack
    payload = serialize(InferenceResponse(response_id="r", actions=[],
                                          turn_complete=True))
    req = urllib.request.Request(
        f"{server.url}/infer", data=payload,
        headers={"Content-Type": "application/json"}, method="POST",
    )
    with pytest.raises(urllib.error.HTTPError) as err:
        urllib.request.urlopen(req, timeout=5)
    assert err.value.code == 400


def test_orchestrator_with_remote_inference(tmp_path, registry, scenes, catalog,
                                            lab_scene_graph):
    """Full wire: orchestrator -> HTTP inference service -> simulator."""
    agent = BaselineAgent(lab_scene_graph, registry)
    inf_server = inference_server(agent.infer).start()
    try:
        service = build_service(tmp_path, registry, scenes, catalog,
                                inference=HttpInferenceClient(inf_server.url))
        session, _ = service.create_session("disinfect_dish")
        for text in load_transcript("disinfect_dish")["utterances"]:
            service.handle_utterance(session.session_id, text)
        assert service._get(session.session_id).status == "mission_complete"
    finally:
        inf_server.stop()
