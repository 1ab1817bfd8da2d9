"""Session lifecycle, the turn loop, budgets, events, rating, persistence."""

from __future__ import annotations

import threading
import time

import pytest

from arena.core import Action, state_hash
from arena.edh import SessionLog, replay
from arena.errors import (
    CapacityExceeded,
    InferenceTimeout,
    MissionNotFound,
    RatingAlreadySubmitted,
    ScoreOutOfRange,
    SessionActive,
    SessionNotActive,
    SessionNotFound,
    SessionNotRatable,
    TurnInFlight,
)
from arena.metrics import RecordStore
from arena.orchestrator import (
    IDLE_TIMEOUT_S,
    InferenceClient,
    SessionService,
    SessionStore,
    TIMEOUT_DIALOG,
    TurnLimits,
)
from arena.protocol import InferenceResponse
from tests.conftest import FixedClock, build_service, load_transcript


class ScriptedClient(InferenceClient):
    """Returns pre-baked responses; handy for budget and event tests."""

    def __init__(self, batches):
        self.batches = list(batches)
        self.calls = 0

    def infer(self, request, deadline_ms):
        batch = self.batches[min(self.calls, len(self.batches) - 1)]
        self.calls += 1
        if isinstance(batch, Exception):
            raise batch
        actions, complete, dialog = batch
        return InferenceResponse(
            response_id=f"scripted-{self.calls}",
            actions=list(actions),
            dialog=dialog,
            turn_complete=complete,
        )


def final_response(dialog=None):
    return ([], True, dialog)


# -- lifecycle ------------------------------------------------------------------

def test_create_session(tmp_path, registry, scenes, catalog):
    service = build_service(tmp_path, registry, scenes, catalog)
    session, obs = service.create_session("fill_mug")
    assert session.status == "active"
    assert session.turns == []
    assert obs.tick == 0


def test_unknown_mission(tmp_path, registry, scenes, catalog):
    service = build_service(tmp_path, registry, scenes, catalog)
    with pytest.raises(MissionNotFound):
        service.create_session("mow_the_lawn")


def test_two_sessions_are_independent(tmp_path, registry, scenes, catalog):
    service = build_service(tmp_path, registry, scenes, catalog)
    a, _ = service.create_session("fill_mug")
    b, _ = service.create_session("fill_mug")
    assert a.session_id != b.session_id
    assert state_hash(a.world) == state_hash(b.world)
    service.handle_utterance(a.session_id, "go to the break room")
    assert state_hash(a.world) != state_hash(b.world)


def test_capacity(tmp_path, registry, scenes, catalog):
    service = build_service(tmp_path, registry, scenes, catalog, max_sessions=2)
    service.create_session("fill_mug")
    service.create_session("fill_mug")
    with pytest.raises(CapacityExceeded):
        service.create_session("fill_mug")


def test_utterance_unknown_session(tmp_path, registry, scenes, catalog):
    service = build_service(tmp_path, registry, scenes, catalog)
    with pytest.raises(SessionNotFound):
        service.handle_utterance("ghost", "hello")


# -- the loop ---------------------------------------------------------------------

def test_event_order_for_a_turn(tmp_path, registry, scenes, catalog):
    client = ScriptedClient([
        ([Action("RotateLeft"), Action("MoveForward"), Action("RotateRight")],
         False, None),
        final_response(),
    ])
    service = build_service(tmp_path, registry, scenes, catalog, inference=client)
    session, _ = service.create_session("fill_mug")
    record = service.handle_utterance(session.session_id, "wiggle")
    events = service._events[session.session_id].snapshot()
    kinds = [e["event"] for e in events]
    # creation frame + mic, then one frame per executed action, then closure
    assert kinds[0] == "frame" and kinds[1] == "mic_open"
    frames_in_turn = [k for k in kinds[2:] if k == "frame"]
    assert len(frames_in_turn) == 3
    assert kinds[-2:] == ["turn_ended", "mic_open"]
    assert len(record["executed"]) == 3


def test_frames_match_action_results(tmp_path, registry, scenes, catalog):
    client = ScriptedClient([
        ([Action("GotoViewpoint", viewpoint="lab_23")], False, None),
        final_response(),
    ])
    service = build_service(tmp_path, registry, scenes, catalog, inference=client)
    session, _ = service.create_session("fill_mug")
    service.handle_utterance(session.session_id, "go")
    events = service._events[session.session_id].snapshot()
    frames = [e for e in events[2:] if e["event"] == "frame"]
    # multi-hop navigation streams one frame per hop
    assert len(frames) >= 1


def test_stop_truncates_batch(tmp_path, registry, scenes, catalog):
    client = ScriptedClient([
        ([Action("RotateLeft"), Action("Stop")], True, None),
    ])
    service = build_service(tmp_path, registry, scenes, catalog, inference=client)
    session, _ = service.create_session("fill_mug")
    record = service.handle_utterance(session.session_id, "never mind")
    assert [e["action"]["type"] for e in record["executed"]] == ["RotateLeft"]


def test_action_budget_enforced(tmp_path, registry, scenes, catalog):
    limits = TurnLimits(max_actions_per_turn=7, max_failures_per_turn=50,
                        inference_deadline_ms=1000,
                        max_inference_rounds_per_turn=50)
    client = ScriptedClient([
        ([Action("RotateLeft")] * 5, False, None),
        ([Action("RotateLeft")] * 5, False, None),
        ([Action("RotateLeft")] * 5, False, None),
        final_response(),
    ])
    service = build_service(tmp_path, registry, scenes, catalog,
                            inference=client, limits=limits)
    session, _ = service.create_session("fill_mug")
    record = service.handle_utterance(session.session_id, "spin")
    assert len(record["executed"]) == 7
    sess = service._get(session.session_id)
    assert sess.status == "active", "budget breach ends the turn, not the session"


def test_failure_budget_enforced(tmp_path, registry, scenes, catalog):
    limits = TurnLimits(max_actions_per_turn=100, max_failures_per_turn=3,
                        inference_deadline_ms=1000,
                        max_inference_rounds_per_turn=50)
    bad = Action("Pickup", target="no_such_thing")
    client = ScriptedClient([
        ([bad] * 9, False, None),
        final_response(),
    ])
    service = build_service(tmp_path, registry, scenes, catalog,
                            inference=client, limits=limits)
    session, _ = service.create_session("fill_mug")
    record = service.handle_utterance(session.session_id, "grab it")
    failures = [e for e in record["executed"] if not e["ok"]]
    assert len(failures) == 3
    assert len(record["executed"]) == 3


def test_round_cap_ends_turn(tmp_path, registry, scenes, catalog):
    limits = TurnLimits(max_inference_rounds_per_turn=2)
    client = ScriptedClient([
        ([Action("RotateLeft")], False, None),
    ] * 10)
    service = build_service(tmp_path, registry, scenes, catalog,
                            inference=client, limits=limits)
    session, _ = service.create_session("fill_mug")
    record = service.handle_utterance(session.session_id, "loop forever")
    assert len(record["roundtrips"]) == 2
    assert service._get(session.session_id).status == "active"


def test_inference_timeout_ends_turn(tmp_path, registry, scenes, catalog):
    client = ScriptedClient([InferenceTimeout("deadline")])
    service = build_service(tmp_path, registry, scenes, catalog, inference=client)
    session, _ = service.create_session("fill_mug")
    record = service.handle_utterance(session.session_id, "hello")
    assert record["robot_dialog"] == TIMEOUT_DIALOG
    assert service._get(session.session_id).status == "active"
    events = service._events[session.session_id].snapshot()
    assert any(e["event"] == "robot_dialog" and e["text"] == TIMEOUT_DIALOG
               for e in events)


def test_turn_in_flight(tmp_path, registry, scenes, catalog):
    barrier = threading.Barrier(2)

    class SlowClient(InferenceClient):
        first = True

        def infer(self, request, deadline_ms):
            if SlowClient.first:
                SlowClient.first = False
                barrier.wait(timeout=5)
                time.sleep(0.3)
            return InferenceResponse(response_id="slow", actions=[],
                                     dialog=None, turn_complete=True)

    service = build_service(tmp_path, registry, scenes, catalog,
                            inference=SlowClient())
    session, _ = service.create_session("fill_mug")
    errors = []

    def first():
        service.handle_utterance(session.session_id, "one")

    thread = threading.Thread(target=first)
    thread.start()
    barrier.wait(timeout=5)
    with pytest.raises(TurnInFlight):
        service.handle_utterance(session.session_id, "two")
    thread.join()
    # after the first completes, talking works again
    service.handle_utterance(session.session_id, "three")


def test_mission_completion_discards_remaining_actions(
        tmp_path, registry, scenes, catalog):
    # drive disinfect_dish (single Clean) then keep acting in the same batch
    client = ScriptedClient([
        ([Action("GotoViewpoint", viewpoint="lab_32"),
          Action("Clean", target="petri_dish_1"),
          Action("RotateLeft"), Action("RotateLeft")], False, None),
        final_response(),
    ])
    service = build_service(tmp_path, registry, scenes, catalog, inference=client)
    session, _ = service.create_session("disinfect_dish")
    record = service.handle_utterance(session.session_id, "disinfect the dish")
    executed = [e["action"]["type"] for e in record["executed"]]
    assert executed[-1] == "Clean", "completion discards the rest"
    sess = service._get(session.session_id)
    assert sess.status == "mission_complete"
    assert sess.completed_tick is not None
    events = [e["event"] for e in service._events[session.session_id].snapshot()]
    assert "subgoal_complete" in events
    assert "mission_complete" in events
    assert events[-1] == "turn_ended", "no mic reopen after completion"


def test_highlight_emits_event_without_mutation(tmp_path, registry, scenes, catalog):
    client = ScriptedClient([
        ([Action("Highlight", target="bowl_broken")], False, None),
        final_response(),
    ])
    service = build_service(tmp_path, registry, scenes, catalog, inference=client)
    session, _ = service.create_session("fill_mug")
    before = state_hash(session.world)
    service.handle_utterance(session.session_id, "show me the bowl")
    sess = service._get(session.session_id)
    events = service._events[session.session_id].snapshot()
    highlight = [e for e in events if e["event"] == "highlight"]
    assert highlight and highlight[0]["instance"] == "bowl_broken"
    # only the tick advanced
    assert sess.world.tick == 1
    from arena.core import diff_states
    base_world = session.world if session.world.tick == 0 else None
    assert state_hash(sess.world) != before  # tick moved
    assert not [e for e in sess.log_events
                if e["type"] == "action" and e["action"]["type"] == "Highlight"
                and not e["ok"]]


# -- rating ---------------------------------------------------------------------

def _complete_mission(service, mission_id="disinfect_dish"):
    session, _ = service.create_session(mission_id)
    transcript = load_transcript(mission_id)
    for text in transcript["utterances"]:
        if service._get(session.session_id).status != "active":
            break
        service.handle_utterance(session.session_id, text)
    assert service._get(session.session_id).status == "mission_complete"
    return session


def test_rating_flow(tmp_path, registry, scenes, catalog):
    service = build_service(tmp_path, registry, scenes, catalog)
    session = _complete_mission(service)
    result = service.submit_rating(session.session_id, 5, "nice robot")
    assert result.rating == {"score": 5, "comment": "nice robot"}
    records = RecordStore(tmp_path / "records.ndjson").load()
    assert len(records) == 1
    assert records[0].success is True
    assert records[0].rating == 5
    assert records[0].mission_seen is False  # disinfect_dish is unseen


def test_rating_out_of_range(tmp_path, registry, scenes, catalog):
    service = build_service(tmp_path, registry, scenes, catalog)
    session = _complete_mission(service)
    with pytest.raises(ScoreOutOfRange):
        service.submit_rating(session.session_id, 6)
    with pytest.raises(ScoreOutOfRange):
        service.submit_rating(session.session_id, 0)


def test_rating_twice(tmp_path, registry, scenes, catalog):
    service = build_service(tmp_path, registry, scenes, catalog)
    session = _complete_mission(service)
    service.submit_rating(session.session_id, 4)
    with pytest.raises(RatingAlreadySubmitted):
        service.submit_rating(session.session_id, 5)


def test_rating_active_session_not_ratable(tmp_path, registry, scenes, catalog):
    service = build_service(tmp_path, registry, scenes, catalog)
    session, _ = service.create_session("fill_mug")
    with pytest.raises(SessionNotRatable):
        service.submit_rating(session.session_id, 4)


def test_user_end_then_rate(tmp_path, registry, scenes, catalog):
    service = build_service(tmp_path, registry, scenes, catalog)
    session, _ = service.create_session("fill_mug")
    service.end_session(session.session_id)
    with pytest.raises(SessionNotActive):
        service.handle_utterance(session.session_id, "hello?")
    service.submit_rating(session.session_id, 2, "gave up")
    records = RecordStore(tmp_path / "records.ndjson").load()
    assert records[0].success is False
    assert records[0].rating == 2


# -- streams ----------------------------------------------------------------------

def test_late_subscriber_gets_snapshot_frame(tmp_path, registry, scenes, catalog):
    service = build_service(tmp_path, registry, scenes, catalog)
    session, _ = service.create_session("fill_mug")
    service.handle_utterance(session.session_id, "go to the break room")
    stream = service.subscribe(session.session_id)
    first = next(iter(stream))
    assert first["event"] == "frame"
    assert first.get("snapshot") is True


def test_stream_replay_sees_everything(tmp_path, registry, scenes, catalog):
    service = build_service(tmp_path, registry, scenes, catalog)
    session, _ = service.create_session("fill_mug")
    service.handle_utterance(session.session_id, "go to the break room")
    service.end_session(session.session_id)
    service.submit_rating(session.session_id, 3)
    events = list(service.subscribe(session.session_id, from_start=True))
    kinds = [e["event"] for e in events]
    assert kinds[0] == "frame"
    assert "turn_ended" in kinds


# -- persistence and export ---------------------------------------------------------

def test_sessions_survive_restart(tmp_path, registry, scenes, catalog):
    clock = FixedClock()
    service = build_service(tmp_path, registry, scenes, catalog, clock=clock)
    session, _ = service.create_session("fill_mug")
    service.handle_utterance(session.session_id, "go to the break room")
    live_hash = state_hash(service._get(session.session_id).world)
    service.store.close()

    revived = build_service(tmp_path, registry, scenes, catalog, clock=clock)
    sess = revived._get(session.session_id)
    assert sess.status == "active"
    assert len(sess.turns) == 1
    assert state_hash(sess.world) == live_hash
    # and the session still works
    revived.handle_utterance(session.session_id, "go to the counter")


def test_abandonment_sweep(tmp_path, registry, scenes, catalog):
    clock = FixedClock()
    service = build_service(tmp_path, registry, scenes, catalog, clock=clock)
    session, _ = service.create_session("fill_mug")
    assert service.sweep_abandoned() == []
    clock.advance(IDLE_TIMEOUT_S + 60)
    swept = service.sweep_abandoned()
    assert swept == [session.session_id]
    sess = service._get(session.session_id)
    assert sess.status == "abandoned"
    records = RecordStore(tmp_path / "records.ndjson").load()
    assert len(records) == 1
    assert records[0].success is False and records[0].rating is None
    with pytest.raises(SessionNotActive):
        service.handle_utterance(session.session_id, "hello?")


def test_export_requires_ended_session(tmp_path, registry, scenes, catalog):
    service = build_service(tmp_path, registry, scenes, catalog)
    session, _ = service.create_session("fill_mug")
    with pytest.raises(SessionActive):
        service.export_session_log(session.session_id)


def test_export_empty_session_replays_to_initial(tmp_path, registry, scenes, catalog):
    service = build_service(tmp_path, registry, scenes, catalog)
    session, _ = service.create_session("fill_mug")
    service.end_session(session.session_id)
    doc = service.export_session_log(session.session_id)
    log = SessionLog.from_doc(doc)
    assert log.events == ()
    final = replay(log, registry, scenes)
    assert state_hash(final) == doc["initial_hash"] == doc["recorded_final_hash"]


def test_export_then_replay_matches_live(tmp_path, registry, scenes, catalog):
    service = build_service(tmp_path, registry, scenes, catalog)
    session, _ = service.create_session("heat_soup")
    for text in load_transcript("heat_soup")["utterances"]:
        if service._get(session.session_id).status != "active":
            break
        service.handle_utterance(session.session_id, text)
    service_final = state_hash(service._get(session.session_id).world)
    doc = service.export_session_log(session.session_id)
    log = SessionLog.from_doc(doc)
    final = replay(log, registry, scenes)
    assert state_hash(final) == service_final == doc["recorded_final_hash"]
