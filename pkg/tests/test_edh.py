"""Offline harness: replay, instance extraction, budgets, scoring."""

from __future__ import annotations

import copy
import json

import pytest

from arena.client import InferenceEDHAdapter
from arena.core import Action, StateDelta, state_hash
from arena.edh import (
    EDHInstance,
    LoopAdapter,
    MAX_ACTIONS,
    MAX_API_FAILURES,
    ModelAdapter,
    OracleAdapter,
    SessionLog,
    StopAdapter,
    evaluate_suite,
    extract_edh_instances,
    replay,
    run_edh,
    suite_from_doc,
    suite_to_doc,
    canonical_log_bytes,
)
from arena.errors import EmptySuite, HashChainBroken
from tests.conftest import GOLDEN, build_service, load_golden, load_transcript


@pytest.fixture(scope="module")
def golden_log():
    doc = json.loads((GOLDEN / "logs" / "repair_bowl.log.json").read_text())
    return SessionLog.from_doc(doc)


@pytest.fixture(scope="module")
def mission_index(catalog):
    return {m.mission_id: m for m in catalog}


@pytest.fixture(scope="module")
def golden_instances(golden_log, registry, scenes, mission_index):
    return extract_edh_instances(golden_log, registry, scenes, mission_index)


@pytest.fixture(scope="session")
def catalog_module(catalog):
    return catalog


# -- replay ----------------------------------------------------------------------

def test_golden_log_replays(golden_log, registry, scenes):
    final = replay(golden_log, registry, scenes)
    assert state_hash(final) == golden_log.recorded_final_hash


def test_golden_log_bytes_stable(golden_log):
    committed = (GOLDEN / "logs" / "repair_bowl.log.json").read_bytes()
    assert canonical_log_bytes(golden_log) == committed


def test_tampered_hash_breaks_chain(golden_log, registry, scenes):
    doc = golden_log.to_doc()
    action_indexes = [i for i, e in enumerate(doc["events"])
                      if e["type"] == "action"]
    victim = action_indexes[2]
    doc["events"][victim]["post_hash"] = "0" * 64
    with pytest.raises(HashChainBroken) as err:
        replay(SessionLog.from_doc(doc), registry, scenes)
    assert err.value.event_index == victim


def test_empty_log_replays_to_initial(tmp_path, registry, scenes, catalog):
    service = build_service(tmp_path, registry, scenes, catalog)
    session, _ = service.create_session("fill_mug")
    service.end_session(session.session_id)
    log = SessionLog.from_doc(service.export_session_log(session.session_id))
    final = replay(log, registry, scenes)
    assert state_hash(final) == log.initial_hash


# -- extraction ------------------------------------------------------------------

def test_golden_extraction_count(golden_instances):
    expectations = load_golden("edh_expectations.json")
    assert len(golden_instances) == expectations["repair_bowl_log_instances"]
    assert [i.instance_id for i in golden_instances] == expectations["instance_ids"]
    for inst in golden_instances:
        expected = expectations["expected_changes"][inst.instance_id]
        assert inst.expected_changes.to_doc() == expected


def test_extraction_is_deterministic(golden_log, registry, scenes, mission_index):
    again = extract_edh_instances(golden_log, registry, scenes, mission_index)
    ids = [i.instance_id for i in again]
    assert ids == [i.instance_id for i in
                   extract_edh_instances(golden_log, registry, scenes, mission_index)]


def test_instances_satisfy_invariants(golden_instances):
    for inst in golden_instances:
        assert inst.dialog_history
        assert any(a.is_interaction for a in inst.reference_actions)
        assert inst.expected_changes
        assert inst.max_actions == MAX_ACTIONS
        assert inst.max_api_failures == MAX_API_FAILURES


def _log_doc_from_events(base_log, events, registry, scenes):
    """Build a replayable log document with the given event skeletons."""
    from arena.core.engine import apply_action
    from arena.edh import initial_state
    doc = base_log.to_doc()
    doc["events"] = []
    state = initial_state(base_log, registry, scenes)
    for event in events:
        if event[0] == "utter":
            doc["events"].append({"type": "utterance", "speaker": event[1],
                                  "text": event[2]})
        else:
            action = event[1]
            state, result = apply_action(state, action, render_frames=False)
            doc["events"].append({
                "type": "action",
                "action": {"type": action.kind,
                           **({"target": {"instance": action.target}}
                              if isinstance(action.target, str) else {}),
                           **({"viewpoint": action.viewpoint} if action.viewpoint else {}),
                           **({"room": action.room} if action.room else {})},
                "ok": result.ok,
                "failure_code": result.failure_code.value if result.failure_code else None,
                "post_hash": state_hash(state),
            })
    doc["recorded_final_hash"] = state_hash(state)
    return doc


def test_segment_without_interaction_yields_nothing(golden_log, registry, scenes,
                                                    mission_index):
    events = [
        ("utter", "commander", "walk around"),
        ("act", Action("RotateLeft")),
        ("act", Action("MoveForward")),
        ("utter", "commander", "now stop"),
    ]
    doc = _log_doc_from_events(golden_log, events, registry, scenes)
    log = SessionLog.from_doc(doc)
    assert extract_edh_instances(log, registry, scenes, mission_index) == []


def test_actions_before_any_dialog_yield_nothing(golden_log, registry, scenes,
                                                 mission_index):
    events = [
        ("act", Action("GotoViewpoint", viewpoint="lab_23")),
        ("act", Action("Pickup", target="bowl_broken")),
        ("utter", "commander", "first words arrive after the actions"),
    ]
    doc = _log_doc_from_events(golden_log, events, registry, scenes)
    log = SessionLog.from_doc(doc)
    assert extract_edh_instances(log, registry, scenes, mission_index) == []


def test_no_task_relevant_change_yields_nothing(golden_log, registry, scenes,
                                                mission_index):
    # toggling the lamp is an interaction but repair_bowl's goals never
    # mention the lamp, so the change is not task relevant
    events = [
        ("utter", "commander", "fiddle with the lamp"),
        ("act", Action("GotoViewpoint", viewpoint="lab_23")),
        ("act", Action("ToggleOn", target="lamp_lab")),
        ("utter", "commander", "thanks"),
    ]
    doc = _log_doc_from_events(golden_log, events, registry, scenes)
    log = SessionLog.from_doc(doc)
    assert extract_edh_instances(log, registry, scenes, mission_index) == []


def test_trailing_actions_never_bracketed(golden_log, registry, scenes,
                                          mission_index):
    events = [
        ("utter", "commander", "pick up the bowl"),
        ("act", Action("GotoViewpoint", viewpoint="lab_23")),
        ("act", Action("Pickup", target="bowl_broken")),
        # no closing utterance
    ]
    doc = _log_doc_from_events(golden_log, events, registry, scenes)
    log = SessionLog.from_doc(doc)
    assert extract_edh_instances(log, registry, scenes, mission_index) == []


def test_compliant_segment_extracts(golden_log, registry, scenes, mission_index):
    events = [
        ("utter", "commander", "toss the bowl in the trash"),
        ("act", Action("GotoViewpoint", viewpoint="lab_23")),
        ("act", Action("RotateRight")),
        ("act", Action("RotateRight")),
        ("act", Action("Pickup", target="bowl_broken")),
        ("act", Action("GotoViewpoint", viewpoint="lab_13")),
        ("act", Action("RotateRight")),
        ("act", Action("Place", target="trash_can_1")),
        ("utter", "follower", "Done!"),
    ]
    doc = _log_doc_from_events(golden_log, events, registry, scenes)
    log = SessionLog.from_doc(doc)
    instances = extract_edh_instances(log, registry, scenes, mission_index)
    assert len(instances) == 1
    inst = instances[0]
    assert ("bowl_broken", "contained_in", "table_lab", "trash_can_1") \
        in inst.expected_changes.entries


# -- running models ------------------------------------------------------------------

def test_oracle_scores_perfectly(golden_instances):
    for inst in golden_instances:
        result = run_edh(inst, OracleAdapter())
        assert result.success is True
        assert result.goal_condition_rate == 1.0
        assert result.termination == "stop_predicted"


def test_stop_model_scores_zero(golden_instances):
    inst = golden_instances[0]
    result = run_edh(inst, StopAdapter())
    assert result.termination == "stop_predicted"
    assert result.success is False
    assert result.goal_condition_rate == 0.0
    assert result.predicted == []


def test_action_budget_exact(golden_instances):
    inst = golden_instances[0]
    result = run_edh(inst, LoopAdapter(Action("RotateLeft")))
    assert result.termination == "action_budget"
    assert len(result.predicted) == MAX_ACTIONS


def test_failure_budget_exact(golden_instances):
    inst = golden_instances[0]
    result = run_edh(inst, LoopAdapter(Action("Pickup", target="nothing_here")))
    assert result.termination == "failure_budget"
    failures = sum(1 for _, ok in result.predicted if not ok)
    assert failures == MAX_API_FAILURES
    assert len(result.predicted) == MAX_API_FAILURES


def test_partial_model_scores_half(lab_world):
    """Achieving one of two expected changes reports exactly 0.5."""
    full_script = [
        Action("GotoViewpoint", viewpoint="lab_23"),
        Action("RotateRight"), Action("RotateRight"),
        Action("ToggleOn", target="lamp_lab"),
        Action("GotoViewpoint", viewpoint="lab_12"),
        Action("RotateRight"),
        Action("Power", target="printer_3d_1"),
    ]
    inst = EDHInstance(
        instance_id="synthetic-two",
        dialog_history=(("commander", "lamp on, printer powered"),),
        action_history=(),
        expected_changes=StateDelta(frozenset({
            ("lamp_lab", "isToggledOn", False, True),
            ("printer_3d_1", "isPowered", False, True),
        })),
        initial_state=lab_world,
        reference_actions=tuple(full_script),
    )
    # the oracle achieves both
    oracle = run_edh(inst, OracleAdapter())
    assert oracle.success and oracle.goal_condition_rate == 1.0

    class LampOnly(ModelAdapter):
        name = "lamp-only"

        def session(self, instance):
            queue = full_script[:4]  # stops before touching the printer

            def predict(dialog, history, obs):
                return queue.pop(0) if queue else Action("Stop")

            return predict

    result = run_edh(inst, LampOnly())
    assert result.goal_condition_rate == 0.5
    assert result.success is False


def test_model_errors_are_contained(golden_instances):
    class Exploding(ModelAdapter):
        name = "boom"

        def session(self, instance):
            def predict(dialog, history, obs):
                raise RuntimeError("kaput")
            return predict

    report = evaluate_suite(golden_instances, Exploding())
    assert report["success_rate"] == 0.0
    assert report["termination_histogram"] == {"model_error": len(golden_instances)}


def test_evaluate_suite_oracle(golden_instances):
    report = evaluate_suite(golden_instances, OracleAdapter())
    assert report["success_rate"] == 1.0
    assert report["mean_goal_condition_rate"] == 1.0
    assert report["termination_histogram"] == {
        "stop_predicted": len(golden_instances)
    }


def test_evaluate_suite_stop(golden_instances):
    report = evaluate_suite(golden_instances, StopAdapter())
    assert report["success_rate"] == 0.0


def test_evaluate_suite_parallel_matches_serial(golden_instances):
    serial = evaluate_suite(golden_instances, OracleAdapter())
    parallel = evaluate_suite(golden_instances, OracleAdapter(), workers=4)
    assert serial["results"] == parallel["results"]


def test_empty_suite(golden_instances):
    with pytest.raises(EmptySuite):
        evaluate_suite([], OracleAdapter())


def test_suite_round_trip(golden_log, golden_instances, registry, scenes):
    doc = suite_to_doc([(golden_log, list(golden_instances))])
    back = suite_from_doc(doc, registry, scenes)
    assert [i.instance_id for i in back] == [i.instance_id for i in golden_instances]
    for a, b in zip(back, golden_instances):
        assert a.expected_changes.entries == b.expected_changes.entries
        assert state_hash(a.initial_state) == state_hash(b.initial_state)
    report = evaluate_suite(back, OracleAdapter())
    assert report["success_rate"] == 1.0


def test_baseline_edh_adapter(golden_instances, lab_scene_graph, registry):
    """The shipped agent can be driven through the offline protocol."""
    from arena.baseline import BaselineAgent
    agent = BaselineAgent(lab_scene_graph, registry)
    adapter = InferenceEDHAdapter(agent.infer, name="baseline")
    result = run_edh(golden_instances[0], adapter)
    assert result.termination in ("stop_predicted", "action_budget",
                                  "failure_budget")
    assert 0.0 <= result.goal_condition_rate <= 1.0
