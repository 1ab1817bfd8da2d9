"""Offline evaluation: replay logs, extract dialog-history instances, score.

An instance captures the situation at a dialog split point: everything said
so far, the actions already taken, and the state changes the recorded segment
went on to produce. A model under evaluation predicts follow-on actions until
it says Stop or exhausts the verbatim budgets (1000 executed actions, 30 API
failures), and is scored by comparing achieved against expected state
changes: success requires every expected change; extra changes don't
penalize.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from arena.core.actions import Action, StateDelta, action_from_doc, action_to_doc
from arena.core.engine import apply_action
from arena.core.registry import ClassRegistry
from arena.core.render import DEFAULT_RASTER, Observation, render_observation
from arena.core.world import WorldState, diff_states, restore_state, state_doc, state_hash
from arena.errors import EmptySuite, HashChainBroken, ModelRaised, SchemaError
from arena.missions import (
    MissionSpec,
    SceneIndex,
    StateOverride,
    apply_overrides,
    goal_referenced_instances,
)

LOG_SCHEMA = "arena-log/1"
SUITE_SCHEMA = "arena-edh-suite/1"
REPORT_SCHEMA = "arena-edh-report/1"

MAX_ACTIONS = 1000
MAX_API_FAILURES = 30

Prediction = Callable[[list, list, Observation], Action]


@dataclass(frozen=True, slots=True)
class LogEvent:
    kind: str  # "utterance" | "action"
    speaker: Optional[str] = None
    text: Optional[str] = None
    action: Optional[Action] = None
    ok: Optional[bool] = None
    failure_code: Optional[str] = None
    post_hash: Optional[str] = None


@dataclass(frozen=True, slots=True)
class SessionLog:
    session_id: str
    scene_id: str
    mission_id: Optional[str]
    scene_overrides: tuple[StateOverride, ...]
    initial_hash: str
    events: tuple[LogEvent, ...]
    recorded_final_hash: str

    @staticmethod
    def from_doc(doc: dict) -> "SessionLog":
        if not isinstance(doc, dict) or doc.get("schema") != LOG_SCHEMA:
            raise SchemaError(f"expected schema {LOG_SCHEMA!r}")
        events = []
        for e in doc.get("events", []):
            if e.get("type") == "utterance":
                events.append(LogEvent(kind="utterance", speaker=e["speaker"], text=e["text"]))
            elif e.get("type") == "action":
                events.append(LogEvent(
                    kind="action",
                    action=action_from_doc(e["action"]),
                    ok=bool(e["ok"]),
                    failure_code=e.get("failure_code"),
                    post_hash=e["post_hash"],
                ))
            else:
                raise SchemaError(f"unknown log event {e.get('type')!r}")
        return SessionLog(
            session_id=str(doc.get("session_id", "")),
            scene_id=doc["scene_id"],
            mission_id=doc.get("mission_id"),
            scene_overrides=tuple(
                StateOverride(instance=o["instance"], states=dict(o.get("states", {})))
                for o in doc.get("scene_overrides", [])
            ),
            initial_hash=doc["initial_hash"],
            events=tuple(events),
            recorded_final_hash=doc["recorded_final_hash"],
        )

    def to_doc(self) -> dict:
        events = []
        for e in self.events:
            if e.kind == "utterance":
                events.append({"type": "utterance", "speaker": e.speaker, "text": e.text})
            else:
                events.append({
                    "type": "action",
                    "action": action_to_doc(e.action),
                    "ok": e.ok,
                    "failure_code": e.failure_code,
                    "post_hash": e.post_hash,
                })
        return {
            "schema": LOG_SCHEMA,
            "session_id": self.session_id,
            "scene_id": self.scene_id,
            "mission_id": self.mission_id,
            "scene_overrides": [
                {"instance": o.instance, "states": dict(o.states)}
                for o in self.scene_overrides
            ],
            "initial_hash": self.initial_hash,
            "events": events,
            "recorded_final_hash": self.recorded_final_hash,
        }

    def digest(self) -> str:
        payload = json.dumps(self.to_doc(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def canonical_log_bytes(log: SessionLog) -> bytes:
    return (json.dumps(log.to_doc(), indent=2, sort_keys=True) + "\n").encode("utf-8")


# -- replay -----------------------------------------------------------------------

def initial_state(log: SessionLog, registry: ClassRegistry, scenes: SceneIndex) -> WorldState:
    state = apply_overrides(scenes.load(log.scene_id, registry), log.scene_overrides)
    if state_hash(state) != log.initial_hash:
        raise HashChainBroken(-1, "initial state hash mismatch")
    return state


def replay_states(log: SessionLog, registry: ClassRegistry,
                  scenes: SceneIndex) -> list[WorldState]:
    """State before each event, plus the final state, hash-checked per step."""
    state = initial_state(log, registry, scenes)
    states = [state]
    for index, event in enumerate(log.events):
        if event.kind == "action":
            state, result = apply_action(state, event.action, render_frames=False)
            if state_hash(state) != event.post_hash:
                raise HashChainBroken(index)
            if result.ok != event.ok:
                raise HashChainBroken(index, f"ok flag diverged at event {index}")
        states.append(state)
    if state_hash(state) != log.recorded_final_hash:
        raise HashChainBroken(len(log.events), "final hash mismatch")
    return states


def replay(log: SessionLog, registry: ClassRegistry, scenes: SceneIndex) -> WorldState:
    """Re-execute a recorded session; raises HashChainBroken on divergence."""
    return replay_states(log, registry, scenes)[-1]


# -- instance extraction -------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class EDHInstance:
    instance_id: str
    dialog_history: tuple[tuple[str, str], ...]
    action_history: tuple[tuple[Action, bool], ...]
    expected_changes: StateDelta
    initial_state: WorldState
    reference_actions: tuple[Action, ...]
    max_actions: int = MAX_ACTIONS
    max_api_failures: int = MAX_API_FAILURES


def _task_relevant_ids(
    log: SessionLog,
    states: list[WorldState],
    catalog: Optional[dict[str, MissionSpec]],
) -> frozenset[str]:
    if catalog and log.mission_id in catalog:
        return goal_referenced_instances(catalog[log.mission_id], states[0])
    full = diff_states(states[0], states[-1])
    return frozenset(iid for iid, _, _, _ in full.entries)


def _restrict(delta: StateDelta, ids: frozenset[str]) -> StateDelta:
    return StateDelta(frozenset(e for e in delta.entries if e[0] in ids))


def extract_edh_instances(
    log: SessionLog,
    registry: ClassRegistry,
    scenes: SceneIndex,
    catalog: Optional[dict[str, MissionSpec]] = None,
) -> list[EDHInstance]:
    """Instances from the action runs between consecutive utterances.

    A run qualifies only with a non-empty preceding dialog history, at least
    one object interaction, and a non-empty task-relevant state change. Runs
    after the final utterance are never candidates.
    """
    states = replay_states(log, registry, scenes)
    relevant = _task_relevant_ids(log, states, catalog)
    log_digest = log.digest()

    instances: list[EDHInstance] = []
    run_start: Optional[int] = None
    for index, event in enumerate(log.events):
        if event.kind == "action":
            if run_start is None:
                run_start = index
            continue
        # utterance: closes any open action run
        if run_start is not None:
            instance = _build_instance(
                log, states, relevant, log_digest, run_start, index
            )
            if instance is not None:
                instances.append(instance)
            run_start = None
    return instances


def _build_instance(log, states, relevant, log_digest, start, end) -> Optional[EDHInstance]:
    dialog = [
        (e.speaker, e.text) for e in log.events[:start] if e.kind == "utterance"
    ]
    if not dialog:
        return None
    segment = [e for e in log.events[start:end] if e.kind == "action"]
    if not any(e.action.is_interaction for e in segment):
        return None
    expected = _restrict(diff_states(states[start], states[end]), relevant)
    if not expected:
        return None
    history = [
        (e.action, e.ok) for e in log.events[:start] if e.kind == "action"
    ]
    instance_id = hashlib.sha256(
        f"{log_digest}:{start}:{end}".encode("utf-8")
    ).hexdigest()[:12]
    return EDHInstance(
        instance_id=instance_id,
        dialog_history=tuple(dialog),
        action_history=tuple(history),
        expected_changes=expected,
        initial_state=states[start],
        reference_actions=tuple(e.action for e in segment),
    )


# -- running models ------------------------------------------------------------------

class ModelAdapter:
    """A model under evaluation; `session` yields a fresh predictor per run."""

    name = "adapter"

    def session(self, instance: EDHInstance) -> Prediction:
        raise NotImplementedError


class OracleAdapter(ModelAdapter):
    """Replays the annotated segment, then stops; the harness self-test."""

    name = "oracle"

    def session(self, instance):
        queue = list(instance.reference_actions)

        def predict(dialog, history, obs):
            return queue.pop(0) if queue else Action("Stop")

        return predict


class StopAdapter(ModelAdapter):
    name = "stop"

    def session(self, instance):
        return lambda dialog, history, obs: Action("Stop")


class LoopAdapter(ModelAdapter):
    """Repeats one action forever; useful for exercising budgets."""

    def __init__(self, action: Action):
        self.action = action
        self.name = f"loop:{action.kind}"

    def session(self, instance):
        return lambda dialog, history, obs: self.action


@dataclass(slots=True)
class EDHResult:
    instance_id: str
    predicted: list[tuple[Action, bool]] = field(default_factory=list)
    termination: str = ""  # stop_predicted | action_budget | failure_budget | model_error
    achieved_changes: StateDelta = StateDelta()
    success: bool = False
    goal_condition_rate: float = 0.0
    error: Optional[str] = None

    def to_doc(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "executed": len(self.predicted),
            "failures": sum(1 for _, ok in self.predicted if not ok),
            "termination": self.termination,
            "achieved_changes": self.achieved_changes.to_doc(),
            "success": self.success,
            "goal_condition_rate": self.goal_condition_rate,
            "error": self.error,
        }


def run_edh(
    instance: EDHInstance,
    model: ModelAdapter,
    raster: tuple[int, int] = DEFAULT_RASTER,
) -> EDHResult:
    """Drive one instance: predict, execute, observe, until Stop or budget."""
    try:
        predict = model.session(instance)
    except Exception as exc:
        raise ModelRaised(str(exc)) from exc

    world = instance.initial_state
    dialog = list(instance.dialog_history)
    history = list(instance.action_history)
    predicted: list[tuple[Action, bool]] = []
    failures = 0
    termination = ""
    obs = render_observation(world, *raster)
    try:
        while True:
            action = predict(dialog, history, obs)
            if action.kind == "Stop":
                termination = "stop_predicted"
                break
            world, result = apply_action(world, action, raster=raster, render_frames=False)
            predicted.append((action, result.ok))
            history.append((action, result.ok))
            if not result.ok:
                failures += 1
            obs = render_observation(world, *raster)
            if len(predicted) >= instance.max_actions:
                termination = "action_budget"
                break
            if failures >= instance.max_api_failures:
                termination = "failure_budget"
                break
    except Exception as exc:
        raise ModelRaised(str(exc)) from exc

    achieved = diff_states(instance.initial_state, world)
    expected = instance.expected_changes
    rate = expected.intersection_size(achieved) / len(expected)
    return EDHResult(
        instance_id=instance.instance_id,
        predicted=predicted,
        termination=termination,
        achieved_changes=achieved,
        success=expected.issubset(achieved),
        goal_condition_rate=rate,
    )


def evaluate_suite(
    instances: Iterable[EDHInstance],
    model: ModelAdapter,
    raster: tuple[int, int] = DEFAULT_RASTER,
    workers: int = 1,
) -> dict:
    """Aggregate per-instance results into a machine-readable report."""
    instances = sorted(instances, key=lambda i: i.instance_id)
    if not instances:
        raise EmptySuite("no instances to evaluate")

    def one(instance: EDHInstance) -> EDHResult:
        try:
            return run_edh(instance, model, raster)
        except ModelRaised as exc:
            return EDHResult(
                instance_id=instance.instance_id,
                termination="model_error",
                error=str(exc),
            )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, instances))
    else:
        results = [one(i) for i in instances]
    results.sort(key=lambda r: r.instance_id)

    histogram: dict[str, int] = {}
    for r in results:
        histogram[r.termination] = histogram.get(r.termination, 0) + 1
    return {
        "schema": REPORT_SCHEMA,
        "model": model.name,
        "n_instances": len(results),
        "success_rate": sum(1 for r in results if r.success) / len(results),
        "mean_goal_condition_rate": sum(r.goal_condition_rate for r in results) / len(results),
        "termination_histogram": {k: histogram[k] for k in sorted(histogram)},
        "results": [r.to_doc() for r in results],
    }


# -- suite (de)serialization ------------------------------------------------------------

def suite_to_doc(log_refs: list[tuple[SessionLog, list[EDHInstance]]]) -> dict:
    suites = []
    for log, instances in log_refs:
        suites.append({
            "scene_id": log.scene_id,
            "session_id": log.session_id,
            "instances": [
                {
                    "instance_id": inst.instance_id,
                    "dialog_history": [list(d) for d in inst.dialog_history],
                    "action_history": [
                        [action_to_doc(a), ok] for a, ok in inst.action_history
                    ],
                    "expected_changes": inst.expected_changes.to_doc(),
                    "budget": {
                        "max_actions": inst.max_actions,
                        "max_api_failures": inst.max_api_failures,
                    },
                    "initial_state": state_doc(inst.initial_state),
                    "reference_actions": [action_to_doc(a) for a in inst.reference_actions],
                }
                for inst in instances
            ],
        })
    return {"schema": SUITE_SCHEMA, "logs": suites}


def suite_from_doc(doc: dict, registry: ClassRegistry, scenes: SceneIndex) -> list[EDHInstance]:
    if not isinstance(doc, dict) or doc.get("schema") != SUITE_SCHEMA:
        raise SchemaError(f"expected schema {SUITE_SCHEMA!r}")
    instances = []
    for entry in doc.get("logs", []):
        scene = scenes.load(entry["scene_id"], registry).scene
        for idoc in entry.get("instances", []):
            budget = idoc.get("budget", {})
            instances.append(EDHInstance(
                instance_id=idoc["instance_id"],
                dialog_history=tuple((s, t) for s, t in idoc.get("dialog_history", [])),
                action_history=tuple(
                    (action_from_doc(a), bool(ok))
                    for a, ok in idoc.get("action_history", [])
                ),
                expected_changes=StateDelta.from_doc(idoc["expected_changes"]),
                initial_state=restore_state(scene, idoc["initial_state"]),
                reference_actions=tuple(
                    action_from_doc(a) for a in idoc.get("reference_actions", [])
                ),
                max_actions=int(budget.get("max_actions", MAX_ACTIONS)),
                max_api_failures=int(budget.get("max_api_failures", MAX_API_FAILURES)),
            ))
    return instances
