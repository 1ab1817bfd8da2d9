"""Session orchestration: the per-turn loop between user, inference, and world.

One utterance triggers a loop of inference round-trips; every returned action
executes in the simulator with its frames streamed to subscribers, goals are
checked after each execution, and the turn ends on a turn-complete response,
a Stop action, a budget breach, or mission completion. Sessions persist to an
embedded sqlite store after every turn, so a restart loses at most the turn
in flight.
"""

from __future__ import annotations

import json
import sqlite3
import threading
import time
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterator, Optional

from arena.core.actions import Action, ActionResult, action_from_doc, action_to_doc
from arena.core.engine import apply_action
from arena.core.render import DEFAULT_RASTER, Observation, render_observation
from arena.core.world import WorldState, restore_state, state_doc, state_hash
from arena.errors import (
    CapacityExceeded,
    InferenceProtocolError,
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
from arena.metrics import InteractionRecord, RecordStore
from arena.missions import (
    MissionSpec,
    MissionStatus,
    SceneIndex,
    check_goals,
    init_mission,
)
from arena.protocol import InferenceRequest, InferenceResponse

LOG_SCHEMA = "arena-log/1"
TIMEOUT_DIALOG = "Sorry, I had trouble thinking just now. Could you try that again?"
HIGHLIGHT_DURATION_MS = 1500
IDLE_TIMEOUT_S = 15 * 60


@dataclass(frozen=True, slots=True)
class TurnLimits:
    max_actions_per_turn: int = 50
    max_failures_per_turn: int = 10
    inference_deadline_ms: int = 10000
    max_inference_rounds_per_turn: int = 10

    def __post_init__(self):
        for name in ("max_actions_per_turn", "max_failures_per_turn",
                     "inference_deadline_ms", "max_inference_rounds_per_turn"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


class InferenceClient:
    """Calls an action-inference service; implementations may go over HTTP."""

    def infer(self, request: InferenceRequest, deadline_ms: int) -> InferenceResponse:
        raise NotImplementedError


class LocalInferenceClient(InferenceClient):
    """In-process client around a callable like BaselineAgent.infer."""

    def __init__(self, fn: Callable[[InferenceRequest], InferenceResponse]):
        self._fn = fn

    def infer(self, request, deadline_ms):
        return self._fn(request)


class EventLog:
    """Append-only per-session event feed; single producer, many consumers."""

    def __init__(self):
        self._events: list[dict] = []
        self._cond = threading.Condition()
        self._closed = False

    def emit(self, event: dict):
        with self._cond:
            self._events.append(event)
            self._cond.notify_all()

    def close(self):
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    def snapshot(self) -> list[dict]:
        with self._cond:
            return list(self._events)

    def subscribe(self, from_start: bool = False,
                  poll_s: float = 0.1) -> Iterator[dict]:
        with self._cond:
            if from_start:
                idx = 0
            else:
                idx = len(self._events)
                last_frame = next(
                    (e for e in reversed(self._events) if e.get("event") == "frame"),
                    None,
                )
            if not from_start and last_frame is not None:
                yield dict(last_frame, snapshot=True)
        while True:
            with self._cond:
                while idx >= len(self._events) and not self._closed:
                    self._cond.wait(timeout=poll_s)
                if idx < len(self._events):
                    event = self._events[idx]
                    idx += 1
                else:  # closed and drained
                    return
            yield event


class SessionStore:
    """sqlite-backed key-value store for session documents."""

    def __init__(self, path: str | Path):
        self._path = str(path)
        self._lock = threading.Lock()
        self._conn = sqlite3.connect(self._path, check_same_thread=False)
        self._conn.execute(
            "CREATE TABLE IF NOT EXISTS sessions (id TEXT PRIMARY KEY, doc TEXT NOT NULL)"
        )
        self._conn.commit()

    def put(self, session_id: str, doc: dict):
        payload = json.dumps(doc, sort_keys=True)
        with self._lock:
            self._conn.execute(
                "INSERT INTO sessions (id, doc) VALUES (?, ?) "
                "ON CONFLICT(id) DO UPDATE SET doc = excluded.doc",
                (session_id, payload),
            )
            self._conn.commit()

    def get(self, session_id: str) -> Optional[dict]:
        with self._lock:
            row = self._conn.execute(
                "SELECT doc FROM sessions WHERE id = ?", (session_id,)
            ).fetchone()
        return json.loads(row[0]) if row else None

    def ids(self) -> list[str]:
        with self._lock:
            rows = self._conn.execute("SELECT id FROM sessions ORDER BY id").fetchall()
        return [r[0] for r in rows]

    def close(self):
        with self._lock:
            self._conn.close()


@dataclass(slots=True)
class Session:
    session_id: str
    mission: MissionSpec
    team_id: str
    world: WorldState
    status: str = "active"  # active | mission_complete | abandoned | ended
    turns: list[dict] = field(default_factory=list)
    rating: Optional[dict] = None
    created_at: str = ""
    ended_at: Optional[str] = None
    dialog_history: list[tuple[str, str]] = field(default_factory=list)
    action_history: list[tuple[Action, bool]] = field(default_factory=list)
    log_events: list[dict] = field(default_factory=list)
    completed_tick: Optional[int] = None
    last_activity: float = 0.0
    metrics_emitted: bool = False
    subgoal_flags: tuple[bool, ...] = ()


class SessionService:
    """Owns sessions, the turn loop, event streams, and metrics emission."""

    def __init__(
        self,
        catalog: list[MissionSpec],
        registry,
        scenes: SceneIndex,
        inference: InferenceClient,
        store: SessionStore,
        metrics: RecordStore,
        team_id: str = "baseline",
        limits: TurnLimits = TurnLimits(),
        raster: tuple[int, int] = DEFAULT_RASTER,
        max_sessions: int = 256,
        clock: Callable[[], float] = time.time,
        id_factory: Optional[Callable[[], str]] = None,
    ):
        self.catalog = {m.mission_id: m for m in catalog}
        self.registry = registry
        self.scenes = scenes
        self.inference = inference
        self.store = store
        self.metrics = metrics
        self.team_id = team_id
        self.limits = limits
        self.raster = raster
        self.max_sessions = max_sessions
        self.clock = clock
        self.id_factory = id_factory or (lambda: uuid.uuid4().hex[:12])
        self._sessions: dict[str, Session] = {}
        self._events: dict[str, EventLog] = {}
        self._turn_locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        self._restore_persisted()

    # -- lifecycle -------------------------------------------------------------

    def _now_iso(self) -> str:
        return datetime.fromtimestamp(self.clock(), tz=timezone.utc).isoformat()

    def _restore_persisted(self):
        for sid in self.store.ids():
            doc = self.store.get(sid)
            if doc is None:
                continue
            mission = self.catalog.get(doc["mission_id"])
            if mission is None:
                continue
            base = init_mission(mission, self.registry, self.scenes)
            world = restore_state(base.scene, doc["world"])
            sess = Session(
                session_id=sid,
                mission=mission,
                team_id=doc.get("team_id", self.team_id),
                world=world,
                status=doc["status"],
                turns=doc.get("turns", []),
                rating=doc.get("rating"),
                created_at=doc.get("created_at", ""),
                ended_at=doc.get("ended_at"),
                dialog_history=[tuple(x) for x in doc.get("dialog_history", [])],
                action_history=[
                    (action_from_doc(a), bool(ok))
                    for a, ok in doc.get("action_history", [])
                ],
                log_events=doc.get("log_events", []),
                completed_tick=doc.get("completed_tick"),
                last_activity=doc.get("last_activity", 0.0),
                metrics_emitted=doc.get("metrics_emitted", False),
                subgoal_flags=tuple(doc.get("subgoal_flags", [])),
            )
            self._sessions[sid] = sess
            self._events[sid] = EventLog()
            self._turn_locks[sid] = threading.Lock()

    def _persist(self, sess: Session):
        self.store.put(sess.session_id, {
            "session_id": sess.session_id,
            "mission_id": sess.mission.mission_id,
            "team_id": sess.team_id,
            "status": sess.status,
            "turns": sess.turns,
            "rating": sess.rating,
            "created_at": sess.created_at,
            "ended_at": sess.ended_at,
            "dialog_history": [list(x) for x in sess.dialog_history],
            "action_history": [
                [action_to_doc(a), ok] for a, ok in sess.action_history
            ],
            "log_events": sess.log_events,
            "completed_tick": sess.completed_tick,
            "last_activity": sess.last_activity,
            "metrics_emitted": sess.metrics_emitted,
            "subgoal_flags": list(sess.subgoal_flags),
            "world": state_doc(sess.world),
        })

    def _get(self, session_id: str) -> Session:
        sess = self._sessions.get(session_id)
        if sess is None:
            raise SessionNotFound(session_id)
        return sess

    def missions(self) -> list[MissionSpec]:
        return [self.catalog[mid] for mid in sorted(self.catalog)]

    def create_session(self, mission_id: str) -> tuple[Session, Observation]:
        mission = self.catalog.get(mission_id)
        if mission is None:
            raise MissionNotFound(mission_id)
        with self._registry_lock:
            active = sum(1 for s in self._sessions.values() if s.status == "active")
            if active >= self.max_sessions:
                raise CapacityExceeded(f"{active} active sessions")
            world = init_mission(mission, self.registry, self.scenes)
            sess = Session(
                session_id=self.id_factory(),
                mission=mission,
                team_id=self.team_id,
                world=world,
                created_at=self._now_iso(),
                last_activity=self.clock(),
                subgoal_flags=check_goals(world, mission).subgoals,
            )
            self._sessions[sess.session_id] = sess
            self._events[sess.session_id] = EventLog()
            self._turn_locks[sess.session_id] = threading.Lock()
        obs = render_observation(world, *self.raster)
        self._emit_frame(sess, obs)
        self._emit(sess, {"event": "mic_open"})
        self._persist(sess)
        return sess, obs

    # -- events ------------------------------------------------------------------

    def _emit(self, sess: Session, event: dict):
        self._events[sess.session_id].emit(event)

    def _emit_frame(self, sess: Session, obs: Observation):
        from arena.protocol import observation_to_doc
        self._emit(sess, {"event": "frame", "observation": observation_to_doc(obs)})

    def subscribe(self, session_id: str, from_start: bool = False) -> Iterator[dict]:
        self._get(session_id)
        return self._events[session_id].subscribe(from_start=from_start)

    # -- the turn loop -------------------------------------------------------------

    def handle_utterance(self, session_id: str, text: str) -> dict:
        sess = self._get(session_id)
        lock = self._turn_locks[session_id]
        if not lock.acquire(blocking=False):
            raise TurnInFlight(session_id)
        try:
            if sess.status != "active":
                raise SessionNotActive(f"session is {sess.status}")
            return self._run_turn(sess, text)
        finally:
            lock.release()

    def _run_turn(self, sess: Session, text: str) -> dict:
        started = self.clock()
        sess.last_activity = started
        turn_index = len(sess.turns)
        sess.dialog_history.append(("user", text))
        sess.log_events.append(
            {"type": "utterance", "speaker": "commander", "text": text}
        )

        executed: list[tuple[Action, ActionResult]] = []
        roundtrips: list[dict] = []
        robot_dialog: Optional[str] = None
        failures = 0
        rounds = 0
        prev_response_id: Optional[str] = None
        mission_completed = False
        turn_over = False

        while not turn_over:
            rounds += 1
            if rounds > self.limits.max_inference_rounds_per_turn:
                break
            obs = render_observation(sess.world, *self.raster)
            request = InferenceRequest(
                session_id=sess.session_id,
                turn_index=turn_index,
                utterance=text,
                observation=obs,
                dialog_history=list(sess.dialog_history),
                action_history=list(sess.action_history),
                previous_response_id=prev_response_id,
            )
            try:
                response = self.inference.infer(request, self.limits.inference_deadline_ms)
            except InferenceTimeout:
                robot_dialog = TIMEOUT_DIALOG
                self._emit(sess, {"event": "robot_dialog", "text": robot_dialog})
                break
            except InferenceProtocolError:
                robot_dialog = TIMEOUT_DIALOG
                self._emit(sess, {"event": "robot_dialog", "text": robot_dialog})
                break
            roundtrips.append(
                {"request_digest": request.digest(), "response": response.to_doc()}
            )
            prev_response_id = response.response_id

            for action in response.actions:
                if action.kind == "Stop":
                    turn_over = True
                    break
                sess.world, result = apply_action(
                    sess.world, action, raster=self.raster
                )
                executed.append((action, result))
                sess.action_history.append((action, result.ok))
                sess.log_events.append({
                    "type": "action",
                    "action": action_to_doc(action),
                    "ok": result.ok,
                    "failure_code": result.failure_code.value if result.failure_code else None,
                    "post_hash": state_hash(sess.world),
                })
                for frame in result.frames:
                    self._emit_frame(sess, frame)
                if action.kind == "Dialog":
                    robot_dialog = action.text
                    self._emit(sess, {"event": "robot_dialog", "text": action.text})
                if action.kind == "Highlight" and result.ok:
                    self._emit(sess, {
                        "event": "highlight",
                        "instance": action.target if isinstance(action.target, str) else None,
                        "duration_ms": HIGHLIGHT_DURATION_MS,
                    })
                if not result.ok:
                    failures += 1
                status = check_goals(sess.world, sess.mission)
                for i, (was, now) in enumerate(zip(sess.subgoal_flags, status.subgoals)):
                    if now and not was:
                        self._emit(sess, {"event": "subgoal_complete", "index": i})
                sess.subgoal_flags = status.subgoals
                if status.overall and not mission_completed:
                    mission_completed = True
                    sess.completed_tick = sess.world.tick
                    sess.status = "mission_complete"
                    self._emit(sess, {"event": "mission_complete",
                                      "tick": sess.world.tick})
                    turn_over = True
                    break
                if len(executed) >= self.limits.max_actions_per_turn:
                    turn_over = True
                    break
                if failures >= self.limits.max_failures_per_turn:
                    turn_over = True
                    break
            if response.dialog and robot_dialog is None:
                robot_dialog = response.dialog
                self._emit(sess, {"event": "robot_dialog", "text": robot_dialog})
            if response.turn_complete:
                turn_over = True

        if robot_dialog:
            sess.dialog_history.append(("robot", robot_dialog))
            sess.log_events.append(
                {"type": "utterance", "speaker": "follower", "text": robot_dialog}
            )

        status = check_goals(sess.world, sess.mission)
        record = {
            "turn_index": turn_index,
            "utterance": text,
            "roundtrips": roundtrips,
            "executed": [
                {
                    "action": action_to_doc(a),
                    "ok": r.ok,
                    "failure_code": r.failure_code.value if r.failure_code else None,
                }
                for a, r in executed
            ],
            "robot_dialog": robot_dialog,
            "mission_status_after": MissionStatus(
                subgoals=status.subgoals,
                overall=status.overall,
                completed_tick=sess.completed_tick,
            ).to_doc(),
            "wall_time_ms": int((self.clock() - started) * 1000),
        }
        sess.turns.append(record)
        sess.last_activity = self.clock()
        self._emit(sess, {"event": "turn_ended", "turn_index": turn_index})
        if sess.status == "active":
            self._emit(sess, {"event": "mic_open"})
        self._persist(sess)
        return record

    # -- rating and finalization -----------------------------------------------------

    def submit_rating(self, session_id: str, score: int,
                      comment: Optional[str] = None) -> Session:
        sess = self._get(session_id)
        if sess.rating is not None:
            raise RatingAlreadySubmitted(session_id)
        if sess.status not in ("mission_complete", "ended"):
            raise SessionNotRatable(f"session is {sess.status}")
        if not isinstance(score, int) or not (1 <= score <= 5):
            raise ScoreOutOfRange(f"score {score!r} outside 1..5")
        sess.rating = {"score": score, "comment": comment}
        sess.ended_at = self._now_iso()
        self._finalize(sess, rating=score)
        return sess

    def end_session(self, session_id: str) -> Session:
        """User-initiated end; session becomes ratable."""
        sess = self._get(session_id)
        if sess.status == "active":
            sess.status = "ended"
            sess.last_activity = self.clock()
            self._persist(sess)
        return sess

    def _finalize(self, sess: Session, rating: Optional[int]):
        if not sess.metrics_emitted:
            self.metrics.append(InteractionRecord(
                team_id=sess.team_id,
                timestamp=self._now_iso(),
                mission_id=sess.mission.mission_id,
                mission_seen=sess.mission.seen,
                success=sess.status == "mission_complete",
                rating=rating,
            ))
            sess.metrics_emitted = True
        self._persist(sess)
        self._events[sess.session_id].close()

    def sweep_abandoned(self, now: Optional[float] = None) -> list[str]:
        """Mark idle sessions abandoned; they count as unsuccessful missions."""
        now = self.clock() if now is None else now
        swept = []
        for sess in list(self._sessions.values()):
            if sess.metrics_emitted:
                continue
            if now - sess.last_activity <= IDLE_TIMEOUT_S:
                continue
            if sess.status == "active" or sess.status == "ended":
                if sess.status == "active":
                    sess.status = "abandoned"
                sess.ended_at = self._now_iso()
                self._finalize(sess, rating=None)
                swept.append(sess.session_id)
            elif sess.status == "mission_complete":
                sess.ended_at = self._now_iso()
                self._finalize(sess, rating=None)
                swept.append(sess.session_id)
        return swept

    # -- export --------------------------------------------------------------------

    def export_session_log(self, session_id: str) -> dict:
        """Self-contained replayable log for the offline harness."""
        sess = self._get(session_id)
        if sess.status == "active":
            raise SessionActive(session_id)
        mission = sess.mission
        base = init_mission(mission, self.registry, self.scenes)
        return {
            "schema": LOG_SCHEMA,
            "session_id": sess.session_id,
            "scene_id": mission.scene_id,
            "mission_id": mission.mission_id,
            "scene_overrides": [
                {"instance": o.instance, "states": dict(o.states)}
                for o in mission.scene_overrides
            ],
            "initial_hash": state_hash(base),
            "events": list(sess.log_events),
            "recorded_final_hash": state_hash(sess.world),
        }
