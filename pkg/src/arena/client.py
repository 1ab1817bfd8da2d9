"""HTTP clients: inference-service caller, orchestrator driver, EDH adapters."""

from __future__ import annotations

import json
import socket
import urllib.error
import urllib.request
from typing import Callable, Iterator, Optional

from arena.core.actions import Action
from arena.edh import EDHInstance, ModelAdapter
from arena.errors import InferenceProtocolError, InferenceTimeout
from arena.orchestrator import InferenceClient
from arena.protocol import (
    InferenceRequest,
    InferenceResponse,
    parse_wire,
    serialize,
)


def _post_json(url: str, payload: bytes, timeout_s: float) -> bytes:
    req = urllib.request.Request(
        url, data=payload, headers={"Content-Type": "application/json"}, method="POST"
    )
    with urllib.request.urlopen(req, timeout=timeout_s) as resp:
        return resp.read()


class HttpInferenceClient(InferenceClient):
    """Speaks the wire protocol to a remote action-inference service."""

    def __init__(self, endpoint: str):
        self.endpoint = endpoint.rstrip("/")

    def infer(self, request: InferenceRequest, deadline_ms: int) -> InferenceResponse:
        try:
            raw = _post_json(
                f"{self.endpoint}/infer", serialize(request), deadline_ms / 1000.0
            )
        except (socket.timeout, TimeoutError) as exc:
            raise InferenceTimeout(str(exc)) from exc
        except urllib.error.URLError as exc:
            if isinstance(getattr(exc, "reason", None), (socket.timeout, TimeoutError)):
                raise InferenceTimeout(str(exc)) from exc
            raise InferenceProtocolError(str(exc)) from exc
        try:
            message = parse_wire(raw)
        except Exception as exc:
            raise InferenceProtocolError(str(exc)) from exc
        if not isinstance(message, InferenceResponse):
            raise InferenceProtocolError("service answered with a non-response")
        return message

    def healthy(self) -> bool:
        try:
            with urllib.request.urlopen(f"{self.endpoint}/healthz", timeout=2) as resp:
                return json.loads(resp.read()).get("ok") is True
        except Exception:
            return False


class OrchestratorClient:
    """Minimal driver for the orchestrator HTTP API (CLI, tests, transcripts)."""

    def __init__(self, base_url: str, timeout_s: float = 30.0):
        self.base = base_url.rstrip("/")
        self.timeout_s = timeout_s

    def _post(self, path: str, doc: dict) -> dict:
        raw = _post_json(
            f"{self.base}{path}", json.dumps(doc).encode("utf-8"), self.timeout_s
        )
        return json.loads(raw)

    def _get(self, path: str) -> dict:
        with urllib.request.urlopen(f"{self.base}{path}", timeout=self.timeout_s) as resp:
            return json.loads(resp.read())

    def missions(self) -> list[dict]:
        return self._get("/missions")["missions"]

    def create_session(self, mission_id: str) -> dict:
        return self._post("/sessions", {"mission_id": mission_id})

    def utterance(self, session_id: str, text: str) -> dict:
        return self._post(f"/sessions/{session_id}/utterance", {"text": text})

    def rate(self, session_id: str, score: int, comment: Optional[str] = None) -> dict:
        return self._post(f"/sessions/{session_id}/rating",
                          {"score": score, "comment": comment})

    def end(self, session_id: str) -> dict:
        return self._post(f"/sessions/{session_id}/end", {})

    def session(self, session_id: str) -> dict:
        return self._get(f"/sessions/{session_id}")

    def export_log(self, session_id: str) -> dict:
        return self._get(f"/sessions/{session_id}/log")

    def events(self, session_id: str, replay: bool = True,
               timeout_s: float = 10.0) -> Iterator[dict]:
        """Yield stream events until the server closes the stream."""
        url = f"{self.base}/sessions/{session_id}/events"
        if replay:
            url += "?replay=1"
        with urllib.request.urlopen(url, timeout=timeout_s) as resp:
            for line in resp:
                line = line.strip()
                if line:
                    yield json.loads(line)


class InferenceEDHAdapter(ModelAdapter):
    """Drives any inference function through the offline protocol.

    The service returns action batches; this adapter feeds them to the runner
    one at a time and re-requests on an empty queue. A turn-complete response
    without actions reads as Stop.
    """

    def __init__(self, infer_fn: Callable[[InferenceRequest], InferenceResponse],
                 name: str = "service"):
        self.infer_fn = infer_fn
        self.name = name
        self._runs = 0

    def session(self, instance: EDHInstance):
        self._runs += 1
        session_id = f"edh-{instance.instance_id}-{self._runs}"
        utterance = next(
            (text for speaker, text in reversed(instance.dialog_history)
             if speaker in ("commander", "user")),
            instance.dialog_history[-1][1],
        )
        queue: list[Action] = []
        state = {"prev": None, "done": False}

        def predict(dialog, history, obs) -> Action:
            while not queue:
                if state["done"]:
                    return Action("Stop")
                request = InferenceRequest(
                    session_id=session_id,
                    turn_index=0,
                    utterance=utterance,
                    observation=obs,
                    dialog_history=list(dialog),
                    action_history=list(history),
                    previous_response_id=state["prev"],
                    mode="edh",
                )
                response = self.infer_fn(request)
                state["prev"] = response.response_id
                if response.turn_complete:
                    state["done"] = True
                queue.extend(response.actions)
                if not response.actions and response.turn_complete:
                    return Action("Stop")
            return queue.pop(0)

        return predict


def remote_edh_adapter(endpoint: str, deadline_ms: int = 10000) -> InferenceEDHAdapter:
    client = HttpInferenceClient(endpoint)
    return InferenceEDHAdapter(
        lambda req: client.infer(req, deadline_ms), name=f"remote:{endpoint}"
    )
