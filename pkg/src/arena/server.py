"""HTTP surfaces: the orchestrator API and the inference-service wrapper.

Both run on the stdlib threading HTTP server: no framework, one process,
deterministic under test. The event stream is newline-delimited JSON pushed
over a chunked response.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Optional
from pathlib import Path

from arena.errors import (
    ArenaError,
    CapacityExceeded,
    CoordinateOutOfBounds,
    MalformedPayload,
    MissionNotFound,
    RatingAlreadySubmitted,
    SchemaError,
    SchemaVersionUnsupported,
    ScoreOutOfRange,
    SessionActive,
    SessionNotActive,
    SessionNotFound,
    SessionNotRatable,
    TurnInFlight,
)
from arena.orchestrator import SessionService
from arena.protocol import InferenceRequest, parse_wire, serialize

_STATUS = {
    MissionNotFound: 404,
    SessionNotFound: 404,
    TurnInFlight: 409,
    RatingAlreadySubmitted: 409,
    SessionNotRatable: 409,
    SessionNotActive: 409,
    SessionActive: 409,
    ScoreOutOfRange: 400,
    MalformedPayload: 400,
    SchemaError: 400,
    SchemaVersionUnsupported: 400,
    CoordinateOutOfBounds: 400,
    CapacityExceeded: 429,
}


def _status_for(exc: Exception) -> int:
    for klass, code in _STATUS.items():
        if isinstance(exc, klass):
            return code
    return 500 if not isinstance(exc, ArenaError) else 422


class _JsonHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    def _json_body(self) -> dict:
        raw = self._body()
        if not raw:
            return {}
        try:
            doc = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise MalformedPayload(str(exc)) from exc
        if not isinstance(doc, dict):
            raise MalformedPayload("body must be a JSON object")
        return doc

    def _send_json(self, doc, status: int = 200):
        payload = json.dumps(doc).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def _send_error_doc(self, exc: Exception):
        self._send_json(
            {"error": type(exc).__name__, "message": str(exc)},
            status=_status_for(exc),
        )


class OrchestratorHandler(_JsonHandler):
    service: SessionService  # set on the server class
    static_dir: Optional[Path] = None

    # -- routing ---------------------------------------------------------------

    def do_GET(self):
        try:
            path, _, query = self.path.partition("?")
            parts = [p for p in path.split("/") if p]
            if path == "/healthz":
                return self._send_json({"ok": True})
            if path == "/missions":
                return self._send_json({"missions": [
                    m.to_doc() for m in self.service.missions()
                ]})
            if len(parts) == 2 and parts[0] == "sessions":
                return self._send_json(self._session_summary(parts[1]))
            if len(parts) == 3 and parts[0] == "sessions" and parts[2] == "events":
                return self._stream_events(parts[1], "replay=1" in query)
            if len(parts) == 3 and parts[0] == "sessions" and parts[2] == "log":
                return self._send_json(self.service.export_session_log(parts[1]))
            return self._serve_static(path)
        except Exception as exc:
            try:
                self._send_error_doc(exc)
            except (BrokenPipeError, ConnectionResetError):
                pass

    def do_POST(self):
        try:
            parts = [p for p in self.path.split("?")[0].split("/") if p]
            body = self._json_body()
            if parts == ["sessions"]:
                mission_id = body.get("mission_id", "")
                session, obs = self.service.create_session(mission_id)
                from arena.protocol import observation_to_doc
                return self._send_json({
                    "session_id": session.session_id,
                    "mission": session.mission.to_doc(),
                    "observation": observation_to_doc(obs),
                }, status=201)
            if len(parts) == 3 and parts[0] == "sessions":
                sid, verb = parts[1], parts[2]
                if verb == "utterance":
                    text = body.get("text", "")
                    if not isinstance(text, str) or not text.strip():
                        raise MalformedPayload("utterance text required")
                    return self._send_json(self.service.handle_utterance(sid, text))
                if verb == "rating":
                    session = self.service.submit_rating(
                        sid, body.get("score"), body.get("comment")
                    )
                    return self._send_json(self._session_summary(sid))
                if verb == "end":
                    self.service.end_session(sid)
                    return self._send_json(self._session_summary(sid))
            raise SessionNotFound(self.path)
        except Exception as exc:
            try:
                self._send_error_doc(exc)
            except (BrokenPipeError, ConnectionResetError):
                pass

    # -- pieces ----------------------------------------------------------------

    def _session_summary(self, session_id: str) -> dict:
        sess = self.service._get(session_id)
        return {
            "session_id": sess.session_id,
            "mission_id": sess.mission.mission_id,
            "status": sess.status,
            "turns": len(sess.turns),
            "rating": sess.rating,
            "created_at": sess.created_at,
            "ended_at": sess.ended_at,
            "completed_tick": sess.completed_tick,
            "subgoals": list(sess.subgoal_flags),
        }

    def _stream_events(self, session_id: str, replay: bool):
        iterator = self.service.subscribe(session_id, from_start=replay)
        self.send_response(200)
        self.send_header("Content-Type", "application/x-ndjson")
        self.send_header("Cache-Control", "no-store")
        self.send_header("Transfer-Encoding", "chunked")
        self.end_headers()
        try:
            for event in iterator:
                line = json.dumps(event).encode("utf-8") + b"\n"
                self.wfile.write(f"{len(line):x}\r\n".encode("ascii"))
                self.wfile.write(line + b"\r\n")
                self.wfile.flush()
            self.wfile.write(b"0\r\n\r\n")
        except (BrokenPipeError, ConnectionResetError):
            pass

    def _serve_static(self, path: str):
        if self.static_dir is None:
            raise SessionNotFound(path)
        name = "index.html" if path in ("", "/") else path.lstrip("/")
        target = (self.static_dir / name).resolve()
        if not str(target).startswith(str(self.static_dir.resolve())) or not target.is_file():
            raise SessionNotFound(path)
        mime = {
            ".html": "text/html", ".js": "text/javascript",
            ".css": "text/css", ".json": "application/json",
            ".map": "application/json",
        }.get(target.suffix, "application/octet-stream")
        payload = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", mime)
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)


class InferenceHandler(_JsonHandler):
    infer_fn: Callable  # set on the server class

    def do_GET(self):
        if self.path.split("?")[0] == "/healthz":
            return self._send_json({"ok": True})
        return self._send_json({"error": "NotFound", "message": self.path}, status=404)

    def do_POST(self):
        try:
            if self.path.split("?")[0] != "/infer":
                return self._send_json(
                    {"error": "NotFound", "message": self.path}, status=404
                )
            message = parse_wire(self._body())
            if not isinstance(message, InferenceRequest):
                raise MalformedPayload("expected a request message")
            response = self.infer_fn(message)
            payload = serialize(response)
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)
        except Exception as exc:
            try:
                self._send_error_doc(exc)
            except (BrokenPipeError, ConnectionResetError):
                pass


class ArenaServer:
    """A threading HTTP server wired to a handler class; test-friendly."""

    def __init__(self, handler_cls, host: str = "127.0.0.1", port: int = 0, **attrs):
        handler = type(handler_cls.__name__, (handler_cls,), attrs)
        self.httpd = ThreadingHTTPServer((host, port), handler)
        self.httpd.daemon_threads = True
        self._thread: Optional[threading.Thread] = None

    @property
    def port(self) -> int:
        return self.httpd.server_address[1]

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "ArenaServer":
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self):
        self.httpd.serve_forever()

    def stop(self):
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)


def orchestrator_server(service: SessionService, host: str = "127.0.0.1",
                        port: int = 0, static_dir: Optional[Path] = None) -> ArenaServer:
    return ArenaServer(OrchestratorHandler, host, port,
                       service=service, static_dir=static_dir)


def inference_server(infer_fn: Callable, host: str = "127.0.0.1",
                     port: int = 0) -> ArenaServer:
    return ArenaServer(InferenceHandler, host, port, infer_fn=infer_fn)
