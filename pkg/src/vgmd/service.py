"""Session wire protocol for the constraint engine.

Newline-delimited JSON over standard streams or a TCP socket. One request
per line; responses are written in request order per connection::

    {"op": "open", "target": "..."}            -> {"session": 1}
    {"op": "mask", "session": 1}               -> {"allowed": [0, 3, 7]}
    {"op": "advance", "session": 1, "token": 3} -> {"ok": true, "done": false}
    {"op": "close", "session": 1}              -> {"ok": true}

Failures answer ``{"error": "<code>"}`` (BadRequest, UnknownSession,
DisallowedToken, SessionDone, MarkerCollision) and keep the connection up.
Session ids are global to one server process, so sessions opened on one
TCP connection may be driven from another. The shared Vocab is immutable;
each session is guarded by its own lock.
"""

from __future__ import annotations

import json
import socketserver
import sys
import threading
from typing import IO

from .constraint import Session, Vocab, advance, allowed_tokens
from .errors import VgmdError


class SessionBroker:
    """Owns the vocab and all open sessions; maps request dicts to replies."""

    def __init__(self, vocab: Vocab):
        self.vocab = vocab
        self._sessions: dict[int, tuple[Session, threading.Lock]] = {}
        self._lock = threading.Lock()
        self._next_id = 1

    def handle_line(self, line: str) -> dict:
        try:
            request = json.loads(line)
        except json.JSONDecodeError:
            return {"error": "BadRequest"}
        if not isinstance(request, dict):
            return {"error": "BadRequest"}
        try:
            return self._dispatch(request)
        except VgmdError as exc:
            return {"error": exc.code}
        except (KeyError, TypeError, ValueError):
            return {"error": "BadRequest"}

    def _dispatch(self, request: dict) -> dict:
        op = request.get("op")
        if op == "open":
            target = request["target"]
            if not isinstance(target, str):
                return {"error": "BadRequest"}
            session = Session(target, self.vocab.cfg)
            with self._lock:
                session_id = self._next_id
                self._next_id += 1
                self._sessions[session_id] = (session, threading.Lock())
            return {"session": session_id}
        if op == "close":
            with self._lock:
                self._sessions.pop(int(request["session"]), None)
            return {"ok": True}
        if op in ("mask", "advance"):
            with self._lock:
                entry = self._sessions.get(int(request["session"]))
            if entry is None:
                return {"error": "UnknownSession"}
            session, lock = entry
            with lock:
                if op == "mask":
                    return {"allowed": allowed_tokens(session, self.vocab).sorted()}
                advance(session, int(request["token"]), self.vocab)
                return {"ok": True, "done": session.done}
        return {"error": "BadRequest"}


def serve_stream(broker: SessionBroker, in_stream: IO[str], out_stream: IO[str]) -> None:
    """Serve requests from a text stream until EOF (stdio mode)."""
    for line in in_stream:
        if not line.strip():
            continue
        response = broker.handle_line(line)
        out_stream.write(json.dumps(response) + "\n")
        out_stream.flush()


class _Handler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        broker: SessionBroker = self.server.broker  # type: ignore[attr-defined]
        for raw in self.rfile:
            line = raw.decode("utf-8", errors="replace")
            if not line.strip():
                continue
            response = broker.handle_line(line)
            self.wfile.write((json.dumps(response) + "\n").encode("utf-8"))
            self.wfile.flush()


class MaskServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], broker: SessionBroker):
        super().__init__(address, _Handler)
        self.broker = broker


def serve_tcp(broker: SessionBroker, host: str = "127.0.0.1", port: int = 0,
              announce: IO[str] | None = None) -> None:
    """Run the TCP server until interrupted; announces the bound port."""
    with MaskServer((host, port), broker) as server:
        bound_host, bound_port = server.server_address[:2]
        banner = {"event": "listening", "host": bound_host, "port": bound_port}
        stream = announce if announce is not None else sys.stdout
        stream.write(json.dumps(banner) + "\n")
        stream.flush()
        server.serve_forever()
