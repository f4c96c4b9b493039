from __future__ import annotations

import json
import socket
import subprocess
import sys
import threading
import time

import pytest

from oracle_helpers import annotated_forms, oracle_mask
from vgmd.constraint import load_vocab
from vgmd.service import MaskServer, SessionBroker


@pytest.fixture
def broker(toy_vocab6_path):
    return SessionBroker(load_vocab(toy_vocab6_path))


def ask(broker, **request):
    return broker.handle_line(json.dumps(request))


class TestBroker:
    def test_open_mask_advance_close(self, broker, toy_vocab6_path):
        vocab = load_vocab(toy_vocab6_path)
        opened = ask(broker, op="open", target="a b")
        sid = opened["session"]
        forms = annotated_forms("a b", vocab.cfg)
        decoded = b""
        while True:
            mask = ask(broker, op="mask", session=sid)["allowed"]
            assert set(mask) == oracle_mask(decoded, vocab.entries, vocab.eos_id, forms)
            token = mask[-1] if mask[-1] != vocab.eos_id or len(mask) == 1 else mask[0]
            reply = ask(broker, op="advance", session=sid, token=token)
            assert reply["ok"]
            if token != vocab.eos_id:
                decoded += vocab.entries[token]
            if reply["done"]:
                break
        assert ask(broker, op="close", session=sid) == {"ok": True}

    def test_disallowed_token_error(self, broker):
        sid = ask(broker, op="open", target="a b")["session"]
        reply = ask(broker, op="advance", session=sid, token=4)
        assert reply == {"error": "DisallowedToken"}
        # connection-level state is unharmed
        assert "allowed" in ask(broker, op="mask", session=sid)

    def test_malformed_line(self, broker):
        assert broker.handle_line("{nope") == {"error": "BadRequest"}
        assert broker.handle_line('"just a string"') == {"error": "BadRequest"}
        assert ask(broker, op="yodel") == {"error": "BadRequest"}
        assert ask(broker, op="mask") == {"error": "BadRequest"}

    def test_unknown_session(self, broker):
        assert ask(broker, op="mask", session=404) == {"error": "UnknownSession"}

    def test_marker_collision_on_open(self, broker):
        assert ask(broker, op="open", target="a >> b") == {"error": "MarkerCollision"}

    def test_sessions_are_independent(self, broker):
        first = ask(broker, op="open", target="a")["session"]
        second = ask(broker, op="open", target="b")["session"]
        assert first != second
        mask_first = ask(broker, op="mask", session=first)["allowed"]
        mask_second = ask(broker, op="mask", session=second)["allowed"]
        assert mask_first != mask_second


class TestTcp:
    def test_scripted_exchange_over_socket(self, broker):
        server = MaskServer(("127.0.0.1", 0), broker)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            host, port = server.server_address[:2]
            with socket.create_connection((host, port), timeout=5) as conn:
                reader = conn.makefile("r", encoding="utf-8")

                def rpc(**request):
                    conn.sendall((json.dumps(request) + "\n").encode())
                    return json.loads(reader.readline())

                sid = rpc(op="open", target="a")["session"]
                assert rpc(op="mask", session=sid)["allowed"] == [0, 3]
                assert rpc(op="advance", session=sid, token=0) == {"ok": True, "done": False}
                assert rpc(op="advance", session=sid, token=5) == {"ok": True, "done": True}
                assert rpc(op="advance", session=sid, token=0) == {"error": "SessionDone"}
        finally:
            server.shutdown()
            server.server_close()

    def test_concurrent_connections(self, broker):
        server = MaskServer(("127.0.0.1", 0), broker)
        threading.Thread(target=server.serve_forever, daemon=True).start()
        host, port = server.server_address[:2]
        errors = []

        def run_client(target: str):
            try:
                with socket.create_connection((host, port), timeout=5) as conn:
                    reader = conn.makefile("r", encoding="utf-8")

                    def rpc(**request):
                        conn.sendall((json.dumps(request) + "\n").encode())
                        return json.loads(reader.readline())

                    sid = rpc(op="open", target=target)["session"]
                    for _ in range(40):
                        mask = rpc(op="mask", session=sid)["allowed"]
                        reply = rpc(op="advance", session=sid, token=mask[-1])
                        if reply.get("done"):
                            return
                    errors.append(f"{target}: never finished")
            except Exception as exc:  # noqa: BLE001
                errors.append(repr(exc))

        threads = [threading.Thread(target=run_client, args=(t,))
                   for t in ("a b", "b a", "ab", "a")]
        for t in threads:
            t.start()
        for t in threads:
            t.join(timeout=10)
        server.shutdown()
        server.server_close()
        assert errors == []


class TestStdioProcess:
    def test_cli_stdio_transcript(self, toy_vocab6_path):
        script = [
            {"op": "open", "target": "a"},
            {"op": "mask", "session": 1},
            {"op": "advance", "session": 1, "token": 0},
            {"op": "advance", "session": 1, "token": 5},
            {"op": "close", "session": 1},
            {"op": "mask", "session": 1},
        ]
        stdin = "".join(json.dumps(r) + "\n" for r in script)
        proc = subprocess.run(
            [sys.executable, "-m", "vgmd.cli", "mask-serve",
             "--vocab", str(toy_vocab6_path), "--listen", "stdio"],
            input=stdin, capture_output=True, text=True, timeout=30)
        assert proc.returncode == 0
        replies = [json.loads(line) for line in proc.stdout.splitlines() if line.strip()]
        assert replies == [
            {"session": 1},
            {"allowed": [0, 3]},
            {"ok": True, "done": False},
            {"ok": True, "done": True},
            {"ok": True},
            {"error": "UnknownSession"},
        ]
