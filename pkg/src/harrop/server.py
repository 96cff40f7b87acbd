"""REPL and the machine-readable session protocol.

Protocol: newline-delimited JSON over stdio or a local TCP socket.  Requests
carry an id, an op (load | exec | undo | state | theorems) and an argument;
responses echo the id and report status ok | error | proof-complete plus the
state version and rendered subgoals.  Errors leave the session version
unchanged.
"""

from __future__ import annotations

import json
import os
import socket
import sys

from .session import Session, parse_command, split_commands
from .types import HarropError, ProverSyntaxError


def repl(inp=None, out=None):
    inp = inp or sys.stdin
    out = out or sys.stdout
    session = Session(spec_dir=os.getcwd())
    out.write("harrop repl; commands end with '.'; Ctrl-D exits\n")
    buf = ""
    while True:
        out.write("?- " if not buf else "|  ")
        out.flush()
        line = inp.readline()
        if not line:
            break
        buf += line
        if "." not in line:
            continue
        text, buf = buf, ""
        try:
            for res in session.execute_text(text):
                out.write(f"{res}\n")
            _print_state(session, out)
        except HarropError as e:
            out.write(f"error: {type(e).__name__}: {e}\n")
    return 0


def _print_state(session, out):
    st = session.render_state()
    if st["proof"] is None:
        return
    subs = st["subgoals"]
    out.write(f"proof of {st['proof']}: {len(subs)} subgoal(s)\n")
    if subs:
        s = subs[0]
        if s["vars"]:
            out.write("  Variables: " + " ".join(s["vars"]) + "\n")
        for h in s["hyps"]:
            out.write(f"  {h['name']} : {h['formula']}\n")
        out.write("  " + "=" * 40 + "\n")
        out.write("  " + s["goal"] + "\n")


class ProtocolHandler:
    """One session driven by JSON messages."""

    def __init__(self, spec_dir="."):
        self.session = Session(spec_dir=spec_dir)

    def handle(self, msg):
        rid = msg.get("id")
        op = msg.get("op")
        try:
            if op == "load":
                results = self.session.execute_text(
                    f'Specification "{msg["arg"]}".')
                return self._ok(rid, results[-1])
            if op == "exec":
                results = self.session.execute_text(msg["arg"])
                done = any(isinstance(r, str) and r.startswith("theorem") and
                           r.endswith("proved") for r in results)
                resp = self._ok(rid, "; ".join(str(r) for r in results))
                if done:
                    resp["status"] = "proof-complete"
                return resp
            if op == "undo":
                self.session.undo()
                return self._ok(rid, "undone")
            if op == "state":
                return self._ok(rid, "state")
            if op == "theorems":
                resp = self._ok(rid, "theorems")
                resp["theorems"] = sorted(self.session.lemmas)
                return resp
            return self._err(rid, f"unknown op {op!r}")
        except HarropError as e:
            return self._err(rid, f"{type(e).__name__}: {e}")
        except KeyError as e:
            return self._err(rid, f"missing field {e}")

    def _ok(self, rid, message):
        return {
            "id": rid,
            "status": "ok",
            "version": self.session.version,
            "message": message,
            "state": self.session.render_state(),
        }

    def _err(self, rid, message):
        return {
            "id": rid,
            "status": "error",
            "version": self.session.version,
            "error": message,
            "state": self.session.render_state(),
        }


def serve(port=0, inp=None, out=None):
    """Serve the protocol on stdio (port=0) or a local TCP socket."""
    if port == 0:
        handler = ProtocolHandler(spec_dir=os.getcwd())
        inp = inp or sys.stdin
        out = out or sys.stdout
        for line in inp:
            line = line.strip()
            if not line:
                continue
            try:
                msg = json.loads(line)
            except json.JSONDecodeError as e:
                out.write(json.dumps({"id": None, "status": "error",
                                      "error": f"bad json: {e}"}) + "\n")
                out.flush()
                continue
            out.write(json.dumps(handler.handle(msg)) + "\n")
            out.flush()
        return 0
    srv = socket.create_server(("127.0.0.1", port))
    print(f"listening on 127.0.0.1:{srv.getsockname()[1]}", flush=True)
    while True:
        conn, _ = srv.accept()
        handler = ProtocolHandler(spec_dir=os.getcwd())
        with conn, conn.makefile("r") as rf, conn.makefile("w") as wf:
            for line in rf:
                line = line.strip()
                if not line:
                    continue
                try:
                    msg = json.loads(line)
                except json.JSONDecodeError as e:
                    wf.write(json.dumps({"id": None, "status": "error",
                                         "error": f"bad json: {e}"}) + "\n")
                    wf.flush()
                    continue
                wf.write(json.dumps(handler.handle(msg)) + "\n")
                wf.flush()
    return 0
