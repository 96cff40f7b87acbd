"""Batch checking of theorem files and one-shot specification queries."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from . import parser as P
from .session import Session, parse_command, split_commands
from .speclogic import solve
from .types import HarropError, ProverSyntaxError


@dataclass
class TheoremResult:
    name: str
    status: str  # proved | failed
    line: int = 0
    error: str = ""


@dataclass
class Report:
    path: str
    theorems: list = field(default_factory=list)
    error: str = ""

    @property
    def ok(self):
        return not self.error and all(t.status == "proved" for t in self.theorems)

    def render(self):
        lines = [f"checking {self.path}"]
        if self.error:
            lines.append(f"  error: {self.error}")
        for t in self.theorems:
            if t.status == "proved":
                lines.append(f"  {t.name}: proved")
            else:
                lines.append(f"  {t.name}: FAILED at line {t.line}: {t.error}")
        tally = sum(1 for t in self.theorems if t.status == "proved")
        lines.append(f"{tally}/{len(self.theorems)} theorems proved")
        return "\n".join(lines)


def check_file(path, depth=None, trace=False):
    """Execute a theorem file; deterministic report, one entry per theorem."""
    report = Report(path)
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        report.error = str(e)
        return report
    session = Session(spec_dir=os.path.dirname(path) or ".")
    try:
        chunks = split_commands(text)
        cmds = [parse_command(ch) for ch in chunks]
    except ProverSyntaxError as e:
        report.error = str(e)
        return report
    current = None
    skipping = False
    for cmd in cmds:
        if cmd.kind == "theorem":
            if current is not None and session.proof is not None:
                current.status = "failed"
                current.line = cmd.line
                current.error = "proof is incomplete"
                session.execute(parse_command(P.tokenize("abort")))
            skipping = False
            current = TheoremResult(cmd.payload["name"], "failed")
            report.theorems.append(current)
        elif skipping and cmd.kind not in ("define", "spec", "kind", "type"):
            continue
        try:
            out = session.execute(cmd)
        except HarropError as e:
            if current is not None and cmd.kind != "theorem":
                current.status = "failed"
                current.line = cmd.line
                current.error = f"{type(e).__name__}: {e}"
                skipping = True
                if session.proof is not None:
                    session.execute(parse_command(P.tokenize("abort")))
            else:
                report.error = f"line {cmd.line}: {type(e).__name__}: {e}"
                return report
            continue
        if current is not None and session.proof is None and current.status != "proved":
            if isinstance(out, str) and out.startswith("theorem"):
                current.status = "proved"
                skipping = False
    if session.proof is not None and current is not None:
        if current.status != "proved" and not current.error:
            current.error = "proof is incomplete at end of file"
    return report


def query(spec_path, goal_text, depth=50, want_trace=False):
    """Run the executable interpreter on a goal over a specification file."""
    with open(spec_path) as fh:
        text = fh.read()
    sig, prog = P.parse_spec_text(text)
    toks = P.tokenize(goal_text)
    inf = P.TyInf()
    env = P.Env(sig, implicit={})
    parser = P.Parser(toks, env, inf)
    raw, ty = parser.parse_term()
    if parser.i != len(parser.toks):
        parser.err("trailing tokens in goal")
    inf.unify(ty, P.OTY, "(query goal)")
    from . import terms as T
    goal = T.norm(P.resolve_term(inf, raw))
    qvars = list(env.implicit)
    from .unify import UnifyState
    st = UnifyState(flex=frozenset(qvars))
    out = solve(prog, [], goal, depth=depth, state=st)
    lines = [out.status]
    if out.ok:
        if qvars:
            for v in qvars:
                sol = out.state.apply(T.Var(v, inf.resolve(env.implicit[v])))
                lines.append(f"  {v} = {sol}")
        if want_trace:
            for e in out.trace:
                lines.append("  " + " ".join(str(x) for x in e))
    return out, "\n".join(lines)
