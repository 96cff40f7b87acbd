"""Interactive proof sessions: command parsing and execution, undo history.

A session executes one command at a time; every mutating command pushes an
undo snapshot and bumps the state version.  Errors leave the session at its
prior version.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from . import formulas as F
from . import kernel as K
from . import parser as P
from . import pretty
from . import terms as T
from . import twolevel as TL
from .state import Defs, ProofState, check_formula
from .types import (
    DuplicateName,
    HarropError,
    IllTyped,
    ProverSyntaxError,
    Signature,
    TacticError,
    UnknownName,
)


@dataclass
class Command:
    kind: str
    line: int
    label: str = None
    payload: dict = field(default_factory=dict)


def split_commands(text):
    """Split an input into period-terminated token chunks."""
    toks = P.tokenize(text)
    chunks = []
    cur = []
    for t in toks:
        if t.text == ".":
            if cur:
                chunks.append(cur)
                cur = []
        else:
            cur.append(t)
    if cur:
        t = cur[0]
        raise ProverSyntaxError("command does not end with '.'", t.line, t.col)
    return chunks


TACTICS = ("intros", "induction", "case", "apply", "search", "split", "exists",
           "assert", "cut", "inst", "monotone", "undo", "abort")


def parse_command(chunk):
    """Structural parse of one command chunk; payload parts stay as tokens."""
    t0 = chunk[0]
    line = t0.line

    def ids_from(i):
        out = []
        while i < len(chunk) and chunk[i].kind == "id":
            out.append(chunk[i].text)
            i += 1
        return out, i

    if t0.text == "Specification":
        if len(chunk) != 2 or chunk[1].kind != "str":
            raise ProverSyntaxError("Specification expects a quoted name", line, t0.col)
        return Command("spec", line, payload={"name": chunk[1].text.strip('"')})
    if t0.text == "Kind":
        names, i = ids_from(1)
        if not names or names[-1] != "type":
            raise ProverSyntaxError("Kind declaration needs 'type'", line, t0.col)
        return Command("kind", line, payload={"names": names[:-1]})
    if t0.text == "Type":
        names = []
        i = 1
        while i < len(chunk) and chunk[i].kind == "id":
            names.append(chunk[i].text)
            i += 1
            if i < len(chunk) and chunk[i].text == ",":
                i += 1
            else:
                break
        return Command("type", line, payload={"names": names, "ty": chunk[i:]})
    if t0.text == "Define":
        i = 1
        if chunk[i].kind != "id":
            raise ProverSyntaxError("Define expects a predicate name", line, t0.col)
        pred = chunk[i].text
        i += 1
        if chunk[i].text != ":":
            raise ProverSyntaxError("Define expects ': <type>'", line, t0.col)
        i += 1
        tytoks = []
        while i < len(chunk) and chunk[i].text != "by":
            tytoks.append(chunk[i])
            i += 1
        if i >= len(chunk):
            raise ProverSyntaxError("Define expects 'by'", line, t0.col)
        i += 1
        clauses = []
        cur = []
        depth = 0
        for t in chunk[i:]:
            if t.text in ("(", "{", "["):
                depth += 1
            elif t.text in (")", "}", "]"):
                depth -= 1
            if t.text == ";" and depth == 0:
                clauses.append(cur)
                cur = []
            else:
                cur.append(t)
        clauses.append(cur)
        return Command("define", line, payload={"pred": pred, "ty": tytoks,
                                                "clauses": clauses})
    if t0.text == "Theorem":
        if len(chunk) < 4 or chunk[1].kind != "id" or chunk[2].text != ":":
            raise ProverSyntaxError("Theorem expects 'Theorem name : formula'",
                                    line, t0.col)
        return Command("theorem", line,
                       payload={"name": chunk[1].text, "formula": chunk[3:]})
    # tactic, possibly labeled
    label = None
    i = 0
    if len(chunk) >= 2 and chunk[0].kind == "id" and chunk[1].text == ":" \
            and chunk[0].text not in TACTICS:
        label = chunk[0].text
        i = 2
        if i >= len(chunk):
            raise ProverSyntaxError("label without a tactic", line, t0.col)
    t = chunk[i]
    rest = chunk[i + 1:]
    if t.text == "intros":
        return Command("intros", line, label,
                       {"names": [x.text for x in rest]})
    if t.text == "induction":
        if not rest or rest[0].text != "on":
            raise ProverSyntaxError("induction expects 'on N ...'", line, t.col)
        nums = [int(x.text) for x in rest[1:] if x.kind == "num"]
        if not nums or len(nums) != len(rest) - 1:
            raise ProverSyntaxError("induction expects numeric positions", line, t.col)
        return Command("induction", line, label, {"positions": nums})
    if t.text == "case":
        if len(rest) != 1 or rest[0].kind != "id":
            raise ProverSyntaxError("case expects one hypothesis name", line, t.col)
        return Command("case", line, label, {"hyp": rest[0].text})
    if t.text == "apply":
        if not rest or rest[0].kind != "id":
            raise ProverSyntaxError("apply expects a lemma or hypothesis", line, t.col)
        name = rest[0].text
        args = []
        withs = []
        j = 1
        if j < len(rest) and rest[j].text == "to":
            j += 1
            while j < len(rest) and rest[j].text != "with":
                if rest[j].kind == "id" or rest[j].text == "_":
                    args.append(rest[j].text)
                    j += 1
                else:
                    raise ProverSyntaxError(
                        f"bad apply argument {rest[j].text!r}", line, rest[j].col)
        if j < len(rest):
            if rest[j].text != "with":
                raise ProverSyntaxError("junk after apply", line, rest[j].col)
            groups = []
            cur = []
            depth = 0
            for tk in rest[j + 1:]:
                if tk.text in ("(", "{", "["):
                    depth += 1
                elif tk.text in (")", "}", "]"):
                    depth -= 1
                if tk.text == "," and depth == 0:
                    groups.append(cur)
                    cur = []
                else:
                    cur.append(tk)
            groups.append(cur)
            for g in groups:
                if len(g) < 3 or g[0].kind != "id" or g[1].text != "=":
                    raise ProverSyntaxError("with expects 'x = term'", line, t.col)
                withs.append((g[0].text, g[2:]))
        return Command("apply", line, label,
                       {"name": name, "args": args, "withs": withs})
    if t.text == "search":
        depth = None
        if rest and rest[0].kind == "num":
            depth = int(rest[0].text)
        elif rest:
            raise ProverSyntaxError("search takes an optional depth", line, t.col)
        return Command("search", line, label, {"depth": depth})
    if t.text == "split":
        return Command("split", line, label, {})
    if t.text == "exists":
        return Command("exists", line, label, {"term": rest})
    if t.text == "assert":
        return Command("assert", line, label, {"formula": rest})
    if t.text == "cut":
        if len(rest) != 3 or rest[1].text != "with":
            raise ProverSyntaxError("cut expects 'cut H with H2'", line, t.col)
        return Command("cut", line, label, {"hyp": rest[0].text, "with_hyp": rest[2].text})
    if t.text == "inst":
        if len(rest) < 4 or rest[1].text != "with" or rest[3].text != "=":
            raise ProverSyntaxError("inst expects 'inst H with n = t'", line, t.col)
        return Command("inst", line, label,
                       {"hyp": rest[0].text, "nom": rest[2].text, "term": rest[4:]})
    if t.text == "monotone":
        if len(rest) < 3 or rest[1].text != "with":
            raise ProverSyntaxError("monotone expects 'monotone H with L'", line, t.col)
        return Command("monotone", line, label, {"hyp": rest[0].text, "term": rest[2:]})
    if t.text == "undo":
        return Command("undo", line, label, {})
    if t.text == "abort":
        return Command("abort", line, label, {})
    raise ProverSyntaxError(f"unknown command {t.text!r}", line, t.col)


@dataclass
class Proof:
    name: str
    statement: F.Formula
    subgoals: list


class Session:
    """One prover session: environment, lemma table, live proof, undo stack."""

    def __init__(self, spec_dir="."):
        self.defs = Defs(Signature())
        self.lemmas = {}
        self.proof = None
        self.version = 0
        self.history = []
        self.spec_dir = spec_dir
        self.events = []

    # -- snapshots
    def _snapshot(self):
        return (self.defs.clone(), dict(self.lemmas),
                copy.copy(self.proof) if self.proof else None,
                list(self.proof.subgoals) if self.proof else None)

    def _restore(self, snap):
        self.defs, lemmas, proof, subgoals = snap
        self.lemmas = lemmas
        if proof is not None:
            proof.subgoals = subgoals
        self.proof = proof

    def undo(self):
        if not self.history:
            raise TacticError("nothing to undo")
        self._restore(self.history.pop())
        self.version += 1

    # -- rendering
    def render_state(self):
        if self.proof is None:
            return {"proof": None, "subgoals": []}
        subs = []
        for ps in self.proof.subgoals:
            subs.append({
                "vars": [n for n, _ in ps.vars],
                "hyps": [{"name": n, "formula": pretty.fm(f)} for n, f in ps.hyps],
                "goal": pretty.fm(ps.goal),
            })
        return {"proof": self.proof.name, "subgoals": subs}

    def varctx(self):
        if self.proof and self.proof.subgoals:
            return self.proof.subgoals[0].var_types()
        return {}

    def env(self):
        return P.Env(self.defs.sig, self.defs, self.varctx())

    # -- execution
    def execute(self, cmd):
        """Run one parsed command; raises on error leaving state unchanged."""
        snap = self._snapshot()
        try:
            out = self._execute(cmd)
        except Exception:
            self._restore(snap)
            raise
        self.history.append(snap)
        self.version += 1
        return out

    def execute_text(self, text):
        chunks = split_commands(text)
        results = []
        for ch in chunks:
            cmd = parse_command(ch)
            if cmd.kind == "undo":
                self.undo()
                results.append("undone")
            else:
                results.append(self.execute(cmd))
        return results

    def _need_proof(self):
        if self.proof is None or not self.proof.subgoals:
            raise TacticError("no subgoal to act on")
        return self.proof.subgoals[0]

    def _finish_tactic(self, new_states):
        self.proof.subgoals = list(new_states) + self.proof.subgoals[1:]
        if not self.proof.subgoals:
            self.lemmas[self.proof.name] = self.proof.statement
            name = self.proof.name
            self.proof = None
            return f"theorem {name} proved"
        return "ok"

    def _execute(self, cmd):
        k = cmd.kind
        if k in ("spec", "kind", "type", "define") and self.proof is not None:
            raise TacticError(f"{k} is not allowed in the middle of a proof")
        if k == "spec":
            import os
            path = os.path.join(self.spec_dir, cmd.payload["name"] + ".spec")
            with open(path) as fh:
                text = fh.read()
            sig, prog = P.parse_spec_text(text)
            self.defs = Defs(sig)
            TL.load_specification(self.defs, prog)
            return f"specification {cmd.payload['name']} loaded ({len(prog.clauses)} clauses)"
        if k == "kind":
            for n in cmd.payload["names"]:
                self.defs.sig.add_kind(n)
            return "ok"
        if k == "type":
            p = P.Parser(cmd.payload["ty"], self.env())
            ty = p.parse_ty()
            for n in cmd.payload["names"]:
                self.defs.sig.add_const(n, ty)
            return "ok"
        if k == "define":
            return self._define(cmd)
        if k == "theorem":
            if self.proof is not None:
                raise TacticError("a proof is already in progress")
            name = cmd.payload["name"]
            if name in self.lemmas:
                raise DuplicateName(f"{name} is already proved")
            f, env, inf = P.parse_formula_text(cmd.payload["formula"], self.env())
            fv = F.f_free_vars(f)
            if fv:
                raise IllTyped(f"free variables in statement: {', '.join(sorted(fv))}")
            check_formula(self.defs, f, {})
            ps = ProofState(self.defs, goal=f)
            self.proof = Proof(name, f, [ps])
            return "ok"
        # tactics
        ps = self._need_proof()
        label = cmd.label
        if k == "intros":
            return self._finish_tactic(K.intros(ps, cmd.payload["names"]))
        if k == "induction":
            return self._finish_tactic(K.induction(ps, cmd.payload["positions"]))
        if k == "case":
            return self._finish_tactic(K.case(ps, cmd.payload["hyp"], label=label))
        if k == "apply":
            withs = {}
            for wname, wtoks in cmd.payload["withs"]:
                withs[wname] = P.parse_term_text(wtoks, self.env())
            return self._finish_tactic(K.apply_(
                ps, cmd.payload["name"], cmd.payload["args"], withs,
                self.lemmas, label=label))
        if k == "search":
            depth = cmd.payload["depth"] or 5
            return self._finish_tactic(K.search(ps, depth))
        if k == "split":
            return self._finish_tactic(K.split(ps))
        if k == "exists":
            w = P.parse_term_text(cmd.payload["term"], self.env())
            return self._finish_tactic(K.exists_(ps, w))
        if k == "assert":
            f, _, _ = P.parse_formula_text(cmd.payload["formula"], self.env())
            return self._finish_tactic(K.assert_(ps, f, label=label))
        if k in ("cut", "inst", "monotone"):
            return self._meta(cmd, ps, label)
        if k == "abort":
            self.proof = None
            return "aborted"
        raise TacticError(f"unhandled command {k}")

    def _meta(self, cmd, ps, label):
        k = cmd.kind
        if k == "cut":
            return self._finish_tactic(K.meta(
                ps, "cut", {"hyp": cmd.payload["hyp"],
                            "with_hyp": cmd.payload["with_hyp"]}, label=label))
        if k == "inst":
            nom_name = cmd.payload["nom"]
            if not P.NOM_RE.match(nom_name):
                raise TacticError("inst expects a nominal constant (n1, n2, ...)")
            f = ps.hyp(cmd.payload["hyp"])
            idx = int(nom_name[1:])
            cands = [n for n in F.f_support(f) if n.idx == idx]
            if not cands:
                raise TacticError(f"{nom_name} does not occur in {cmd.payload['hyp']}")
            witness = P.parse_term_text(cmd.payload["term"], self.env())
            return self._finish_tactic(K.meta(
                ps, "inst", {"hyp": cmd.payload["hyp"], "nom": cands[0],
                             "witness": witness}, label=label))
        if k == "monotone":
            target = P.parse_term_text(cmd.payload["term"], self.env())
            return self._finish_tactic(K.meta(
                ps, "monotone", {"hyp": cmd.payload["hyp"], "target": target},
                label=label))

    def _define(self, cmd):
        pred = cmd.payload["pred"]
        p = P.Parser(cmd.payload["ty"], self.env())
        ty = p.parse_ty()
        clauses = []
        for ctoks in cmd.payload["clauses"]:
            clauses.append(self._parse_def_clause(pred, ty, ctoks))
        self.defs.add_definition(pred, ty, clauses)
        return f"{pred} defined"
    def _parse_def_clause(self, pred, predty, toks):
        inf = P.TyInf()
        nabla = []
        i = 0
        if toks and toks[0].text == "nabla":
            i = 1
            while toks[i].kind == "id":
                nabla.append(toks[i].text)
                i += 1
            if toks[i].text != ",":
                raise ProverSyntaxError("nabla prefix needs ','", toks[i].line, toks[i].col)
            i += 1
        varctx = {n: inf.fresh() for n in nabla}
        env = P.Env(self.defs.sig, self.defs, varctx, implicit={},
                    pending={pred: predty})
        parser = P.Parser(toks[i:], env, inf)
        head = parser.parse_atom_formula()
        body = F.Top()
        if parser.eat(":="):
            body = parser.parse_formula()
        if parser.i != len(parser.toks):
            parser.err("trailing tokens in clause")
        head = P.resolve_formula(inf, head)
        body = P.resolve_formula(inf, body)
        univ = tuple((n, inf.resolve(t)) for n, t in env.implicit.items())
        nabla_t = tuple((n, inf.resolve(varctx[n])) for n in nabla)
        if not isinstance(head, F.Atom) or head.pred != pred:
            raise ProverSyntaxError(f"clause head must be a {pred} atom",
                                    toks[0].line, toks[0].col)
        return F.DefClause(univ, nabla_t, F.f_norm(head), F.f_norm(body))
