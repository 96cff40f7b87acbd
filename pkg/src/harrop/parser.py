"""Concrete syntax: specification files, theorem files, formulas and terms.

Specification syntax:
    kind tm type.            type app tm -> tm -> tm.
    Name : head :- g1, g2.   pi X\\ G, => and & inside goals.

Theorem syntax mirrors the usual tactic-prover style: Specification, Kind,
Type, Define ... by c1 ; c2., Theorem n : F. followed by tactic lines, with
formulas built from forall/exists/nabla, ->, /\\, \\/, =, {L |- G} and
{L, [F] |- A}.  Capitalized identifiers are implicitly quantified in clauses
(only); nominal constants are written n1, n2, ...
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import formulas as F
from . import terms as T
from .speclogic import Program, s_and, s_imp, s_pi, CONSC, NILC
from .types import (
    CONS,
    NIL,
    OLIST,
    OTY,
    PROP,
    IllTyped,
    ProverSyntaxError,
    Signature,
    Ty,
    UnknownName,
    arrow,
    base,
)

TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<comment>%[^\n]*)
      | (?P<str>"[^"]*")
      | (?P<num>\d+)
      | (?P<id>[A-Za-z_][A-Za-z0-9_']*)
      | (?P<op>:-|:=|\|-|->|=>|/\\|\\/|::|[(){}\[\],.;:=&\\_])
    """,
    re.VERBOSE,
)

NOM_RE = re.compile(r"^n[0-9]+$")


@dataclass
class Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text):
    toks = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = TOKEN_RE.match(text, pos)
        if not m:
            raise ProverSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind not in ("ws", "comment"):
            toks.append(Tok(kind, s, line, col))
        nl = s.count("\n")
        if nl:
            line += nl
            col = len(s) - s.rfind("\n")
        else:
            col += len(s)
        pos = m.end()
    return toks


class TyInf:
    """Union-find over type metavariables (written '?n').

    Types are kept in spine form, so a metavariable in result position may
    later expand into further arrows; `walk` splices such bindings.
    """

    def __init__(self):
        self.n = 0
        self.m = {}

    def fresh(self):
        self.n += 1
        return Ty((), f"?{self.n}")

    def _is_mname(self, head):
        return head.startswith("?")

    def is_meta(self, ty):
        ty = self.walk(ty)
        return not ty.args and self._is_mname(ty.head)

    def walk(self, ty):
        while self._is_mname(ty.head) and ty.head in self.m:
            b = self.m[ty.head]
            ty = Ty(ty.args + b.args, b.head)
        return ty

    def occurs(self, key, ty):
        ty = self.walk(ty)
        if ty.head == key:
            return True
        return any(self.occurs(key, a) for a in ty.args)

    def _bind(self, key, ty, where):
        if self.occurs(key, ty):
            raise IllTyped(f"circular type constraint {where}")
        self.m[key] = ty

    def unify(self, a, b, where=""):
        a, b = self.walk(a), self.walk(b)
        if a == b:
            return
        m, n = len(a.args), len(b.args)
        amet, bmet = self._is_mname(a.head), self._is_mname(b.head)
        if m == n:
            for x, y in zip(a.args, b.args):
                self.unify(x, y, where)
            if a.head == b.head:
                return
            if amet:
                self._bind(a.head, Ty((), b.head), where)
            elif bmet:
                self._bind(b.head, Ty((), a.head), where)
            else:
                raise IllTyped(
                    f"type mismatch: {self.resolve(a, True)} vs {self.resolve(b, True)} {where}")
            return
        if m > n:
            a, b = b, a
            m, n = n, m
            amet, bmet = bmet, amet
        # now m < n: a's head must absorb the extra arrows
        if not amet:
            raise IllTyped(
                f"type mismatch: {self.resolve(a, True)} vs {self.resolve(b, True)} {where}")
        for x, y in zip(a.args, b.args[:m]):
            self.unify(x, y, where)
        self._bind(a.head, Ty(b.args[m:], b.head), where)

    def resolve(self, ty, partial=False):
        ty = self.walk(ty)
        if self._is_mname(ty.head):
            if partial:
                return Ty(tuple(self.resolve(a, True) for a in ty.args), ty.head)
            raise IllTyped("cannot infer a type; add an annotation")
        return Ty(tuple(self.resolve(a, partial) for a in ty.args), ty.head)


def resolve_term(inf, t):
    if isinstance(t, T.Const):
        return T.Const(t.name, inf.resolve(t.ty))
    if isinstance(t, T.Var):
        return T.Var(t.name, inf.resolve(t.ty))
    if isinstance(t, T.Nom):
        return T.Nom(inf.resolve(t.ty), t.idx)
    if isinstance(t, T.Bound):
        return t
    if isinstance(t, T.Lam):
        return T.Lam(inf.resolve(t.ty), resolve_term(inf, t.body), t.hint)
    if isinstance(t, T.App):
        return T.App(resolve_term(inf, t.head),
                     tuple(resolve_term(inf, a) for a in t.args))
    raise IllTyped(f"cannot resolve {t!r}")


def resolve_formula(inf, f):
    if isinstance(f, (F.Top, F.Bot)):
        return f
    if isinstance(f, F.And):
        return F.And(resolve_formula(inf, f.left), resolve_formula(inf, f.right))
    if isinstance(f, F.Or):
        return F.Or(resolve_formula(inf, f.left), resolve_formula(inf, f.right))
    if isinstance(f, F.Imp):
        return F.Imp(resolve_formula(inf, f.left), resolve_formula(inf, f.right))
    if isinstance(f, F.Eq):
        return F.Eq(resolve_term(inf, f.left), resolve_term(inf, f.right))
    if isinstance(f, F.Quant):
        return F.Quant(f.q, inf.resolve(f.ty), resolve_formula(inf, f.body), f.hint)
    if isinstance(f, F.Atom):
        return F.Atom(f.pred, tuple(resolve_term(inf, a) for a in f.args), f.ann)
    raise IllTyped(f"cannot resolve formula {f!r}")


@dataclass
class Env:
    """Name-resolution context for elaboration."""

    sig: Signature
    defs: object = None  # Defs or None
    varctx: dict = field(default_factory=dict)  # eigenvariables in scope
    implicit: object = None  # dict collecting capitalized clause variables
    pending: dict = field(default_factory=dict)  # predicates being defined

    def pred_ty(self, name, inf):
        """Arrow type of a reasoning-level predicate, or None."""
        if name == "member":
            return arrow(OTY, arrow(OLIST, PROP))
        if name in ("atomic", "prog"):
            return arrow(OTY, PROP)
        if name == "name":
            return arrow(inf.fresh(), PROP)
        if name in self.pending:
            return self.pending[name]
        if self.defs is not None:
            d = self.defs.defs.get(name)
            if d is not None and name not in ("seq", "bc"):
                return d.ty
        return None


class Parser:
    def __init__(self, toks, env, inf=None):
        self.toks = toks
        self.i = 0
        self.env = env
        self.inf = inf or TyInf()
        self.binders = []  # innermost last: (name, Ty)

    # -- cursor helpers
    def peek(self, k=0):
        if self.i + k < len(self.toks):
            return self.toks[self.i + k]
        return Tok("eof", "<eof>", 0, 0)

    def next(self):
        t = self.peek()
        self.i += 1
        return t

    def expect(self, text):
        t = self.next()
        if t.text != text:
            raise ProverSyntaxError(f"expected {text!r}, found {t.text!r}", t.line, t.col)
        return t

    def at(self, text):
        return self.peek().text == text

    def eat(self, text):
        if self.at(text):
            self.next()
            return True
        return False

    def err(self, msg):
        t = self.peek()
        raise ProverSyntaxError(msg, t.line, t.col)

    def save(self):
        return self.i

    def restore(self, mark):
        self.i = mark

    # -- types
    def parse_ty(self):
        left = self.parse_ty1()
        if self.eat("->"):
            return arrow(left, self.parse_ty())
        return left

    def parse_ty1(self):
        t = self.next()
        if t.text == "(":
            ty = self.parse_ty()
            self.expect(")")
            return ty
        if t.kind != "id":
            raise ProverSyntaxError(f"expected a type, found {t.text!r}", t.line, t.col)
        return base(t.text)

    # -- terms
    def lookup(self, name, tok):
        for j in range(len(self.binders) - 1, -1, -1):
            bn, bty = self.binders[j]
            if bn == name:
                return T.Bound(len(self.binders) - 1 - j), bty
        if name in self.env.varctx:
            ty = self.env.varctx[name]
            return T.Var(name, ty), ty
        if name in self.env.sig.consts:
            ty = self.env.sig.consts[name]
            return T.Const(name, ty), ty
        if name == "pi":
            tau = self.inf.fresh()
            ty = arrow(arrow(tau, OTY), OTY)
            return T.Const("pi", ty), ty
        pty = self.env.pred_ty(name, self.inf)
        if pty is not None:
            return T.Const(name, pty), pty
        if NOM_RE.match(name):
            ty = self.inf.fresh()
            return T.Nom(ty, int(name[1:])), ty
        if (name[0].isupper() or name[0] == "_") and self.env.implicit is not None:
            if name not in self.env.implicit:
                self.env.implicit[name] = self.inf.fresh()
            ty = self.env.implicit[name]
            return T.Var(name, ty), ty
        raise ProverSyntaxError(f"unknown name {name}", tok.line, tok.col)

    def parse_term(self, stop=()):
        return self.parse_cons(stop)

    def parse_cons(self, stop):
        left, lty = self.parse_imp_term(stop)
        if self.at("::"):
            self.next()
            right, rty = self.parse_cons(stop)
            self.inf.unify(lty, OTY, "(:: element)")
            self.inf.unify(rty, OLIST, "(:: tail)")
            return T.App(CONSC, (left, right)), OLIST
        return left, lty

    def parse_imp_term(self, stop):
        left, lty = self.parse_and_term(stop)
        if self.at("=>"):
            self.next()
            right, rty = self.parse_imp_term(stop)
            self.inf.unify(lty, OTY, "(=>)")
            self.inf.unify(rty, OTY, "(=>)")
            return s_imp(left, right), OTY
        return left, lty

    def parse_and_term(self, stop):
        left, lty = self.parse_app(stop)
        while self.at("&"):
            self.next()
            right, rty = self.parse_app(stop)
            self.inf.unify(lty, OTY, "(&)")
            self.inf.unify(rty, OTY, "(&)")
            left, lty = s_and(left, right), OTY
        return left, lty

    APP_STOP = {")", "]", "}", ",", ".", ";", "::", "=>", "&", "|-", "->", "/\\",
                "\\/", "=", ":=", ":", "eof", "to", "with", "by", "on"}

    def parse_app(self, stop):
        head, hty = self.parse_atom_term(stop)
        args = []
        argtys = []
        while True:
            t = self.peek()
            if t.text in self.APP_STOP or t.text in stop or t.kind == "num":
                break
            if t.kind not in ("id",) and t.text not in ("(",):
                break
            if t.kind == "id" and self.peek(1).text == "\\":
                a, aty = self.parse_atom_term(stop)
            else:
                a, aty = self.parse_atom_term(stop)
            args.append(a)
            argtys.append(aty)
        if not args:
            return head, hty
        res = self.inf.fresh()
        want = res
        for aty in reversed(argtys):
            want = arrow(aty, want)
        self.inf.unify(hty, want, f"(application of {head})")
        return T.app(head, tuple(args)), res

    def parse_atom_term(self, stop):
        t = self.peek()
        if t.text == "(":
            self.next()
            inner, ty = self.parse_term()
            self.expect(")")
            return inner, ty
        if t.kind == "id" and self.peek(1).text == "\\":
            name = self.next().text
            self.next()  # backslash
            bty = self.inf.fresh()
            self.binders.append((name, bty))
            body, ty = self.parse_term(stop)
            self.binders.pop()
            return T.Lam(bty, body, name), arrow(bty, ty)
        if t.kind == "id":
            self.next()
            return self.lookup(t.text, t)
        raise ProverSyntaxError(f"expected a term, found {t.text!r}", t.line, t.col)

    # -- formulas
    def parse_formula(self):
        t = self.peek()
        if t.text in ("forall", "exists", "nabla"):
            self.next()
            q = t.text
            binders = []
            while True:
                b = self.peek()
                if b.text == ",":
                    break
                if b.text == "(":
                    self.next()
                    names = []
                    while self.peek().kind == "id":
                        names.append(self.next().text)
                    self.expect(":")
                    ty = self.parse_ty()
                    self.expect(")")
                    binders.extend((n, ty) for n in names)
                elif b.kind == "id":
                    self.next()
                    binders.append((b.text, self.inf.fresh()))
                else:
                    self.err("expected a binder")
            self.expect(",")
            if not binders:
                self.err("quantifier with no binders")
            for n, ty in binders:
                self.binders.append((n, ty))
            body = self.parse_formula()
            for n, ty in reversed(binders):
                self.binders.pop()
                body = F.Quant(q, ty, body, n)
            return body
        return self.parse_imp_formula()

    def parse_imp_formula(self):
        left = self.parse_or_formula()
        if self.eat("->"):
            return F.Imp(left, self.parse_formula())
        return left

    def parse_or_formula(self):
        left = self.parse_and_formula()
        if self.eat("\\/"):
            return F.Or(left, self.parse_or_formula())
        return left

    def parse_and_formula(self):
        left = self.parse_unit_formula()
        if self.eat("/\\"):
            return F.And(left, self.parse_and_formula())
        return left

    def parse_unit_formula(self):
        t = self.peek()
        if t.text == "true":
            self.next()
            return F.Top()
        if t.text == "false":
            self.next()
            return F.Bot()
        if t.text == "{":
            return self.parse_brace()
        if t.text in ("forall", "exists", "nabla"):
            return self.parse_formula()
        if t.text == "(":
            mark = self.save()
            self.next()
            try:
                inner = self.parse_formula()
                self.expect(")")
                if self.at("="):
                    raise ProverSyntaxError("term", t.line, t.col)
                return inner
            except ProverSyntaxError:
                self.restore(mark)
        return self.parse_atom_formula()

    def parse_atom_formula(self):
        t = self.peek()
        term, ty = self.parse_term()
        if self.eat("="):
            rhs, rty = self.parse_term()
            self.inf.unify(ty, rty, "(=)")
            return F.Eq(term, rhs)
        # otherwise this must be a full predicate application
        h, args = T.spine(term)
        if isinstance(h, T.Const):
            r = self.inf.walk(ty)
            self.inf.unify(r, PROP, f"(atom {h.name})")
            return F.Atom(h.name, tuple(args))
        raise ProverSyntaxError(f"{t.text!r} does not start a formula", t.line, t.col)

    def _term_ty(self, t):
        if isinstance(t, (T.Const, T.Var, T.Nom)):
            return t.ty
        if isinstance(t, T.Bound):
            return self.binders[len(self.binders) - 1 - t.k][1]
        if isinstance(t, T.Lam):
            self.binders.append(("_", t.ty))
            ty = arrow(t.ty, self._term_ty(t.body))
            self.binders.pop()
            return ty
        if isinstance(t, T.App):
            hty = self._term_ty(t.head)
            res = self.inf.fresh()
            want = res
            for a in reversed(t.args):
                want = arrow(self._term_ty(a), want)
            self.inf.unify(hty, want, "(application)")
            return res
        raise IllTyped(f"no type for {t!r}")

    def parse_brace(self):
        self.expect("{")
        items = []
        focus = None
        goal = None
        if self.eat("|-"):
            goal, gty = self.parse_term()
            self.inf.unify(gty, OTY, "(sequent goal)")
            self.expect("}")
            return F.Atom("seq", (NILC, goal))
        while True:
            if self.at("["):
                self.next()
                focus, fty = self.parse_term()
                self.inf.unify(fty, OTY, "(focus)")
                self.expect("]")
                self.expect("|-")
                goal, gty = self.parse_term()
                self.inf.unify(gty, OTY, "(sequent goal)")
                self.expect("}")
                break
            item, ity = self.parse_term()
            items.append((item, ity))
            if self.eat(","):
                continue
            if self.eat("|-"):
                goal, gty = self.parse_term()
                self.inf.unify(gty, OTY, "(sequent goal)")
                self.expect("}")
                break
            self.expect("}")
            # {G}: empty context
            goal, gty = items.pop()
            self.inf.unify(gty, OTY, "(sequent goal)")
            break
        # decide whether the first item is the context tail
        ctx = NILC
        elems = items
        if items:
            t0, ty0 = items[0]
            r = self.inf.walk(ty0)
            if r == OLIST or (self.inf.is_meta(r) and not _is_o_like(t0)):
                self.inf.unify(ty0, OLIST, "(context)")
                ctx = t0
                elems = items[1:]
            else:
                ctx = NILC
        for e, ety in elems:
            self.inf.unify(ety, OTY, "(context element)")
        built = ctx
        for e, _ in elems:
            built = T.App(CONSC, (e, built))
        if focus is not None:
            return F.Atom("bc", (built, focus, goal))
        return F.Atom("seq", (built, goal))


def _is_o_like(t):
    h, args = T.spine(t)
    return bool(args) and isinstance(h, T.Const)


# ------------------------------------------------------------ spec files

def parse_spec_text(text):
    """Parse a specification file into (Signature, Program)."""
    toks = tokenize(text)
    sig = Signature()
    prog = Program(sig)
    i = 0
    while i < len(toks):
        if toks[i].text == "kind":
            j = i + 1
            names = []
            while toks[j].kind == "id" and toks[j].text != "type":
                names.append(toks[j].text)
                j += 1
                if toks[j].text == ",":
                    j += 1
            if toks[j].text != "type":
                raise ProverSyntaxError("kind declaration needs 'type'",
                                        toks[j].line, toks[j].col)
            j += 1
            if toks[j].text != ".":
                raise ProverSyntaxError("expected '.'", toks[j].line, toks[j].col)
            for n in names:
                sig.add_kind(n)
            i = j + 1
            continue
        if toks[i].text == "type":
            j = i + 1
            names = []
            while toks[j].kind == "id":
                names.append(toks[j].text)
                j += 1
                if toks[j].text == ",":
                    j += 1
                else:
                    break
            end = j
            while toks[end].text != ".":
                end += 1
                if end >= len(toks):
                    raise ProverSyntaxError("unterminated type declaration",
                                            toks[j].line, toks[j].col)
            p = Parser(toks[j:end], Env(sig))
            ty = p.parse_ty()
            if p.i != len(p.toks):
                p.err("trailing tokens in type declaration")
            for n in names:
                sig.add_const(n, ty)
            i = end + 1
            continue
        # clause, optionally labeled
        end = i
        while toks[end].text != ".":
            end += 1
            if end >= len(toks):
                raise ProverSyntaxError("unterminated clause", toks[i].line, toks[i].col)
        chunk = toks[i:end]
        label = None
        if len(chunk) >= 2 and chunk[0].kind == "id" and chunk[1].text == ":":
            label = chunk[0].text
            chunk = chunk[2:]
        name, term = parse_clause_tokens(chunk, sig)
        prog.add(label or name, term)
        i = end + 1
    return sig, prog


def parse_clause_tokens(toks, sig):
    """head :- g1, ..., gn  with implicitly quantified capitalized variables."""
    inf = TyInf()
    env = Env(sig, implicit={})
    p = Parser(toks, env, inf)
    head, hty = p.parse_term(stop={":-"})
    inf.unify(hty, OTY, "(clause head)")
    goals = []
    if p.eat(":-"):
        while True:
            g, gty = p.parse_term()
            inf.unify(gty, OTY, "(clause goal)")
            goals.append(g)
            if not p.eat(","):
                break
    if p.i != len(p.toks):
        p.err("trailing tokens in clause")
    body = head
    if goals:
        conj = goals[0]
        for g in goals[1:]:
            conj = s_and(conj, g)
        body = s_imp(conj, head)
    # implicit universal closure, in order of first occurrence
    term = resolve_term(inf, body)
    for vname in reversed(list(env.implicit)):
        vty = inf.resolve(env.implicit[vname])
        term = s_pi(vty, T.Lam(vty, T.close_over(term, T.Var(vname, vty)), vname.lower()))
    hd, _ = T.spine(head)
    name = hd.name if isinstance(hd, (T.Const, T.Var)) else None
    return name, T.norm(term)


def parse_term_text(text, env):
    """Parse a closed term (witness, context, ...) against the environment."""
    toks = tokenize(text) if isinstance(text, str) else text
    inf = TyInf()
    p = Parser(toks, Env(env.sig, env.defs, dict(env.varctx)), inf)
    t, _ = p.parse_term()
    if p.i != len(p.toks):
        p.err("trailing tokens after term")
    return T.norm(resolve_term(inf, t))


def parse_formula_text(text, env, implicit=None):
    toks = tokenize(text) if isinstance(text, str) else text
    inf = TyInf()
    e = Env(env.sig, env.defs, dict(env.varctx), implicit)
    p = Parser(toks, e, inf)
    f = p.parse_formula()
    if p.i != len(p.toks):
        p.err("trailing tokens after formula")
    return F.f_norm(resolve_formula(inf, f)), e, inf
