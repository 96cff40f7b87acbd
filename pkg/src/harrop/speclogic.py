"""Executable interpreter for the specification logic: goal reduction,
clause selection, and backchaining with exhaustive depth-bounded backtracking.

Specification formulas are plain terms of type o whose logical structure is
given by the reserved constants `=>`, `&`, and the type-indexed family `pi`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import terms as T
from .types import (
    CONS,
    NIL,
    OLIST,
    OTY,
    SPEC_AND,
    SPEC_IMP,
    SPEC_PI,
    IllTyped,
    Ty,
    arrow,
)
from .unify import UnifyState, pattern_unify
from .types import Clash, FreshnessViolation, NotAPattern, OccursCheck

IMP_TY = arrow(OTY, arrow(OTY, OTY))
AND_TY = IMP_TY
IMPC = T.Const(SPEC_IMP, IMP_TY)
ANDC = T.Const(SPEC_AND, AND_TY)
NILC = T.Const(NIL, OLIST)
CONSC = T.Const(CONS, arrow(OTY, arrow(OLIST, OLIST)))


def s_imp(antecedent, consequent):
    return T.App(IMPC, (antecedent, consequent))


def s_and(left, right):
    return T.App(ANDC, (left, right))


def pi_const(ty):
    return T.Const(SPEC_PI, arrow(arrow(ty, OTY), OTY))


def s_pi(ty, lam):
    return T.App(pi_const(ty), (lam,))


def olist(elems, base=None):
    """Build an olist term; elems given outermost-first (newest last)."""
    out = base if base is not None else NILC
    for e in elems:
        out = T.App(CONSC, (e, out))
    return out


def spec_head(f):
    """The logical constructor at the head of an o-term, or None if atomic."""
    h, args = T.spine(f)
    if isinstance(h, T.Const) and h.name in (SPEC_IMP, SPEC_AND, SPEC_PI):
        return h.name, args
    return None, (h, args)


def atomic_check(f):
    """True iff an o-term is atomic: not headed by =>, &, or pi."""
    kind, _ = spec_head(f)
    return kind is None


@dataclass
class SpecClause:
    name: str
    term: T.Term  # closed, pi-quantified o-term

    def __str__(self):
        from .pretty import spec_clause
        return spec_clause(self.name, self.term)


@dataclass
class Program:
    """The static context: an ordered list of named clauses plus its signature."""

    sig: object
    clauses: list = field(default_factory=list)

    def add(self, name, term):
        ty = T.typecheck(self.sig, {}, term)
        if ty != OTY:
            raise IllTyped(f"clause {name or term} has type {ty}, wanted o")
        if T.free_vars(term):
            raise IllTyped(f"clause {name} is not closed")
        if not name:
            name = f"c{len(self.clauses) + 1}"
        self.clauses.append(SpecClause(name, term))

    def pi_types(self):
        """Every type at which pi occurs in the program (for kernel schemas)."""
        tys = []

        def scan(t):
            if isinstance(t, T.App):
                h = t.head
                if isinstance(h, T.Const) and h.name == SPEC_PI:
                    ty = h.ty.args[0].args[0]
                    if ty not in tys:
                        tys.append(ty)
                scan(t.head)
                for a in t.args:
                    scan(a)
            elif isinstance(t, T.Lam):
                scan(t.body)

        for c in self.clauses:
            scan(c.term)
        return tys


class _Search:
    """One engine run; owns the unification state, counters and depth flag."""

    def __init__(self, program, depth):
        self.program = program
        self.depth_hit = False
        self.const_n = 0
        self.var_n = 0

    def fresh_const(self, ty):
        self.const_n += 1
        return T.Const(f"_c{self.const_n}", ty)

    def fresh_uvar(self, st, ty):
        return st.fresh_var(ty, base="?e")

    def solve(self, dynctx, goal, depth, st, trace):
        goal = st.apply(goal)
        kind, parts = spec_head(goal)
        if kind == SPEC_AND:
            l, r = parts
            for st1, tr1 in self.solve(dynctx, l, depth, st, trace + (("and_r",),)):
                yield from self.solve(dynctx, r, depth, st1, tr1)
            return
        if kind == SPEC_IMP:
            f, g = parts
            yield from self.solve(dynctx + [f], g, depth, st, trace + (("imp_r",),))
            return
        if kind == SPEC_PI:
            lam = st.apply(parts[0])
            c = self.fresh_const(lam.ty)
            body = T.instantiate(lam, c)
            yield from self.solve(dynctx, body, depth, st, trace + (("all_r", c.name),))
            return
        # atomic goal: select a clause
        if depth <= 0:
            self.depth_hit = True
            return
        for clause in self.program.clauses:
            tr = trace + (("prog", clause.name),)
            yield from self.backchain(dynctx, clause.term, goal, depth - 1, st, tr)
        for i in range(len(dynctx) - 1, -1, -1):
            tr = trace + (("dyn", len(dynctx) - 1 - i),)
            yield from self.backchain(dynctx, dynctx[i], goal, depth - 1, st, tr)

    def backchain(self, dynctx, focus, atom_goal, depth, st, trace):
        focus = st.apply(focus)
        kind, parts = spec_head(focus)
        if kind == SPEC_PI:
            lam = parts[0]
            v = self.fresh_uvar(st, lam.ty)
            body = T.instantiate(lam, v)
            yield from self.backchain(dynctx, body, atom_goal, depth, st, trace + (("all_l",),))
            return
        if kind == SPEC_AND:
            l, r = parts
            yield from self.backchain(dynctx, l, atom_goal, depth, st, trace + (("and_l", 1),))
            yield from self.backchain(dynctx, r, atom_goal, depth, st, trace + (("and_l", 2),))
            return
        if kind == SPEC_IMP:
            g, f = parts
            for st1, tr1 in self.backchain(dynctx, f, atom_goal, depth, st, trace + (("imp_l",),)):
                yield from self.solve(dynctx, g, depth, st1, tr1)
            return
        # atomic focus: match
        try:
            st2 = pattern_unify(st, focus, atom_goal)
        except (Clash, OccursCheck, FreshnessViolation):
            return
        yield st2, trace + (("match",),)


@dataclass
class SolveOutcome:
    status: str  # derivable | not-derivable | depth-exceeded
    trace: tuple = ()
    state: object = None

    @property
    def ok(self):
        return self.status == "derivable"


def solve(program, dynctx, goal, depth=50, state=None, all_solutions=False):
    """Run the interpreter on a goal-reduction sequent.

    Finite failure is distinguished from running out of depth; traces record
    every rule applied on the successful branch.
    """
    eng = _Search(program, depth)
    st = state if state is not None else UnifyState(flex=frozenset())
    gen = eng.solve(list(dynctx), goal, depth, st, ())
    if all_solutions:
        sols = [(s, tr) for s, tr in gen]
        status = "derivable" if sols else ("depth-exceeded" if eng.depth_hit else "not-derivable")
        out = SolveOutcome(status)
        out.solutions = sols
        return out
    for s, tr in gen:
        return SolveOutcome("derivable", tr, s)
    return SolveOutcome("depth-exceeded" if eng.depth_hit else "not-derivable")


def backchain_focus(program, dynctx, focus, atom_goal, depth=50, state=None):
    """Stream of successes for a backchaining sequent (focused clause)."""
    eng = _Search(program, depth)
    st = state if state is not None else UnifyState(flex=frozenset())
    for s, tr in eng.backchain(list(dynctx), focus, atom_goal, depth, st, ()):
        yield SolveOutcome("derivable", tr, s)


def count_rule(trace, rule, arg=None):
    n = 0
    for e in trace:
        if e[0] == rule and (arg is None or (len(e) > 1 and e[1] == arg)):
            n += 1
    return n


def validate_trace(program, dynctx, goal, trace):
    """Re-check a success trace rule-by-rule against the proof system."""
    eng = _Search(program, len(trace) + 1)
    pos = [0]

    def take(expected=None):
        if pos[0] >= len(trace):
            raise IllTyped("trace exhausted")
        e = trace[pos[0]]
        pos[0] += 1
        if expected and e[0] != expected:
            raise IllTyped(f"trace mismatch: wanted {expected}, got {e[0]}")
        return e

    def goal_step(dynctx, goal, st):
        goal = st.apply(goal)
        kind, parts = spec_head(goal)
        if kind == SPEC_AND:
            take("and_r")
            st = goal_step(dynctx, parts[0], st)
            return goal_step(dynctx, parts[1], st)
        if kind == SPEC_IMP:
            take("imp_r")
            return goal_step(dynctx + [parts[0]], parts[1], st)
        if kind == SPEC_PI:
            e = take("all_r")
            c = T.Const(e[1], parts[0].ty)
            return goal_step(dynctx, T.instantiate(parts[0], c), st)
        e = take()
        if e[0] == "prog":
            clause = next(c for c in program.clauses if c.name == e[1])
            return focus_step(dynctx, clause.term, goal, st)
        if e[0] == "dyn":
            f = dynctx[len(dynctx) - 1 - e[1]]
            return focus_step(dynctx, f, goal, st)
        raise IllTyped(f"unexpected trace entry {e}")

    def focus_step(dynctx, focus, atom_goal, st):
        focus = st.apply(focus)
        kind, parts = spec_head(focus)
        if kind == SPEC_PI:
            take("all_l")
            v = eng.fresh_uvar(st, parts[0].ty)
            return focus_step(dynctx, T.instantiate(parts[0], v), atom_goal, st)
        if kind == SPEC_AND:
            e = take("and_l")
            return focus_step(dynctx, parts[e[1] - 1], atom_goal, st)
        if kind == SPEC_IMP:
            take("imp_l")
            st = focus_step(dynctx, parts[1], atom_goal, st)
            return goal_step(dynctx, parts[0], st)
        take("match")
        return pattern_unify(st, focus, atom_goal)

    st = goal_step(list(dynctx), goal, UnifyState(flex=frozenset()))
    if pos[0] != len(trace):
        raise IllTyped("trace has unused entries")
    return True
