"""The built-in encoding of the specification logic inside the reasoning
logic: seq/bc as kernel-level definition schemas, prog installation, and the
trusted meta-theorem tactics (cut, instantiation, monotonicity).

seq and bc cannot be ordinary definitions because the universal quantifier of
the specification logic is a type-indexed family; the schema instantiates the
relevant clause at the quantifier types reachable from the loaded program.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import formulas as F
from . import terms as T
from .speclogic import (
    CONSC,
    NILC,
    atomic_check,
    s_and,
    s_imp,
    s_pi,
    spec_head,
)
from .types import (
    SPEC_AND,
    SPEC_IMP,
    SPEC_PI,
    AlreadyLoaded,
    IllTyped,
    OTY,
    ShapeMismatch,
    Ty,
    arrow,
)
from .unify import Clash, FreshnessViolation, NotAPattern, OccursCheck, UnifyState, pattern_unify


def seq_atom(l, g, ann=None):
    return F.Atom("seq", (l, g), ann)


def bc_atom(l, foc, a, ann=None):
    return F.Atom("bc", (l, foc, a), ann)


def cons(f, l):
    return T.App(CONSC, (f, l))


def star_of(ann):
    return F.Ann("*", ann.level) if ann else None


class Cursor:
    """Mutable helper for building one case branch: tracks the unification
    state, freshly allocated names/nominals, and the produced hypotheses."""

    def __init__(self, ps, st):
        self.ps = ps
        self.st = st
        self.hyps = []
        self.used_noms = set(ps.used_noms())
        self.taken = set(ps.taken_names()) | set(st.subst)
        self._install_namer()

    def _install_namer(self):
        def namer(base):
            name = base
            i = 0
            while name in self.taken:
                i += 1
                name = f"{base}{i}"
            self.taken.add(name)
            return name
        self.st.namer = namer

    def clone(self):
        c = Cursor.__new__(Cursor)
        c.ps = self.ps
        c.st = self.st.copy()
        c.hyps = list(self.hyps)
        c.used_noms = set(self.used_noms)
        c.taken = set(self.taken)
        c._install_namer()
        return c

    def fresh_nom(self, ty):
        i = 1
        while T.Nom(ty, i) in self.used_noms:
            i += 1
        n = T.Nom(ty, i)
        self.used_noms.add(n)
        return n

    def fresh_var(self, base, ty):
        base = base or "X"
        name = base
        i = 0
        while name in self.taken:
            i += 1
            name = f"{base}{i}"
        self.taken.add(name)
        self.st.allow(name)
        return T.Var(name, ty)

    def constrain_formula_vars(self, f, nom):
        """Nabla introduction: every variable of the principal formula must
        avoid the chosen nominal in later instantiations."""
        for vn in F.f_free_vars(self.st.apply_formula(f)):
            self.st.forbid(vn, (nom,))

    def raise_over(self, base, ty, principal):
        """Fresh eigenvariable raised over the support of the principal formula."""
        supp = F.f_support(self.st.apply_formula(principal))
        hty = ty
        for n in reversed(supp):
            hty = arrow(n.ty, hty)
        v = self.fresh_var(base, hty)
        self.st.forbid(v.name, supp)
        return T.norm(T.app(v, supp)) if supp else v

    def add_hyp(self, f):
        self.hyps.append(f)


def norm_seq_hyp(cur, l, g, ann):
    """Eagerly decompose a produced seq hypothesis along the invertible
    goal-reduction clauses (conjunction, implication, universal)."""
    g = cur.st.apply(g)
    l = cur.st.apply(l)
    kind, parts = spec_head(g)
    if kind == SPEC_AND:
        norm_seq_hyp(cur, l, parts[0], ann)
        norm_seq_hyp(cur, l, parts[1], ann)
        return
    if kind == SPEC_IMP:
        norm_seq_hyp(cur, cons(parts[0], l), parts[1], ann)
        return
    if kind == SPEC_PI:
        lam = parts[0]
        principal = seq_atom(l, g)
        supp = F.f_support(cur.st.apply_formula(principal))
        i = 1
        while T.Nom(lam.ty, i) in supp:
            i += 1
        a = T.Nom(lam.ty, i)
        cur.used_noms.add(a)
        cur.constrain_formula_vars(principal, a)
        norm_seq_hyp(cur, l, T.instantiate(lam, a), ann)
        return
    cur.add_hyp(seq_atom(l, g, ann))


def _focus_cases(cur, l, focus, goal_term, ann, pending=()):
    """All ways of backchaining a focused clause against an atomic goal;
    yields completed cursors, with antecedent goals as normalized hypotheses
    in left-to-right clause order."""
    focus = cur.st.apply(focus)
    kind, parts = spec_head(focus)
    if kind == SPEC_PI:
        lam = parts[0]
        principal = bc_atom(l, focus, goal_term)
        base = (lam.hint or "w").upper()
        t = cur.raise_over(base, lam.ty, principal)
        yield from _focus_cases(cur, l, T.instantiate(lam, t), goal_term, ann, pending)
        return
    if kind == SPEC_AND:
        left = cur.clone()
        yield from _focus_cases(left, l, parts[0], goal_term, ann, pending)
        yield from _focus_cases(cur, l, parts[1], goal_term, ann, pending)
        return
    if kind == SPEC_IMP:
        g, f = parts
        yield from _focus_cases(cur, l, f, goal_term, ann, pending + (g,))
        return
    try:
        cur.st = pattern_unify(cur.st, focus, goal_term)
    except (Clash, OccursCheck, FreshnessViolation):
        return
    for g in pending:
        norm_seq_hyp(cur, cur.st.apply(l), cur.st.apply(g), ann)
    yield cur


@dataclass
class Branch:
    st: UnifyState
    hyps: list
    tag: str = ""


def _flex_spine(g):
    h, args = T.spine(g)
    return (h, args) if isinstance(h, T.Var) else (None, args)


def _guess(cur, g, rhs):
    try:
        cur.st = pattern_unify(cur.st, g, T.norm(rhs))
        return True
    except (Clash, OccursCheck, FreshnessViolation, NotAPattern):
        return False


def case_seq(ps, atom):
    """Case analysis on a seq hypothesis per the encoding's clause schema."""
    l, g = atom.args
    ann = atom.ann
    sub = star_of(ann)
    branches = []
    base = Cursor(ps, UnifyState(fresh=dict(ps.fresh), flex=None))
    g = base.st.apply(g)
    l = base.st.apply(l)
    kind, parts = spec_head(g)
    if kind is not None:
        cur = base.clone()
        norm_seq_hyp(cur, l, g, sub)
        return [Branch(cur.st, cur.hyps, kind)]
    head, hargs = _flex_spine(g)
    if head is not None:
        # flexible goal formula: enumerate the goal-reduction clauses
        cur = base.clone()
        g1 = T.app(cur.fresh_var("G", head.ty), hargs)
        g2 = T.app(cur.fresh_var("G", head.ty), hargs)
        if _guess(cur, g, s_and(g1, g2)):
            norm_seq_hyp(cur, l, g1, sub)
            norm_seq_hyp(cur, l, g2, sub)
            branches.append(Branch(cur.st, cur.hyps, SPEC_AND))
        cur = base.clone()
        f0 = T.app(cur.fresh_var("F", head.ty), hargs)
        g0 = T.app(cur.fresh_var("G", head.ty), hargs)
        if _guess(cur, g, s_imp(f0, g0)):
            norm_seq_hyp(cur, cons(f0, l), g0, sub)
            branches.append(Branch(cur.st, cur.hyps, SPEC_IMP))
        for ty in ps.defs.pi_types():
            cur = base.clone()
            gv = cur.fresh_var("G", Ty(head.ty.args + (ty,), "o"))
            lam = T.Lam(ty, T.app(gv, tuple(T.shift(a, 1) for a in hargs) + (T.Bound(0),)))
            if _guess(cur, g, s_pi(ty, lam)):
                norm_seq_hyp(cur, l, cur.st.apply(g), sub)
                branches.append(Branch(cur.st, cur.hyps, SPEC_PI))
    # atomic clauses: one branch per program clause, then the dynamic clause
    prog = ps.defs.program.clauses if ps.defs.program else []
    for clause in prog:
        cur = base.clone()
        if head is not None:
            cur.add_hyp(F.Atom("atomic", (g,)))
        for done in _focus_cases(cur, l, clause.term, g, sub):
            branches.append(Branch(done.st, done.hyps, f"prog {clause.name}"))
    cur = base.clone()
    if head is not None:
        cur.add_hyp(F.Atom("atomic", (g,)))
    fv = cur.raise_over("F", OTY, atom.strip())
    cur.add_hyp(F.Atom("member", (fv, l), sub))
    cur.add_hyp(bc_atom(l, fv, g, sub))
    branches.append(Branch(cur.st, cur.hyps, "dyn"))
    return branches


def case_bc(ps, atom):
    """Case analysis on a backchaining hypothesis.

    A rigid focus is backchained all the way to its head (per-step bodies are
    invertible given the focus shape); a flexible focus enumerates the clause
    schema one step deep.
    """
    l, foc, a = atom.args
    ann = atom.ann
    sub = star_of(ann)
    base = Cursor(ps, UnifyState(fresh=dict(ps.fresh), flex=None))
    foc = base.st.apply(foc)
    branches = []
    head, hargs = _flex_spine(foc)
    if head is None and not atomic_check(foc):
        for done in _focus_cases(base.clone(), l, foc, base.st.apply(a), sub):
            branches.append(Branch(done.st, done.hyps, "bc"))
        return branches
    if head is not None:
        for i in (0, 1):
            cur = base.clone()
            f1 = T.app(cur.fresh_var("F", head.ty), hargs)
            f2 = T.app(cur.fresh_var("F", head.ty), hargs)
            if _guess(cur, foc, s_and(f1, f2)):
                cur.add_hyp(bc_atom(l, (f1, f2)[i], a, sub))
                branches.append(Branch(cur.st, cur.hyps, f"and{i + 1}"))
        cur = base.clone()
        g0 = T.app(cur.fresh_var("G", head.ty), hargs)
        f0 = T.app(cur.fresh_var("F", head.ty), hargs)
        if _guess(cur, foc, s_imp(g0, f0)):
            norm_seq_hyp(cur, l, g0, sub)
            cur.add_hyp(bc_atom(l, f0, a, sub))
            branches.append(Branch(cur.st, cur.hyps, "imp"))
        for ty in ps.defs.pi_types():
            cur = base.clone()
            fv = cur.fresh_var("F", Ty(head.ty.args + (ty,), "o"))
            lam = T.Lam(ty, T.app(fv, tuple(T.shift(x, 1) for x in hargs) + (T.Bound(0),)))
            if _guess(cur, foc, s_pi(ty, lam)):
                t = cur.raise_over("W", ty, atom.strip())
                cur.add_hyp(bc_atom(l, T.instantiate(cur.st.apply(lam), t), a, sub))
                branches.append(Branch(cur.st, cur.hyps, "pi"))
    # match clause: bc L A A
    cur = base.clone()
    try:
        cur.st = pattern_unify(cur.st, foc, cur.st.apply(a))
        branches.append(Branch(cur.st, cur.hyps, "match"))
    except (Clash, OccursCheck, FreshnessViolation):
        pass
    return branches


def seq_step(ps, atom, mode):
    """Spec-facing single-step unfolding of a seq atom (Fig.-2 clause bodies)."""
    l, g = atom.args
    if mode == "case-left":
        return case_seq(ps, atom)
    kind, parts = spec_head(g)
    if kind == SPEC_AND:
        return F.And(seq_atom(l, parts[0]), seq_atom(l, parts[1]))
    if kind == SPEC_IMP:
        return seq_atom(cons(parts[0], l), parts[1])
    if kind == SPEC_PI:
        lam = parts[0]
        return F.Quant("nabla", lam.ty,
                       seq_atom(T.shift(l, 1), T.norm(T.app(T.shift(lam, 1), (T.Bound(0),)))),
                       lam.hint)
    # atomic: the dynamic and program clause bodies
    prog = ps.defs.program.clauses if ps.defs.program else []
    fv = T.Var("F", OTY)
    dyn = F.Quant("exists", OTY,
                  F.And(F.Atom("member", (T.Bound(0), T.shift(l, 1))),
                        bc_atom(T.shift(l, 1), T.Bound(0), T.shift(g, 1))), "F")
    progs = [F.And(F.Atom("prog", (c.term,)), bc_atom(l, c.term, g)) for c in prog]
    return [dyn] + progs


def bc_step(ps, atom, mode):
    l, foc, a = atom.args
    if mode == "case-left":
        return case_bc(ps, atom)
    kind, parts = spec_head(foc)
    if kind == SPEC_AND:
        return F.Or(bc_atom(l, parts[0], a), bc_atom(l, parts[1], a))
    if kind == SPEC_IMP:
        return F.And(seq_atom(l, parts[0]), bc_atom(l, parts[1], a))
    if kind == SPEC_PI:
        lam = parts[0]
        return F.Quant("exists", lam.ty,
                       bc_atom(T.shift(l, 1),
                               T.norm(T.app(T.shift(lam, 1), (T.Bound(0),))),
                               T.shift(a, 1)), lam.hint)
    return F.Top() if foc == a else F.Eq(foc, a)


def load_specification(defs, program):
    """Install the prog definition for a type-checked program."""
    if defs.program is not None:
        raise AlreadyLoaded("a specification is already loaded in this session")
    clauses = tuple(
        F.DefClause((), (), F.Atom("prog", (c.term,)), F.Top())
        for c in program.clauses
    )
    defs.program = program
    defs.defs["prog"] = F.Definition("prog", arrow(OTY, Ty((), "prop")), clauses)
    return defs.defs["prog"]


def _as_seq(f):
    if isinstance(f, F.Atom) and f.pred == "seq":
        return f
    return None


def meta_cut(ps, main_name, cut_name):
    """From {L, F |- G} and {L |- F}, conclude {L |- G}."""
    main = _as_seq(ps.hyp(main_name))
    other = _as_seq(ps.hyp(cut_name))
    if main is None or other is None:
        raise ShapeMismatch("cut needs two object-sequent hypotheses")
    lctx, g = main.args
    if not (isinstance(lctx, T.App) and lctx.head == CONSC):
        raise ShapeMismatch("cut: main hypothesis context is not an extension")
    f0, l0 = lctx.args
    if other.strip() != seq_atom(l0, f0):
        raise ShapeMismatch("cut: hypotheses do not share the cut formula")
    return seq_atom(l0, g)


def meta_inst(ps, hyp_name, nom, witness):
    """Instantiate a designated nominal of an object-sequent hypothesis."""
    f = ps.hyp(hyp_name)
    if not (isinstance(f, F.Atom) and f.pred in ("seq", "bc")):
        raise ShapeMismatch("inst works on seq/bc hypotheses")
    if nom not in F.f_support(f):
        raise ShapeMismatch(f"{nom} does not occur in {hyp_name}")
    wty = T.infer(witness)
    if wty != nom.ty:
        raise IllTyped(f"witness has type {wty}, nominal has {nom.ty}")
    closed = F.f_close(f, nom)
    return F.f_open(closed, witness)


def meta_monotone(ps, hyp_name, target):
    """Weaken an object sequent to a target context; returns (obligation, hyp).

    The membership-implication obligation comes back as a formula to prove;
    the annotation of the source hypothesis is preserved on the result since
    weakening does not change the height of the encoded derivation.
    """
    f = ps.hyp(hyp_name)
    if not (isinstance(f, F.Atom) and f.pred in ("seq", "bc")):
        raise ShapeMismatch("monotone works on seq/bc hypotheses")
    tty = T.infer(target)
    if str(tty) != "olist":
        raise IllTyped(f"monotone target must be an olist, got {tty}")
    l0 = f.args[0]
    obligation = F.Quant(
        "forall", OTY,
        F.Imp(F.Atom("member", (T.Bound(0), T.shift(l0, 1))),
              F.Atom("member", (T.Bound(0), T.shift(target, 1)))), "E")
    new = F.Atom(f.pred, (target,) + f.args[1:], f.ann)
    return obligation, new
