"""Higher-order pattern unification, nominal-constant aware, plus the
matching/case-analysis variants used by backchaining, defR, and defL.

Problems outside the Lambda-lambda (pattern) fragment raise NotAPattern; the
enclosing tactic aborts with a user-facing message rather than approximating.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from . import formulas as F
from . import terms as T
from .types import (
    Clash,
    FreshnessViolation,
    NotAPattern,
    OccursCheck,
    Ty,
)


class _Prune(Exception):
    def __init__(self, var, keep):
        self.var = var
        self.keep = keep


@dataclass
class UnifyState:
    """Accumulated idempotent substitution plus nominal-freshness constraints.

    `flex` is the set of variable names that may be instantiated; None means
    every Var is flexible.  `fresh` maps a variable name to the nominal
    constants its solutions must avoid.
    """

    subst: dict = field(default_factory=dict)
    fresh: dict = field(default_factory=dict)
    flex: object = None
    counter: int = 0
    ephemeral: frozenset = frozenset()
    namer: object = None  # optional taken-aware name allocator

    def copy(self):
        st = UnifyState(dict(self.subst), {k: frozenset(v) for k, v in self.fresh.items()},
                        None if self.flex is None else frozenset(self.flex), self.counter,
                        frozenset(self.ephemeral))
        st.namer = self.namer
        return st

    def mark_ephemeral(self, name):
        self.ephemeral = frozenset(self.ephemeral) | {name}

    def is_flex(self, name):
        return (self.flex is None or name in self.flex) and name not in self.subst

    def fresh_for(self, name):
        return self.fresh.get(name, frozenset())

    def forbid(self, name, noms):
        if noms:
            self.fresh[name] = self.fresh_for(name) | frozenset(noms)

    def allow(self, name):
        if self.flex is not None:
            self.flex = frozenset(self.flex) | {name}

    def fresh_var(self, ty, base="?u"):
        if self.namer is not None and not base.startswith("?"):
            name = self.namer(base)
        else:
            self.counter += 1
            name = f"{base}{self.counter}"
            while name in self.subst or (self.flex and name in self.flex):
                self.counter += 1
                name = f"{base}{self.counter}"
        self.allow(name)
        self.mark_ephemeral(name)
        return T.Var(name, ty)

    def apply(self, t, env=()):
        return T.subst_vars(t, self.subst, env)

    def apply_formula(self, f):
        return F.f_subst(f, self.subst)

    def bind(self, name, val):
        val = T.subst_vars(val, self.subst)
        fv = T.free_vars(val)
        if name in fv:
            raise OccursCheck(f"{name} occurs in {val}")
        bad = set(T.support(val)) & self.fresh_for(name)
        if bad:
            raise FreshnessViolation(f"{name} must avoid {sorted(str(b) for b in bad)}")
        for y in fv:
            self.forbid(y, self.fresh_for(name))
        one = {name: val}
        for k in list(self.subst):
            self.subst[k] = T.subst_vars(self.subst[k], one)
        self.subst[name] = val


def _pattern_args(args):
    """Check the pattern condition; return arg keys (('b', k) or ('n', nom))."""
    keys = []
    for a in args:
        if isinstance(a, T.Bound):
            keys.append(("b", a.k))
        elif isinstance(a, T.Nom):
            keys.append(("n", a))
        else:
            raise NotAPattern(f"flexible variable applied to non-parameter {a}")
    if len(set(keys)) != len(keys):
        raise NotAPattern("flexible variable applied to repeated parameters")
    return keys


def _arg_tys(args, env):
    tys = []
    for a in args:
        if isinstance(a, T.Bound):
            tys.append(env[a.k])
        else:
            tys.append(a.ty)
    return tys


def _invert(st, xname, argkeys, m, r, dd, env):
    """Mirror r into the solution body for X, translating parameters."""
    pos = {k: i for i, k in enumerate(argkeys)}
    xfresh = st.fresh_for(xname)

    def go(t, dd):
        if isinstance(t, T.Lam):
            return T.Lam(t.ty, go(t.body, dd + 1), t.hint)
        h, args = T.spine(t)
        if isinstance(h, T.Bound):
            if h.k < dd:
                h2 = h
            else:
                i = pos.get(("b", h.k - dd))
                if i is None:
                    raise Clash(f"bound parameter escapes its scope")
                h2 = T.Bound(dd + (m - 1 - i))
            return T.app(h2, tuple(go(a, dd) for a in args))
        if isinstance(h, T.Nom):
            i = pos.get(("n", h))
            if i is not None:
                h2 = T.Bound(dd + (m - 1 - i))
            elif h in xfresh:
                raise FreshnessViolation(f"{xname} must avoid {h}")
            else:
                h2 = h
            return T.app(h2, tuple(go(a, dd) for a in args))
        if isinstance(h, T.Const):
            return T.app(h, tuple(go(a, dd) for a in args))
        if isinstance(h, T.Var):
            if h.name == xname:
                raise OccursCheck(f"{xname} occurs in the right-hand side")
            if st.is_flex(h.name):
                keys = _pattern_args(args)
                keep = []
                for j, k in enumerate(keys):
                    kind, val = k
                    if kind == "b":
                        ok = val < dd or ("b", val - dd) in pos
                    else:
                        ok = ("n", val) in pos or val not in xfresh
                    if ok:
                        keep.append(j)
                if len(keep) != len(args):
                    raise _Prune(h, keep)
                return T.app(h, tuple(go(a, dd) for a in args))
            return T.app(h, tuple(go(a, dd) for a in args))
        raise Clash(f"cannot invert head {h!r}")

    return go(r, dd)


def _base_name(name):
    return name.rstrip("0123456789") or "X"


def _prune_var(st, var, keep):
    """Bind var := \\z1..zn. var'(kept parameters)."""
    tys = var.ty.args
    n = len(tys)
    newty = Ty((), var.ty.head)
    for i in reversed(keep):
        newty = T.arrow(tys[i], newty)
    nv = st.fresh_var(newty, base=_base_name(var.name))
    st.fresh[nv.name] = st.fresh_for(var.name)
    body = T.app(nv, tuple(T.Bound(n - 1 - i) for i in keep))
    sol = body
    for ty in reversed(tys):
        sol = T.Lam(ty, sol)
    st.bind(var.name, T.norm(sol))


def _solve(st, x, args, r, env):
    """X args = r with X flexible; loops while pruning is needed."""
    while True:
        xt = st.apply(T.app(x, args), env)
        rt = st.apply(r, env)
        h, args2 = T.spine(xt)
        if not (isinstance(h, T.Var) and st.is_flex(h.name)):
            _uni(st, xt, rt, env)
            return
        keys = _pattern_args(args2)
        m = len(args2)
        try:
            body = _invert(st, h.name, keys, m, rt, 0, env)
        except _Prune as p:
            _prune_var(st, p.var, p.keep)
            continue
        tys = _arg_tys(args2, env)
        sol = body
        for ty in reversed(tys):
            sol = T.Lam(ty, sol)
        st.bind(h.name, T.norm(sol))
        return


def _flex_same(st, h, a1, a2, env):
    k1 = _pattern_args(a1)
    k2 = _pattern_args(a2)
    if k1 == k2:
        return
    m = len(a1)
    keep = [i for i in range(m) if k1[i] == k2[i]]
    tys = _arg_tys(a1, env)
    target = Ty(tuple(h.ty.args[m:]), h.ty.head)
    newty = target
    for i in reversed(keep):
        newty = T.arrow(tys[i], newty)
    nv = st.fresh_var(newty, base=_base_name(h.name))
    st.fresh[nv.name] = st.fresh_for(h.name)
    body = T.app(nv, tuple(T.Bound(m - 1 - i) for i in keep))
    sol = body
    for ty in reversed(tys):
        sol = T.Lam(ty, sol)
    st.bind(h.name, T.norm(sol))


def _flex_diff(st, h1, a1, h2, a2, env):
    k1 = _pattern_args(a1)
    k2 = _pattern_args(a2)
    if k1 == k2:
        # same parameters: bind one variable to the other, preferring to
        # drop ephemeral (clause- or search-local) names
        drop, keep = h1, h2
        if h2.name in st.ephemeral and h1.name not in st.ephemeral:
            drop, keep = h2, h1
        m = len(k1)
        sol = T.app(keep, tuple(T.Bound(m - 1 - i) for i in range(m)))
        for ty in reversed(_arg_tys(a1, env)):
            sol = T.Lam(ty, sol)
        st.forbid(keep.name, st.fresh_for(drop.name))
        st.bind(drop.name, T.norm(sol))
        return
    # The common value may use: parameters both sides share, plus nominal
    # parameters of one side that the other variable may mention directly.
    # (Variables applied to a nominal are always forbidden it by the raising
    # discipline, which makes this the unique most general unifier.)
    f1, f2 = st.fresh_for(h1.name), st.fresh_for(h2.name)
    common = [k for k in k1 if k in k2]
    for k in k1:
        if k not in common and k[0] == "n" and k[1] not in f2:
            common.append(k)
    for k in k2:
        if k not in common and k[0] == "n" and k[1] not in f1:
            common.append(k)
    tys1 = _arg_tys(a1, env)
    tys2 = _arg_tys(a2, env)

    def key_ty(k):
        if k in k1:
            return tys1[k1.index(k)]
        return tys2[k2.index(k)]

    target = Ty(tuple(h1.ty.args[len(a1):]), h1.ty.head)
    zty = target
    for k in reversed(common):
        zty = T.arrow(key_ty(k), zty)
    zbase = h2.name if h1.name in st.ephemeral else h1.name
    z = st.fresh_var(zty, base=_base_name(zbase))
    st.fresh[z.name] = (f1 | f2
                        | frozenset(k[1] for k in k1 if k[0] == "n")
                        | frozenset(k[1] for k in k2 if k[0] == "n"))

    def mk(keys, tys, m):
        args = []
        for k in common:
            if k in keys:
                args.append(T.Bound(m - 1 - keys.index(k)))
            else:
                args.append(k[1])  # a nominal the other side may use directly
        sol = T.app(z, tuple(args))
        for ty in reversed(tys):
            sol = T.Lam(ty, sol)
        return T.norm(sol)

    st.bind(h1.name, mk(k1, tys1, len(a1)))
    st.bind(h2.name, mk(k2, tys2, len(a2)))


def _uni(st, t1, t2, env):
    t1 = st.apply(t1, env)
    t2 = st.apply(t2, env)
    if t1 == t2:
        return
    if isinstance(t1, T.Lam) and isinstance(t2, T.Lam):
        _uni(st, t1.body, t2.body, (t1.ty,) + env)
        return
    if isinstance(t1, T.Lam) or isinstance(t2, T.Lam):
        raise Clash("abstraction against non-abstraction")
    h1, a1 = T.spine(t1)
    h2, a2 = T.spine(t2)
    f1 = isinstance(h1, T.Var) and st.is_flex(h1.name)
    f2 = isinstance(h2, T.Var) and st.is_flex(h2.name)
    if f1 and f2:
        if h1 == h2:
            _flex_same(st, h1, a1, a2, env)
        else:
            _pattern_args(a1), _pattern_args(a2)
            _flex_diff(st, h1, a1, h2, a2, env)
        return
    if f1:
        _solve(st, h1, a1, t2, env)
        return
    if f2:
        _solve(st, h2, a2, t1, env)
        return
    if h1 != h2 or len(a1) != len(a2):
        raise Clash(f"{h1} vs {h2}")
    for x, y in zip(a1, a2):
        _uni(st, x, y, env)


def pattern_unify(state, t1, t2, env=()):
    """Most general unifier of two terms within the pattern fragment.

    Returns a new UnifyState; raises Clash / OccursCheck / NotAPattern /
    FreshnessViolation on failure.
    """
    st = state.copy()
    _uni(st, t1, t2, env)
    return st


def unify_formulas(state, f1, f2, qtys=()):
    """Structural unification of two reasoning formulas (annotations ignored)."""
    st = state.copy()
    _unif(st, f1, f2, qtys)
    return st


def _unif(st, f1, f2, qtys):
    if isinstance(f1, F.Atom) and isinstance(f2, F.Atom):
        if f1.pred != f2.pred or len(f1.args) != len(f2.args):
            raise Clash(f"atoms {f1.pred} vs {f2.pred}")
        for a, b in zip(f1.args, f2.args):
            _uni(st, a, b, qtys)
        return
    if type(f1) is not type(f2):
        raise Clash(f"formula shapes differ")
    if isinstance(f1, (F.Top, F.Bot)):
        return
    if isinstance(f1, (F.And, F.Or, F.Imp)):
        _unif(st, f1.left, f2.left, qtys)
        _unif(st, f1.right, f2.right, qtys)
        return
    if isinstance(f1, F.Eq):
        _uni(st, f1.left, f2.left, qtys)
        _uni(st, f1.right, f2.right, qtys)
        return
    if isinstance(f1, F.Quant):
        if f1.q != f2.q or f1.ty != f2.ty:
            raise Clash("quantifiers differ")
        _unif(st, f1.body, f2.body, (f1.ty,) + qtys)
        return
    raise Clash(f"cannot unify {f1!r} and {f2!r}")


@dataclass
class CaseSolution:
    """One way a definitional clause can have produced a hypothesis atom."""

    state: UnifyState
    body: F.Formula
    new_vars: tuple  # ((name, Ty), ...)
    new_noms: tuple
    clause_index: int = 0


def freshen_clause(clause, mk_name):
    """Rename a clause's universal variables apart, returning (vars, head, body)."""
    ren = {}
    newvars = []
    for name, ty in clause.univ:
        nv = mk_name(name)
        ren[name] = T.Var(nv, ty)
        newvars.append((nv, ty))
    head = F.f_subst(clause.head, ren) if ren else clause.head
    body = F.f_subst(clause.body, ren) if ren else clause.body
    return newvars, head, body


def nabla_assignments(clause, goal_support, used_noms, count_from):
    """Deterministic enumeration of nominal instantiations for a nabla prefix.

    For a complete set of unifiers each nabla variable may map to any nominal
    visible in the sequent (hypothesis support first, then the rest) or to a
    brand new one; assignments are pairwise distinct.
    """
    slots = []
    fresh_budget = dict(count_from)
    fresh_noms = []
    rest = sorted((n for n in used_noms if n not in goal_support),
                  key=lambda n: (str(n.ty), n.idx))
    for name, ty in clause.nabla:
        cands = [n for n in goal_support if n.ty == ty]
        cands += [n for n in rest if n.ty == ty]
        idx = fresh_budget.get(ty, 1)
        while T.Nom(ty, idx) in used_noms or T.Nom(ty, idx) in goal_support:
            idx += 1
        fresh = T.Nom(ty, idx)
        fresh_budget[ty] = idx + 1
        fresh_noms.append(fresh)
        slots.append(cands + [fresh])
    for combo in itertools.product(*slots) if slots else [()]:
        if len(set(combo)) != len(combo):
            continue
        yield dict(zip((n for n, _ in clause.nabla), combo)), [
            c for c in combo if c in fresh_noms
        ]


def case_unifiers(state, hyp_atom, clauses, used_noms=(), mk_name=None):
    """Complete set of case solutions for a defined atom on the left.

    The sequent's eigenvariables (flexible in `state`) may be instantiated;
    universal clause variables are fresh and forbidden the nabla nominals.
    """
    if mk_name is None:
        counter = itertools.count(1)
        mk_name = lambda base: f"{base}__{next(counter)}"
    sols = []
    goal_supp = tuple(F.f_support(hyp_atom))
    for ci, clause in enumerate(clauses):
        if clause.head.pred != hyp_atom.pred:
            continue
        for nmap, fresh_noms in nabla_assignments(clause, goal_supp, used_noms, {}):
            st = state.copy()
            newvars, head, body = freshen_clause(clause, mk_name)
            for vn, _ in newvars:
                st.allow(vn)
                st.mark_ephemeral(vn)
                st.forbid(vn, nmap.values())
            if nmap:
                head = F.f_subst(head, nmap)
                body = F.f_subst(body, nmap)
            try:
                st2 = unify_formulas(st, head.strip(), hyp_atom.strip())
            except (Clash, OccursCheck, FreshnessViolation):
                continue
            sols.append(CaseSolution(st2, st2.apply_formula(body),
                                     tuple(newvars), tuple(fresh_noms), ci))
    return sols


def match_def_head(state, goal_atom, clause, used_noms=(), mk_name=None):
    """Match a clause head against a goal atom for defR / search.

    The goal's variables stay rigid unless already flexible in `state`; the
    clause's universal variables become flexible witnesses that must avoid the
    nabla nominals.  Returns (UnifyState, body, new_vars) or None.
    """
    if clause.head.pred != goal_atom.pred:
        return None
    if mk_name is None:
        counter = itertools.count(1)
        mk_name = lambda base: f"{base}_w{next(counter)}"
    goal_supp = tuple(F.f_support(goal_atom))
    for nmap, fresh_noms in nabla_assignments(clause, goal_supp, used_noms, {}):
        st = state.copy()
        newvars, head, body = freshen_clause(clause, mk_name)
        for vn, _ in newvars:
            st.allow(vn)
            st.mark_ephemeral(vn)
            st.forbid(vn, nmap.values())
        if nmap:
            head = F.f_subst(head, nmap)
            body = F.f_subst(body, nmap)
        try:
            st2 = unify_formulas(st, head.strip(), goal_atom.strip())
        except (Clash, OccursCheck, FreshnessViolation):
            continue
        return st2, st2.apply_formula(body), tuple(newvars)
    return None
