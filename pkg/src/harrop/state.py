"""Proof states, the definition environment, and supporting allocation helpers."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from . import formulas as F
from . import terms as T
from .types import (
    DuplicateName,
    IllTyped,
    IllTypedClause,
    NonEmptyHeadSupport,
    StratificationError,
    Ty,
    UnknownName,
    arrow,
    OTY,
    OLIST,
    PROP,
)

RESERVED_PREDS = ("seq", "bc", "member", "name", "atomic", "prog")


@dataclass
class Defs:
    """Session-level logical environment: signature, program, definitions."""

    sig: object
    program: object = None
    defs: dict = field(default_factory=dict)
    extra_pi_tys: list = field(default_factory=list)

    def __post_init__(self):
        if "member" not in self.defs:
            E = T.Var("E", OTY)
            Fv = T.Var("F", OTY)
            L = T.Var("L", OLIST)
            from .speclogic import CONSC
            self.defs["member"] = F.Definition(
                "member", arrow(OTY, arrow(OLIST, PROP)),
                (
                    F.DefClause((("E", OTY), ("L", OLIST)), (),
                                F.Atom("member", (E, T.App(CONSC, (E, L)))), F.Top()),
                    F.DefClause((("E", OTY), ("F", OTY), ("L", OLIST)), (),
                                F.Atom("member", (E, T.App(CONSC, (Fv, L)))),
                                F.Atom("member", (E, L))),
                ))
            for p in ("seq", "bc", "name", "atomic"):
                self.defs[p] = F.Definition(p, PROP, (), schema=True)

    def clone(self):
        c = Defs.__new__(Defs)
        c.sig = self.sig.copy()
        c.program = self.program
        c.defs = dict(self.defs)
        c.extra_pi_tys = list(self.extra_pi_tys)
        return c

    def is_defined(self, pred):
        return pred in self.defs

    def is_inductive(self, pred):
        d = self.defs.get(pred)
        return d is not None and d.inductive and pred != "atomic"

    def clauses_for(self, atom):
        """Concrete clause list for an atom of a defined predicate."""
        d = self.defs.get(atom.pred)
        if d is None:
            raise UnknownName(f"undefined predicate {atom.pred}")
        if atom.pred == "name":
            ty = T.infer(atom.args[0])
            x = T.Var("x", ty)
            return (F.DefClause((), (("x", ty),), F.Atom("name", (x,)), F.Top()),)
        if atom.pred == "prog":
            return d.clauses
        if d.schema:
            raise UnknownName(f"{atom.pred} is handled by the kernel schema")
        return d.clauses

    def pi_types(self):
        tys = list(self.program.pi_types()) if self.program else []
        for ty in self.extra_pi_tys:
            if ty not in tys:
                tys.append(ty)
        return tys

    def add_definition(self, pred, ty, clauses, inductive=True):
        if pred in self.defs:
            raise DuplicateName(f"{pred} is already defined")
        if ty.head != "prop":
            raise IllTypedClause(f"{pred} must target prop, got {ty}")
        block = {pred}
        for c in clauses:
            if c.head.pred != pred:
                raise IllTypedClause(
                    f"clause head {c.head.pred} does not match definition {pred}")
            if F.f_support(c.head) or F.f_support(c.body):
                raise NonEmptyHeadSupport(f"clause for {pred} mentions nominal constants")
            self._check_stratified(pred, c.body, block, positive=True)
        self.defs[pred] = F.Definition(pred, ty, tuple(clauses), inductive)

    def _check_stratified(self, pred, body, block, positive):
        if isinstance(body, F.Atom):
            if body.pred in block and not positive:
                raise StratificationError(
                    f"{body.pred} occurs negatively in a clause for {pred}")
            if body.pred not in block and not self.is_defined(body.pred):
                raise UnknownName(f"undefined predicate {body.pred} in body of {pred}")
            return
        if isinstance(body, F.Imp):
            self._check_stratified(pred, body.left, block, not positive)
            self._check_stratified(pred, body.right, block, positive)
        elif isinstance(body, (F.And, F.Or)):
            self._check_stratified(pred, body.left, block, positive)
            self._check_stratified(pred, body.right, block, positive)
        elif isinstance(body, F.Quant):
            self._check_stratified(pred, body.body, block, positive)


def check_formula(defs, f, varctx, qtys=()):
    """Type-check a reasoning formula against the environment."""
    if isinstance(f, (F.Top, F.Bot)):
        return
    if isinstance(f, (F.And, F.Or, F.Imp)):
        check_formula(defs, f.left, varctx, qtys)
        check_formula(defs, f.right, varctx, qtys)
        return
    if isinstance(f, F.Quant):
        check_formula(defs, f.body, varctx, (f.ty,) + qtys)
        return
    if isinstance(f, F.Eq):
        t1 = T.typecheck(defs.sig, varctx, f.left, qtys)
        t2 = T.typecheck(defs.sig, varctx, f.right, qtys)
        if t1 != t2:
            raise IllTyped(f"equality between {t1} and {t2}")
        return
    if isinstance(f, F.Atom):
        d = defs.defs.get(f.pred)
        if f.pred == "seq":
            want = (OLIST, OTY)
        elif f.pred == "bc":
            want = (OLIST, OTY, OTY)
        elif f.pred in ("atomic", "prog"):
            want = (OTY,)
        elif f.pred == "name":
            want = (None,)
        elif d is not None:
            want = d.ty.args
        else:
            raise UnknownName(f"undefined predicate {f.pred}")
        if len(want) != len(f.args):
            raise IllTyped(f"{f.pred} expects {len(want)} arguments")
        for w, a in zip(want, f.args):
            ta = T.typecheck(defs.sig, varctx, a, qtys)
            if w is not None and ta != w:
                raise IllTyped(f"argument {a} of {f.pred}: {ta}, wanted {w}")
        return
    raise IllTyped(f"not a formula: {f!r}")


@dataclass(frozen=True)
class ProofState:
    """One subgoal: eigenvariable context, hypotheses, goal, freshness data."""

    defs: Defs
    vars: tuple = ()  # ((name, Ty), ...)
    fresh: object = field(default_factory=dict)  # name -> frozenset[Nom]
    hyps: tuple = ()  # ((name, Formula), ...)
    goal: F.Formula = F.Top()
    hyp_n: int = 0

    def var_types(self):
        return dict(self.vars)

    def hyp(self, name):
        for n, f in self.hyps:
            if n == name:
                return f
        raise UnknownName(f"no hypothesis named {name}")

    def has_hyp(self, name):
        return any(n == name for n, _ in self.hyps)

    def used_noms(self):
        noms = set()
        for _, f in self.hyps:
            noms.update(F.f_support(f))
        noms.update(F.f_support(self.goal))
        for s in self.fresh.values():
            noms.update(s)
        return noms

    def fresh_nom(self, ty, taken=()):
        used = self.used_noms() | set(taken)
        i = 1
        while T.Nom(ty, i) in used:
            i += 1
        return T.Nom(ty, i)

    def open_nom(self, ty, principal_supp):
        """Nominal for a nabla opening: smallest index outside the support of
        the principal formula (reuse elsewhere in the sequent is permitted)."""
        i = 1
        while T.Nom(ty, i) in principal_supp:
            i += 1
        return T.Nom(ty, i)

    def taken_names(self):
        names = {n for n, _ in self.vars}
        names.update(n for n, _ in self.hyps)
        names.update(self.defs.sig.consts)
        return names

    def fresh_name(self, base, taken=()):
        base = base or "X"
        names = self.taken_names() | set(taken)
        if base not in names:
            return base
        i = 1
        while f"{base}{i}" in names:
            i += 1
        return f"{base}{i}"

    def add_var(self, name, ty):
        return replace(self, vars=self.vars + ((name, ty),))

    def forbid(self, name, noms):
        if not noms:
            return self
        fresh = dict(self.fresh)
        fresh[name] = fresh.get(name, frozenset()) | frozenset(noms)
        return replace(self, fresh=fresh)

    def add_hyp(self, f, name=None, label=None, label_n=None):
        """Add one hypothesis; returns (state, name)."""
        if name is None:
            varnames = {n for n, _ in self.vars}
            if label is not None:
                name = label if label_n[0] == 0 else f"{label}{label_n[0]}"
                label_n[0] += 1
                while self.has_hyp(name) or name in varnames:
                    name = f"{label}{label_n[0]}"
                    label_n[0] += 1
            else:
                n = self.hyp_n + 1
                name = f"H{n}"
                while self.has_hyp(name) or name in varnames:
                    n += 1
                    name = f"H{n}"
                return replace(self, hyps=self.hyps + ((name, f),), hyp_n=n), name
        if self.has_hyp(name):
            raise DuplicateName(f"hypothesis {name} already exists")
        return replace(self, hyps=self.hyps + ((name, f),)), name

    def drop_hyp(self, name):
        return replace(self, hyps=tuple((n, f) for n, f in self.hyps if n != name))

    def set_goal(self, g):
        return replace(self, goal=g)

    def apply_unify(self, st):
        """Push a unification state's substitution through the whole subgoal."""
        if not st.subst and not st.fresh:
            return self
        mapping = st.subst
        bound = set(mapping)
        new_vars = [(n, ty) for n, ty in self.vars if n not in bound]
        have = {n for n, _ in new_vars}
        for val in mapping.values():
            for vn, vty in T.free_vars(val).items():
                if vn not in have:
                    new_vars.append((vn, vty))
                    have.add(vn)
        hyps = tuple((n, F.f_subst(f, mapping)) for n, f in self.hyps)
        goal = F.f_subst(self.goal, mapping)
        fresh = {}
        for k, v in self.fresh.items():
            if k not in bound:
                fresh[k] = frozenset(v)
        for k, v in st.fresh.items():
            if k not in bound:
                fresh[k] = fresh.get(k, frozenset()) | frozenset(v)
        # re-check goal/hyps for vars introduced only by the substitution
        for _, f in hyps + ((None, goal),):
            for vn, vty in F.f_free_vars(f).items():
                if vn not in have:
                    new_vars.append((vn, vty))
                    have.add(vn)
        return replace(self, vars=tuple(new_vars), fresh=fresh, hyps=hyps, goal=goal)

    def max_ann_level(self):
        lvl = 0
        for _, f in self.hyps:
            for a in F.iter_atoms(f):
                if a.ann:
                    lvl = max(lvl, a.ann.level)
        for a in F.iter_atoms(self.goal):
            if a.ann:
                lvl = max(lvl, a.ann.level)
        return lvl

    def atomic_ok(self, term):
        """Is this o-term known to be atomic (syntactically or by constraint)?"""
        from .speclogic import atomic_check
        h, _ = T.spine(term)
        if isinstance(h, (T.Const, T.Nom)):
            return atomic_check(term)
        if isinstance(h, T.Var):
            for _, f in self.hyps:
                if isinstance(f, F.Atom) and f.pred == "atomic":
                    h2, _ = T.spine(f.args[0])
                    if h2 == h:
                        return True
        return False
