"""Tactics over proof states: intros, induction, case, apply, search,
exists, split, assert, and the trusted meta tactics.

Every tactic is a pure function from a ProofState to a list of successor
states (empty list = subgoal closed); failures raise TacticError subclasses
and leave the caller's state untouched.
"""

from __future__ import annotations

from dataclasses import replace

from . import formulas as F
from . import terms as T
from . import twolevel as TL
from .speclogic import spec_head
from .state import ProofState, check_formula
from .types import (
    SPEC_AND,
    SPEC_IMP,
    SPEC_PI,
    AnnotationMismatch,
    Clash,
    FreshnessViolation,
    IllTyped,
    IllTypedWitness,
    MatchFailure,
    NotAConjunction,
    NotAPattern,
    NotAnInductiveAtom,
    NotCaseable,
    NotExistential,
    NothingToIntroduce,
    OccursCheck,
    OTY,
    TacticError,
    UnknownName,
    arrow,
)
from .unify import UnifyState, case_unifiers, pattern_unify, unify_formulas

UNIFY_FAIL = (Clash, OccursCheck, FreshnessViolation)


# ---------------------------------------------------------------- intros

def intros(ps, names=()):
    names = list(names)
    g = ps.goal
    n = 0
    while True:
        if isinstance(g, F.Quant) and g.q == "forall":
            supp = F.f_support(g)
            name = ps.fresh_name(g.hint)
            hty = g.ty
            for nom in reversed(supp):
                hty = arrow(nom.ty, hty)
            ps = ps.add_var(name, hty).forbid(name, supp)
            witness = T.norm(T.app(T.Var(name, hty), supp)) if supp else T.Var(name, hty)
            g = F.f_open(g.body, witness)
            n += 1
        elif isinstance(g, F.Quant) and g.q == "nabla":
            a = ps.open_nom(g.ty, F.f_support(g))
            for vn in F.f_free_vars(g):
                ps = ps.forbid(vn, (a,))
            g = F.f_open(g.body, a)
            n += 1
        elif isinstance(g, F.Imp):
            name = names.pop(0) if names else None
            ps, _ = ps.add_hyp(g.left, name=name)
            g = g.right
            n += 1
        else:
            break
    if n == 0:
        raise NothingToIntroduce("goal has no forall/nabla/implication prefix")
    return [ps.set_goal(g)]


# ------------------------------------------------------------- induction

def _annotate_antecedent(defs, f, pos, ann):
    if isinstance(f, F.Quant):
        return F.Quant(f.q, f.ty, _annotate_antecedent(defs, f.body, pos, ann), f.hint)
    if isinstance(f, F.Imp):
        if pos == 1:
            a = f.left
            if not (isinstance(a, F.Atom) and defs.is_inductive(a.pred)):
                raise NotAnInductiveAtom(
                    f"antecedent is not an inductively defined atom: {a}")
            if a.ann is not None:
                raise NotAnInductiveAtom("antecedent already carries an annotation")
            return F.Imp(a.with_ann(ann), f.right)
        return F.Imp(f.left, _annotate_antecedent(defs, f.right, pos - 1, ann))
    raise NotAnInductiveAtom(f"no antecedent at position {pos}")


def induction(ps, positions):
    conjs = F.conjuncts(ps.goal)
    if len(positions) != len(conjs):
        raise NotAnInductiveAtom(
            f"induction needs {len(conjs)} position(s), got {len(positions)}")
    level = ps.max_ann_level() + 1
    ihs = []
    goals = []
    for cf, pos in zip(conjs, positions):
        ihs.append(_annotate_antecedent(ps.defs, cf, pos, F.Ann("*", level)))
        goals.append(_annotate_antecedent(ps.defs, cf, pos, F.Ann("@", level)))
    for ih in ihs:
        name = "IH" if not ps.has_hyp("IH") else ps.fresh_name("IH")
        ps, _ = ps.add_hyp(ih, name=name)
    return [ps.set_goal(F.big_and(goals))]


# ------------------------------------------------------------------ case

def _register_new_vars(ps, f):
    have = {n for n, _ in ps.vars}
    add = []
    for vn, vty in F.f_free_vars(f).items():
        if vn not in have:
            add.append((vn, vty))
            have.add(vn)
    if add:
        ps = replace(ps, vars=ps.vars + tuple(add))
    return ps


def _decompose(ps, f, out, label, label_n):
    """Flatten a produced hypothesis: list of (state, keep-going) branches."""
    f = F.f_norm(f)
    if isinstance(f, F.Top):
        return [ps]
    if isinstance(f, F.Bot):
        return []
    if isinstance(f, F.And):
        states = _decompose(ps, f.left, out, label, label_n)
        res = []
        for s in states:
            res.extend(_decompose(s, f.right, out, label, label_n))
        return res
    if isinstance(f, F.Or):
        return (_decompose(ps, f.left, out, label, list(label_n))
                + _decompose(ps, f.right, out, label, list(label_n)))
    if isinstance(f, F.Quant) and f.q == "exists":
        supp = F.f_support(f)
        name = ps.fresh_name(f.hint)
        hty = f.ty
        for nom in reversed(supp):
            hty = arrow(nom.ty, hty)
        ps = ps.add_var(name, hty).forbid(name, supp)
        w = T.norm(T.app(T.Var(name, hty), supp)) if supp else T.Var(name, hty)
        return _decompose(ps, F.f_open(f.body, w), out, label, label_n)
    if isinstance(f, F.Quant) and f.q == "nabla":
        a = ps.open_nom(f.ty, F.f_support(f))
        for vn in F.f_free_vars(f):
            ps = ps.forbid(vn, (a,))
        return _decompose(ps, F.f_open(f.body, a), out, label, label_n)
    if isinstance(f, F.Eq):
        st = UnifyState(fresh=dict(ps.fresh), flex=None)
        taken = set(ps.taken_names())

        def _namer(base):
            cand, i = base, 0
            while cand in taken:
                i += 1
                cand = f"{base}{i}"
            taken.add(cand)
            return cand

        st.namer = _namer
        try:
            st2 = pattern_unify(st, f.left, f.right)
        except UNIFY_FAIL:
            return []
        return [_apply_unify_all(ps, st2)]
    ps = _register_new_vars(ps, f)
    ps, name = ps.add_hyp(f, label=label, label_n=label_n)
    return [ps]


def _apply_unify_all(ps, st):
    return ps.apply_unify(st)


def _atomic_constraints_ok(ps):
    """Reject states whose atomicity constraints hit a logical constructor."""
    for _, f in ps.hyps:
        if isinstance(f, F.Atom) and f.pred == "atomic":
            kind, _ = spec_head(f.args[0])
            if kind is not None:
                return False
    return True


def _assemble_branches(ps_base, branches, cased_ann, label):
    out = []
    for br in branches:
        ps2 = ps_base.apply_unify(br.st)
        if not _atomic_constraints_ok(ps2):
            continue
        states = [ps2]
        label_n = [0]
        for hf in br.hyps:
            hf = br.st.apply_formula(hf)
            nxt = []
            for s in states:
                nxt.extend(_decompose(s, hf, None, label, label_n))
            states = nxt
        out.extend(s for s in states if _atomic_constraints_ok(s))
    return out


def case(ps, hyp_name, label=None):
    f = ps.hyp(hyp_name)
    base = ps.drop_hyp(hyp_name)
    label_n = [0]
    if isinstance(f, (F.Top, F.Bot, F.And, F.Or, F.Eq)) or (
            isinstance(f, F.Quant) and f.q in ("exists", "nabla")):
        return _decompose(base, f, None, label, label_n)
    if isinstance(f, F.Atom):
        if f.pred == "seq":
            return _assemble_branches(base, TL.case_seq(base, f), f.ann, label)
        if f.pred == "bc":
            return _assemble_branches(base, TL.case_bc(base, f), f.ann, label)
        if f.pred == "atomic":
            kind, parts = spec_head(f.args[0])
            if kind is not None:
                return []
            h, _ = T.spine(f.args[0])
            if isinstance(h, T.Var):
                raise NotCaseable("atomicity of a variable formula is a constraint")
            return [base]
        if ps.defs.is_defined(f.pred):
            clauses = ps.defs.clauses_for(f)
            st = UnifyState(fresh=dict(ps.fresh), flex=None)
            taken = set(base.taken_names())

            def mk(base_name):
                name = base_name or "X"
                i = 0
                cand = name
                while cand in taken:
                    i += 1
                    cand = f"{name}{i}"
                taken.add(cand)
                return cand

            st.namer = mk
            sols = case_unifiers(st, f, clauses, used_noms=base.used_noms(), mk_name=mk)
            star = TL.star_of(f.ann)
            out = []
            for sol in sols:
                body = sol.body
                if star:
                    body = F.map_atoms(
                        body,
                        lambda a: a.with_ann(star)
                        if a.ann is None and ps.defs.is_inductive(a.pred) else a)
                ps2 = base.apply_unify(sol.state)
                if not _atomic_constraints_ok(ps2):
                    continue
                lbn = [0] if label else label_n
                out.extend(
                    s for s in _decompose(ps2, sol.state.apply_formula(body),
                                          None, label, lbn)
                    if _atomic_constraints_ok(s))
            return out
        raise NotCaseable(f"{f.pred} is not a defined predicate")
    raise NotCaseable(f"cannot case on {f}")


# ---------------------------------------------------------------- search

def _iter_hyp_id(ps, goal, st):
    gstr = F.f_strip(st.apply_formula(goal))
    flex_free = not _has_flex(st, gstr)
    for _, h in ps.hyps:
        if isinstance(h, F.Bot):
            yield st
            continue
        hs = F.f_strip(h)
        if type(hs) is not type(gstr):
            continue
        if isinstance(hs, F.Atom) and isinstance(gstr, F.Atom) and hs.pred != gstr.pred:
            continue
        if flex_free:
            if F.f_equivariant(hs, gstr) is not None:
                yield st
        else:
            try:
                yield unify_formulas(st, hs, gstr)
            except UNIFY_FAIL + (NotAPattern,):
                continue


def _has_flex(st, f):
    for vn in F.f_free_vars(f):
        if st.is_flex(vn):
            return True
    return False


def _search_nom(ps, st, extra):
    used = set(ps.used_noms()) | set(extra)
    for v in st.subst.values():
        used.update(T.support(v))
    for s in st.fresh.values():
        used.update(s)
    return used


class _Searcher:
    def __init__(self, ps):
        self.ps = ps
        self.noms_extra = set()

    def fresh_nom(self, st, ty):
        used = _search_nom(self.ps, st, self.noms_extra)
        i = 1
        while T.Nom(ty, i) in used:
            i += 1
        n = T.Nom(ty, i)
        self.noms_extra.add(n)
        return n

    def prove(self, goal, st, depth, top=False):
        ps = self.ps
        goal = st.apply_formula(goal)
        if top or isinstance(goal, (F.Atom, F.Eq)):
            yield from _iter_hyp_id(ps, goal, st)
        if isinstance(goal, F.Top):
            yield st
            return
        if isinstance(goal, F.And):
            for st1 in self.prove(goal.left, st, depth):
                yield from self.prove(goal.right, st1, depth)
            return
        if isinstance(goal, F.Or):
            yield from self.prove(goal.left, st, depth)
            yield from self.prove(goal.right, st, depth)
            return
        if isinstance(goal, F.Eq):
            try:
                yield pattern_unify(st, goal.left, goal.right)
            except UNIFY_FAIL + (NotAPattern,):
                pass
            return
        if isinstance(goal, F.Quant) and goal.q == "exists":
            st2 = st.copy()
            w = st2.fresh_var(goal.ty, base="?w")
            yield from self.prove(F.f_open(goal.body, w), st2, depth)
            return
        if isinstance(goal, F.Quant) and goal.q == "forall":
            st2 = st.copy()
            supp = F.f_support(goal)
            st2.counter += 1
            name = f"_g{st2.counter}"
            hty = goal.ty
            for nom in reversed(supp):
                hty = arrow(nom.ty, hty)
            st2.forbid(name, supp)
            w = T.Var(name, hty)
            w = T.norm(T.app(w, supp)) if supp else w
            yield from self.prove(F.f_open(goal.body, w), st2, depth)
            return
        if isinstance(goal, F.Quant) and goal.q == "nabla":
            st2 = st.copy()
            supp = F.f_support(goal)
            i = 1
            while T.Nom(goal.ty, i) in supp:
                i += 1
            a = T.Nom(goal.ty, i)
            for vn in F.f_free_vars(goal):
                st2.forbid(vn, (a,))
            yield from self.prove(F.f_open(goal.body, a), st2, depth)
            return
        if isinstance(goal, F.Atom):
            yield from self.prove_atom(goal, st, depth)
        return

    def prove_atom(self, goal, st, depth):
        ps = self.ps
        pred = goal.pred
        if pred == "atomic":
            t = st.apply(goal.args[0])
            if ps.atomic_ok(t):
                yield st
            return
        if depth <= 0:
            return
        if pred == "seq":
            l, g = (st.apply(a) for a in goal.args)
            kind, parts = spec_head(g)
            if kind == SPEC_AND:
                body = F.And(TL.seq_atom(l, parts[0]), TL.seq_atom(l, parts[1]))
                yield from self.prove(body, st, depth)
                return
            if kind == SPEC_IMP:
                yield from self.prove(TL.seq_atom(TL.cons(parts[0], l), parts[1]), st, depth)
                return
            if kind == SPEC_PI:
                st2 = st.copy()
                supp = set(T.support(l)) | set(T.support(g))
                i = 1
                while T.Nom(parts[0].ty, i) in supp:
                    i += 1
                a = T.Nom(parts[0].ty, i)
                for vn in T.free_vars(l) | T.free_vars(g):
                    st2.forbid(vn, (a,))
                yield from self.prove(TL.seq_atom(l, T.instantiate(parts[0], a)), st2, depth)
                return
            if not ps.atomic_ok(g):
                return
            prog = ps.defs.program.clauses if ps.defs.program else []
            for clause in prog:
                yield from self.prove(TL.bc_atom(l, clause.term, g), st, depth - 1)
            st2 = st.copy()
            fv = st2.fresh_var(OTY, base="?f")
            body = F.And(F.Atom("member", (fv, l)), TL.bc_atom(l, fv, g))
            yield from self.prove(body, st2, depth - 1)
            return
        if pred == "bc":
            l, foc, a = (st.apply(x) for x in goal.args)
            kind, parts = spec_head(foc)
            if kind == SPEC_AND:
                body = F.Or(TL.bc_atom(l, parts[0], a), TL.bc_atom(l, parts[1], a))
                yield from self.prove(body, st, depth)
                return
            if kind == SPEC_IMP:
                # continue toward the head first so the match instantiates
                # the clause variables before the antecedent is attempted
                body = F.And(TL.bc_atom(l, parts[1], a), TL.seq_atom(l, parts[0]))
                yield from self.prove(body, st, depth)
                return
            if kind == SPEC_PI:
                st2 = st.copy()
                w = st2.fresh_var(parts[0].ty, base="?w")
                yield from self.prove(TL.bc_atom(l, T.instantiate(parts[0], w), a), st2, depth)
                return
            try:
                yield pattern_unify(st, foc, a)
            except UNIFY_FAIL + (NotAPattern,):
                pass
            return
        if ps.defs.is_defined(pred):
            try:
                clauses = ps.defs.clauses_for(goal)
            except UnknownName:
                return
            used = _search_nom(self.ps, st, self.noms_extra)
            sols = case_unifiers(st, goal, clauses, used_noms=used)
            for sol in sols:
                yield from self.prove(sol.body, sol.state, depth - 1)
        return


def search(ps, depth=5):
    st = UnifyState(fresh=dict(ps.fresh), flex=frozenset())
    searcher = _Searcher(ps)
    for _ in searcher.prove(ps.goal, st, depth, top=True):
        return []
    raise TacticError("search failed to close the goal")


# ------------------------------------------------------------ small ones

def exists_(ps, witness):
    g = ps.goal
    if not (isinstance(g, F.Quant) and g.q == "exists"):
        raise NotExistential("goal is not existentially quantified")
    try:
        wty = T.typecheck(ps.defs.sig, ps.var_types(), witness)
    except (IllTyped, UnknownName, Exception) as e:
        raise IllTypedWitness(str(e)) from None
    if wty != g.ty:
        raise IllTypedWitness(f"witness has type {wty}, goal wants {g.ty}")
    return [ps.set_goal(F.f_open(g.body, witness))]


def split(ps):
    if not isinstance(ps.goal, F.And):
        raise NotAConjunction("goal is not a conjunction")
    return [ps.set_goal(c) for c in F.conjuncts(ps.goal)]


def assert_(ps, f, label=None):
    check_formula(ps.defs, f, ps.var_types())
    first = ps.set_goal(f)
    second, _ = ps.add_hyp(f, name=label)
    return [first, second]


# ----------------------------------------------------------------- apply

def _ann_compatible(ant, hyp):
    """Annotation discipline for apply: * antecedents require * hypotheses."""
    pairs = []

    def walk(a, h):
        if isinstance(a, F.Atom) and isinstance(h, F.Atom):
            pairs.append((a.ann, h.ann))
        elif isinstance(a, (F.And, F.Or, F.Imp)) and type(a) is type(h):
            walk(a.left, h.left)
            walk(a.right, h.right)
        elif isinstance(a, F.Quant) and isinstance(h, F.Quant):
            walk(a.body, h.body)

    walk(ant, hyp)
    for aa, ha in pairs:
        if aa is None:
            continue
        if aa.kind == "*":
            if ha is None or ha.kind != "*" or ha.level != aa.level:
                return False
        elif aa.kind == "@":
            if ha is None or ha.level != aa.level:
                return False
    return True


def apply_(ps, name, arg_names, withs=None, lemmas=None, label=None):
    lemmas = lemmas or {}
    if ps.has_hyp(name):
        stmt = ps.hyp(name)
    elif name in lemmas:
        stmt = lemmas[name]
    else:
        raise UnknownName(f"no hypothesis or lemma named {name}")
    conjs = F.conjuncts(stmt)
    if len(conjs) > 1:
        err = None
        for alt in conjs:
            try:
                return _apply_one(ps, name, alt, arg_names, withs, label)
            except (MatchFailure, NotAPattern) as e:
                err = e
        raise err
    return _apply_one(ps, name, stmt, arg_names, withs, label)


def _apply_one(ps, name, stmt, arg_names, withs=None, label=None):
    # open the quantifier prefix with fresh flexible variables
    prefix = []  # (kind, Var)
    taken = set(ps.taken_names())
    ants = []
    pending_withs = set(withs or ())
    f = stmt
    while True:
        if isinstance(f, F.Quant) and f.q in ("forall", "nabla") and (
                len(ants) < len(arg_names) or f.hint in pending_withs):
            pending_withs.discard(f.hint)
            base = f.hint or "X"
            cand, i = base, 0
            while cand in taken:
                i += 1
                cand = f"{base}{i}"
            taken.add(cand)
            v = T.Var(cand, f.ty)
            prefix.append((f.q, f.hint, v))
            f = F.f_open(f.body, v)
            continue
        if isinstance(f, F.Imp) and len(ants) < len(arg_names):
            ants.append(f.left)
            f = f.right
            continue
        break
    conclusion = f
    if len(ants) != len(arg_names):
        raise MatchFailure(
            f"{name} expects at least {len(arg_names)} premises")
    st0 = UnifyState(fresh=dict(ps.fresh), flex=frozenset(v.name for _, _, v in prefix))
    ataken = set(ps.taken_names()) | {v.name for _, _, v in prefix}

    def _apply_namer(base):
        cand, i = base, 0
        while cand in ataken:
            i += 1
            cand = f"{base}{i}"
        ataken.add(cand)
        return cand

    st0.namer = _apply_namer
    for _, _, v in prefix:
        st0.mark_ephemeral(v.name)
    if withs:
        for wname, wterm in withs.items():
            target = next((v for _, hint, v in prefix if hint == wname), None)
            if target is None:
                raise MatchFailure(f"{name} has no bound variable {wname}")
            ty = T.typecheck(ps.defs.sig, ps.var_types(), wterm)
            if ty != target.ty:
                raise IllTyped(f"with-binding {wname}: {ty} != {target.ty}")
            st0 = pattern_unify(st0, target, wterm)

    # nabla-prefix variables range over nominal constants: those visible in
    # the argument hypotheses, or fresh ones
    nabla_vars = [(hint, v) for q, hint, v in prefix if q == "nabla"]
    cand_noms = []
    for want in arg_names:
        if want != "_":
            cand_noms.extend(F.f_support(ps.hyp(want)))
    seen = set()
    cand_noms = [n for n in cand_noms if not (n in seen or seen.add(n))]

    def nabla_assign(j, st, chosen):
        if j == len(nabla_vars):
            yield st
            return
        hint, v = nabla_vars[j]
        pre = st.apply(v)
        used = _search_nom(ps, st, set(chosen))
        i = 1
        while T.Nom(v.ty, i) in used:
            i += 1
        options = [n for n in cand_noms if n.ty == v.ty and n not in chosen]
        options.append(T.Nom(v.ty, i))
        for nom in options:
            st2 = st.copy()
            try:
                st2 = pattern_unify(st2, v, nom)
            except UNIFY_FAIL + (NotAPattern,):
                continue
            # universal variables quantified before this nabla must avoid it
            for q2, _, u in prefix:
                if u is v:
                    break
                if q2 == "forall":
                    st2.forbid(_flex_root(st2, u), (nom,))
            yield from nabla_assign(j + 1, st2, chosen + [nom])

    def match(i, st):
        if i == len(ants):
            yield st
            return
        want = arg_names[i]
        cands = ps.hyps if want == "_" else ((want, ps.hyp(want)),)
        for _, hf in cands:
            ant = st.apply_formula(ants[i])
            if not _ann_compatible(ant, hf):
                continue
            try:
                st2 = unify_formulas(st, F.f_strip(ant), F.f_strip(hf))
            except UNIFY_FAIL + (NotAPattern,):
                continue
            yield from match(i + 1, st2)

    failure = None
    for st_n in nabla_assign(0, st0, []):
        for st in match(0, st_n):
            concl = st.apply_formula(conclusion)
            leftover = [vn for vn in F.f_free_vars(concl)
                        if st.is_flex(vn) and any(v.name == vn for _, _, v in prefix)]
            if leftover:
                failure = MatchFailure(
                    f"cannot infer an instantiation for {', '.join(sorted(set(leftover)))}")
                continue
            return _conclude(ps, st, concl, label)
    raise failure or MatchFailure(f"{name} does not apply to the given hypotheses")


def _flex_root(st, v):
    sol = st.apply(v)
    h, _ = T.spine(sol) if not isinstance(sol, T.Lam) else (sol, ())
    while isinstance(h, T.Lam):
        h, _ = T.spine(h.body)
    return h.name if isinstance(h, T.Var) else v.name


def _conclude(ps, st, concl, label):
    ps2 = ps.apply_unify(st)
    concl = st.apply_formula(concl)
    # substitute out equational conclusions on eigenvariables
    eqs = {}
    rest = []
    for c in F.conjuncts(concl):
        sub = None
        if isinstance(c, F.Eq):
            varnames = {n for n, _ in ps2.vars}
            for a, b in ((c.left, c.right), (c.right, c.left)):
                if isinstance(a, T.Var) and a.name in varnames and a.name not in eqs:
                    if a.name not in T.free_vars(b):
                        bad = set(T.support(b)) & ps2.fresh.get(a.name, frozenset())
                        if not bad:
                            sub = (a.name, b)
                            break
        if sub:
            eqs[sub[0]] = sub[1]
        else:
            rest.append(c)
    if eqs:
        st2 = UnifyState(fresh=dict(ps2.fresh), flex=None)
        for k, v in eqs.items():
            st2.bind(k, v)
        ps2 = ps2.apply_unify(st2)
        rest = [st2.apply_formula(r) for r in rest]
    if not rest:
        return [ps2]
    newf = F.big_and(rest) if len(rest) > 1 else rest[0]
    ps2 = _register_new_vars(ps2, newf)
    label_n = [0]
    ps2, _ = ps2.add_hyp(newf, label=label, label_n=label_n)
    return [ps2]


# ------------------------------------------------------------------ meta

def meta(ps, kind, args, label=None):
    if kind == "cut":
        newf = TL.meta_cut(ps, args["hyp"], args["with_hyp"])
        ps2, _ = ps.add_hyp(newf, name=label)
        return [ps2]
    if kind == "inst":
        newf = TL.meta_inst(ps, args["hyp"], args["nom"], args["witness"])
        ps2, _ = ps.add_hyp(newf, name=label)
        return [ps2]
    if kind == "monotone":
        obligation, newf = TL.meta_monotone(ps, args["hyp"], args["target"])
        first = ps.set_goal(obligation)
        second, _ = ps.add_hyp(newf, name=label)
        return [first, second]
    raise TacticError(f"unknown meta tactic {kind}")
