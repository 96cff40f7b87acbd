"""Rendering of terms, formulas, sequents, and proof states.

The output uses the same concrete grammar the parsers accept, so printing and
re-parsing a program or a closed formula is the identity.
"""

from __future__ import annotations

from . import formulas as F
from . import terms as T
from .types import CONS, NIL, SPEC_AND, SPEC_IMP, SPEC_PI

ATOM_PREC = 10
APP_PREC = 9
CONS_PREC = 6
AND_PREC = 5
IMP_PREC = 4
BIND_PREC = 1


def _paren(s, need):
    return f"({s})" if need else s


def _fresh_name(hint, used):
    if hint not in used:
        return hint
    i = 1
    while f"{hint}{i}" in used:
        i += 1
    return f"{hint}{i}"


def _names_in(t, acc):
    if isinstance(t, (T.Const, T.Var)):
        acc.add(t.name)
    elif isinstance(t, T.Nom):
        acc.add(t.name)
    elif isinstance(t, T.Lam):
        _names_in(t.body, acc)
    elif isinstance(t, T.App):
        _names_in(t.head, acc)
        for a in t.args:
            _names_in(a, acc)
    return acc


def tm(t, binders=(), prec=0, used=None):
    """Render a term; binders maps de Bruijn depth to display names."""
    if used is None:
        used = _names_in(t, set()) | set(binders)
    if isinstance(t, T.Const):
        return t.name
    if isinstance(t, T.Nom):
        return t.name
    if isinstance(t, T.Var):
        return t.name
    if isinstance(t, T.Bound):
        if t.k < len(binders):
            return binders[t.k]
        return f"#{t.k}"
    if isinstance(t, T.Lam):
        x = _fresh_name(t.hint, used)
        body = tm(t.body, (x,) + binders, 0, used | {x})
        return _paren(f"{x}\\ {body}", prec > 0)
    if isinstance(t, T.App):
        h, args = t.head, t.args
        if isinstance(h, T.Const):
            if h.name == SPEC_IMP and len(args) == 2:
                s = f"{tm(args[0], binders, IMP_PREC + 1, used)} => {tm(args[1], binders, IMP_PREC, used)}"
                return _paren(s, prec > IMP_PREC)
            if h.name == SPEC_AND and len(args) == 2:
                s = f"{tm(args[0], binders, AND_PREC, used)} & {tm(args[1], binders, AND_PREC + 1, used)}"
                return _paren(s, prec > AND_PREC)
            if h.name == CONS and len(args) == 2:
                s = f"{tm(args[0], binders, CONS_PREC + 1, used)} :: {tm(args[1], binders, CONS_PREC, used)}"
                return _paren(s, prec > CONS_PREC)
            if h.name == SPEC_PI and len(args) == 1 and isinstance(args[0], T.Lam):
                lam = args[0]
                x = _fresh_name(lam.hint, used)
                body = tm(lam.body, (x,) + binders, 0, used | {x})
                return _paren(f"pi {x}\\ {body}", prec > 0)
        parts = [tm(h, binders, ATOM_PREC, used)]
        parts += [tm(a, binders, ATOM_PREC, used) for a in args]
        return _paren(" ".join(parts), prec >= ATOM_PREC)
    return repr(t)


def _olist_parts(t, binders, used):
    """Split an olist term into (display elements outermost-last, base or None)."""
    elems = []
    while isinstance(t, T.App) and isinstance(t.head, T.Const) and t.head.name == CONS:
        elems.append(t.args[0])
        t = t.args[1]
    if isinstance(t, T.Const) and t.name == NIL:
        base = None
    else:
        base = t
    return list(reversed(elems)), base


def _ctx_str(l, binders, used):
    elems, base = _olist_parts(l, binders, used)
    parts = []
    if base is not None:
        parts.append(tm(base, binders, CONS_PREC + 1, used))
    parts += [tm(e, binders, 0, used) for e in elems]
    return ", ".join(parts)


FQ_PREC = {"->": 2, "\\/": 3, "/\\": 4}


def fm(f, binders=(), prec=0, used=None):
    """Render a reasoning formula."""
    if used is None:
        used = set(binders)

        def _collect(t, q):
            _names_in(t, used)
            return t

        F.map_terms(f, _collect)
    if isinstance(f, F.Top):
        return "true"
    if isinstance(f, F.Bot):
        return "false"
    if isinstance(f, F.Imp):
        s = f"{fm(f.left, binders, FQ_PREC['->'] + 1, used)} -> {fm(f.right, binders, FQ_PREC['->'], used)}"
        return _paren(s, prec > FQ_PREC["->"])
    if isinstance(f, F.Or):
        p = FQ_PREC["\\/"]
        s = fm(f.left, binders, p + 1, used) + " \\/ " + fm(f.right, binders, p, used)
        return _paren(s, prec > p)
    if isinstance(f, F.And):
        p = FQ_PREC["/\\"]
        s = fm(f.left, binders, p + 1, used) + " /\\ " + fm(f.right, binders, p, used)
        return _paren(s, prec > p)
    if isinstance(f, F.Eq):
        s = f"{tm(f.left, binders, CONS_PREC, used)} = {tm(f.right, binders, CONS_PREC, used)}"
        return _paren(s, prec > 5)
    if isinstance(f, F.Quant):
        names = []
        body = f
        cur_used = set(used)
        while isinstance(body, F.Quant) and body.q == f.q:
            x = _fresh_name(body.hint, cur_used)
            names.append((x, body.ty))
            cur_used.add(x)
            body = body.body
        shown = " ".join(f"({x} : {ty})" for x, ty in names)
        inner = fm(body, tuple(n for n, _ in reversed(names)) + binders, 0, cur_used)
        return _paren(f"{f.q} {shown}, {inner}", prec > BIND_PREC)
    if isinstance(f, F.Atom):
        ann = str(f.ann) if f.ann else ""
        if f.pred == "seq":
            l, g = f.args
            ctx = _ctx_str(l, binders, used)
            sep = " |- " if ctx else "|- "
            return "{" + ctx + sep + tm(g, binders, 0, used) + "}" + ann
        if f.pred == "bc":
            l, foc, a = f.args
            ctx = _ctx_str(l, binders, used)
            pre = ctx + ", " if ctx else ""
            return "{" + pre + "[" + tm(foc, binders, 0, used) + "] |- " + tm(a, binders, 0, used) + "}" + ann
        if not f.args:
            return f.pred + ann
        parts = [f.pred] + [tm(a, binders, ATOM_PREC, used) for a in f.args]
        s = " ".join(parts)
        if ann:
            s += " " + ann
        return _paren(s, prec >= ATOM_PREC)
    return repr(f)


def spec_clause(name, term):
    """Render a named program clause in `head :- goals.` form."""
    used = _names_in(term, set())
    binders = []
    body = term
    while (isinstance(body, T.App) and isinstance(body.head, T.Const)
           and body.head.name == SPEC_PI and isinstance(body.args[0], T.Lam)):
        x = _fresh_name(body.args[0].hint.upper(), used)
        used.add(x)
        binders.append(x)
        body = body.args[0].body
    bnd = tuple(reversed(binders))
    # body is goals => ... => head, rendered clause-style
    goals = []
    while (isinstance(body, T.App) and isinstance(body.head, T.Const)
           and body.head.name == SPEC_IMP):
        goals.append(body.args[0])
        body = body.args[1]
    head_s = tm(body, bnd, 0, used)
    label = f"{name} : " if name else ""
    if not goals:
        return f"{label}{head_s}."
    def split_and(g):
        if (isinstance(g, T.App) and isinstance(g.head, T.Const)
                and g.head.name == SPEC_AND):
            return split_and(g.args[0]) + split_and(g.args[1])
        return [g]
    flat = []
    for g in goals:
        flat += split_and(g)
    goal_s = ", ".join(tm(g, bnd, CONS_PREC, used) for g in flat)
    return f"{label}{head_s} :- {goal_s}."


def hyp_line(name, f):
    return f"  {name} : {fm(f)}"


def state_lines(st):
    """Human-readable rendering of one subgoal."""
    out = []
    if st.vars:
        out.append("Variables: " + " ".join(st.vars))
    for name, f in st.hyps:
        out.append(hyp_line(name, f))
    out.append("  " + "=" * 30)
    out.append("  " + fm(st.goal))
    return out
