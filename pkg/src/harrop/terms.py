"""Simply typed lambda-terms shared by the specification and reasoning levels.

Internal binding uses de Bruijn indices, so alpha-equivalent terms are equal by
construction.  Every term kept in a formula or proof state is in beta-eta-long
normal form; `norm` re-establishes that invariant after substitution.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

from .types import (
    Clash,
    NotAnAbstraction,
    Ty,
    TypeMismatch,
    UnknownName,
    arrow,
    cache_hash,
)


@cache_hash
@dataclass(frozen=True)
class Term:
    pass


@cache_hash
@dataclass(frozen=True)
class Const(Term):
    name: str
    ty: Ty

    def __str__(self):
        return self.name


@cache_hash
@dataclass(frozen=True)
class Nom(Term):
    """Nominal constant: member idx of the infinite family at type ty."""

    ty: Ty
    idx: int

    @property
    def name(self):
        return f"n{self.idx}"

    def __str__(self):
        return self.name


@cache_hash
@dataclass(frozen=True)
class Var(Term):
    """Eigenvariable / unification variable, identified by name."""

    name: str
    ty: Ty

    def __str__(self):
        return self.name


@cache_hash
@dataclass(frozen=True)
class Bound(Term):
    k: int

    def __str__(self):
        return f"#{self.k}"


@cache_hash
@dataclass(frozen=True)
class Lam(Term):
    ty: Ty
    body: Term
    hint: str = field(default="x", compare=False, hash=False)

    def __str__(self):
        return f"({self.hint}\\ {self.body})"


@cache_hash
@dataclass(frozen=True)
class App(Term):
    head: Term
    args: tuple

    def __str__(self):
        return "(" + " ".join(str(t) for t in (self.head,) + self.args) + ")"


def app(head, args):
    """Apply head to args, merging spines; args may be empty."""
    args = tuple(args)
    if not args:
        return head
    if isinstance(head, App):
        return App(head.head, head.args + args)
    return App(head, args)


def shift(t, amount, cutoff=0):
    if amount == 0:
        return t
    if isinstance(t, Bound):
        return Bound(t.k + amount) if t.k >= cutoff else t
    if isinstance(t, Lam):
        return Lam(t.ty, shift(t.body, amount, cutoff + 1), t.hint)
    if isinstance(t, App):
        return App(shift(t.head, amount, cutoff), tuple(shift(a, amount, cutoff) for a in t.args))
    return t


def open_bound(t, j, w):
    """Replace Bound(j) by w (shifted), lowering indices above j by one."""
    if isinstance(t, Bound):
        if t.k == j:
            return shift(w, j)
        return Bound(t.k - 1) if t.k > j else t
    if isinstance(t, Lam):
        return Lam(t.ty, open_bound(t.body, j + 1, w), t.hint)
    if isinstance(t, App):
        return App(open_bound(t.head, j, w), tuple(open_bound(a, j, w) for a in t.args))
    return t


def close_over(t, target, j=0):
    """Inverse of opening: abstract occurrences of `target` (a Nom or Var) as Bound(j)."""
    if t == target:
        return Bound(j)
    if isinstance(t, Bound):
        return Bound(t.k + 1) if t.k >= j else t
    if isinstance(t, Lam):
        return Lam(t.ty, close_over(t.body, target, j + 1), t.hint)
    if isinstance(t, App):
        return App(close_over(t.head, target, j), tuple(close_over(a, target, j) for a in t.args))
    return t


def beta(t):
    """Full beta-normalization (call-by-name on spines, then recurse)."""
    if isinstance(t, Lam):
        return Lam(t.ty, beta(t.body), t.hint)
    if isinstance(t, App):
        head = beta(t.head)
        args = list(t.args)
        while isinstance(head, Lam) and args:
            head = beta(open_bound(head.body, 0, args.pop(0)))
        args = tuple(beta(a) for a in args)
        return app(head, args) if args else head
    return t


def head_type(h, env):
    if isinstance(h, (Const, Nom, Var)):
        return h.ty
    if isinstance(h, Bound):
        try:
            return env[h.k]
        except IndexError:
            raise TypeMismatch(f"loose bound variable {h}") from None
    raise TypeMismatch(f"not an atomic head: {h}")


def eta_long(t, ty, env):
    """Eta-expand a beta-normal term to its eta-long form, type-directed."""
    if ty.args:
        a0 = ty.args[0]
        rest = Ty(ty.args[1:], ty.head)
        if isinstance(t, Lam):
            return Lam(a0, eta_long(t.body, rest, (a0,) + env), t.hint)
        t1 = app(shift(t, 1), (Bound(0),))
        return Lam(a0, eta_long(beta(t1), rest, (a0,) + env))
    if isinstance(t, App):
        hty = head_type(t.head, env)
        if len(hty.args) != len(t.args):
            raise TypeMismatch(f"head {t.head} applied to {len(t.args)} args, expects {len(hty.args)}")
        return App(t.head, tuple(eta_long(a, hty.args[i], env) for i, a in enumerate(t.args)))
    if isinstance(t, (Const, Nom, Var, Bound)):
        return t
    raise TypeMismatch(f"lambda at base type: {t}")


def infer(t, env=()):
    """Infer the type of a term; env maps de Bruijn indices to types."""
    if isinstance(t, (Const, Nom, Var)):
        return t.ty
    if isinstance(t, Bound):
        return head_type(t, env)
    if isinstance(t, Lam):
        bty = infer(t.body, (t.ty,) + env)
        return arrow(t.ty, bty)
    if isinstance(t, App):
        hty = infer(t.head, env)
        if len(hty.args) < len(t.args):
            raise TypeMismatch(f"over-application of {t.head}")
        for i, a in enumerate(t.args):
            aty = infer(a, env)
            if aty != hty.args[i]:
                raise TypeMismatch(f"argument {a} has type {aty}, expected {hty.args[i]}")
        return Ty(hty.args[len(t.args):], hty.head)
    raise TypeMismatch(f"cannot type {t!r}")


@lru_cache(maxsize=200000)
def _norm_cached(t, env):
    t2 = beta(t)
    return eta_long(t2, infer(t2, env), env)


def norm(t, env=()):
    """Beta-eta-long normal form; env gives types of free bound variables."""
    return _norm_cached(t, tuple(env))


@lru_cache(maxsize=200000)
def fv_names(t):
    """Frozenset of free eigenvariable names (cached)."""
    if isinstance(t, Var):
        return frozenset((t.name,))
    if isinstance(t, Lam):
        return fv_names(t.body)
    if isinstance(t, App):
        out = fv_names(t.head)
        for a in t.args:
            out |= fv_names(a)
        return out
    return frozenset()


def typecheck(sig, eigenctx, t, env=()):
    """Check a term against a signature and eigenvariable context, returning its type."""
    if isinstance(t, Const):
        return sig.lookup_at(t.name, t.ty)
    if isinstance(t, Var):
        if eigenctx is not None:
            known = eigenctx.get(t.name)
            if known is None:
                raise UnknownName(f"unknown variable {t.name}")
            if known != t.ty:
                raise TypeMismatch(f"{t.name} has type {known}, used at {t.ty}")
        return t.ty
    if isinstance(t, Nom):
        return t.ty
    if isinstance(t, Bound):
        return head_type(t, env)
    if isinstance(t, Lam):
        bty = typecheck(sig, eigenctx, t.body, (t.ty,) + env)
        return arrow(t.ty, bty)
    if isinstance(t, App):
        hty = typecheck(sig, eigenctx, t.head, env)
        if len(hty.args) < len(t.args):
            raise TypeMismatch(f"over-application of {t.head}")
        for i, a in enumerate(t.args):
            aty = typecheck(sig, eigenctx, a, env)
            if aty != hty.args[i]:
                raise TypeMismatch(f"argument {a}: {aty} != {hty.args[i]}")
        return Ty(hty.args[len(t.args):], hty.head)
    raise TypeMismatch(f"cannot type {t!r}")


def instantiate(abstraction, arg, env=()):
    """Capture-avoiding instantiation of an abstraction, then normalization."""
    if not isinstance(abstraction, Lam):
        raise NotAnAbstraction(f"{abstraction} is not an abstraction")
    aty = infer(arg, env)
    if aty != abstraction.ty:
        raise TypeMismatch(f"binder type {abstraction.ty}, argument type {aty}")
    return norm(open_bound(abstraction.body, 0, arg), env)


def support(t):
    """Ordered tuple of the nominal constants occurring in t."""
    acc = []

    def go(t):
        if isinstance(t, Nom):
            if t not in acc:
                acc.append(t)
        elif isinstance(t, Lam):
            go(t.body)
        elif isinstance(t, App):
            go(t.head)
            for a in t.args:
                go(a)

    go(t)
    return tuple(sorted(acc, key=lambda n: (str(n.ty), n.idx)))


def free_vars(t, acc=None):
    if acc is None:
        acc = {}
    if isinstance(t, Var):
        acc.setdefault(t.name, t.ty)
    elif isinstance(t, Lam):
        free_vars(t.body, acc)
    elif isinstance(t, App):
        free_vars(t.head, acc)
        for a in t.args:
            free_vars(a, acc)
    return acc


def permute(pi, t):
    """Apply a permutation of nominal constants (dict Nom->Nom) to a term."""
    if isinstance(t, Nom):
        return pi.get(t, t)
    if isinstance(t, Lam):
        return Lam(t.ty, permute(pi, t.body), t.hint)
    if isinstance(t, App):
        return App(permute(pi, t.head), tuple(permute(pi, a) for a in t.args))
    return t


def check_permutation(pi):
    """A permutation must be a type-preserving bijection on nominal constants."""
    seen = set()
    for k, v in pi.items():
        if k.ty != v.ty:
            raise TypeMismatch(f"permutation maps {k}:{k.ty} to {v}:{v.ty}")
        if v in seen:
            raise TypeMismatch("permutation is not injective")
        seen.add(v)


def iter_bijections(s1, s2):
    """All type-respecting bijections between two nominal supports, as dicts.

    Supports in practice are tiny; the search is factorial per type but pruned
    by the type grouping.
    """
    by_ty1, by_ty2 = {}, {}
    for n in s1:
        by_ty1.setdefault(n.ty, []).append(n)
    for n in s2:
        by_ty2.setdefault(n.ty, []).append(n)
    if set(by_ty1) != set(by_ty2):
        return
    if any(len(by_ty1[ty]) != len(by_ty2[ty]) for ty in by_ty1):
        return
    groups = sorted(by_ty1, key=str)
    perms_per_ty = [
        [list(zip(by_ty1[ty], p)) for p in itertools.permutations(by_ty2[ty])]
        for ty in groups
    ]
    for combo in itertools.product(*perms_per_ty):
        pi = {}
        for pairs in combo:
            for a, b in pairs:
                pi[a] = b
        yield pi


def equivariant_eq(t1, t2):
    """A permutation pi with pi.t1 == t2, or None.  Terms must be normal."""
    s1, s2 = support(t1), support(t2)
    for pi in iter_bijections(s1, s2):
        if permute(pi, t1) == t2:
            return pi
    return None


def raise_eigen(name, ty, over):
    """Eigenvariable raised over a list of nominal constants.

    Returns the applied term (h n1 ... nk); dependencies on the nominals flow
    through the arguments rather than (forbidden) direct occurrences.
    """
    over = tuple(over)
    if len(set(over)) != len(over):
        raise Clash("raising nominals must be pairwise distinct")
    hty = ty
    for n in reversed(over):
        hty = arrow(n.ty, hty)
    h = Var(name, hty)
    return norm(app(h, over)) if over else h


def subst_vars(t, mapping, env=()):
    """Replace eigenvariables by terms (capture-free by de Bruijn), renormalize."""
    if not mapping:
        return t
    hit = fv_names(t) & mapping.keys()
    if not hit:
        return t

    def go(t):
        if isinstance(t, Var):
            r = mapping.get(t.name)
            return r if r is not None else t
        if isinstance(t, Lam):
            return Lam(t.ty, go(t.body), t.hint)
        if isinstance(t, App):
            return App(go(t.head), tuple(go(a) for a in t.args))
        return t

    return norm(go(t), env)


def spine(t):
    """Decompose a normal non-lambda term into (head, args)."""
    if isinstance(t, App):
        return t.head, t.args
    return t, ()


def strip_lams(t):
    tys = []
    hints = []
    while isinstance(t, Lam):
        tys.append(t.ty)
        hints.append(t.hint)
        t = t.body
    return tuple(tys), tuple(hints), t


def lams(tys, body, hints=None):
    for i, ty in enumerate(reversed(tys)):
        hint = hints[len(tys) - 1 - i] if hints else "x"
        body = Lam(ty, body, hint)
    return body
