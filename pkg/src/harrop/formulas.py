"""Reasoning-level formulas, induction annotations, and definitional clauses.

Quantifiers bind with de Bruijn indices shared with the term level: a variable
bound by a formula quantifier appears inside the atoms' terms as a Bound index
counting both term lambdas and the formula quantifiers in between.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import terms as T
from .types import Ty, cache_hash


@cache_hash
@dataclass(frozen=True)
class Ann:
    """Induction size annotation: kind '*' (strictly smaller) or '@' (equal)."""

    kind: str
    level: int = 1

    def __str__(self):
        return self.kind * self.level


@cache_hash
@dataclass(frozen=True)
class Formula:
    pass


@cache_hash
@dataclass(frozen=True)
class Top(Formula):
    pass


@cache_hash
@dataclass(frozen=True)
class Bot(Formula):
    pass


@cache_hash
@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@cache_hash
@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@cache_hash
@dataclass(frozen=True)
class Imp(Formula):
    left: Formula
    right: Formula


@cache_hash
@dataclass(frozen=True)
class Eq(Formula):
    left: T.Term
    right: T.Term


@cache_hash
@dataclass(frozen=True)
class Quant(Formula):
    q: str  # forall | exists | nabla
    ty: Ty
    body: Formula
    hint: str = field(default="x", compare=False, hash=False)


@cache_hash
@dataclass(frozen=True)
class Atom(Formula):
    pred: str
    args: tuple = ()
    ann: Optional[Ann] = None

    def strip(self):
        return Atom(self.pred, self.args) if self.ann else self

    def with_ann(self, ann):
        return Atom(self.pred, self.args, ann)


for _cls in (Top, Bot, And, Or, Imp, Eq, Quant, Atom):
    def _str(self):
        from .pretty import fm
        return fm(self)
    _cls.__str__ = _str
del _cls, _str


def map_terms(f, fn, qtys=()):
    """Rebuild a formula applying fn(term, qtys) to every term.

    qtys is the stack of quantifier types enclosing the occurrence, innermost
    first; term-level lambdas are handled inside fn by the term operations.
    """
    if isinstance(f, (Top, Bot)):
        return f
    if isinstance(f, And):
        return And(map_terms(f.left, fn, qtys), map_terms(f.right, fn, qtys))
    if isinstance(f, Or):
        return Or(map_terms(f.left, fn, qtys), map_terms(f.right, fn, qtys))
    if isinstance(f, Imp):
        return Imp(map_terms(f.left, fn, qtys), map_terms(f.right, fn, qtys))
    if isinstance(f, Eq):
        return Eq(fn(f.left, qtys), fn(f.right, qtys))
    if isinstance(f, Quant):
        return Quant(f.q, f.ty, map_terms(f.body, fn, (f.ty,) + qtys), f.hint)
    if isinstance(f, Atom):
        return Atom(f.pred, tuple(fn(a, qtys) for a in f.args), f.ann)
    raise TypeError(f"not a formula: {f!r}")


def map_atoms(f, fn):
    """Rebuild a formula applying fn to every Atom (for annotation edits)."""
    if isinstance(f, Atom):
        return fn(f)
    if isinstance(f, And):
        return And(map_atoms(f.left, fn), map_atoms(f.right, fn))
    if isinstance(f, Or):
        return Or(map_atoms(f.left, fn), map_atoms(f.right, fn))
    if isinstance(f, Imp):
        return Imp(map_atoms(f.left, fn), map_atoms(f.right, fn))
    if isinstance(f, Quant):
        return Quant(f.q, f.ty, map_atoms(f.body, fn), f.hint)
    return f


def iter_atoms(f):
    if isinstance(f, Atom):
        yield f
    elif isinstance(f, (And, Or, Imp)):
        yield from iter_atoms(f.left)
        yield from iter_atoms(f.right)
    elif isinstance(f, Quant):
        yield from iter_atoms(f.body)


def f_open(body, witness):
    """Open the body of a quantifier with a witness term (capture-free)."""

    def fn(t, qtys):
        j = len(qtys)
        t2 = T.open_bound(t, j, witness)
        if t2 == t:
            return t
        return T.norm(t2, qtys)

    return map_terms(body, fn)


def f_close(f, target, hint="x"):
    """Abstract a Var or Nom out of a formula as the outermost binder's index."""

    def fn(t, qtys):
        return T.close_over(t, target, len(qtys))

    return map_terms(f, fn)


def quantify(q, target, ty, f, hint="x"):
    return Quant(q, ty, f_close(f, target), hint)


def f_subst(f, mapping):
    if not mapping:
        return f

    def fn(t, qtys):
        return T.subst_vars(t, mapping, qtys)

    return map_terms(f, fn)


def f_norm(f):
    return map_terms(f, lambda t, qtys: T.norm(t, qtys))


def f_support(f):
    acc = []

    def fn(t, qtys):
        for n in T.support(t):
            if n not in acc:
                acc.append(n)
        return t

    map_terms(f, fn)
    return tuple(sorted(acc, key=lambda n: (str(n.ty), n.idx)))


def f_free_vars(f, acc=None):
    if acc is None:
        acc = {}

    def fn(t, qtys):
        T.free_vars(t, acc)
        return t

    map_terms(f, fn)
    return acc


def f_permute(f, pi):
    return map_terms(f, lambda t, qtys: T.permute(pi, t))


def f_strip(f):
    return map_atoms(f, lambda a: a.strip())


def f_equivariant(f1, f2):
    """A permutation of nominal constants making f1 equal to f2, or None."""
    f1, f2 = f_strip(f1), f_strip(f2)
    if f1 == f2:
        return {}
    for pi in T.iter_bijections(f_support(f1), f_support(f2)):
        if f_permute(f1, pi) == f2:
            return pi
    return None


def conjuncts(f):
    """Flatten a right-nested conjunction into a list."""
    if isinstance(f, And):
        return conjuncts(f.left) + conjuncts(f.right)
    return [f]


def big_and(fs):
    out = fs[-1]
    for f in reversed(fs[:-1]):
        out = And(f, out)
    return out


@cache_hash
@dataclass(frozen=True)
class DefClause:
    """forall univ, (nabla nabla_vars, head) := body, variables as named Vars."""

    univ: tuple  # ((name, Ty), ...)
    nabla: tuple  # ((name, Ty), ...)
    head: Atom
    body: Formula


@cache_hash
@dataclass(frozen=True)
class Definition:
    pred: str
    ty: Ty
    clauses: tuple
    inductive: bool = True
    schema: bool = False  # kernel-level family (seq/bc/name), not plain clauses
