"""Simple types, signatures, and the error hierarchy shared by both logic levels."""

from __future__ import annotations

from dataclasses import dataclass, field


class HarropError(Exception):
    """Base class for every error the prover raises deliberately."""


def cache_hash(cls):
    """Memoize the structural hash of a frozen dataclass (trees get deep)."""
    orig = cls.__hash__

    def h(self):
        v = self.__dict__.get("_hash_memo")
        if v is None:
            v = orig(self)
            object.__setattr__(self, "_hash_memo", v)
        return v

    cls.__hash__ = h
    return cls


class UnknownName(HarropError):
    pass


class TypeMismatch(HarropError):
    pass


class KindError(HarropError):
    pass


class NotAnAbstraction(HarropError):
    pass


class UnifyFailure(HarropError):
    """Base for definitive unification failures."""


class Clash(UnifyFailure):
    pass


class OccursCheck(UnifyFailure):
    pass


class NotAPattern(HarropError):
    """Outside the higher-order pattern fragment; aborts the enclosing tactic."""


class FreshnessViolation(UnifyFailure):
    pass


class TacticError(HarropError):
    pass


class NothingToIntroduce(TacticError):
    pass


class NotAnInductiveAtom(TacticError):
    pass


class NotCaseable(TacticError):
    pass


class AnnotationMismatch(TacticError):
    pass


class MatchFailure(TacticError):
    pass


class NotExistential(TacticError):
    pass


class IllTypedWitness(TacticError):
    pass


class NotAConjunction(TacticError):
    pass


class ShapeMismatch(TacticError):
    pass


class IllTyped(HarropError):
    pass


class DuplicateName(HarropError):
    pass


class StratificationError(HarropError):
    pass


class IllTypedClause(HarropError):
    pass


class NonEmptyHeadSupport(HarropError):
    pass


class AlreadyLoaded(HarropError):
    pass


class ProverSyntaxError(HarropError):
    def __init__(self, msg, line=None, col=None):
        self.line = line
        self.col = col
        loc = f" at {line}:{col}" if line is not None else ""
        super().__init__(f"{msg}{loc}")


@cache_hash
@dataclass(frozen=True)
class Ty:
    """A simple type in spine form: args -> ... -> head, head a base-type name."""

    args: tuple = ()
    head: str = "o"

    @property
    def is_base(self):
        return not self.args

    def arity(self):
        return len(self.args)

    def target(self):
        return Ty((), self.head)

    def __str__(self):
        parts = []
        for a in self.args:
            parts.append(f"({a})" if a.args else str(a))
        parts.append(self.head)
        return " -> ".join(parts)

    def __repr__(self):
        return f"Ty({self})"


def base(name):
    return Ty((), name)


def arrow(a, b):
    return Ty((a,) + b.args, b.head)


OTY = base("o")
OLIST = base("olist")
PROP = base("prop")


def contains_base(ty, name):
    if ty.head == name:
        return True
    return any(contains_base(a, name) for a in ty.args)


# names reserved for the spec-logic constructors of type o
SPEC_IMP = "=>"
SPEC_AND = "&"
SPEC_PI = "pi"
CONS = "::"
NIL = "nil"


@dataclass
class Signature:
    """Kind table and constant table; nominal constants exist implicitly at every type."""

    kinds: set = field(default_factory=set)
    consts: dict = field(default_factory=dict)

    def __post_init__(self):
        for k in ("o", "olist", "prop"):
            self.kinds.add(k)
        self.consts.setdefault(NIL, OLIST)
        self.consts.setdefault(CONS, arrow(OTY, arrow(OLIST, OLIST)))

    def copy(self):
        return Signature(set(self.kinds), dict(self.consts))

    def add_kind(self, name):
        if name in self.kinds:
            raise DuplicateName(f"kind {name} already declared")
        self.kinds.add(name)

    def check_ty(self, ty):
        if ty.head not in self.kinds:
            raise KindError(f"unknown base type {ty.head}")
        for a in ty.args:
            self.check_ty(a)

    def add_const(self, name, ty):
        if name in self.consts:
            raise DuplicateName(f"constant {name} already declared")
        self.check_ty(ty)
        # predicativity: prop never in argument position, o never quantified over
        for a in ty.args:
            if contains_base(a, "prop"):
                raise KindError(f"prop occurs in argument position of {name}")
        self.consts[name] = ty

    def lookup(self, name):
        try:
            return self.consts[name]
        except KeyError:
            raise UnknownName(f"unknown constant {name}") from None

    def lookup_at(self, name, ty):
        """Validate a constant occurrence, handling the logical families.

        `pi` is a family indexed by the quantifier type; `=>` and `&` are the
        fixed spec-level connectives.
        """
        imp_ty = arrow(OTY, arrow(OTY, OTY))
        if name in (SPEC_IMP, SPEC_AND):
            if ty != imp_ty:
                raise TypeMismatch(f"{name} used at {ty}")
            return ty
        if name == SPEC_PI:
            ok = (len(ty.args) == 1 and ty.head == "o"
                  and len(ty.args[0].args) == 1 and ty.args[0].head == "o")
            if not ok:
                raise TypeMismatch(f"pi used at {ty}")
            qty = ty.args[0].args[0]
            if contains_base(qty, "o") or contains_base(qty, "prop"):
                raise KindError(f"pi cannot quantify over {qty}")
            self.check_ty(qty)
            return ty
        declared = self.lookup(name)
        if declared != ty:
            raise TypeMismatch(f"{name} declared {declared}, used at {ty}")
        return ty
