"""Terms, literals and formulas in negation normal form.

The engine works on quantifier-free formulas over linear arithmetic
(exact rationals or integers) or propositional atoms, extended with
positive call atoms naming procedures.  Negation exists only inside
literals: boolean and divisibility literals carry a polarity flag, and
negated comparisons are rewritten at construction time
(not(a < b) becomes b <= a, not(a = b) becomes a < b or b < a).

Everything here is an immutable value; no operation mutates its input.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import gcd, lcm
from typing import Iterable, Mapping, Optional, Sequence, Union

from .errors import (
    ArityMismatch,
    NegatedCall,
    NotNormalized,
    PathExplosion,
    UnassignedVar,
)


class Sort(enum.Enum):
    BOOL = "bool"
    RAT = "rat"
    INT = "int"

    @property
    def is_arith(self) -> bool:
        return self is not Sort.BOOL


class Role(enum.Enum):
    IN = "in"
    OUT = "out"
    LOCAL = "local"
    AUX = "aux"


@dataclass(frozen=True)
class Var:
    name: str
    sort: Sort
    role: Role = Role.AUX
    owner: Optional[str] = None

    def key(self):
        return (self.owner or "", self.name)

    def __repr__(self):
        if self.owner:
            return f"{self.owner}::{self.name}"
        return self.name


Value = Union[bool, Fraction]


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    return Fraction(x)


@dataclass(frozen=True)
class LinTerm:
    """Linear combination of arithmetic variables plus a constant.

    Coefficients are exact rationals; zero coefficients are never stored
    and entries are kept sorted by variable key so that structurally
    equal terms compare equal.
    """

    coeffs: tuple  # tuple[(Var, Fraction), ...] sorted by Var.key()
    const: Fraction

    @staticmethod
    def make(coeffs: Mapping[Var, Fraction], const=0) -> "LinTerm":
        items = tuple(
            sorted(
                ((v, _as_fraction(c)) for v, c in coeffs.items() if c != 0),
                key=lambda it: it[0].key(),
            )
        )
        return LinTerm(items, _as_fraction(const))

    @staticmethod
    def of_var(v: Var) -> "LinTerm":
        return LinTerm(((v, Fraction(1)),), Fraction(0))

    @staticmethod
    def of_const(c) -> "LinTerm":
        return LinTerm((), _as_fraction(c))

    def coeff(self, v: Var) -> Fraction:
        for w, c in self.coeffs:
            if w == v:
                return c
        return Fraction(0)

    @property
    def vars(self):
        return tuple(v for v, _ in self.coeffs)

    def is_const(self) -> bool:
        return not self.coeffs

    def add(self, other: "LinTerm") -> "LinTerm":
        acc = {v: c for v, c in self.coeffs}
        for v, c in other.coeffs:
            acc[v] = acc.get(v, Fraction(0)) + c
        return LinTerm.make(acc, self.const + other.const)

    def sub(self, other: "LinTerm") -> "LinTerm":
        return self.add(other.scale(-1))

    def scale(self, k) -> "LinTerm":
        k = _as_fraction(k)
        if k == 0:
            return LinTerm.of_const(0)
        return LinTerm(
            tuple((v, c * k) for v, c in self.coeffs), self.const * k
        )

    def subst(self, mapping: Mapping[Var, "LinTerm"]) -> "LinTerm":
        acc = LinTerm.of_const(self.const)
        for v, c in self.coeffs:
            rep = mapping.get(v)
            if rep is None:
                acc = acc.add(LinTerm(((v, c),), Fraction(0)))
            else:
                acc = acc.add(rep.scale(c))
        return acc

    def evaluate(self, model: Mapping[Var, Value]) -> Fraction:
        total = self.const
        for v, c in self.coeffs:
            if v not in model:
                raise UnassignedVar(repr(v))
            total += c * _as_fraction(model[v])
        return total

    def key(self):
        return (
            tuple((v.key(), c) for v, c in self.coeffs),
            self.const,
        )

    def is_integral(self) -> bool:
        return self.const.denominator == 1 and all(
            c.denominator == 1 for _, c in self.coeffs
        )

    def __repr__(self):
        parts = [f"{c}*{v!r}" for v, c in self.coeffs]
        if self.const != 0 or not parts:
            parts.append(str(self.const))
        return " + ".join(parts)


# --------------------------------------------------------------------------
# Literals.  A comparison literal means "term op 0" and is always stored
# with positive polarity; boolean and divisibility literals keep a flag.
# --------------------------------------------------------------------------

LT, LE, EQ = "<", "<=", "="


@dataclass(frozen=True)
class Cmp:
    op: str  # one of LT, LE, EQ
    term: LinTerm

    def key(self):
        return ("cmp", self.op, self.term.key())

    def __repr__(self):
        return f"({self.term!r} {self.op} 0)"


@dataclass(frozen=True)
class BoolLit:
    var: Var
    positive: bool = True

    def key(self):
        return ("bool", self.var.key(), self.positive)

    def __repr__(self):
        return repr(self.var) if self.positive else f"!{self.var!r}"


@dataclass(frozen=True)
class DivLit:
    divisor: int  # >= 1
    term: LinTerm
    positive: bool = True

    def key(self):
        return ("div", self.divisor, self.term.key(), self.positive)

    def __repr__(self):
        s = f"({self.divisor} | {self.term!r})"
        return s if self.positive else f"!{s}"


Literal = Union[Cmp, BoolLit, DivLit]


def eval_literal(lit: Literal, model: Mapping[Var, Value]) -> bool:
    if isinstance(lit, Cmp):
        v = lit.term.evaluate(model)
        if lit.op == LT:
            return v < 0
        if lit.op == LE:
            return v <= 0
        return v == 0
    if isinstance(lit, BoolLit):
        if lit.var not in model:
            raise UnassignedVar(repr(lit.var))
        return bool(model[lit.var]) == lit.positive
    v = lit.term.evaluate(model)
    divisible = v.denominator == 1 and v.numerator % lit.divisor == 0
    return divisible == lit.positive


def literal_vars(lit: Literal):
    if isinstance(lit, BoolLit):
        return (lit.var,)
    return lit.term.vars


# --------------------------------------------------------------------------
# Formulas.
# --------------------------------------------------------------------------


class Formula:
    __slots__ = ()


@dataclass(frozen=True)
class Top(Formula):
    def __repr__(self):
        return "true"


@dataclass(frozen=True)
class Bottom(Formula):
    def __repr__(self):
        return "false"


TRUE = Top()
FALSE = Bottom()


@dataclass(frozen=True)
class Lit(Formula):
    lit: Literal

    def __repr__(self):
        return repr(self.lit)


@dataclass(frozen=True)
class And(Formula):
    args: tuple

    def __repr__(self):
        return "(and " + " ".join(map(repr, self.args)) + ")"


@dataclass(frozen=True)
class Or(Formula):
    args: tuple

    def __repr__(self):
        return "(or " + " ".join(map(repr, self.args)) + ")"


@dataclass(frozen=True)
class Call(Formula):
    callee: str
    args: tuple  # tuple[Var, ...]

    def __repr__(self):
        return f"({self.callee} " + " ".join(map(repr, self.args)) + ")"


@dataclass(frozen=True)
class Not(Formula):
    """Pre-normalization node only; never survives to_nnf."""

    arg: Formula

    def __repr__(self):
        return f"(not {self.arg!r})"


def mk_lit(lit: Literal) -> Formula:
    """Wrap a literal, folding away constant comparisons."""
    if isinstance(lit, Cmp) and lit.term.is_const():
        c = lit.term.const
        ok = c < 0 if lit.op == LT else (c <= 0 if lit.op == LE else c == 0)
        return TRUE if ok else FALSE
    if isinstance(lit, DivLit) and lit.term.is_const():
        c = lit.term.const
        divisible = c.denominator == 1 and c.numerator % lit.divisor == 0
        return TRUE if divisible == lit.positive else FALSE
    if isinstance(lit, Cmp) and lit.op == EQ:
        # canonical sign for equalities: first coefficient positive
        if lit.term.coeffs and lit.term.coeffs[0][1] < 0:
            lit = Cmp(EQ, lit.term.scale(-1))
    return Lit(lit)


def mk_cmp(op: str, term: LinTerm) -> Formula:
    return mk_lit(Cmp(op, term))


def f_and(args: Iterable[Formula]) -> Formula:
    flat = []
    seen = set()
    for a in args:
        if isinstance(a, Top):
            continue
        if isinstance(a, Bottom):
            return FALSE
        sub = a.args if isinstance(a, And) else (a,)
        for s in sub:
            if s not in seen:
                seen.add(s)
                flat.append(s)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def f_or(args: Iterable[Formula]) -> Formula:
    flat = []
    seen = set()
    for a in args:
        if isinstance(a, Bottom):
            continue
        if isinstance(a, Top):
            return TRUE
        sub = a.args if isinstance(a, Or) else (a,)
        for s in sub:
            if s not in seen:
                seen.add(s)
                flat.append(s)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def negate_literal(lit: Literal) -> Formula:
    if isinstance(lit, Cmp):
        if lit.op == LT:
            return mk_cmp(LE, lit.term.scale(-1))
        if lit.op == LE:
            return mk_cmp(LT, lit.term.scale(-1))
        # not(t = 0)  ==>  t < 0 or -t < 0
        return f_or([mk_cmp(LT, lit.term), mk_cmp(LT, lit.term.scale(-1))])
    if isinstance(lit, BoolLit):
        return Lit(BoolLit(lit.var, not lit.positive))
    return Lit(DivLit(lit.divisor, lit.term, not lit.positive))


def to_nnf(f: Formula, negate: bool = False) -> Formula:
    """Push negations to the literals.

    Raises NegatedCall if a call atom occurs under a negation; calls must
    stay positive for the fixed-point reading of procedure bodies.
    """
    if isinstance(f, Not):
        return to_nnf(f.arg, not negate)
    if isinstance(f, Top):
        return FALSE if negate else TRUE
    if isinstance(f, Bottom):
        return TRUE if negate else FALSE
    if isinstance(f, Lit):
        return negate_literal(f.lit) if negate else mk_lit(f.lit)
    if isinstance(f, Call):
        if negate:
            raise NegatedCall(f.callee)
        return f
    if isinstance(f, And):
        parts = [to_nnf(a, negate) for a in f.args]
        return f_or(parts) if negate else f_and(parts)
    if isinstance(f, Or):
        parts = [to_nnf(a, negate) for a in f.args]
        return f_and(parts) if negate else f_or(parts)
    raise TypeError(f"not a formula: {f!r}")


def negate_nnf(f: Formula) -> Formula:
    """Negation of an NNF formula, again in NNF."""
    return to_nnf(f, negate=True)


def free_vars(f: Formula) -> frozenset:
    if isinstance(f, Lit):
        return frozenset(literal_vars(f.lit))
    if isinstance(f, (And, Or)):
        out = frozenset()
        for a in f.args:
            out |= free_vars(a)
        return out
    if isinstance(f, Call):
        return frozenset(f.args)
    return frozenset()


def has_calls(f: Formula) -> bool:
    if isinstance(f, Call):
        return True
    if isinstance(f, (And, Or)):
        return any(has_calls(a) for a in f.args)
    if isinstance(f, Not):
        return has_calls(f.arg)
    return False


def eval_formula(f: Formula, model: Mapping[Var, Value]) -> bool:
    """Standard semantics; the formula must be call-free."""
    if isinstance(f, Top):
        return True
    if isinstance(f, Bottom):
        return False
    if isinstance(f, Lit):
        return eval_literal(f.lit, model)
    if isinstance(f, And):
        return all(eval_formula(a, model) for a in f.args)
    if isinstance(f, Or):
        return any(eval_formula(a, model) for a in f.args)
    raise TypeError(f"cannot evaluate {type(f).__name__}")


# --------------------------------------------------------------------------
# Substitutions.
# --------------------------------------------------------------------------


def _map_literal_vars(lit: Literal, mapping: Mapping[Var, Var]) -> Literal:
    if isinstance(lit, BoolLit):
        return BoolLit(mapping.get(lit.var, lit.var), lit.positive)
    term = lit.term.subst(
        {v: LinTerm.of_var(mapping[v]) for v in lit.term.vars if v in mapping}
    )
    if isinstance(lit, Cmp):
        return Cmp(lit.op, term)
    return DivLit(lit.divisor, term, lit.positive)


def rename_vars(f: Formula, mapping: Mapping[Var, Var]) -> Formula:
    """Variable-for-variable renaming, also applied to call arguments."""
    if isinstance(f, Lit):
        return mk_lit(_map_literal_vars(f.lit, mapping))
    if isinstance(f, And):
        return f_and(rename_vars(a, mapping) for a in f.args)
    if isinstance(f, Or):
        return f_or(rename_vars(a, mapping) for a in f.args)
    if isinstance(f, Call):
        return Call(f.callee, tuple(mapping.get(v, v) for v in f.args))
    return f


def subst_arith(f: Formula, mapping: Mapping[Var, LinTerm]) -> Formula:
    """Replace arithmetic variables by terms in a call-free formula."""
    if isinstance(f, Lit):
        lit = f.lit
        if isinstance(lit, BoolLit):
            assert lit.var not in mapping, "cannot substitute a term for a boolean"
            return f
        term = lit.term.subst(mapping)
        if isinstance(lit, Cmp):
            return mk_cmp(lit.op, term)
        return mk_lit(DivLit(lit.divisor, term, lit.positive))
    if isinstance(f, And):
        return f_and(subst_arith(a, mapping) for a in f.args)
    if isinstance(f, Or):
        return f_or(subst_arith(a, mapping) for a in f.args)
    if isinstance(f, Call):
        assert not any(v in mapping for v in f.args)
        return f
    return f


def subst_bool(f: Formula, mapping: Mapping[Var, bool]) -> Formula:
    """Replace boolean variables by constants, folding the result."""
    if isinstance(f, Lit):
        lit = f.lit
        if isinstance(lit, BoolLit) and lit.var in mapping:
            return TRUE if mapping[lit.var] == lit.positive else FALSE
        return f
    if isinstance(f, And):
        return f_and(subst_bool(a, mapping) for a in f.args)
    if isinstance(f, Or):
        return f_or(subst_bool(a, mapping) for a in f.args)
    return f


def subst_model_values(f: Formula, model: Mapping[Var, Value], vars_: Sequence[Var]) -> Formula:
    """Replace the given variables by their model values."""
    arith = {}
    boolean = {}
    for v in vars_:
        if v not in model:
            raise UnassignedVar(repr(v))
        if v.sort is Sort.BOOL:
            boolean[v] = bool(model[v])
        else:
            arith[v] = LinTerm.of_const(model[v])
    out = f
    if boolean:
        out = subst_bool(out, boolean)
    if arith:
        out = subst_arith(out, arith)
    return out


# --------------------------------------------------------------------------
# Paths: DNF disjuncts of a procedure body.
# --------------------------------------------------------------------------

DEFAULT_PATH_LIMIT = 4096


@dataclass(frozen=True)
class Path:
    literals: tuple  # tuple[Literal, ...]
    calls: tuple  # tuple[Call, ...] in body order

    def formula(self) -> Formula:
        return f_and([mk_lit(l) for l in self.literals] + list(self.calls))

    def __repr__(self):
        return repr(self.formula())


def dnf_paths(body: Formula, limit: int = DEFAULT_PATH_LIMIT):
    """Expand an NNF body into its DNF disjuncts.

    Each returned path is a conjunction of literals and calls; their
    disjunction is equivalent to the body.  Raises PathExplosion past
    the limit rather than truncating, since truncation would silently
    break that equivalence.
    """

    def expand(f):
        if isinstance(f, Top):
            return [((), ())]
        if isinstance(f, Bottom):
            return []
        if isinstance(f, Lit):
            return [((f.lit,), ())]
        if isinstance(f, Call):
            return [((), (f,))]
        if isinstance(f, Or):
            out = []
            for a in f.args:
                out.extend(expand(a))
                if len(out) > limit:
                    raise PathExplosion(f"more than {limit} paths")
            return out
        if isinstance(f, And):
            acc = [((), ())]
            for a in f.args:
                sub = expand(a)
                nxt = []
                for lits1, calls1 in acc:
                    for lits2, calls2 in sub:
                        nxt.append((lits1 + lits2, calls1 + calls2))
                        if len(nxt) > limit:
                            raise PathExplosion(f"more than {limit} paths")
                acc = nxt
            return acc
        raise TypeError(f"body not in NNF: {f!r}")

    paths = []
    seen = set()
    for lits, calls in expand(body):
        # drop duplicate literals while keeping first-occurrence order
        uniq, lseen = [], set()
        for l in lits:
            if l not in lseen:
                lseen.add(l)
                uniq.append(l)
        p = Path(tuple(uniq), calls)
        if p not in seen:
            seen.add(p)
            paths.append(p)
    return paths


# --------------------------------------------------------------------------
# Normal forms for variable elimination.
# --------------------------------------------------------------------------


def normalize_for(x: Var, lit: Literal, mode: Sort):
    """Classify a literal relative to x.

    Returns one of
        ("free", lit)        x does not occur
        ("eq", e)            x = e
        ("lo", l)            l < x
        ("hi", u)            x < u
        ("div", d, w, pos)   d | x + w   (integer mode, coefficient +1)

    In rational mode the coefficient of x is divided out; weak bounds on
    x must have been split into strict-or-equal beforehand.  In integer
    mode the coefficient must already be +-1 (see lia_normalize); weak
    bounds are shifted by one into strict ones.
    """
    assert x.sort is not Sort.BOOL
    if isinstance(lit, BoolLit):
        return ("free", lit)
    c = lit.term.coeff(x)
    if c == 0:
        return ("free", lit)
    if isinstance(lit, DivLit):
        if mode is not Sort.INT:
            raise NotNormalized("divisibility outside integer mode")
        if abs(c) != 1:
            raise NotNormalized(f"divisibility coefficient {c} for {x!r}")
        term = lit.term if c > 0 else lit.term.scale(-1)
        w = term.sub(LinTerm.of_var(x))
        return ("div", lit.divisor, w, lit.positive)
    rest = lit.term.sub(LinTerm((( x, c),), Fraction(0)))
    if mode is Sort.INT:
        if abs(c) != 1:
            raise NotNormalized(f"coefficient {c} of {x!r} is not +-1")
        if lit.op == EQ:
            return ("eq", rest.scale(Fraction(-1) / c))
        shift = Fraction(1) if lit.op == LE else Fraction(0)
        # c*x + rest (<|<=) 0 over integers, with |c| = 1
        if c > 0:
            # x < -rest (+1 if weak)
            return ("hi", rest.scale(-1).add(LinTerm.of_const(shift)))
        # rest (-1 if weak) < x
        return ("lo", rest.sub(LinTerm.of_const(shift)))
    # rational mode: divide by |c|
    r = rest.scale(Fraction(1) / abs(c))
    if lit.op == EQ:
        return ("eq", rest.scale(Fraction(-1) / c))
    if lit.op == LE:
        raise NotNormalized("weak bound on eliminated rational variable")
    if c > 0:
        return ("hi", r.scale(-1))
    return ("lo", r)


_aux_counter = itertools.count()


def fresh_var(base: Var, suffix: str, sort: Optional[Sort] = None) -> Var:
    n = next(_aux_counter)
    return Var(f"{base.name}#{suffix}{n}", sort or base.sort, Role.AUX, base.owner)


def lia_normalize(x: Var, f: Formula):
    """Rescale an integer formula so x occurs only with coefficient +-1.

    Returns (formula, multiplier, y) where y is a fresh variable standing
    for multiplier * x; the literal (multiplier | y) is conjoined.  The
    result is equisatisfiable and projects to an equivalent formula once
    y is eliminated.  A formula whose x-coefficients are already +-1 is
    returned unchanged with multiplier 1.
    """
    coeffs = set()

    def collect(g):
        if isinstance(g, Lit) and not isinstance(g.lit, BoolLit):
            c = g.lit.term.coeff(x)
            if c != 0:
                assert c.denominator == 1, "integer mode requires integral coefficients"
                coeffs.add(abs(c.numerator))
        elif isinstance(g, (And, Or)):
            for a in g.args:
                collect(a)

    collect(f)
    if not coeffs or coeffs == {1}:
        return f, 1, x
    mult = lcm(*coeffs)
    y = fresh_var(x, "s")
    yterm = LinTerm.of_var(y)

    def rewrite(g):
        if isinstance(g, Lit):
            lit = g.lit
            if isinstance(lit, BoolLit):
                return g
            c = lit.term.coeff(x)
            if c == 0:
                return g
            m = Fraction(mult) / abs(c)
            scaled = lit.term.scale(m)  # coefficient of x is now +-mult
            cx = scaled.coeff(x)
            newterm = scaled.sub(LinTerm(((x, cx),), Fraction(0))).add(
                yterm.scale(cx / mult)
            )
            if isinstance(lit, Cmp):
                return mk_cmp(lit.op, newterm)
            d = lit.divisor * m.numerator
            assert m.denominator == 1
            return mk_lit(DivLit(d, newterm, lit.positive))
        if isinstance(g, And):
            return f_and(rewrite(a) for a in g.args)
        if isinstance(g, Or):
            return f_or(rewrite(a) for a in g.args)
        return g

    out = f_and([rewrite(f), mk_lit(DivLit(mult, yterm, True))])
    return out, mult, y


# --------------------------------------------------------------------------
# Canonical keys (used to deduplicate stored facts).
# --------------------------------------------------------------------------


def formula_size(f: Formula) -> int:
    if isinstance(f, (And, Or)):
        return 1 + sum(formula_size(a) for a in f.args)
    if isinstance(f, Not):
        return 1 + formula_size(f.arg)
    return 1


def canon_key(f: Formula):
    if isinstance(f, Top):
        return ("true",)
    if isinstance(f, Bottom):
        return ("false",)
    if isinstance(f, Lit):
        return ("lit", f.lit.key())
    if isinstance(f, Call):
        return ("call", f.callee, tuple(v.key() for v in f.args))
    tag = "and" if isinstance(f, And) else "or"
    return (tag, tuple(sorted(canon_key(a) for a in f.args)))
