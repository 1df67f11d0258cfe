"""Quantifier elimination and model-based projection.

Rational variables are eliminated with the Loos-Weispfenning test-point
method: ∃x.f is the disjunction of f with x virtually substituted by
each equality term e, by l + epsilon for each strict lower bound l, and
by minus infinity.  Integer variables are eliminated with Cooper's
method after rescaling coefficients to +-1; divisibility literals give
the period D over which the test points are repeated.  Boolean
variables use Shannon expansion.

Model-based projection picks, for a model M of the matrix, the single
disjunct of the elimination that M witnesses; the image over all models
is finite and covers the full elimination, while each output is an
under-approximation satisfied by its own model.  Ties between equal
bound terms are broken by a fixed syntactic term ordering, so identical
inputs always produce identical outputs.

The virtual values epsilon and minus infinity never appear in outputs;
they exist only through the substitution tables below.
"""

from __future__ import annotations

from fractions import Fraction
from math import lcm
from typing import Dict, List, Mapping, Optional, Sequence

from .errors import ModelMismatch, WrongMode
from .formula import (
    EQ,
    FALSE,
    LE,
    LT,
    TRUE,
    And,
    BoolLit,
    Cmp,
    DivLit,
    Formula,
    LinTerm,
    Lit,
    Or,
    Sort,
    Var,
    eval_formula,
    f_and,
    f_or,
    free_vars,
    lia_normalize,
    mk_cmp,
    mk_lit,
    normalize_for,
    subst_arith,
    subst_bool,
    to_nnf,
)


def _map_literals(f: Formula, fn) -> Formula:
    if isinstance(f, Lit):
        return fn(f.lit)
    if isinstance(f, And):
        return f_and(_map_literals(a, fn) for a in f.args)
    if isinstance(f, Or):
        return f_or(_map_literals(a, fn) for a in f.args)
    return f


def split_weak_bounds(x: Var, f: Formula) -> Formula:
    """Rewrite weak bounds on x into strict-or-equal (rational mode)."""

    def fn(lit):
        if isinstance(lit, Cmp) and lit.op == LE and lit.term.coeff(x) != 0:
            return f_or([mk_cmp(LT, lit.term), mk_cmp(EQ, lit.term)])
        return mk_lit(lit)

    return _map_literals(f, fn)


def _collect(x: Var, f: Formula, mode: Sort):
    """Equality terms, lower bounds, upper bounds, divisor lcm for x."""
    eqs: Dict[object, LinTerm] = {}
    lows: Dict[object, LinTerm] = {}
    highs: Dict[object, LinTerm] = {}
    divisors: List[int] = []

    def walk(g):
        if isinstance(g, Lit):
            tag = normalize_for(x, g.lit, mode)
            if tag[0] == "eq":
                eqs.setdefault(tag[1].key(), tag[1])
            elif tag[0] == "lo":
                lows.setdefault(tag[1].key(), tag[1])
            elif tag[0] == "hi":
                highs.setdefault(tag[1].key(), tag[1])
            elif tag[0] == "div":
                divisors.append(tag[1])
        elif isinstance(g, (And, Or)):
            for a in g.args:
                walk(a)

    walk(f)
    eq_terms = [eqs[k] for k in sorted(eqs)]
    lo_terms = [lows[k] for k in sorted(lows)]
    hi_terms = [highs[k] for k in sorted(highs)]
    period = lcm(*divisors) if divisors else 1
    return eq_terms, lo_terms, hi_terms, period


def _subst_lower_eps(x: Var, f: Formula, low: LinTerm) -> Formula:
    """Virtual substitution x := low + epsilon (rational mode).

    Table: (x = e) -> false, (l' < x) -> (l' <= low), (x < u) -> (low < u).
    """

    def fn(lit):
        tag = normalize_for(x, lit, Sort.RAT)
        if tag[0] == "free":
            return mk_lit(lit)
        if tag[0] == "eq":
            return FALSE
        if tag[0] == "lo":
            return mk_cmp(LE, tag[1].sub(low))
        return mk_cmp(LT, low.sub(tag[1]))

    return _map_literals(f, fn)


def _subst_minus_inf(x: Var, f: Formula) -> Formula:
    """Virtual substitution x := -infinity (rational mode).

    Table: (x = e) -> false, (l < x) -> false, (x < u) -> true.
    """

    def fn(lit):
        tag = normalize_for(x, lit, Sort.RAT)
        if tag[0] == "free":
            return mk_lit(lit)
        if tag[0] == "eq" or tag[0] == "lo":
            return FALSE
        return TRUE

    return _map_literals(f, fn)


def _subst_minus_inf_int(x: Var, f: Formula, i: int) -> Formula:
    """x := -infinity with residue i (integer mode): bounds and equalities
    vanish, divisibility literals keep x := i."""

    def fn(lit):
        tag = normalize_for(x, lit, Sort.INT)
        if tag[0] == "free":
            return mk_lit(lit)
        if tag[0] in ("eq", "lo"):
            return FALSE
        if tag[0] == "hi":
            return TRUE
        _, d, w, pos = tag
        return mk_lit(DivLit(d, w.add(LinTerm.of_const(i)), pos))

    return _map_literals(f, fn)


def lw_qe(x: Var, matrix: Formula) -> Formula:
    """Loos-Weispfenning elimination of a rational variable."""
    if x.sort is not Sort.RAT:
        raise WrongMode(f"{x!r} is not rational")
    f = split_weak_bounds(x, matrix)
    eqs, lows, _, _ = _collect(x, f, Sort.RAT)
    if x not in free_vars(f):
        return f
    parts = [subst_arith(f, {x: e}) for e in eqs]
    parts += [_subst_lower_eps(x, f, l) for l in lows]
    parts.append(_subst_minus_inf(x, f))
    return f_or(parts)


def lra_proj(x: Var, matrix: Formula, model) -> Formula:
    """The disjunct of lw_qe(x, matrix) witnessed by the model."""
    if x.sort is not Sort.RAT:
        raise WrongMode(f"{x!r} is not rational")
    if not eval_formula(matrix, model):
        raise ModelMismatch(f"model does not satisfy matrix")
    f = split_weak_bounds(x, matrix)
    eqs, lows, _, _ = _collect(x, f, Sort.RAT)
    if x not in free_vars(f):
        return f
    xval = Fraction(model[x])
    for e in eqs:  # already in term order
        if e.evaluate(model) == xval:
            return subst_arith(f, {x: e})
    best = None
    best_val = None
    for l in lows:
        v = l.evaluate(model)
        if v < xval and (best_val is None or v > best_val):
            best, best_val = l, v
    if best is not None:
        return _subst_lower_eps(x, f, best)
    return _subst_minus_inf(x, f)


def cooper_qe(x: Var, matrix: Formula) -> Formula:
    """Cooper elimination of an integer variable (coefficients +-1)."""
    if x.sort is not Sort.INT:
        raise WrongMode(f"{x!r} is not integer")
    if x not in free_vars(matrix):
        return matrix
    eqs, lows, _, period = _collect(x, matrix, Sort.INT)
    parts = [subst_arith(matrix, {x: e}) for e in eqs]
    for l in lows:
        for i in range(period):
            parts.append(subst_arith(matrix, {x: l.add(LinTerm.of_const(1 + i))}))
    for i in range(period):
        parts.append(_subst_minus_inf_int(x, matrix, i))
    return f_or(parts)


def lia_proj(x: Var, matrix: Formula, model) -> Formula:
    """The disjunct of cooper_qe(x, matrix) witnessed by the model."""
    if x.sort is not Sort.INT:
        raise WrongMode(f"{x!r} is not integer")
    if not eval_formula(matrix, model):
        raise ModelMismatch("model does not satisfy matrix")
    if x not in free_vars(matrix):
        return matrix
    eqs, lows, _, period = _collect(x, matrix, Sort.INT)
    xval = Fraction(model[x])
    for e in eqs:
        if e.evaluate(model) == xval:
            return subst_arith(matrix, {x: e})
    best = None
    best_val = None
    for l in lows:
        v = l.evaluate(model)
        if v < xval and (best_val is None or v > best_val):
            best, best_val = l, v
    if best is not None:
        i = int((xval - best_val - 1) % period)
        return subst_arith(matrix, {x: best.add(LinTerm.of_const(1 + i))})
    i = int(xval % period)
    return _subst_minus_inf_int(x, matrix, i)


def eliminate_int_var(x: Var, f: Formula) -> Formula:
    """Full elimination of one integer variable: rescale, then Cooper."""
    g, _, y = lia_normalize(x, f)
    return cooper_qe(y, g)


def project(
    vars_: Sequence[Var],
    matrix: Formula,
    model=None,
    strategy: str = "mbp",
    stats: Optional[dict] = None,
) -> Formula:
    """Eliminate variables one at a time, in reverse of the given order.

    strategy "qe" computes the exact existential projection; "mbp" picks
    per-variable disjuncts using the model, which must satisfy the
    matrix.  With "mbp" the model keeps satisfying every intermediate
    result, so the output is satisfied by the model and implies the QE
    result.
    """
    assert strategy in ("mbp", "qe")
    cur = matrix
    work = model
    if strategy == "mbp" and not eval_formula(matrix, model):
        raise ModelMismatch("model does not satisfy matrix")
    for x in reversed(list(vars_)):
        if x not in free_vars(cur):
            continue
        if stats is not None:
            stats["mbp_calls" if strategy == "mbp" else "qe_calls"] = (
                stats.get("mbp_calls" if strategy == "mbp" else "qe_calls", 0) + 1
            )
        if x.sort is Sort.BOOL:
            if strategy == "mbp":
                cur = subst_bool(cur, {x: bool(work[x])})
            else:
                cur = f_or([subst_bool(cur, {x: True}), subst_bool(cur, {x: False})])
        elif x.sort is Sort.RAT:
            cur = lra_proj(x, cur, work) if strategy == "mbp" else lw_qe(x, cur)
        else:
            g, mult, y = lia_normalize(x, cur)
            if strategy == "mbp":
                if y is not x:
                    work = _extend_model(work, y, Fraction(mult) * Fraction(work[x]))
                cur = lia_proj(y, g, work)
            else:
                cur = cooper_qe(y, g)
    return cur


def _extend_model(model, var, value):
    try:
        return model.extended({var: value})
    except AttributeError:
        out = dict(model)
        out[var] = value
        return out


def cooper_witness(f: Formula, vars_: Sequence[Var]) -> Optional[Dict[Var, Fraction]]:
    """Integer witness for a satisfiable call-free formula.

    Eliminates the variables with Cooper's method and rebuilds concrete
    values by scanning the finitely many candidate values that the
    elimination justifies.  Returns None if the formula is ground-false.
    """
    order = [v for v in vars_]
    stack = []
    cur = f
    for x in reversed(order):
        if x not in free_vars(cur):
            stack.append((x, None, 1, None))
            continue
        g, mult, y = lia_normalize(x, cur)
        stack.append((x, y, mult, g))
        cur = cooper_qe(y, g)
    if not eval_formula(cur, {}):
        return None
    model: Dict[Var, Fraction] = {}
    for x, y, mult, g in reversed(stack):
        if y is None:
            model[x] = Fraction(0)
            continue
        v = _witness_value(y, g, model)
        assert v is not None, "elimination said sat but no candidate value fits"
        assert v % mult == 0
        model[y] = v
        model[x] = v / mult
    for y_aux in [s[1] for s in stack if s[1] is not None and s[1] is not s[0]]:
        model.pop(y_aux, None)
    return model


def _witness_value(x: Var, g: Formula, model) -> Optional[Fraction]:
    eqs, lows, highs, period = _collect(x, g, Sort.INT)
    candidates: List[Fraction] = []
    term_vals = []
    for e in eqs:
        v = e.evaluate(model)
        candidates.append(v)
        term_vals.append(v)
    for l in lows:
        v = l.evaluate(model)
        term_vals.append(v)
        for i in range(period):
            candidates.append(v + 1 + i)
    for u in highs:
        term_vals.append(u.evaluate(model))
    base = min(term_vals + [Fraction(0)]) - 1
    base = Fraction(base.numerator // base.denominator)  # floor
    for j in range(period):
        candidates.append(base - j)
    for c in candidates:
        if c.denominator != 1:
            continue
        trial = dict(model.items()) if not isinstance(model, dict) else dict(model)
        trial[x] = c
        if eval_formula(g, trial):
            return c
    return None
