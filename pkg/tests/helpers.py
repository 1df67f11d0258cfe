"""Shared test utilities: random formulas, models, and brute-force oracles."""

import itertools
import random
from fractions import Fraction

from recmc.formula import (
    EQ,
    LE,
    LT,
    BoolLit,
    Cmp,
    DivLit,
    LinTerm,
    Lit,
    Role,
    Sort,
    Var,
    eval_formula,
    f_and,
    f_or,
    free_vars,
    mk_cmp,
    mk_lit,
)
from recmc.project import project
from recmc.solver import Model


def mk_vars(names, sort, owner=None):
    return [Var(n, sort, Role.AUX, owner) for n in names]


def random_linterm(rng, vars_, integral, max_vars=2):
    coeffs = {}
    for v in rng.sample(vars_, rng.randint(1, min(max_vars, len(vars_)))):
        coeffs[v] = Fraction(rng.choice([-2, -1, 1, 2]))
    const = Fraction(rng.randint(-3, 3))
    if not integral and rng.random() < 0.25:
        const += Fraction(1, 2)
    return LinTerm.make(coeffs, const)


def random_atom(rng, vars_, mode, divides_ok=True):
    bools = [v for v in vars_ if v.sort is Sort.BOOL]
    arith = [v for v in vars_ if v.sort is not Sort.BOOL]
    if mode is Sort.BOOL or (bools and rng.random() < 0.25):
        return Lit(BoolLit(rng.choice(bools), rng.random() < 0.5))
    if mode is Sort.INT and divides_ok and rng.random() < 0.2:
        return mk_lit(
            DivLit(rng.choice([2, 3]), random_linterm(rng, arith, True))
        )
    op = rng.choice([LT, LT, LE, EQ])
    return mk_cmp(op, random_linterm(rng, arith, mode is Sort.INT))


def random_nnf(rng, vars_, mode, n_atoms, divides_ok=True):
    atoms = [random_atom(rng, vars_, mode, divides_ok) for _ in range(n_atoms)]
    while len(atoms) > 1:
        k = rng.randint(2, min(3, len(atoms)))
        group, atoms = atoms[:k], atoms[k:]
        combiner = f_and if rng.random() < 0.6 else f_or
        atoms.append(combiner(group))
    return atoms[0]


def random_conjunction(rng, vars_, mode, n_atoms, divides_ok=True):
    return f_and(
        random_atom(rng, vars_, mode, divides_ok) for _ in range(n_atoms)
    )


def random_model(rng, vars_, span=6):
    out = {}
    for v in vars_:
        if v.sort is Sort.BOOL:
            out[v] = rng.random() < 0.5
        elif v.sort is Sort.INT:
            out[v] = Fraction(rng.randint(-span, span))
        else:
            out[v] = Fraction(rng.randint(-2 * span, 2 * span), rng.randint(1, 3))
    return Model(out)


def truth_table_sat(f, bool_vars):
    """Propositional satisfiability by enumeration."""
    for bits in itertools.product((False, True), repeat=len(bool_vars)):
        if eval_formula(f, dict(zip(bool_vars, bits))):
            return True
    return False


def window_sat_int(f, vars_, lo, hi):
    """Integer satisfiability with every variable in [lo, hi]."""
    rng = [Fraction(k) for k in range(lo, hi + 1)]
    for vals in itertools.product(rng, repeat=len(vars_)):
        if eval_formula(f, dict(zip(vars_, vals))):
            return True
    return False


def exists_window_int(f, x, model, lo, hi):
    """Does some integer value of x in [lo, hi] satisfy f under model?"""
    base = dict(model.items())
    for k in range(lo, hi + 1):
        base[x] = Fraction(k)
        if eval_formula(f, base):
            return True
    return False


def fact_valuations(formula, formals):
    """All valuations of boolean formals satisfying the formula."""
    out = set()
    for bits in itertools.product((False, True), repeat=len(formals)):
        if eval_formula(formula, dict(zip(formals, bits))):
            out.add(bits)
    return out


def qe_all(vars_, f):
    """Exact projection of all given variables (oracle side)."""
    return project(list(vars_), f, None, strategy="qe")
