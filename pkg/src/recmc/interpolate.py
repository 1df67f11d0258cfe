"""Craig interpolation for unsatisfiable pairs.

Given a and b with a ∧ b unsatisfiable and the shared vocabulary, an
interpolant is a formula psi over the shared variables with a => psi
and psi ∧ b unsatisfiable.

Two strategies:

* "strongest": psi is the existential projection of a onto the shared
  variables, computed by quantifier elimination.  This is the strongest
  formula implied by a over the shared vocabulary, works uniformly for
  boolean, rational and integer matrices, and in integer mode can
  contain divisibility literals (Cooper output).

* "farkas" (rational only): per DNF path of a, combine the path's
  literals with the Farkas multipliers of its conflict against each DNF
  path of b.  The combination cancels the a-local variables, giving a
  single inequality per conflict; this typically generalizes much
  better than the exact projection.  Paths whose conflict is not a pure
  arithmetic one fall back to the projection.

The contract (a => psi, psi ∧ b unsat, vars ⊆ shared) is re-checked
with the solver on every call and a violation raises InterpolationError;
it is a bug guard, not an input error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import FrozenSet, Optional

from .errors import InterpolationError, NotUnsat, PathExplosion, WrongMode
from .formula import (
    EQ,
    FALSE,
    LE,
    LT,
    TRUE,
    BoolLit,
    Cmp,
    DivLit,
    Formula,
    LinTerm,
    Sort,
    Var,
    dnf_paths,
    f_and,
    f_or,
    free_vars,
    has_calls,
    mk_cmp,
    mk_lit,
)
from .project import project
from .solver import (
    DEFAULT_CONFIG,
    ClausalCore,
    FarkasCert,
    SolverConfig,
    check_sat,
    entails,
    refute_conjunction,
)


@dataclass(frozen=True)
class InterpolationQuery:
    a: Formula
    b: Formula
    shared: FrozenSet[Var]
    mode: Sort


def itp(
    query: InterpolationQuery,
    strategy: str = "strongest",
    config: SolverConfig = DEFAULT_CONFIG,
) -> Formula:
    a, b, shared, mode = query.a, query.b, query.shared, query.mode
    assert not has_calls(a) and not has_calls(b)
    pre = check_sat(f_and([a, b]), mode, config)
    if pre.is_sat:
        raise NotUnsat("interpolation query is satisfiable")

    if strategy == "farkas":
        if mode is not Sort.RAT:
            raise WrongMode("farkas interpolation requires rational mode")
        psi = _farkas_itp(a, b, shared, mode, config)
    else:
        psi = _strongest(a, shared)

    # contract, always on
    if not free_vars(psi) <= shared:
        raise InterpolationError(f"interpolant leaks variables: {psi!r}")
    if not entails(a, psi, mode, config):
        raise InterpolationError(f"a does not imply interpolant: {psi!r}")
    if not check_sat(f_and([psi, b]), mode, config).is_unsat:
        raise InterpolationError(f"interpolant consistent with b: {psi!r}")
    return psi


def _strongest(a: Formula, shared: FrozenSet[Var]) -> Formula:
    locals_ = sorted(free_vars(a) - shared, key=lambda v: v.key())
    return project(locals_, a, None, strategy="qe")


def _path_project(path, shared) -> Formula:
    f = path.formula()
    locals_ = sorted(free_vars(f) - shared, key=lambda v: v.key())
    return project(locals_, f, None, strategy="qe")


def _farkas_itp(a, b, shared, mode, config) -> Formula:
    try:
        a_paths = dnf_paths(a)
        b_paths = dnf_paths(b)
    except PathExplosion:
        return _strongest(a, shared)
    if not b_paths:
        return TRUE  # b is false; anything over shared works
    parts = []
    for pa in a_paths:
        assert not pa.calls
        a_lits = set(pa.literals)
        conjuncts = []
        for pb in b_paths:
            assert not pb.calls
            valued = [(l, True) for l in pa.literals] + [(l, True) for l in pb.literals]
            status, cert = refute_conjunction(valued, mode, config)
            if status != "unsat":
                # unknown, or a solver gap: the exact projection still works
                conjuncts = [_path_project(pa, shared)]
                break
            conj = _conjunct_from_cert(cert, a_lits, shared)
            if conj is None:
                conjuncts = [_path_project(pa, shared)]
                break
            conjuncts.append(conj)
        parts.append(f_and(conjuncts))
    return f_or(parts)


def _conjunct_from_cert(cert, a_lits, shared) -> Optional[Formula]:
    if isinstance(cert, FarkasCert):
        combo = LinTerm.of_const(0)
        strict = False
        for lit, mu, negated in cert.entries:
            if lit in a_lits:
                term = lit.term.scale(-1) if negated else lit.term
                combo = combo.add(term.scale(mu))
                if lit.op == LT and mu > 0:
                    strict = True
        if not all(v in shared for v in combo.vars):
            return None
        return mk_cmp(LT if strict else LE, combo)
    if isinstance(cert, ClausalCore):
        picked = []
        for lit, val in cert.literals:
            restored = _restore(lit, val)
            if restored in a_lits:
                picked.append(restored)
        if any(v not in shared for l in picked for v in _lit_vars(l)):
            return None
        return f_and([mk_lit(l) for l in picked])
    return None


def _restore(atom, val):
    if isinstance(atom, BoolLit):
        return BoolLit(atom.var, val)
    if isinstance(atom, DivLit):
        return DivLit(atom.divisor, atom.term, val)
    return atom


def _lit_vars(lit):
    if isinstance(lit, BoolLit):
        return (lit.var,)
    return lit.term.vars
