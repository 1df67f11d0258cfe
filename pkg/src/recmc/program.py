"""Programs, assertion maps, environments, and call instantiation.

A program is a finite family of procedures with a designated main.  A
procedure body is a quantifier-free NNF formula over its formals and
locals in which call atoms occur only positively; the paths of the body
are its DNF disjuncts, computed once.

Assertion maps store facts per (procedure, stack bound).  Two instances
drive the engine: the reachability map (under-approximations, each
model of a fact is a real execution within the bound) and the summary
map (over-approximations).  From a map and a bound we build the two
instantiation environments:

    under(m, b):  Sigma_P  ->  OR  of facts at bounds <= b   (empty: false)
    over(m, b):   Sigma_P  ->  AND of facts at bounds >= b   (empty: true)

and bound -1 maps every symbol to false in both.  Instantiating a
formula under an environment replaces each call atom by the callee's
formula with formals renamed to the arguments; every procedure's
variables are namespaced by the procedure name, so renaming never
captures.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import ArityMismatch, TooLarge, ValidationError
from .formula import (
    FALSE,
    TRUE,
    And,
    BoolLit,
    Call,
    Cmp,
    DivLit,
    Formula,
    Lit,
    Not,
    Or,
    Path,
    Sort,
    Var,
    canon_key,
    dnf_paths,
    f_and,
    f_or,
    free_vars,
    rename_vars,
)


@dataclass(frozen=True)
class Procedure:
    name: str
    inputs: tuple
    outputs: tuple
    locals_: tuple
    body: Formula
    paths: tuple

    @property
    def formals(self) -> tuple:
        return self.inputs + self.outputs

    @property
    def all_vars(self) -> tuple:
        return self.inputs + self.outputs + self.locals_


def make_procedure(name, inputs, outputs, locals_, body, path_limit=4096) -> Procedure:
    paths = tuple(dnf_paths(body, path_limit))
    return Procedure(name, tuple(inputs), tuple(outputs), tuple(locals_), body, paths)


@dataclass
class Program:
    procedures: Dict[str, Procedure]  # insertion-ordered
    main: str
    mode: Sort

    def proc(self, name: str) -> Procedure:
        return self.procedures[name]

    def validate(self) -> None:
        if self.main not in self.procedures:
            raise ValidationError(f"main procedure {self.main!r} is not declared")
        for p in self.procedures.values():
            names = [v.name for v in p.all_vars]
            if len(names) != len(set(names)):
                raise ValidationError(f"duplicate variable name in {p.name}")
            scope = set(p.all_vars)
            var_sort = Sort.BOOL if self.mode is Sort.BOOL else self.mode
            for v in p.all_vars:
                if v.sort is not var_sort:
                    raise ValidationError(
                        f"{v!r} has sort {v.sort.value}; program mode is {self.mode.value}"
                    )
            self._check_body(p, p.body, scope)

    def _check_body(self, p: Procedure, f: Formula, scope) -> None:
        if isinstance(f, Not):
            raise ValidationError(f"body of {p.name} is not in NNF")
        if isinstance(f, Call):
            callee = self.procedures.get(f.callee)
            if callee is None:
                raise ValidationError(f"{p.name} calls undeclared procedure {f.callee!r}")
            if len(f.args) != len(callee.formals):
                raise ArityMismatch(
                    f"call to {f.callee} in {p.name}: {len(f.args)} args, "
                    f"{len(callee.formals)} formals"
                )
            for a in f.args:
                if a not in scope:
                    raise ValidationError(f"call argument {a!r} not in scope of {p.name}")
        elif isinstance(f, (And, Or)):
            for a in f.args:
                self._check_body(p, a, scope)
        elif isinstance(f, Lit):
            for v in (
                (f.lit.var,) if isinstance(f.lit, BoolLit) else f.lit.term.vars
            ):
                if v not in scope:
                    raise ValidationError(f"variable {v!r} not in scope of {p.name}")
            if isinstance(f.lit, DivLit):
                if self.mode is not Sort.INT:
                    raise ValidationError("divisibility literal outside integer mode")
                if not f.lit.positive:
                    raise ValidationError("negated divisibility in input")
            if self.mode is Sort.INT and isinstance(f.lit, (Cmp, DivLit)):
                if not f.lit.term.is_integral():
                    raise ValidationError(
                        f"non-integral coefficients in integer mode: {f.lit!r}"
                    )


# --------------------------------------------------------------------------
# Facts and assertion maps.
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CallChoice:
    callee: str
    fact_id: int
    bound: int


@dataclass(frozen=True)
class Provenance:
    path_index: int
    calls: tuple  # tuple[CallChoice, ...] in path order
    witness: tuple  # tuple[(Var, value), ...] from the discovering model


@dataclass(frozen=True)
class Fact:
    fact_id: int
    proc: str
    bound: int
    formula: Formula
    provenance: Optional[Provenance] = None


class AssertionMap:
    """Facts per (procedure, bound); deduplicated, never retracted."""

    def __init__(self):
        self._by_proc: Dict[str, Dict[int, List[Fact]]] = {}
        self._keys = set()
        self._by_id: Dict[int, Fact] = {}
        self._next = itertools.count()
        self.version = 0

    def add(self, proc: str, bound: int, formula: Formula, provenance=None):
        """Returns (fact, added); a canonically equal formula at the same
        (proc, bound) is not stored twice."""
        key = (proc, bound, canon_key(formula))
        if key in self._keys:
            for fact in self._by_proc[proc][bound]:
                if canon_key(fact.formula) == key[2]:
                    return fact, False
        fact = Fact(next(self._next), proc, bound, formula, provenance)
        self._keys.add(key)
        self._by_proc.setdefault(proc, {}).setdefault(bound, []).append(fact)
        self._by_id[fact.fact_id] = fact
        self.version += 1
        return fact, True

    def at(self, proc: str, bound: int) -> List[Fact]:
        return list(self._by_proc.get(proc, {}).get(bound, ()))

    def up_to(self, proc: str, bound: int) -> List[Fact]:
        """Facts at bounds <= bound, in (bound, insertion) order."""
        out = []
        for b in sorted(self._by_proc.get(proc, {})):
            if b <= bound:
                out.extend(self._by_proc[proc][b])
        return out

    def at_least(self, proc: str, bound: int) -> List[Fact]:
        out = []
        for b in sorted(self._by_proc.get(proc, {})):
            if b >= bound:
                out.extend(self._by_proc[proc][b])
        return out

    def by_id(self, fact_id: int) -> Fact:
        return self._by_id[fact_id]

    def bounds(self, proc: str):
        return sorted(self._by_proc.get(proc, {}))

    def items(self):
        for proc, per_bound in self._by_proc.items():
            for bound in sorted(per_bound):
                for fact in per_bound[bound]:
                    yield fact

    def __len__(self):
        return len(self._by_id)


@dataclass
class Environment:
    """Total map from procedure name to a formula over its formals."""

    mapping: Dict[str, Formula]

    def __getitem__(self, name: str) -> Formula:
        return self.mapping[name]


def under_env(rho: AssertionMap, bound: int, program: Program) -> Environment:
    if bound < 0:
        return Environment({name: FALSE for name in program.procedures})
    return Environment(
        {
            name: f_or([f.formula for f in rho.up_to(name, bound)])
            for name in program.procedures
        }
    )


def over_env(sigma: AssertionMap, bound: int, program: Program) -> Environment:
    if bound < 0:
        return Environment({name: FALSE for name in program.procedures})
    return Environment(
        {
            name: f_and([f.formula for f in sigma.at_least(name, bound)])
            for name in program.procedures
        }
    )


def instantiate(f, env: Environment, program: Program) -> Formula:
    """Replace every call atom by the environment formula of its callee,
    with the callee's formals renamed to the call's arguments."""
    if isinstance(f, Path):
        return instantiate(f.formula(), env, program)
    if isinstance(f, Call):
        callee = program.proc(f.callee)
        if len(f.args) != len(callee.formals):
            raise ArityMismatch(f.callee)
        mapping = dict(zip(callee.formals, f.args))
        return rename_vars(env[f.callee], mapping)
    if isinstance(f, And):
        return f_and(instantiate(a, env, program) for a in f.args)
    if isinstance(f, Or):
        return f_or(instantiate(a, env, program) for a in f.args)
    return f


def instantiate_path_mixed(
    path: Path,
    flip: int,
    env_over: Environment,
    env_under: Environment,
    extra: Formula,
    program: Program,
) -> Formula:
    """Path literals plus calls: the first `flip` calls instantiated with
    env_over, the rest with env_under, conjoined with extra."""
    parts = [Lit(l) for l in path.literals]
    for i, call in enumerate(path.calls):
        env = env_over if i < flip else env_under
        parts.append(instantiate(call, env, program))
    parts.append(extra)
    return f_and(parts)


# --------------------------------------------------------------------------
# Explicit bounded semantics for boolean programs (testing oracle).
# --------------------------------------------------------------------------

ENUM_GUARD_BITS = 16


def _eval_with_calls(f: Formula, values, interp) -> bool:
    if isinstance(f, Lit):
        assert isinstance(f.lit, BoolLit)
        return values[f.lit.var] == f.lit.positive
    if isinstance(f, And):
        return all(_eval_with_calls(a, values, interp) for a in f.args)
    if isinstance(f, Or):
        return any(_eval_with_calls(a, values, interp) for a in f.args)
    if isinstance(f, Call):
        return tuple(values[a] for a in f.args) in interp.get(f.callee, frozenset())
    return f == TRUE


def bool_bounded_semantics(program: Program, name: str, bound: int) -> frozenset:
    """The set of formal valuations reachable with stack depth <= bound,
    computed by explicit enumeration.  Only for boolean programs."""
    assert program.mode is Sort.BOOL and bound >= 0
    for p in program.procedures.values():
        if len(p.all_vars) > ENUM_GUARD_BITS:
            raise TooLarge(p.name)
    interp: Dict[str, frozenset] = {}
    for b in range(bound + 1):
        prev = interp if b > 0 else {}
        interp = {
            q.name: _enumerate_proc(q, prev) for q in program.procedures.values()
        }
    return interp[name]


def _enumerate_proc(p: Procedure, interp) -> frozenset:
    out = set()
    vars_ = p.all_vars
    nf = len(p.formals)
    for bits in itertools.product((False, True), repeat=len(vars_)):
        values = dict(zip(vars_, bits))
        if _eval_with_calls(p.body, values, interp):
            out.add(bits[:nf])
    return frozenset(out)


def bool_unbounded_semantics(program: Program) -> Dict[str, frozenset]:
    """Least fixed point of the bounded semantics (stabilizes since the
    state space is finite)."""
    assert program.mode is Sort.BOOL
    interp: Dict[str, frozenset] = {name: frozenset() for name in program.procedures}
    while True:
        nxt = {q.name: _enumerate_proc(q, interp) for q in program.procedures.values()}
        if nxt == interp:
            return interp
        interp = nxt
