"""Outer loop: iterative deepening, inductiveness, witnesses.

The bound on the call stack grows one level at a time.  After every
bounded-safe round the summary facts are pushed upward level by level
(a fact at level b moves to b + 1 when the body instantiated with
level-b summaries implies it, as in IC3's push generalization); the run
is inductive when every level-n fact survives the push, and then the
conjunction of facts at levels >= n is a safety proof.  An unsafe round
stops immediately: the recorded provenance of the reachability facts is
replayed into a concrete counterexample tree.

Both witnesses are validated before being returned - the proof against
a fresh solver, the tree literally, node by node - so a verdict is
never emitted on the engine's say-so alone.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional

from .engine import EngineConfig, bounded_safety, new_stats
from .errors import ProvenanceGap, ResourceLimit, UnassignedVar
from .formula import (
    EQ,
    BoolLit,
    Formula,
    LinTerm,
    Lit,
    Sort,
    Var,
    eval_formula,
    f_and,
    free_vars,
    mk_cmp,
    negate_nnf,
)
from .program import (
    AssertionMap,
    Environment,
    Program,
    bool_bounded_semantics,
    instantiate,
    over_env,
    under_env,
)
from .solver import SolverConfig, check_sat, default_value, entails


@dataclass
class SafetyProof:
    env: Dict[str, Formula]  # procedure name -> formula over its formals
    bound: int


@dataclass
class CexNode:
    proc: str
    path_index: int
    values: Dict[Var, object]  # formals and locals
    children: tuple


@dataclass
class CounterexampleTree:
    root: CexNode
    bound: int


@dataclass
class Verdict:
    status: str  # "SAFE" | "UNSAFE" | "UNKNOWN"
    bound: int
    proof: Optional[SafetyProof] = None
    cex: Optional[CounterexampleTree] = None
    reason: str = ""
    stats: dict = field(default_factory=new_stats)
    trace: list = field(default_factory=list)
    rho: Optional[AssertionMap] = None
    sigma: Optional[AssertionMap] = None


def check(
    program: Program,
    phi_safe: Formula,
    max_bound: int = 64,
    config: Optional[EngineConfig] = None,
) -> Verdict:
    config = config or EngineConfig()
    rho, sigma = AssertionMap(), AssertionMap()
    stats = new_stats()
    trace: list = []
    start = time.monotonic()
    verdict = _check_loop(program, phi_safe, max_bound, config, rho, sigma, stats, trace)
    stats["wall_ms"] = int((time.monotonic() - start) * 1000)
    verdict.stats = stats
    verdict.trace = trace
    verdict.rho = rho
    verdict.sigma = sigma
    return verdict


def _check_loop(program, phi_safe, max_bound, config, rho, sigma, stats, trace):
    for n in range(max_bound + 1):
        res, reason, _ = bounded_safety(
            program, phi_safe, n, rho, sigma, config, stats, trace
        )
        if res == "UNKNOWN":
            return Verdict("UNKNOWN", n, reason=reason)
        if res == "UNSAFE":
            tree = build_cex(rho, program, phi_safe, n, config.solver)
            assert validate_cex(program, tree, phi_safe), "counterexample failed validation"
            return Verdict("UNSAFE", n, cex=tree)
        try:
            inductive = check_inductive(program, sigma, n, config.solver)
        except ResourceLimit as exc:
            return Verdict("UNKNOWN", n, reason=f"solver resource limit: {exc}")
        if inductive:
            env = over_env(sigma, n, program)
            proof = SafetyProof(dict(env.mapping), n)
            assert validate_proof(program, proof, phi_safe), "proof failed validation"
            return Verdict("SAFE", n, proof=proof)
    return Verdict("UNKNOWN", max_bound, reason="bound exhausted")


def check_inductive(
    program: Program, sigma: AssertionMap, n: int, solver: SolverConfig
) -> bool:
    """Push summary facts upward; true when every level-n fact moves.

    Levels are swept bottom-up so that facts pushed from below are
    already visible when the higher levels are checked; pushes from
    levels below n populate level n without affecting the outcome
    directly.  sigma only ever grows.
    """
    inductive = True
    for b in range(n + 1):
        for name, proc in program.procedures.items():
            for fact in sigma.at(name, b):
                body = instantiate(proc.body, over_env(sigma, b, program), program)
                if entails(body, fact.formula, program.mode, solver):
                    sigma.add(name, b + 1, fact.formula)
                elif b == n:
                    inductive = False
    return inductive


def validate_proof(
    program: Program,
    proof: SafetyProof,
    phi_safe: Formula,
    solver: Optional[SolverConfig] = None,
) -> bool:
    """Safe and inductive, re-checked from scratch."""
    solver = solver or SolverConfig()
    env = Environment(dict(proof.env))
    try:
        if not entails(env[program.main], phi_safe, program.mode, solver):
            return False
        for name, proc in program.procedures.items():
            body = instantiate(proc.body, env, program)
            if not entails(body, env[name], program.mode, solver):
                return False
    except ResourceLimit:
        return False
    return True


# --------------------------------------------------------------------------
# Counterexamples.
# --------------------------------------------------------------------------


def _pin(values: Dict[Var, object]) -> Formula:
    parts = []
    for v, val in values.items():
        if v.sort is Sort.BOOL:
            parts.append(Lit(BoolLit(v, bool(val))))
        else:
            parts.append(mk_cmp(EQ, LinTerm.of_var(v).sub(LinTerm.of_const(val))))
    return f_and(parts)


def build_cex(
    rho: AssertionMap,
    program: Program,
    phi_safe: Formula,
    n: int,
    solver: SolverConfig,
) -> CounterexampleTree:
    """Replay reachability provenance into a concrete execution tree.

    Node models are re-solved with the formals pinned to the values the
    parent requires; every fact is an under-approximation of real
    executions, so the solve cannot fail unless the bookkeeping is
    broken (hence ProvenanceGap, not a user-facing error).
    """
    main = program.proc(program.main)
    u_main = under_env(rho, n, program)[main.name]
    res = check_sat(f_and([u_main, negate_nnf(phi_safe)]), program.mode, solver)
    if not res.is_sat:
        raise ProvenanceGap("unsafe verdict but no violating model")
    model = _totalize(res.model, main.formals)
    fact = _fact_for(rho, main.name, n, model, program)
    root = _expand(rho, program, fact, {v: model[v] for v in main.formals}, solver)
    return CounterexampleTree(root, n)


def _totalize(model, vars_):
    extra = {v: default_value(v.sort) for v in vars_ if v not in model}
    return model.extended(extra) if extra else model


def _fact_for(rho, name, bound, model, program):
    for fact in rho.up_to(name, bound):
        if eval_formula(fact.formula, model):
            return fact
    raise ProvenanceGap(f"no reachability fact of {name} matches the model")


def _expand(rho, program, fact, pinned, solver) -> CexNode:
    proc = program.proc(fact.proc)
    if fact.provenance is None:
        raise ProvenanceGap(f"fact {fact.fact_id} has no provenance")
    path = proc.paths[fact.provenance.path_index]
    env_u = under_env(rho, fact.bound - 1, program)
    matrix = instantiate(path, env_u, program)
    res = check_sat(f_and([matrix, _pin(pinned)]), program.mode, solver)
    if not res.is_sat:
        raise ProvenanceGap(f"fact {fact.fact_id} does not replay")
    model = _totalize(res.model, proc.all_vars)
    children = []
    for call in path.calls:
        callee = program.proc(call.callee)
        renamed_model = {
            formal: model[arg] for formal, arg in zip(callee.formals, call.args)
        }
        child_fact = None
        for cand in rho.up_to(call.callee, fact.bound - 1):
            if eval_formula(cand.formula, renamed_model):
                child_fact = cand
                break
        if child_fact is None:
            raise ProvenanceGap(f"no callee fact matches call to {call.callee}")
        children.append(_expand(rho, program, child_fact, renamed_model, solver))
    values = {v: model[v] for v in proc.all_vars}
    return CexNode(proc.name, fact.provenance.path_index, values, tuple(children))


def validate_cex(program: Program, tree: CounterexampleTree, phi_safe: Formula) -> bool:
    """Ground-truth check of an execution tree.

    Every node's path literals hold in its model; child formals agree
    with the parent's argument values; leaves are call-free; the root
    violates the property.  In boolean mode the root valuation is also
    checked against the explicit bounded semantics.
    """
    main = program.proc(program.main)

    def walk(node: CexNode) -> bool:
        proc = program.proc(node.proc)
        if node.path_index >= len(proc.paths):
            return False
        path = proc.paths[node.path_index]
        try:
            for lit in path.literals:
                if not eval_formula(Lit(lit), node.values):
                    return False
        except UnassignedVar:
            return False
        if len(node.children) != len(path.calls):
            return False
        for call, child in zip(path.calls, node.children):
            callee = program.proc(call.callee)
            if child.proc != call.callee:
                return False
            for formal, arg in zip(callee.formals, call.args):
                if child.values.get(formal) != node.values.get(arg):
                    return False
            if not walk(child):
                return False
        return True

    root = tree.root
    if root.proc != main.name:
        return False
    if not walk(root):
        return False
    try:
        if eval_formula(phi_safe, root.values):
            return False  # must violate the property
    except UnassignedVar:
        return False
    if program.mode is Sort.BOOL:
        reachable = bool_bounded_semantics(program, main.name, tree.bound)
        valuation = tuple(bool(root.values[v]) for v in main.formals)
        if valuation not in reachable:
            return False
    return True
