"""Bounded safety checking with under- and over-approximating summaries.

Given a program, a property over the formals of main, and a stack bound
n, the engine maintains a work set of bounded reachability queries
(procedure, goal, bound) starting from (main, not property, n), plus two
assertion maps: reachability facts (rho, under-approximations) and
summary facts (sigma, over-approximations).  Three rules fire until the
set empties, always on a query of minimal bound (FIFO among ties):

* sum:   the body instantiated with callee summaries at bound-1 refutes
         the goal; an interpolant between the two becomes a new summary
         fact, and every queued query of the procedure it now refutes is
         answered negatively.

* reach: some body path instantiated with callee reachability facts at
         bound-1 is consistent with the goal; projecting the locals out
         of the path instantiation (exact projection, or the disjunct
         picked by the satisfying model) becomes a new reachability
         fact, answering the query and any other queued query of the
         procedure it meets.

* query: neither applies.  Walking the satisfiable path's calls from the
         right, replace under-approximations by over-approximations
         until the conjunction turns satisfiable; the call at the flip
         is the one whose reachability facts are too strong and whose
         summaries are too weak.  Project everything but that call's
         arguments out of the mixed instantiation and push it down as a
         new query for the callee at bound-1.

When the work set drains, the original query has been answered: unsafe
if some reachability fact of main meets the negated property, safe
otherwise.  Facts are never retracted; the maps persist across calls so
an outer loop can deepen the bound incrementally.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .errors import PreconditionFailed, ResourceLimit
from .formula import (
    EQ,
    FALSE,
    TRUE,
    BoolLit,
    Cmp,
    Formula,
    LinTerm,
    Lit,
    Sort,
    Var,
    eval_formula,
    f_and,
    f_or,
    free_vars,
    mk_cmp,
    negate_nnf,
    rename_vars,
)
from .interpolate import InterpolationQuery, itp
from .program import (
    AssertionMap,
    CallChoice,
    Environment,
    Program,
    Provenance,
    instantiate,
    instantiate_path_mixed,
    over_env,
    under_env,
)
from .project import project
from .solver import DEFAULT_CONFIG, Model, SolverConfig, check_sat, default_value

log = logging.getLogger("recmc")


@dataclass
class EngineConfig:
    proj: str = "mbp"  # "mbp" | "qe"
    itp: str = "auto"  # "auto" | "strongest" | "farkas"
    step_budget: int = 100_000
    solver: SolverConfig = field(default_factory=lambda: DEFAULT_CONFIG)
    check_level: int = 0  # 1: assert queue/progress invariants every step

    def itp_strategy(self, mode: Sort) -> str:
        if self.itp == "auto":
            return "farkas" if mode is Sort.RAT else "strongest"
        return self.itp


@dataclass
class BoundedQuery:
    qid: int
    proc: str
    goal: Formula  # over the procedure's formals, call-free
    bound: int
    parent: Optional[tuple] = None  # (parent qid, path index, call index)


@dataclass
class TraceEvent:
    step: int
    rule: str  # "sum" | "reach" | "query"
    qid: int
    proc: str
    bound: int
    outcome: str
    formula: Optional[Formula] = None
    removed: tuple = ()

    def line(self) -> str:
        return f"{self.rule} q{self.qid} {self.proc} {self.bound} {self.outcome}"


def new_stats() -> Dict[str, int]:
    return {
        "steps": 0,
        "sum": 0,
        "reach": 0,
        "query": 0,
        "mbp_calls": 0,
        "solver_calls": 0,
    }


class BndSafety:
    """One bounded run; rho and sigma are shared with the caller."""

    def __init__(
        self,
        program: Program,
        phi_safe: Formula,
        bound: int,
        rho: AssertionMap,
        sigma: AssertionMap,
        config: EngineConfig,
        stats: Optional[dict] = None,
        trace: Optional[list] = None,
    ):
        self.program = program
        self.phi_safe = phi_safe
        self.bound = bound
        self.rho = rho
        self.sigma = sigma
        self.config = config
        self.stats = stats if stats is not None else new_stats()
        self.trace = trace if trace is not None else []
        self.queue: List[BoundedQuery] = []
        self._next_qid = 0
        self._env_cache: Dict[tuple, Environment] = {}

    # -- helpers -------------------------------------------------------

    def _sat(self, f: Formula):
        self.stats["solver_calls"] += 1
        res = check_sat(f, self.program.mode, self.config.solver)
        if res.is_unknown:
            raise ResourceLimit(res.reason)
        return res

    def _entails(self, a: Formula, b: Formula) -> bool:
        return self._sat(f_and([a, negate_nnf(b)])).is_unsat

    def _uenv(self, bound: int) -> Environment:
        key = ("u", bound, self.rho.version)
        env = self._env_cache.get(key)
        if env is None:
            env = under_env(self.rho, bound, self.program)
            self._env_cache[key] = env
        return env

    def _oenv(self, bound: int) -> Environment:
        key = ("o", bound, self.sigma.version)
        env = self._env_cache.get(key)
        if env is None:
            env = over_env(self.sigma, bound, self.program)
            self._env_cache[key] = env
        return env

    def _total_model(self, model: Model, vars_) -> Model:
        extra = {}
        for v in vars_:
            if v not in model:
                extra[v] = default_value(v.sort)
        return model.extended(extra) if extra else model

    def _push(self, query: BoundedQuery):
        self.queue.append(query)

    def _new_query(self, proc, goal, bound, parent) -> BoundedQuery:
        q = BoundedQuery(self._next_qid, proc, goal, bound, parent)
        self._next_qid += 1
        return q

    def pick_next(self) -> BoundedQuery:
        """Smallest bound first, FIFO among equal bounds."""
        best = self.queue[0]
        for q in self.queue[1:]:
            if q.bound < best.bound:
                best = q
        return best

    # -- main loop -----------------------------------------------------

    def run(self) -> Tuple[str, str]:
        """Returns (verdict, reason); verdict SAFE | UNSAFE | UNKNOWN."""
        main = self.program.proc(self.program.main)
        init_goal = negate_nnf(self.phi_safe)
        self._push(self._new_query(main.name, init_goal, self.bound, None))
        try:
            while self.queue:
                if self.stats["steps"] >= self.config.step_budget:
                    return "UNKNOWN", "step budget exhausted"
                self.step()
        except ResourceLimit as exc:
            return "UNKNOWN", f"solver resource limit: {exc}"
        u_main = self._uenv(self.bound)[main.name]
        if self._sat(f_and([u_main, init_goal])).is_sat:
            return "UNSAFE", ""
        o_main = self._oenv(self.bound)[main.name]
        assert self._entails(o_main, self.phi_safe), (
            "empty work set but neither verdict premise holds"
        )
        return "SAFE", ""

    def step(self) -> TraceEvent:
        q = self.pick_next()
        proc = self.program.proc(q.proc)
        env_o = self._oenv(q.bound - 1)
        env_u = self._uenv(q.bound - 1)
        neg_goal = negate_nnf(q.goal)

        body_over = instantiate(proc.body, env_o, self.program)
        sum_ok = self._entails(body_over, neg_goal)

        reach_hit = None
        if not sum_ok or self.config.check_level >= 1:
            for pidx, path in enumerate(proc.paths):
                matrix = instantiate(path, env_u, self.program)
                res = self._sat(f_and([matrix, q.goal]))
                if res.is_sat:
                    reach_hit = (pidx, path, matrix, res.model)
                    break
        if self.config.check_level >= 1:
            assert not (sum_ok and reach_hit), "sum and reach both applicable"

        self.stats["steps"] += 1
        if sum_ok:
            event = self.apply_sum(q, body_over)
        elif reach_hit:
            event = self.apply_reach(q, *reach_hit)
        else:
            event = self.apply_query(q, env_o, env_u)
        self.trace.append(event)
        if log.isEnabledFor(logging.DEBUG):
            log.debug("%s", event.line())
        if self.config.check_level >= 1:
            self._assert_pending_invariant()
        return event

    # -- rules -----------------------------------------------------------

    def apply_sum(self, q: BoundedQuery, body_over: Formula) -> TraceEvent:
        proc = self.program.proc(q.proc)
        strategy = self.config.itp_strategy(self.program.mode)
        psi = itp(
            InterpolationQuery(
                body_over, q.goal, frozenset(proc.formals), self.program.mode
            ),
            strategy=strategy,
            config=self.config.solver,
        )
        fact, added = self.sigma.add(q.proc, q.bound, psi)
        # answered negatively: queued queries of this procedure now refuted
        removed = []
        for q2 in list(self.queue):
            if q2.proc != q.proc or q2.bound > q.bound:
                continue
            o_formula = self._oenv(q2.bound)[q.proc]
            if self._entails(o_formula, negate_nnf(q2.goal)):
                removed.append(q2)
        assert any(q2.qid == q.qid for q2 in removed), "sum did not answer its query"
        self.queue = [q2 for q2 in self.queue if q2 not in removed]
        self.stats["sum"] += 1
        return TraceEvent(
            self.stats["steps"],
            "sum",
            q.qid,
            q.proc,
            q.bound,
            "fact-added" if added else "fact-duplicate",
            psi,
            tuple(r.qid for r in removed),
        )

    def apply_reach(
        self, q: BoundedQuery, pidx: int, path, matrix: Formula, model: Model
    ) -> TraceEvent:
        proc = self.program.proc(q.proc)
        model = self._total_model(model, proc.all_vars)
        if self.config.proj == "mbp":
            psi = project(
                proc.locals_, matrix, model, strategy="mbp", stats=self.stats
            )
        else:
            psi = project(proc.locals_, matrix, None, strategy="qe")
        provenance = self._provenance(q, pidx, path, model)
        fact, added = self.rho.add(q.proc, q.bound, psi, provenance)
        removed = []
        for q2 in list(self.queue):
            if q2.proc != q.proc or q2.bound < q.bound:
                continue
            if self._sat(f_and([psi, q2.goal])).is_sat:
                removed.append(q2)
        assert any(q2.qid == q.qid for q2 in removed), "reach did not answer its query"
        self.queue = [q2 for q2 in self.queue if q2 not in removed]
        self.stats["reach"] += 1
        return TraceEvent(
            self.stats["steps"],
            "reach",
            q.qid,
            q.proc,
            q.bound,
            "fact-added" if added else "fact-duplicate",
            psi,
            tuple(r.qid for r in removed),
        )

    def _provenance(self, q, pidx, path, model: Model) -> Provenance:
        choices = []
        for call in path.calls:
            callee = self.program.proc(call.callee)
            chosen = None
            for fact in self.rho.up_to(call.callee, q.bound - 1):
                renamed = rename_vars(
                    fact.formula, dict(zip(callee.formals, call.args))
                )
                if eval_formula(renamed, model):
                    chosen = fact
                    break
            assert chosen is not None, "model satisfies no callee fact"
            choices.append(CallChoice(call.callee, chosen.fact_id, chosen.bound))
        witness = tuple(sorted(model.items(), key=lambda it: it[0].key()))
        return Provenance(pidx, tuple(choices), witness)

    def apply_query(
        self, q: BoundedQuery, env_o: Environment, env_u: Environment
    ) -> TraceEvent:
        proc = self.program.proc(q.proc)
        for pidx, path in enumerate(proc.paths):
            full_over = instantiate_path_mixed(
                path, len(path.calls), env_o, env_u, q.goal, self.program
            )
            res = self._sat(full_over)
            if not res.is_sat:
                continue
            # walk the flip point right to left; the under-instantiated
            # conjunction is unsat (reach did not fire), the fully
            # over-instantiated one is sat, so a maximal flip exists
            sat_model = res.model
            split = None
            for j in range(len(path.calls) - 1, -1, -1):
                mixed = instantiate_path_mixed(
                    path, j, env_o, env_u, q.goal, self.program
                )
                res_j = self._sat(mixed)
                if res_j.is_sat:
                    sat_model = res_j.model
                    continue
                split = j
                break
            if split is None:
                # even the fully under-instantiated path meets the goal,
                # which contradicts reach being inapplicable
                raise PreconditionFailed("no unsat flip point on candidate path")
            call = path.calls[split]
            callee = self.program.proc(call.callee)
            parts = [Lit(l) for l in path.literals]
            for i, other in enumerate(path.calls):
                if i == split:
                    continue
                env = env_o if i < split else env_u
                parts.append(instantiate(other, env, self.program))
            parts.append(q.goal)
            matrix = f_and(parts)
            args = list(call.args)
            keep = set(args)
            elim = [v for v in proc.all_vars if v not in keep]
            if self.config.proj == "mbp":
                model = self._total_model(sat_model, proc.all_vars)
                psi = project(elim, matrix, model, strategy="mbp", stats=self.stats)
            else:
                psi = project(elim, matrix, None, strategy="qe")
            child_goal = self._rename_to_formals(psi, args, callee.formals)
            assert not any(q2.bound == q.bound - 1 for q2 in self.queue), (
                "new query would overlap an existing bound level"
            )
            child = self._new_query(call.callee, child_goal, q.bound - 1, (q.qid, pidx, split))
            self._push(child)
            self.stats["query"] += 1
            return TraceEvent(
                self.stats["steps"],
                "query",
                q.qid,
                q.proc,
                q.bound,
                f"child q{child.qid} {call.callee} {q.bound - 1}",
                child_goal,
            )
        raise PreconditionFailed("no rule applicable (progress violation)")

    @staticmethod
    def _rename_to_formals(psi: Formula, args, formals) -> Formula:
        """Rewrite a formula over call arguments to one over the callee's
        formals.  A variable repeated in the argument list pins the
        corresponding formals equal."""
        mapping = {}
        equalities = []
        for arg, formal in zip(args, formals):
            if arg not in mapping:
                mapping[arg] = formal
            else:
                first = mapping[arg]
                if formal.sort is Sort.BOOL:
                    equalities.append(
                        f_or(
                            [
                                f_and([Lit(BoolLit(first)), Lit(BoolLit(formal))]),
                                f_and(
                                    [
                                        Lit(BoolLit(first, False)),
                                        Lit(BoolLit(formal, False)),
                                    ]
                                ),
                            ]
                        )
                    )
                else:
                    equalities.append(
                        mk_cmp(
                            EQ,
                            LinTerm.of_var(first).sub(LinTerm.of_var(formal)),
                        )
                    )
        renamed = rename_vars(psi, mapping)
        return f_and([renamed] + equalities)

    # -- debug invariants -------------------------------------------------

    def _assert_pending_invariant(self):
        """Every queued query can neither be refuted by summaries nor
        witnessed by reachability facts."""
        for q in self.queue:
            o_formula = self._oenv(q.bound)[q.proc]
            u_formula = self._uenv(q.bound)[q.proc]
            assert not self._entails(o_formula, negate_nnf(q.goal)), (
                f"queued query q{q.qid} already refuted by summaries"
            )
            assert self._entails(u_formula, negate_nnf(q.goal)), (
                f"queued query q{q.qid} already witnessed by reachability facts"
            )


def bounded_safety(
    program: Program,
    phi_safe: Formula,
    bound: int,
    rho: AssertionMap,
    sigma: AssertionMap,
    config: Optional[EngineConfig] = None,
    stats: Optional[dict] = None,
    trace: Optional[list] = None,
) -> Tuple[str, str, BndSafety]:
    engine = BndSafety(
        program, phi_safe, bound, rho, sigma, config or EngineConfig(), stats, trace
    )
    verdict, reason = engine.run()
    return verdict, reason, engine
