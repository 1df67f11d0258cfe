"""Satisfiability of quantifier-free, call-free formulas.

Lazy SMT in the classic shape: a DPLL search over the boolean skeleton
of the formula, with conjunctions of arithmetic literals checked by an
exact simplex procedure in the style of Dutertre and de Moura (general
simplex over delta-rationals, Bland's rule for termination).  Theory
conflicts come back as blocking clauses; for rational conflicts we also
extract Farkas multipliers so that interpolation can reuse them.

Integer mode solves the rational relaxation and branches on fractional
variables.  Divisibility literals are compiled to fresh-variable
equalities (d | t becomes t = d*k).  Branch-and-bound alone is not a
decision procedure for integer arithmetic, so when the branch budget
runs out we fall back to eliminating the variables of the offending
conjunction with Cooper's method, which is complete; only if that also
exceeds its size guard does the solver report unknown.

Everything is exact: Fractions all the way down, no floats.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, lcm
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import ResourceLimit, WrongMode
from .formula import (
    EQ,
    FALSE,
    LE,
    LT,
    TRUE,
    And,
    BoolLit,
    Bottom,
    Cmp,
    DivLit,
    Formula,
    LinTerm,
    Lit,
    Literal,
    Not,
    Or,
    Role,
    Sort,
    Top,
    Var,
    eval_formula,
    f_and,
    free_vars,
    lia_normalize,
    mk_lit,
    negate_nnf,
    normalize_for,
    subst_arith,
)

# Always re-evaluate models against the original formula.  Cheap at the
# scale we run at, and it turns solver bugs into loud failures.
VERIFY_MODELS = True


@dataclass
class SolverConfig:
    max_decisions: int = 500_000
    max_theory_checks: int = 100_000
    bb_node_budget: int = 40
    cooper_node_budget: int = 30_000


DEFAULT_CONFIG = SolverConfig()


class Model:
    """Total assignment for the free variables of a query."""

    __slots__ = ("assignment",)

    def __init__(self, assignment: Dict[Var, object]):
        self.assignment = dict(assignment)

    def __contains__(self, v):
        return v in self.assignment

    def __getitem__(self, v):
        return self.assignment[v]

    def get(self, v, default=None):
        return self.assignment.get(v, default)

    def items(self):
        return self.assignment.items()

    def keys(self):
        return self.assignment.keys()

    def value(self, v):
        return self.assignment[v]

    def restrict(self, vars_: Iterable[Var]) -> "Model":
        return Model({v: self.assignment[v] for v in vars_ if v in self.assignment})

    def extended(self, extra: Dict[Var, object]) -> "Model":
        m = dict(self.assignment)
        m.update(extra)
        return Model(m)

    def __repr__(self):
        inner = ", ".join(f"{v!r}={x}" for v, x in sorted(self.assignment.items(), key=lambda it: it[0].key()))
        return "{" + inner + "}"


def default_value(sort: Sort):
    return False if sort is Sort.BOOL else Fraction(0)


@dataclass(frozen=True)
class FarkasCert:
    """Nonnegative combination of literals deriving 0 < 0 or 0 <= -c, c > 0.

    Entries are (literal, multiplier, negated); multiplier >= 0, and
    negated may only be set for equality literals (an equality can be
    used in either direction).
    """

    entries: tuple  # tuple[(Cmp, Fraction, bool), ...]

    def replay(self) -> bool:
        total = LinTerm.of_const(0)
        strict = False
        for lit, mu, negated in self.entries:
            if mu < 0 or not isinstance(lit, Cmp):
                return False
            if negated and lit.op != EQ:
                return False
            term = lit.term.scale(-1) if negated else lit.term
            total = total.add(term.scale(mu))
            if lit.op == LT and mu > 0:
                strict = True
        if not total.is_const():
            return False
        return total.const > 0 or (total.const == 0 and strict)


@dataclass(frozen=True)
class ClausalCore:
    """Jointly unsatisfiable set of (literal, assigned value) pairs."""

    literals: tuple  # tuple[(Literal, bool), ...]


@dataclass
class SatResult:
    status: str  # "sat" | "unsat" | "unknown"
    model: Optional[Model] = None
    certs: tuple = ()  # one FarkasCert/ClausalCore per explored theory conflict
    reason: str = ""

    @property
    def is_sat(self):
        return self.status == "sat"

    @property
    def is_unsat(self):
        return self.status == "unsat"

    @property
    def is_unknown(self):
        return self.status == "unknown"


# --------------------------------------------------------------------------
# Delta-rationals: pairs (q, d) standing for q + d*delta with delta an
# infinitesimal positive.  Plain tuples; lexicographic comparison is the
# right order.
# --------------------------------------------------------------------------

DR_ZERO = (Fraction(0), Fraction(0))


def dr(q, d=0):
    return (Fraction(q), Fraction(d))


def dr_add(a, b):
    return (a[0] + b[0], a[1] + b[1])


def dr_sub(a, b):
    return (a[0] - b[0], a[1] - b[1])


def dr_scale(a, k):
    return (a[0] * k, a[1] * k)


# --------------------------------------------------------------------------
# Simplex over asserted bounds.
# --------------------------------------------------------------------------


@dataclass
class _Bound:
    val: tuple  # delta-rational
    cid: int
    inv_scale: Fraction  # constraint term = scale * (v - val) resp. (val - v)
    negated: bool  # equality used in the lower-bound direction


class _Constraint:
    __slots__ = ("cid", "term", "op", "source")

    def __init__(self, cid, term, op, source):
        self.cid = cid
        self.term = term  # LinTerm, meaning term op 0
        self.op = op
        self.source = source  # ("lit", literal, value) or ("branch",)


class Simplex:
    """General simplex with upper/lower bounds on variables.

    Multi-variable constraint terms get a slack variable defined by a
    tableau row; asserting a constraint then just tightens a bound.
    """

    def __init__(self):
        self.var_ids: Dict[Var, int] = {}
        self.id_vars: List[Optional[Var]] = []
        self.slack_by_key: Dict[object, int] = {}
        self.slack_def: Dict[int, LinTerm] = {}
        self.rows: Dict[int, Dict[int, Fraction]] = {}
        self.cols: Dict[int, set] = {}
        self.values: Dict[int, tuple] = {}
        self.lo: Dict[int, _Bound] = {}
        self.hi: Dict[int, _Bound] = {}
        self.constraints: List[_Constraint] = []

    # -- variables ---------------------------------------------------------

    def _new_id(self, v: Optional[Var]) -> int:
        vid = len(self.id_vars)
        self.id_vars.append(v)
        self.values[vid] = DR_ZERO
        self.cols.setdefault(vid, set())
        return vid

    def var_id(self, v: Var) -> int:
        vid = self.var_ids.get(v)
        if vid is None:
            vid = self._new_id(v)
            self.var_ids[v] = vid
        return vid

    def _row_of_linear(self, term: LinTerm) -> Dict[int, Fraction]:
        """Express a linear part over the current nonbasic variables."""
        row: Dict[int, Fraction] = {}

        def put(vid, c):
            if vid in self.rows:  # basic: expand its row
                for j, a in self.rows[vid].items():
                    row[j] = row.get(j, Fraction(0)) + c * a
                    if row[j] == 0:
                        del row[j]
            else:
                row[vid] = row.get(vid, Fraction(0)) + c
                if row[vid] == 0:
                    del row[vid]

        for v, c in term.coeffs:
            put(self.var_id(v), c)
        return row

    def _slack_for(self, linear: LinTerm) -> Tuple[int, Fraction]:
        """Slack variable for linear (normalized by |lead|); returns (id, |lead|)."""
        lead = abs(linear.coeffs[0][1])
        norm = linear.scale(Fraction(1) / lead)
        key = norm.key()
        sid = self.slack_by_key.get(key)
        if sid is None:
            row = self._row_of_linear(norm)
            sid = self._new_id(None)
            self.slack_by_key[key] = sid
            self.slack_def[sid] = norm
            self.rows[sid] = row
            for j in row:
                self.cols[j].add(sid)
            val = DR_ZERO
            for j, a in row.items():
                val = dr_add(val, dr_scale(self.values[j], a))
            self.values[sid] = val
        return sid, lead

    # -- asserting ---------------------------------------------------------

    def add_constraint(self, term: LinTerm, op: str, source) -> Optional[list]:
        """Assert term op 0.  Returns a conflict (list of cert rows) or None."""
        cid = len(self.constraints)
        self.constraints.append(_Constraint(cid, term, op, source))
        linear = term.sub(LinTerm.of_const(term.const))
        if linear.is_const():
            ok = (
                term.const < 0
                if op == LT
                else (term.const <= 0 if op == LE else term.const == 0)
            )
            return None if ok else [(cid, Fraction(1), False)]
        if len(linear.coeffs) == 1:
            v, c = linear.coeffs[0]
            vid = self.var_id(v)
            scale = abs(c)
            bound = dr(-term.const / c, 0)
            if op == LT:
                bound = dr(-term.const / c, Fraction(-1, 1) if c > 0 else Fraction(1, 1))
            if op == EQ:
                conflict = self._assert(vid, "hi", dr(-term.const / c), cid, scale, c < 0)
                if conflict:
                    return conflict
                return self._assert(vid, "lo", dr(-term.const / c), cid, scale, c > 0)
            kind = "hi" if c > 0 else "lo"
            return self._assert(vid, kind, bound, cid, scale, False)
        sid, lead = self._slack_for(linear)
        # term = lead * slack + const  (slack's definition has lead +-1 sign folded in)
        bound_q = -term.const / lead
        if op == EQ:
            conflict = self._assert(sid, "hi", dr(bound_q), cid, lead, False)
            if conflict:
                return conflict
            return self._assert(sid, "lo", dr(bound_q), cid, lead, True)
        bound = dr(bound_q, -1 if op == LT else 0)
        return self._assert(sid, "hi", bound, cid, lead, False)

    def _assert(self, vid, kind, val, cid, scale, negated) -> Optional[list]:
        inv = Fraction(1) / scale
        if kind == "hi":
            cur = self.hi.get(vid)
            if cur is not None and cur.val <= val:
                return None
            other = self.lo.get(vid)
            if other is not None and val < other.val:
                return [(cid, inv, negated), (other.cid, other.inv_scale, other.negated)]
            self.hi[vid] = _Bound(val, cid, inv, negated)
            if vid not in self.rows and self.values[vid] > val:
                self._update(vid, val)
        else:
            cur = self.lo.get(vid)
            if cur is not None and cur.val >= val:
                return None
            other = self.hi.get(vid)
            if other is not None and val > other.val:
                return [(cid, inv, negated), (other.cid, other.inv_scale, other.negated)]
            self.lo[vid] = _Bound(val, cid, inv, negated)
            if vid not in self.rows and self.values[vid] < val:
                self._update(vid, val)
        return None

    def snapshot(self):
        return (dict(self.lo), dict(self.hi), dict(self.values), len(self.constraints))

    def restore(self, snap):
        lo, hi, values, ncons = snap
        self.lo = dict(lo)
        self.hi = dict(hi)
        self.values = dict(values)
        del self.constraints[ncons:]
        # values may miss slacks created after the snapshot; none are
        # created during branch and bound, which only adds var bounds.
        for vid in range(len(self.id_vars)):
            if vid not in self.values:
                self.values[vid] = DR_ZERO

    # -- pivoting ----------------------------------------------------------

    def _update(self, vid, val):
        delta = dr_sub(val, self.values[vid])
        self.values[vid] = val
        for bid in self.cols.get(vid, ()):
            a = self.rows[bid].get(vid)
            if a:
                self.values[bid] = dr_add(self.values[bid], dr_scale(delta, a))

    def _pivot(self, bid, nid):
        row = self.rows.pop(bid)
        a = row.pop(nid)
        for j in row:
            self.cols[j].discard(bid)
        self.cols[nid].discard(bid)
        # nid = (bid - sum_j row[j] * j) / a
        new_row = {bid: Fraction(1) / a}
        for j, c in row.items():
            new_row[j] = -c / a
        self.rows[nid] = new_row
        self.cols.setdefault(bid, set()).add(nid)
        for j in row:
            self.cols[j].add(nid)
        # substitute nid away in every other row
        for other in list(self.cols[nid]):
            if other == nid:
                continue
            orow = self.rows[other]
            c = orow.pop(nid, None)
            if c is None:
                continue
            self.cols[nid].discard(other)
            for j, cc in new_row.items():
                nv = orow.get(j, Fraction(0)) + c * cc
                if nv == 0:
                    if j in orow:
                        del orow[j]
                        self.cols[j].discard(other)
                else:
                    if j not in orow:
                        self.cols[j].add(other)
                    orow[j] = nv

    def _pivot_and_update(self, bid, nid, val):
        a = self.rows[bid][nid]
        theta = dr_scale(dr_sub(val, self.values[bid]), Fraction(1) / a)
        self.values[bid] = val
        self.values[nid] = dr_add(self.values[nid], theta)
        for other in self.cols.get(nid, ()):
            if other != bid:
                c = self.rows[other].get(nid)
                if c:
                    self.values[other] = dr_add(self.values[other], dr_scale(theta, c))
        self._pivot(bid, nid)

    def check(self) -> Optional[list]:
        """Returns None when feasible, otherwise a conflict certificate
        as a list of (constraint id, multiplier, negated) rows."""
        while True:
            broken = None
            for vid in sorted(self.rows):  # Bland: smallest id first
                lo, hi = self.lo.get(vid), self.hi.get(vid)
                if lo is not None and self.values[vid] < lo.val:
                    broken = (vid, "lo")
                    break
                if hi is not None and self.values[vid] > hi.val:
                    broken = (vid, "hi")
                    break
            if broken is None:
                return None
            vid, kind = broken
            row = self.rows[vid]
            if kind == "lo":
                target = self.lo[vid].val
                pivot = None
                for j in sorted(row):
                    a = row[j]
                    if a > 0:
                        h = self.hi.get(j)
                        if h is None or self.values[j] < h.val:
                            pivot = j
                            break
                    else:
                        l = self.lo.get(j)
                        if l is None or self.values[j] > l.val:
                            pivot = j
                            break
                if pivot is None:
                    return self._conflict(vid, "lo")
                self._pivot_and_update(vid, pivot, target)
            else:
                target = self.hi[vid].val
                pivot = None
                for j in sorted(row):
                    a = row[j]
                    if a < 0:
                        h = self.hi.get(j)
                        if h is None or self.values[j] < h.val:
                            pivot = j
                            break
                    else:
                        l = self.lo.get(j)
                        if l is None or self.values[j] > l.val:
                            pivot = j
                            break
                if pivot is None:
                    return self._conflict(vid, "hi")
                self._pivot_and_update(vid, pivot, target)

    def _conflict(self, vid, kind) -> list:
        row = self.rows[vid]
        if kind == "lo":
            b = self.lo[vid]
            cert = [(b.cid, b.inv_scale, b.negated)]
            for j, a in row.items():
                if a > 0:
                    h = self.hi[j]
                    cert.append((h.cid, a * h.inv_scale, h.negated))
                else:
                    l = self.lo[j]
                    cert.append((l.cid, -a * l.inv_scale, l.negated))
        else:
            b = self.hi[vid]
            cert = [(b.cid, b.inv_scale, b.negated)]
            for j, a in row.items():
                if a > 0:
                    l = self.lo[j]
                    cert.append((l.cid, a * l.inv_scale, l.negated))
                else:
                    h = self.hi[j]
                    cert.append((h.cid, -a * h.inv_scale, h.negated))
        return cert

    # -- models ------------------------------------------------------------

    def concrete_values(self) -> Dict[Var, Fraction]:
        """Pick a concrete positive value for delta and read off values."""
        delta = Fraction(1)
        for vid, val in self.values.items():
            for bound, sense in ((self.lo.get(vid), 1), (self.hi.get(vid), -1)):
                if bound is None:
                    continue
                # need sense * (val - bound.val) >= 0 concretely
                dq = sense * (val[0] - bound.val[0])
                dd = sense * (val[1] - bound.val[1])
                if dd < 0 and dq > 0:
                    delta = min(delta, Fraction(dq, -dd) / 2)
        out = {}
        for v, vid in self.var_ids.items():
            q, d = self.values[vid]
            out[v] = q + d * delta
        return out


# --------------------------------------------------------------------------
# Theory checks for conjunctions of literals.
# --------------------------------------------------------------------------


def _div_aux(lit: DivLit, idx: int) -> Tuple[Var, Var]:
    k = Var(f"div#{idx}k", Sort.INT, Role.AUX)
    r = Var(f"div#{idx}r", Sort.INT, Role.AUX)
    return k, r


class _TheoryCheck:
    """One conjunction of valued literals, checked over LRA or LIA."""

    def __init__(self, mode: Sort, config: SolverConfig):
        self.mode = mode
        self.config = config
        self.simplex = Simplex()
        self.int_strict_shift = mode is Sort.INT
        self.conflict = None
        self.n_div = 0

    def _add(self, term: LinTerm, op: str, source) -> bool:
        if self.int_strict_shift and op == LT:
            # t < 0 over the integers is t <= -1
            term = term.add(LinTerm.of_const(1))
            op = LE
        conflict = self.simplex.add_constraint(term, op, source)
        if conflict is not None:
            self.conflict = conflict
            return False
        return True

    def assert_literal(self, lit: Literal, value: bool) -> bool:
        if isinstance(lit, Cmp):
            if not value:
                # comparison atoms only occur positively in NNF; a false
                # assignment carries no obligation (see check_sat)
                return True
            return self._add(lit.term, lit.op, ("lit", lit, True))
        if isinstance(lit, DivLit):
            if self.mode is not Sort.INT:
                raise WrongMode("divisibility literal outside integer mode")
            holds = lit.positive == value
            src = ("lit", lit, value)
            k, r = _div_aux(lit, self.n_div)
            self.n_div += 1
            kterm = LinTerm.of_var(k)
            if holds:
                # t = d*k
                t = lit.term.sub(kterm.scale(lit.divisor))
                return self._add(t, EQ, src)
            # t = d*k + r, 1 <= r <= d - 1
            rterm = LinTerm.of_var(r)
            t = lit.term.sub(kterm.scale(lit.divisor)).sub(rterm)
            return (
                self._add(t, EQ, src)
                and self._add(LinTerm.of_const(1).sub(rterm), LE, src)
                and self._add(rterm.sub(LinTerm.of_const(lit.divisor - 1)), LE, src)
            )
        raise TypeError(f"not a theory literal: {lit!r}")

    # -- results -----------------------------------------------------------

    def _cert_from(self, rows) -> object:
        by_lit = {}
        pure = True
        for cid, mu, negated in rows:
            c = self.simplex.constraints[cid]
            if c.source[0] != "lit" or isinstance(c.source[1], DivLit):
                pure = False
            by_lit.setdefault((id(c.source), cid), (c, mu, negated))
        if pure:
            entries = []
            for c, mu, negated in by_lit.values():
                entries.append((c.source[1], mu, negated))
            cert = FarkasCert(tuple(entries))
            if cert.replay():
                return cert
        lits = []
        seen = set()
        for cid, _, _ in rows:
            c = self.simplex.constraints[cid]
            if c.source[0] == "lit":
                key = (c.source[1], c.source[2])
                if key not in seen:
                    seen.add(key)
                    lits.append(key)
        return ClausalCore(tuple(lits))

    def _all_literal_core(self, asserted) -> ClausalCore:
        return ClausalCore(tuple(asserted))

    def solve(self, asserted) -> Tuple[str, object]:
        """Returns ("sat", values) or ("unsat", cert) or ("unknown", reason)."""
        if self.conflict is not None:
            return "unsat", self._cert_from(self.conflict)
        conflict = self.simplex.check()
        if conflict is not None:
            return "unsat", self._cert_from(conflict)
        if self.mode is not Sort.INT:
            return "sat", self.simplex.concrete_values()
        return self._solve_int(asserted)

    def _solve_int(self, asserted):
        budget = [self.config.bb_node_budget]
        status, payload = self._branch_and_bound(budget)
        if status == "unsat" and isinstance(payload, ClausalCore):
            payload = self._minimize_core(payload)
        if status != "budget":
            return status, payload
        return self._cooper_fallback(asserted)

    def _int_vars(self):
        return [
            (v, vid)
            for v, vid in self.simplex.var_ids.items()
            if v.sort is Sort.INT
        ]

    def _branch_and_bound(self, budget):
        if budget[0] <= 0:
            return "budget", None
        budget[0] -= 1
        conflict = self.simplex.check()
        if conflict is not None:
            return "unsat", self._cert_from(conflict)
        vals = self.simplex.concrete_values()
        frac = None
        for v, vid in sorted(self._int_vars(), key=lambda it: it[1]):
            if vals[v].denominator != 1:
                frac = (v, vals[v])
                break
        if frac is None:
            return "sat", vals
        v, val = frac
        floor = val.numerator // val.denominator
        vterm = LinTerm.of_var(v)
        certs = []
        for hi_side in (True, False):
            snap = self.simplex.snapshot()
            if hi_side:
                t = vterm.sub(LinTerm.of_const(floor))  # v <= floor
            else:
                t = LinTerm.of_const(floor + 1).sub(vterm)  # v >= floor + 1
            conflict = self.simplex.add_constraint(t, LE, ("branch",))
            if conflict is None:
                status, payload = self._branch_and_bound(budget)
                if status in ("sat", "budget"):
                    if status == "sat":
                        return status, payload
                    self.simplex.restore(snap)
                    return "budget", None
                certs.append(payload)
            else:
                certs.append(self._cert_from(conflict))
            self.simplex.restore(snap)
        # both branches refuted: merge input-literal parts
        lits = []
        seen = set()
        for cert in certs:
            pairs = (
                cert.literals
                if isinstance(cert, ClausalCore)
                else tuple((l, True) for l, _, _ in cert.entries)
            )
            for key in pairs:
                if key not in seen:
                    seen.add(key)
                    lits.append(key)
        return "unsat", ClausalCore(tuple(lits))

    def _cooper_fallback(self, asserted):
        lits = _valued_to_literals(asserted)
        try:
            model = int_conjunction_sat(lits, self.config.cooper_node_budget)
        except _CooperBudget:
            return "unknown", "integer decision budget exhausted"
        if model is not None:
            return "sat", model
        return "unsat", self._minimize_core(self._all_literal_core(asserted))

    def _minimize_core(self, core: "ClausalCore") -> "ClausalCore":
        """Deletion-based shrinking; each trial is one Cooper decision."""
        pairs = list(core.literals)
        if len(pairs) <= 2:
            return core
        budget = self.config.cooper_node_budget
        i = 0
        while i < len(pairs):
            trial = pairs[:i] + pairs[i + 1 :]
            try:
                model = int_conjunction_sat(_valued_to_literals(trial), budget)
            except _CooperBudget:
                model = object()  # treat as satisfiable: keep the literal
            if model is None:
                pairs = trial
            else:
                i += 1
        return ClausalCore(tuple(pairs))


# --------------------------------------------------------------------------
# Complete integer decision for conjunctions of literals.
#
# Depth-first Cooper: substituting a test term into a conjunction gives
# another conjunction, so elimination never materializes the full
# disjunction; branches that fold to false are pruned before recursing
# and a satisfying branch returns immediately with a witness.
# --------------------------------------------------------------------------


class _CooperBudget(Exception):
    pass


def _valued_to_literals(pairs):
    out = []
    for lit, val in pairs:
        if isinstance(lit, DivLit):
            out.append(lit if val else DivLit(lit.divisor, lit.term, not lit.positive))
        else:
            assert val and isinstance(lit, Cmp), "unexpected valued literal"
            out.append(lit)
    return out


def _conj_literals(f: Formula):
    if isinstance(f, And):
        return [a.lit for a in f.args]
    if isinstance(f, Lit):
        return [f.lit]
    return []


def _pick_int_var(lits):
    eq_best = None
    counts = {}
    for lit in lits:
        if isinstance(lit, BoolLit):
            continue
        for v, c in lit.term.coeffs:
            counts[v] = counts.get(v, 0) + 1
            if isinstance(lit, Cmp) and lit.op == EQ:
                cand = (abs(c), v.key(), v)
                if eq_best is None or cand < eq_best:
                    eq_best = cand
    if eq_best is not None:
        return eq_best[2]
    return min(counts, key=lambda v: (counts[v], v.key()))


def _icsat(f: Formula, counter) -> Optional[dict]:
    if isinstance(f, Bottom):
        return None
    if isinstance(f, Top):
        return {}
    if counter[0] <= 0:
        raise _CooperBudget()
    counter[0] -= 1
    lits = _conj_literals(f)
    x = _pick_int_var(lits)
    g, mult, y = lia_normalize(x, f)
    if isinstance(g, Bottom):
        return None
    eqs, lows, highs, divisors = {}, {}, [], []
    for lit in _conj_literals(g):
        tag = normalize_for(y, lit, Sort.INT)
        if tag[0] == "eq":
            eqs.setdefault(tag[1].key(), tag[1])
        elif tag[0] == "lo":
            lows.setdefault(tag[1].key(), tag[1])
        elif tag[0] == "hi":
            highs.append(tag[1])
        elif tag[0] == "div":
            divisors.append(tag[1])
    period = lcm(*divisors) if divisors else 1

    def found(model, yval):
        assert yval.denominator == 1 and yval % mult == 0
        model = dict(model)
        model[x] = yval / mult
        return model

    def val(term, model):
        total = term.const
        for v, c in term.coeffs:
            total += c * model.get(v, Fraction(0))
        return total

    for key in sorted(eqs):
        e = eqs[key]
        m = _icsat(subst_arith(g, {y: e}), counter)
        if m is not None:
            return found(m, val(e, m))
    if eqs or lows:
        for key in sorted(lows):
            low = lows[key]
            for i in range(period):
                t = low.add(LinTerm.of_const(1 + i))
                m = _icsat(subst_arith(g, {y: t}), counter)
                if m is not None:
                    return found(m, val(t, m))
        return None
    # below every bound: upper bounds vanish, divisibility keeps residue i
    for i in range(period):
        parts = []
        for lit in _conj_literals(g):
            tag = normalize_for(y, lit, Sort.INT)
            if tag[0] == "free":
                parts.append(mk_lit(lit))
            elif tag[0] == "div":
                _, d, w, pos = tag
                parts.append(mk_lit(DivLit(d, w.add(LinTerm.of_const(i)), pos)))
            else:
                assert tag[0] == "hi"
        m = _icsat(f_and(parts), counter)
        if m is not None:
            ubs = [val(u, m) for u in highs]
            yval = Fraction(i)
            if ubs:
                ub = min(ubs)
                if yval >= ub:
                    yval -= period * ceil((yval - ub + 1) / period)
            return found(m, yval)
    return None


def int_conjunction_sat(lits, node_budget: int) -> Optional[dict]:
    """Witness for a conjunction of integer literals, or None.

    Complete (Cooper's method underneath); raises _CooperBudget past the
    node budget.
    """
    f = f_and([mk_lit(l) for l in lits])
    model = _icsat(f, [node_budget])
    if model is None:
        return None
    out = {}
    for lit in lits:
        for v in (lit.term.vars if not isinstance(lit, BoolLit) else ()):
            out[v] = model.get(v, Fraction(0))
    assert all(eval_formula(mk_lit(l), out) for l in lits)
    return out


# --------------------------------------------------------------------------
# Boolean skeleton: atoms, clauses, DPLL.
# --------------------------------------------------------------------------


def _atom_of(lit: Literal) -> Tuple[Literal, bool]:
    if isinstance(lit, BoolLit):
        return BoolLit(lit.var, True), lit.positive
    if isinstance(lit, DivLit):
        return DivLit(lit.divisor, lit.term, True), lit.positive
    return lit, True


class _Skeleton:
    def __init__(self):
        self.atom_ids: Dict[Literal, int] = {}
        self.atoms: List[Literal] = []
        self.clauses: List[List[int]] = []
        self.n_aux = 0

    def atom(self, lit: Literal) -> int:
        aid = self.atom_ids.get(lit)
        if aid is None:
            aid = len(self.atoms)
            self.atom_ids[lit] = aid
            self.atoms.append(lit)
        return aid

    def build(self, f: Formula) -> None:
        """Clausify an NNF formula (Plaisted-Greenbaum, positive side)."""
        nvars = [0]

        def count_obligations(g):
            if isinstance(g, (And, Or)):
                for a in g.args:
                    count_obligations(a)

        def lit_of(g) -> int:
            if isinstance(g, Lit):
                atom, sign = _atom_of(g.lit)
                aid = self.atom(atom)
                return aid + 1 if sign else -(aid + 1)
            if isinstance(g, And):
                aux = self._aux()
                for a in g.args:
                    self.clauses.append([-aux, lit_of(a)])
                return aux
            if isinstance(g, Or):
                aux = self._aux()
                clause = [-aux]
                for a in g.args:
                    clause.append(lit_of(a))
                self.clauses.append(clause)
                return aux
            raise TypeError(f"unexpected node in NNF formula: {g!r}")

        root = lit_of(f)
        self.clauses.append([root])

    def _aux(self) -> int:
        # aux variables live above the atom range; ids fixed after build
        self.n_aux += 1
        return 10_000_000 + self.n_aux

    def finalize(self):
        """Renumber aux vars to follow atoms; return total var count."""
        n_atoms = len(self.atoms)
        mapping = {}
        for clause in self.clauses:
            for i, lit in enumerate(clause):
                v = abs(lit)
                if v > 10_000_000:
                    if v not in mapping:
                        mapping[v] = n_atoms + len(mapping) + 1
                    clause[i] = mapping[v] if lit > 0 else -mapping[v]
        return n_atoms + len(mapping)


class _CDCL:
    """Conflict-driven clause learning over the skeleton.

    Two watched literals per clause, first-UIP learning with
    non-chronological backjumping, deterministic decisions (smallest
    unassigned variable, false first).  Theory conflicts arrive as
    blocking clauses through the on_full callback and are treated like
    learned clauses.
    """

    def __init__(self, nvars: int, clauses: List[List[int]], config: SolverConfig):
        self.nvars = nvars
        self.config = config
        self.clauses: List[List[int]] = []
        self.watches: Dict[int, List[int]] = {}
        self.assign: Dict[int, bool] = {}
        self.level: Dict[int, int] = {}
        self.reason: Dict[int, Optional[int]] = {}
        self.trail: List[int] = []  # assigned literals in order
        self.trail_lim: List[int] = []
        self.qhead = 0
        self.decisions = 0
        self.ok = True
        for c in clauses:
            self._attach(list(dict.fromkeys(c)))

    # -- plumbing ------------------------------------------------------

    def _value(self, lit: int):
        v = self.assign.get(abs(lit))
        if v is None:
            return None
        return v == (lit > 0)

    def _assign(self, lit: int, reason: Optional[int]):
        var = abs(lit)
        self.assign[var] = lit > 0
        self.level[var] = len(self.trail_lim)
        self.reason[var] = reason
        self.trail.append(lit)

    def _attach(self, clause: List[int]) -> bool:
        """Add a clause; returns False if it makes the instance unsat."""
        if not clause:
            self.ok = False
            return False
        if len(clause) == 1:
            lit = clause[0]
            val = self._value(lit)
            if val is False and self.level[abs(lit)] == 0:
                self.ok = False
                return False
            # enqueue at level 0
            self._backjump(0)
            if self._value(lit) is None:
                self._assign(lit, None)
            elif self._value(lit) is False:
                self.ok = False
                return False
            return True
        ci = len(self.clauses)
        self.clauses.append(clause)
        self.watches.setdefault(clause[0], []).append(ci)
        self.watches.setdefault(clause[1], []).append(ci)
        return True

    def _backjump(self, target_level: int):
        if len(self.trail_lim) <= target_level:
            return
        cut = self.trail_lim[target_level]
        for lit in self.trail[cut:]:
            var = abs(lit)
            del self.assign[var]
            del self.level[var]
            del self.reason[var]
        del self.trail[cut:]
        del self.trail_lim[target_level:]
        self.qhead = min(self.qhead, len(self.trail))

    def _propagate(self) -> Optional[int]:
        while self.qhead < len(self.trail):
            lit = self.trail[self.qhead]
            self.qhead += 1
            neg = -lit
            ws = self.watches.get(neg, [])
            kept = []
            idx = 0
            while idx < len(ws):
                ci = ws[idx]
                idx += 1
                clause = self.clauses[ci]
                if clause[0] == neg:
                    clause[0], clause[1] = clause[1], clause[0]
                first = clause[0]
                if self._value(first) is True:
                    kept.append(ci)
                    continue
                moved = False
                for k in range(2, len(clause)):
                    if self._value(clause[k]) is not False:
                        clause[1], clause[k] = clause[k], clause[1]
                        self.watches.setdefault(clause[1], []).append(ci)
                        moved = True
                        break
                if moved:
                    continue
                kept.append(ci)
                if self._value(first) is False:
                    kept.extend(ws[idx:])
                    self.watches[neg] = kept
                    return ci
                self._assign(first, ci)
            self.watches[neg] = kept
        return None

    def _analyze(self, conflict: int):
        """First-UIP conflict analysis; returns (learned, backjump level)."""
        cur = len(self.trail_lim)
        seen = set()
        learned: List[int] = []
        counter = 0
        reason_lits = list(self.clauses[conflict])
        index = len(self.trail) - 1
        uip = None
        while True:
            for lit in reason_lits:
                var = abs(lit)
                if var in seen or self.level.get(var, 0) == 0:
                    continue
                seen.add(var)
                if self.level[var] == cur:
                    counter += 1
                else:
                    learned.append(lit)
            while abs(self.trail[index]) not in seen:
                index -= 1
            p = self.trail[index]
            var = abs(p)
            seen.discard(var)
            counter -= 1
            if counter == 0:
                uip = p
                break
            ante = self.reason[var]
            assert ante is not None, "non-decision expected on conflict side"
            reason_lits = [l for l in self.clauses[ante] if abs(l) != var]
            index -= 1
        learned = [-uip] + learned
        if len(learned) == 1:
            return learned, 0
        back = max(self.level[abs(l)] for l in learned[1:])
        # put a literal of the backjump level in the second watch slot
        for i, l in enumerate(learned[1:], start=1):
            if self.level[abs(l)] == back:
                learned[1], learned[i] = learned[i], learned[1]
                break
        return learned, back

    def _learn(self, learned: List[int], back: int) -> bool:
        self._backjump(back)
        if len(learned) == 1:
            return self._attach(learned)
        ci = len(self.clauses)
        self.clauses.append(learned)
        self.watches.setdefault(learned[0], []).append(ci)
        self.watches.setdefault(learned[1], []).append(ci)
        if self._value(learned[0]) is None:
            self._assign(learned[0], ci)
        return True

    def add_blocking(self, clause: List[int]):
        """Theory conflict clause: all literals are currently false.

        Returns False for the empty clause, an int clause index when the
        clause is still conflicting after the backjump (the two highest
        literals share a level), True otherwise.
        """
        clause = list(dict.fromkeys(clause))
        if not clause:
            return False
        if len(clause) == 1:
            return self._attach(clause)
        clause.sort(key=lambda l: -self.level.get(abs(l), 0))
        back = self.level.get(abs(clause[1]), 0)
        ci = len(self.clauses)
        self.clauses.append(clause)
        self.watches.setdefault(clause[0], []).append(ci)
        self.watches.setdefault(clause[1], []).append(ci)
        self._backjump(back)
        if self._value(clause[0]) is False:
            return ci  # conflicts at the backjump level; analyze there
        if self._value(clause[0]) is None and all(
            self._value(l) is False for l in clause[1:]
        ):
            self._assign(clause[0], ci)
        return True

    def search(self, on_full):
        """on_full(assignment) -> None to accept, "budget", or a clause."""
        if not self.ok:
            return "unsat", None
        while True:
            conflict = self._propagate()
            if conflict is not None:
                if not self.trail_lim:
                    return "unsat", None
                learned, back = self._analyze(conflict)
                if not self._learn(learned, back):
                    return "unsat", None
                continue
            var = None
            for v in range(1, self.nvars + 1):
                if v not in self.assign:
                    var = v
                    break
            if var is None:
                block = on_full(self.assign)
                if block is None:
                    return "sat", dict(self.assign)
                if block == "budget":
                    return "unknown", None
                added = self.add_blocking(block)
                if added is False or not self.ok:
                    return "unsat", None
                if added is not True:  # clause index: conflict to analyze
                    if not self.trail_lim:
                        return "unsat", None
                    learned, back = self._analyze(added)
                    if not self._learn(learned, back):
                        return "unsat", None
                continue
            self.decisions += 1
            if self.decisions > self.config.max_decisions:
                return "unknown", None
            self.trail_lim.append(len(self.trail))
            self._assign(-var, None)  # false first


# --------------------------------------------------------------------------
# Public entry points.
# --------------------------------------------------------------------------


def _check_mode(f: Formula, mode: Sort):
    assert not isinstance(f, Not), "input must be in NNF"


def check_sat(f: Formula, mode: Sort, config: SolverConfig = DEFAULT_CONFIG) -> SatResult:
    """Decide a call-free NNF formula; produce a model or certificates."""
    _check_mode(f, mode)
    if isinstance(f, Top):
        return SatResult("sat", Model({}))
    if isinstance(f, Bottom):
        return SatResult("unsat")

    skel = _Skeleton()
    skel.build(f)
    nvars = skel.finalize()
    certs: List[object] = []
    theory_checks = [0]

    def on_full(assign: Dict[int, bool]):
        theory_checks[0] += 1
        if theory_checks[0] > config.max_theory_checks:
            return "budget"
        check = _TheoryCheck(mode, config)
        asserted = []
        bool_vals = {}
        ok = True
        for aid, atom in enumerate(skel.atoms):
            val = assign[aid + 1]
            if isinstance(atom, BoolLit):
                bool_vals[atom.var] = val
                continue
            if isinstance(atom, Cmp) and not val:
                continue
            asserted.append((atom, val))
            if ok:
                ok = check.assert_literal(atom, val)
        if ok:
            status, payload = check.solve(asserted)
        else:
            status, payload = "unsat", check._cert_from(check.conflict)
        if status == "sat":
            on_full.result = (payload, bool_vals)
            return None
        if status == "unknown":
            on_full.unknown = payload
            return "budget"
        certs.append(payload)
        # blocking clause: negate the conjunction that was refuted
        if isinstance(payload, FarkasCert):
            refuted = [(lit, True) for lit, _, _ in payload.entries]
        else:
            refuted = list(payload.literals)
        clause = []
        for lit, val in refuted:
            aid = skel.atom_ids[lit] + 1
            clause.append(-aid if val else aid)
        return clause

    on_full.result = None
    on_full.unknown = None
    status, payload = _CDCL(nvars, skel.clauses, config).search(on_full)
    if status == "unsat":
        return SatResult("unsat", certs=tuple(certs))
    if status == "unknown":
        reason = on_full.unknown or "decision budget exhausted"
        return SatResult("unknown", certs=tuple(certs), reason=str(reason))
    arith_vals, bool_vals = on_full.result
    values: Dict[Var, object] = {}
    for v in free_vars(f):
        if v.sort is Sort.BOOL:
            values[v] = bool_vals.get(v, False)
        else:
            values[v] = arith_vals.get(v, Fraction(0))
            if mode is Sort.INT:
                assert values[v].denominator == 1
    model = Model(values)
    if VERIFY_MODELS:
        assert eval_formula(f, model), f"model check failed for {f!r} -> {model!r}"
    return SatResult("sat", model, certs=tuple(certs))


def refute_conjunction(
    literals: Sequence[Tuple[Literal, bool]], mode: Sort, config: SolverConfig = DEFAULT_CONFIG
):
    """Theory-check a conjunction of valued literals directly.

    Returns ("sat", values) | ("unsat", cert) | ("unknown", reason).
    Boolean literals participate only through complementary pairs.
    """
    seen_bool = {}
    check = _TheoryCheck(mode, config)
    asserted = []
    for lit, val in literals:
        if isinstance(lit, BoolLit):
            atom, sign = _atom_of(lit)
            eff = val == sign
            prev = seen_bool.get(atom.var)
            if prev is not None and prev != eff:
                return "unsat", ClausalCore(((BoolLit(atom.var, True), prev), (BoolLit(atom.var, True), eff)))
            seen_bool[atom.var] = eff
            continue
        atom, sign = _atom_of(lit)
        eff = val == sign
        if isinstance(atom, Cmp) and not eff:
            # negated comparisons should have been rewritten upstream
            raise AssertionError("negated comparison literal in conjunction")
        asserted.append((atom, eff))
        if not check.assert_literal(atom, eff):
            return "unsat", check._cert_from(check.conflict)
    status, payload = check.solve(asserted)
    if status == "sat":
        payload = dict(payload)
        payload.update(seen_bool)
    return status, payload


def entails(a: Formula, b: Formula, mode: Sort, config: SolverConfig = DEFAULT_CONFIG) -> bool:
    """Valid implication a => b, decided as unsatisfiability of a and not b."""
    res = check_sat(f_and([a, negate_nnf(b)]), mode, config)
    if res.is_unknown:
        raise ResourceLimit(res.reason)
    return res.is_unsat


def equivalent(a: Formula, b: Formula, mode: Sort, config: SolverConfig = DEFAULT_CONFIG) -> bool:
    return entails(a, b, mode, config) and entails(b, a, mode, config)


def enumerate_models(
    f: Formula,
    mode: Sort,
    blocking: Callable[[Model], Formula],
    limit: int = 1_000,
    config: SolverConfig = DEFAULT_CONFIG,
):
    """Yield models, blocking blocking(model) after each one."""
    cur = f
    for _ in range(limit):
        res = check_sat(cur, mode, config)
        if res.is_unsat:
            return
        if res.is_unknown:
            raise ResourceLimit(res.reason)
        yield res.model
        cur = f_and([cur, negate_nnf(blocking(res.model))])
