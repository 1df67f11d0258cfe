"""Reading and writing the s-expression program format.

    (program
      (mode bool|rat|int)
      (procedure NAME (in v ...) (out v ...) (local v ...) (body EXPR))
      ...
      (main NAME)
      (assert-safe EXPR))

Formula syntax: (< a b), (<= a b), (= a b), (divides d t) in integer
mode, (and ...), (or ...), (not ...), (call NAME v ...), true, false,
and bare variable names as boolean atoms.  Terms: (+ t ...), (- a b),
(- a), (* c t), (/ p q), numbers, variables.  (> a b) and (>= a b) are
accepted as sugar for the flipped forms.  Comments run from ';' to the
end of the line.

Bodies are normalized to NNF on load and expanded into paths; a call
under a negation or any scoping, arity, or sort violation is reported
as a ValidationError, syntax problems as RplSyntaxError with position.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .errors import PathExplosion, RplSyntaxError, ValidationError
from .formula import (
    EQ,
    FALSE,
    LE,
    LT,
    TRUE,
    And,
    BoolLit,
    Bottom,
    Call,
    Cmp,
    DivLit,
    Formula,
    LinTerm,
    Lit,
    Not,
    Or,
    Role,
    Sort,
    Top,
    Var,
    f_and,
    f_or,
    free_vars,
    mk_cmp,
    mk_lit,
    to_nnf,
)
from .program import Program, make_procedure


@dataclass
class SourceUnit:
    text: str
    program: Program
    mode: Sort
    phi_safe: Formula


# -- tokenizer ---------------------------------------------------------------


@dataclass(frozen=True)
class _Tok:
    text: str
    line: int
    col: int


def _tokenize(text: str) -> List[_Tok]:
    toks = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
        elif c in " \t\r":
            col += 1
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            toks.append(_Tok(c, line, col))
            col += 1
            i += 1
        else:
            j = i
            while j < n and text[j] not in " \t\r\n();":
                j += 1
            toks.append(_Tok(text[i:j], line, col))
            col += j - i
            i = j
    return toks


def _read_sexprs(toks: List[_Tok]):
    pos = 0

    def read():
        nonlocal pos
        if pos >= len(toks):
            last = toks[-1] if toks else _Tok("", 1, 1)
            raise RplSyntaxError(last.line, last.col, "unexpected end of input")
        tok = toks[pos]
        pos += 1
        if tok.text == "(":
            items = []
            while True:
                if pos >= len(toks):
                    raise RplSyntaxError(tok.line, tok.col, "unclosed '('")
                if toks[pos].text == ")":
                    pos += 1
                    return (tok, items)
                items.append(read())
        if tok.text == ")":
            raise RplSyntaxError(tok.line, tok.col, "unmatched ')'")
        return tok

    out = []
    while pos < len(toks):
        out.append(read())
    return out


def _is_list(node) -> bool:
    return isinstance(node, tuple)


def _head(node) -> str:
    if not _is_list(node) or not node[1] or not isinstance(node[1][0], _Tok):
        return ""
    return node[1][0].text


def _err(node, msg) -> RplSyntaxError:
    tok = node[0] if _is_list(node) else node
    return RplSyntaxError(tok.line, tok.col, msg)


# -- numbers and terms -------------------------------------------------------


def _parse_number(tok: _Tok) -> Optional[Fraction]:
    s = tok.text
    neg = s.startswith("-")
    body = s[1:] if neg else s
    if "/" in body:
        p, _, q = body.partition("/")
        if p.isdigit() and q.isdigit() and int(q) != 0:
            val = Fraction(int(p), int(q))
            return -val if neg else val
        return None
    if body.isdigit():
        return Fraction(-int(body) if neg else int(body))
    return None


class _Scope:
    def __init__(self, mode: Sort, vars_: Dict[str, Var]):
        self.mode = mode
        self.vars = vars_

    def lookup(self, tok: _Tok) -> Var:
        v = self.vars.get(tok.text)
        if v is None:
            raise RplSyntaxError(tok.line, tok.col, f"unknown variable '{tok.text}'")
        return v


def _parse_term(node, scope: _Scope) -> LinTerm:
    if isinstance(node, _Tok):
        num = _parse_number(node)
        if num is not None:
            if scope.mode is Sort.INT and num.denominator != 1:
                raise RplSyntaxError(node.line, node.col, "non-integer constant in integer mode")
            return LinTerm.of_const(num)
        v = scope.lookup(node)
        if v.sort is Sort.BOOL:
            raise RplSyntaxError(node.line, node.col, f"boolean variable '{node.text}' in a term")
        return LinTerm.of_var(v)
    head = _head(node)
    items = node[1]
    if head == "+":
        acc = LinTerm.of_const(0)
        for arg in items[1:]:
            acc = acc.add(_parse_term(arg, scope))
        return acc
    if head == "-":
        if len(items) == 2:
            return _parse_term(items[1], scope).scale(-1)
        if len(items) == 3:
            return _parse_term(items[1], scope).sub(_parse_term(items[2], scope))
        raise _err(node, "'-' takes one or two arguments")
    if head == "*":
        if len(items) != 3:
            raise _err(node, "'*' takes a constant and a term")
        c = _parse_number(items[1]) if isinstance(items[1], _Tok) else None
        if c is None and _is_list(items[1]) and _head(items[1]) == "/":
            c = _parse_const(items[1], scope)
        if c is None:
            raise _err(node, "first argument of '*' must be a constant")
        if scope.mode is Sort.INT and c.denominator != 1:
            raise _err(node, "non-integer coefficient in integer mode")
        return _parse_term(items[2], scope).scale(c)
    if head == "/":
        return LinTerm.of_const(_parse_const(node, scope))
    raise _err(node, f"unknown term operator '{head}'")


def _parse_const(node, scope) -> Fraction:
    items = node[1]
    if len(items) != 3:
        raise _err(node, "'/' takes two integers")
    p = _parse_number(items[1]) if isinstance(items[1], _Tok) else None
    q = _parse_number(items[2]) if isinstance(items[2], _Tok) else None
    if p is None or q is None or q == 0 or p.denominator != 1 or q.denominator != 1:
        raise _err(node, "'/' takes two integers")
    if scope.mode is Sort.INT:
        raise _err(node, "rational constant in integer mode")
    return p / q


# -- formulas ----------------------------------------------------------------

_CMP_OPS = {"<": LT, "<=": LE, "=": EQ, ">": LT, ">=": LE}


def _parse_expr(node, scope: _Scope, program_procs) -> Formula:
    if isinstance(node, _Tok):
        if node.text == "true":
            return TRUE
        if node.text == "false":
            return FALSE
        v = scope.lookup(node)
        if v.sort is not Sort.BOOL:
            raise RplSyntaxError(node.line, node.col, f"'{node.text}' is not boolean")
        return Lit(BoolLit(v))
    head = _head(node)
    items = node[1]
    if head in ("and", "or"):
        args = [_parse_expr(a, scope, program_procs) for a in items[1:]]
        return (And if head == "and" else Or)(tuple(args)) if args else (
            TRUE if head == "and" else FALSE
        )
    if head == "not":
        if len(items) != 2:
            raise _err(node, "'not' takes one argument")
        return Not(_parse_expr(items[1], scope, program_procs))
    if head in _CMP_OPS:
        if len(items) != 3:
            raise _err(node, f"'{head}' takes two arguments")
        if scope.mode is Sort.BOOL:
            raise _err(node, "comparison in a boolean program")
        lhs = _parse_term(items[1], scope)
        rhs = _parse_term(items[2], scope)
        if head in (">", ">="):
            lhs, rhs = rhs, lhs
        return mk_cmp(_CMP_OPS[head], lhs.sub(rhs))
    if head == "divides":
        if scope.mode is not Sort.INT:
            raise _err(node, "'divides' requires integer mode")
        if len(items) != 3 or not isinstance(items[1], _Tok):
            raise _err(node, "'divides' takes a positive integer and a term")
        d = _parse_number(items[1])
        if d is None or d.denominator != 1 or d <= 0:
            raise _err(node, "divisor must be a positive integer")
        return mk_lit(DivLit(int(d), _parse_term(items[2], scope)))
    if head == "call":
        if len(items) < 2 or not isinstance(items[1], _Tok):
            raise _err(node, "'call' takes a procedure name and variables")
        args = []
        for a in items[2:]:
            if not isinstance(a, _Tok):
                raise _err(node, "call arguments must be variables")
            args.append(scope.lookup(a))
        return Call(items[1].text, tuple(args))
    raise _err(node, f"unknown operator '{head}'")


# -- program -----------------------------------------------------------------

_MODES = {"bool": Sort.BOOL, "rat": Sort.RAT, "int": Sort.INT}


def parse(text: str, path_limit: int = 4096) -> SourceUnit:
    forms = _read_sexprs(_tokenize(text))
    if len(forms) != 1 or _head(forms[0]) != "program":
        tok = forms[0][0] if forms and _is_list(forms[0]) else _Tok("", 1, 1)
        raise RplSyntaxError(tok.line, tok.col, "expected a single (program ...) form")
    items = forms[0][1][1:]

    mode: Optional[Sort] = None
    proc_forms = []
    main_name: Optional[str] = None
    safe_form = None
    for item in items:
        head = _head(item)
        if head == "mode":
            if mode is not None:
                raise _err(item, "duplicate (mode ...)")
            if len(item[1]) != 2 or not isinstance(item[1][1], _Tok):
                raise _err(item, "(mode bool|rat|int)")
            m = _MODES.get(item[1][1].text)
            if m is None:
                raise _err(item, f"unknown mode '{item[1][1].text}'")
            mode = m
        elif head == "procedure":
            proc_forms.append(item)
        elif head == "main":
            if len(item[1]) != 2 or not isinstance(item[1][1], _Tok):
                raise _err(item, "(main NAME)")
            main_name = item[1][1].text
        elif head == "assert-safe":
            if len(item[1]) != 2:
                raise _err(item, "(assert-safe EXPR)")
            safe_form = item[1][1]
        else:
            raise _err(item, f"unexpected form '{head}'")
    if mode is None:
        raise RplSyntaxError(1, 1, "missing (mode ...)")
    if main_name is None:
        raise RplSyntaxError(1, 1, "missing (main ...)")
    if safe_form is None:
        raise RplSyntaxError(1, 1, "missing (assert-safe ...)")

    var_sort = Sort.BOOL if mode is Sort.BOOL else mode
    headers = {}
    for pf in proc_forms:
        name, sections = _proc_header(pf)
        if name in headers:
            raise _err(pf, f"duplicate procedure '{name}'")
        headers[name] = (pf, sections)

    procedures = {}
    for name, (pf, sections) in headers.items():
        declared = {}
        groups = {}
        for role_name, role in (("in", Role.IN), ("out", Role.OUT), ("local", Role.LOCAL)):
            vs = []
            for tok in sections.get(role_name, ()):
                if tok.text in declared:
                    raise RplSyntaxError(
                        tok.line, tok.col, f"duplicate variable '{tok.text}' in {name}"
                    )
                v = Var(tok.text, var_sort, role, name)
                declared[tok.text] = v
                vs.append(v)
            groups[role_name] = tuple(vs)
        scope = _Scope(mode, declared)
        body_raw = _parse_expr(sections["body"], scope, headers)
        try:
            body = to_nnf(body_raw)
        except Exception as exc:
            raise ValidationError(f"body of {name}: {exc}") from exc
        try:
            procedures[name] = make_procedure(
                name, groups["in"], groups["out"], groups["local"], body, path_limit
            )
        except PathExplosion as exc:
            raise ValidationError(f"body of {name}: {exc}") from exc

    program = Program(procedures, main_name, mode)
    program.validate()

    main = program.proc(main_name)
    main_scope = _Scope(mode, {v.name: v for v in main.formals})
    phi_raw = _parse_expr(safe_form, main_scope, headers)
    phi_safe = to_nnf(phi_raw)
    if not free_vars(phi_safe) <= set(main.formals):
        raise ValidationError("assert-safe mentions non-formal variables")
    return SourceUnit(text, program, mode, phi_safe)


def _proc_header(pf):
    items = pf[1]
    if len(items) < 3 or not isinstance(items[1], _Tok):
        raise _err(pf, "(procedure NAME sections...)")
    name = items[1].text
    sections = {}
    for sec in items[2:]:
        head = _head(sec)
        if head in ("in", "out", "local"):
            vs = []
            for tok in sec[1][1:]:
                if not isinstance(tok, _Tok):
                    raise _err(sec, "variable lists contain names only")
                vs.append(tok)
            sections[head] = vs
        elif head == "body":
            if len(sec[1]) != 2:
                raise _err(sec, "(body EXPR)")
            sections["body"] = sec[1][1]
        else:
            raise _err(sec, f"unknown procedure section '{head}'")
    if "body" not in sections:
        raise _err(pf, f"procedure {name} has no body")
    return name, sections


# -- printing ----------------------------------------------------------------


def _num_str(c: Fraction) -> str:
    if c.denominator == 1:
        return str(c.numerator)
    return f"{c.numerator}/{c.denominator}"


def _term_side(parts: List[str]) -> str:
    if not parts:
        return "0"
    if len(parts) == 1:
        return parts[0]
    return "(+ " + " ".join(parts) + ")"


def print_cmp(lit: Cmp) -> str:
    # term op 0, rendered with the negative part moved to the right
    pos, neg = [], []
    for v, c in lit.term.coeffs:
        side, mag = (pos, c) if c > 0 else (neg, -c)
        side.append(v.name if mag == 1 else f"(* {_num_str(mag)} {v.name})")
    c = lit.term.const
    if c > 0:
        pos.append(_num_str(c))
    elif c < 0:
        neg.append(_num_str(-c))
    return f"({lit.op} {_term_side(pos)} {_term_side(neg)})"


def print_formula(f: Formula) -> str:
    if isinstance(f, Top):
        return "true"
    if isinstance(f, Bottom):
        return "false"
    if isinstance(f, Lit):
        lit = f.lit
        if isinstance(lit, BoolLit):
            return lit.var.name if lit.positive else f"(not {lit.var.name})"
        if isinstance(lit, DivLit):
            pos, neg = [], []
            for v, c in lit.term.coeffs:
                (pos if c > 0 else neg).append(
                    v.name if abs(c) == 1 else f"(* {_num_str(abs(c))} {v.name})"
                )
            const = lit.term.const
            if const > 0:
                pos.append(_num_str(const))
            elif const < 0:
                neg.append(_num_str(-const))
            inner = _term_side(pos)
            if neg:
                inner = f"(- {inner} {_term_side(neg)})"
            s = f"(divides {lit.divisor} {inner})"
            return s if lit.positive else f"(not {s})"
        return print_cmp(lit)
    if isinstance(f, And):
        return "(and " + " ".join(print_formula(a) for a in f.args) + ")"
    if isinstance(f, Or):
        return "(or " + " ".join(print_formula(a) for a in f.args) + ")"
    if isinstance(f, Call):
        return "(call " + f.callee + "".join(" " + a.name for a in f.args) + ")"
    if isinstance(f, Not):
        return f"(not {print_formula(f.arg)})"
    raise TypeError(f"cannot print {f!r}")


def print_program(program: Program, phi_safe: Formula) -> str:
    lines = ["(program", f"  (mode {program.mode.value})"]
    for proc in program.procedures.values():
        lines.append(f"  (procedure {proc.name}")
        for label, vs in (("in", proc.inputs), ("out", proc.outputs), ("local", proc.locals_)):
            if vs:
                lines.append(f"    ({label} " + " ".join(v.name for v in vs) + ")")
        lines.append(f"    (body {print_formula(proc.body)}))")
    lines.append(f"  (main {program.main})")
    lines.append(f"  (assert-safe {print_formula(phi_safe)}))")
    return "\n".join(lines) + "\n"
