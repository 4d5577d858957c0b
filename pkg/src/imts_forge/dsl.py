"""A small line-oriented language for parametrized first-order ODE systems.

Example::

    system lorenz
    channels 3
    constants sigma=10 rho=28 beta=8/3
    init 2 1 1
    duration_unit "dimensionless"
    d0 = sigma * (x1 - x0)
    d1 = x0 * (rho - x2) - x1
    d2 = x0 * x1 - beta * x2

Channel symbols are ``x0 .. x{C-1}``, ``t`` is time, and every other
identifier in a right-hand side must be a declared constant.  ``^`` is
exponentiation (right associative, binds tighter than unary minus).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence, Union

__all__ = [
    "Literal",
    "Var",
    "Unary",
    "Binary",
    "ExprNode",
    "SystemSpec",
    "DslError",
    "DslSyntaxError",
    "UnknownSymbolError",
    "ArityError",
    "DuplicateNameError",
    "RhsDomainError",
    "parse_system",
    "parse_expression",
    "render_system",
    "render_expr",
    "compile_rhs",
    "eval_rhs",
]

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "abs", "tanh")
KEYWORDS = ("system", "channels", "constants", "init", "duration_unit", "duration")
MAX_DEPTH = 200

_CHANNEL_RE = re.compile(r"x(0|[1-9][0-9]*)\Z")
_DERIV_RE = re.compile(r"d(0|[1-9][0-9]*)\Z")


# --------------------------------------------------------------------------
# expression trees


@dataclass(frozen=True)
class Literal:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or a name from FUNCTIONS
    arg: "ExprNode"


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * / ^
    left: "ExprNode"
    right: "ExprNode"


ExprNode = Union[Literal, Var, Unary, Binary]


@dataclass(frozen=True)
class SystemSpec:
    """A parsed, validated ODE system ``x' = f(t, x; a)``.

    Attributes:
        name: System identifier.
        channels: Number of state variables C.
        constants: ``(name, literature value)`` pairs in declaration order.
        initial_values: Literature initial state, length C.
        rhs: One expression per channel derivative.
        duration_unit: Informational unit label for durations.
        duration: Default duration, the unit the spread grid for durations
            is multiplied with.
    """

    name: str
    channels: int
    constants: tuple[tuple[str, float], ...]
    initial_values: tuple[float, ...]
    rhs: tuple[ExprNode, ...]
    duration_unit: str = ""
    duration: float = 1.0

    @property
    def constant_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.constants)

    @property
    def constant_values(self) -> tuple[float, ...]:
        return tuple(value for _, value in self.constants)

    def with_constants(self, name: str | None = None, **values: float) -> "SystemSpec":
        """Copy of this system with some literature constants replaced."""
        known = set(self.constant_names)
        unknown = sorted(set(values) - known)
        if unknown:
            raise KeyError(f"{self.name} has no constant(s) {', '.join(unknown)}")
        constants = tuple((k, float(values.get(k, v))) for k, v in self.constants)
        return SystemSpec(
            name=name or self.name,
            channels=self.channels,
            constants=constants,
            initial_values=self.initial_values,
            rhs=self.rhs,
            duration_unit=self.duration_unit,
            duration=self.duration,
        )


# --------------------------------------------------------------------------
# errors


class DslError(ValueError):
    """Parse failure with a 1-based source position."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.message = message
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)


class DslSyntaxError(DslError):
    pass


class UnknownSymbolError(DslError):
    def __init__(self, symbol: str, line: int, column: int):
        self.symbol = symbol
        super().__init__(f"unknown symbol {symbol!r}", line, column)


class ArityError(DslError):
    pass


class DuplicateNameError(DslError):
    pass


class RhsDomainError(ArithmeticError):
    """Evaluation of a right-hand side left the real domain.

    Raised for log/sqrt/pow outside their domain, division by zero,
    overflow, and non-finite inputs or outputs.
    """

    def __init__(self, channel: int, reason: str):
        self.channel = channel
        self.reason = reason
        super().__init__(f"channel {channel}: {reason}")


# --------------------------------------------------------------------------
# tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<comment>\#[^\n]*)
  | (?P<number>(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"[^"\n]*")
  | (?P<op>[-+*/^(),=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # number, ident, string, op, end
    text: str
    line: int
    column: int


def _tokenize_line(text: str, lineno: int) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise DslSyntaxError(f"unexpected character {text[pos]!r}", lineno, pos + 1)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            tokens.append(_Token(kind, m.group(), lineno, pos + 1))
        pos = m.end()
    tokens.append(_Token("end", "", lineno, len(text) + 1))
    return tokens


# --------------------------------------------------------------------------
# expression parser (precedence climbing)

_BINARY_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_UNARY_PREC = 3
_POW_PREC = 4


class _ExprParser:
    def __init__(self, tokens: list[_Token], pos: int = 0):
        self.tokens = tokens
        self.pos = pos
        # (name, line, column) of every identifier used as a variable
        self.references: list[tuple[str, int, int]] = []

    @property
    def tok(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "end":
            self.pos += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.tok
        if tok.text != text or tok.kind not in ("op", "ident"):
            found = tok.text or "end of line"
            raise DslSyntaxError(f"expected {text!r}, found {found!r}", tok.line, tok.column)
        return self.advance()

    def parse(self, min_prec: int = 1, depth: int = 0) -> ExprNode:
        if depth > MAX_DEPTH:
            raise DslSyntaxError("expression nested too deeply", self.tok.line, self.tok.column)
        left = self.parse_unary(depth + 1)
        while True:
            tok = self.tok
            prec = _BINARY_PREC.get(tok.text) if tok.kind == "op" else None
            if prec is None or prec < min_prec:
                return left
            self.advance()
            right = self.parse(prec + 1, depth + 1)
            left = Binary(tok.text, left, right)

    def parse_unary(self, depth: int) -> ExprNode:
        if depth > MAX_DEPTH:
            raise DslSyntaxError("expression nested too deeply", self.tok.line, self.tok.column)
        tok = self.tok
        if tok.kind == "op" and tok.text in "+-":
            self.advance()
            arg = self.parse_unary(depth + 1)
            return Unary("neg", arg) if tok.text == "-" else arg
        return self.parse_power(depth + 1)

    def parse_power(self, depth: int) -> ExprNode:
        base = self.parse_primary(depth + 1)
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            exponent = self.parse_unary(depth + 1)
            return Binary("^", base, exponent)
        return base

    def parse_primary(self, depth: int) -> ExprNode:
        if depth > MAX_DEPTH:
            raise DslSyntaxError("expression nested too deeply", self.tok.line, self.tok.column)
        tok = self.advance()
        if tok.kind == "number":
            value = float(tok.text)
            if not math.isfinite(value):
                raise DslSyntaxError(f"number {tok.text!r} out of range", tok.line, tok.column)
            return Literal(value)
        if tok.kind == "ident":
            if self.tok.kind == "op" and self.tok.text == "(":
                return self.parse_call(tok, depth)
            self.references.append((tok.text, tok.line, tok.column))
            return Var(tok.text)
        if tok.kind == "op" and tok.text == "(":
            inner = self.parse(1, depth + 1)
            self.expect(")")
            return inner
        found = tok.text or "end of line"
        raise DslSyntaxError(f"unexpected {found!r} in expression", tok.line, tok.column)

    def parse_call(self, name: _Token, depth: int) -> ExprNode:
        self.expect("(")
        args = [self.parse(1, depth + 1)]
        while self.tok.kind == "op" and self.tok.text == ",":
            self.advance()
            args.append(self.parse(1, depth + 1))
        self.expect(")")
        if name.text in FUNCTIONS:
            if len(args) != 1:
                raise DslSyntaxError(
                    f"{name.text}() takes 1 argument, got {len(args)}", name.line, name.column
                )
            return Unary(name.text, args[0])
        if name.text == "pow":
            if len(args) != 2:
                raise DslSyntaxError(
                    f"pow() takes 2 arguments, got {len(args)}", name.line, name.column
                )
            return Binary("^", args[0], args[1])
        raise UnknownSymbolError(name.text, name.line, name.column)


def parse_expression(source: str) -> ExprNode:
    """Parse a single expression (no symbol checking)."""
    tokens = _tokenize_line(source, 1)
    parser = _ExprParser(tokens)
    node = parser.parse()
    if parser.tok.kind != "end":
        raise DslSyntaxError(f"unexpected {parser.tok.text!r}", 1, parser.tok.column)
    return node


def _fold_constant(node: ExprNode, tok: _Token) -> float:
    """Evaluate a variable-free expression, used for constant declarations."""
    fn = _compile_expr(node, {})
    try:
        value = fn()
    except KeyError as exc:
        raise DslSyntaxError(
            f"constant value may not reference {exc.args[0]!r}", tok.line, tok.column
        ) from None
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise DslSyntaxError(f"invalid constant value: {exc}", tok.line, tok.column) from None
    if not math.isfinite(value):
        raise DslSyntaxError("constant value is not finite", tok.line, tok.column)
    return value


# --------------------------------------------------------------------------
# system parser


def parse_system(source: str | bytes) -> SystemSpec:
    """Parse DSL text into a validated :class:`SystemSpec`.

    Every failure is raised as a :class:`DslError` subclass carrying the
    line and column of the offending token.
    """
    if isinstance(source, (bytes, bytearray)):
        try:
            source = bytes(source).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DslSyntaxError(f"source is not valid UTF-8 ({exc.reason})", 1, 1) from None

    name: str | None = None
    channels: int | None = None
    channels_tok: _Token | None = None
    constants: list[tuple[str, float]] = []
    constant_toks: dict[str, _Token] = {}
    init: list[float] = []
    init_tok: _Token | None = None
    duration_unit = ""
    duration = 1.0
    seen: dict[str, _Token] = {}
    derivs: dict[int, tuple[ExprNode, list[tuple[str, int, int]], _Token]] = {}

    for lineno, raw in enumerate(source.split("\n"), start=1):
        tokens = _tokenize_line(raw, lineno)
        head = tokens[0]
        if head.kind == "end":
            continue
        if head.kind != "ident":
            raise DslSyntaxError(f"unexpected {head.text!r} at start of line", lineno, head.column)

        m = _DERIV_RE.match(head.text)
        if m:
            idx = int(m.group(1))
            parser = _ExprParser(tokens, 1)
            parser.expect("=")
            expr = parser.parse()
            if parser.tok.kind != "end":
                raise DslSyntaxError(f"unexpected {parser.tok.text!r}", lineno, parser.tok.column)
            if idx in derivs:
                raise DuplicateNameError(f"derivative d{idx} defined twice", lineno, head.column)
            derivs[idx] = (expr, parser.references, head)
            continue

        keyword = head.text
        if keyword not in KEYWORDS:
            raise DslSyntaxError(f"unknown statement {keyword!r}", lineno, head.column)
        if keyword in seen and keyword not in ("constants", "init"):
            raise DuplicateNameError(f"{keyword!r} given twice", lineno, head.column)
        seen[keyword] = head
        rest = tokens[1:]

        if keyword == "system":
            if rest[0].kind != "ident" or rest[1].kind != "end":
                raise DslSyntaxError("expected: system <identifier>", lineno, rest[0].column)
            name = rest[0].text
        elif keyword == "channels":
            tok = rest[0]
            if tok.kind != "number" or not tok.text.isdigit() or rest[1].kind != "end":
                raise DslSyntaxError("expected: channels <positive integer>", lineno, tok.column)
            channels = int(tok.text)
            channels_tok = tok
            if channels < 1:
                raise DslSyntaxError("channel count must be positive", lineno, tok.column)
        elif keyword == "constants":
            parser = _ExprParser(tokens, 1)
            if parser.tok.kind == "end":
                raise DslSyntaxError("expected <name>=<value>", lineno, parser.tok.column)
            while parser.tok.kind != "end":
                ident = parser.advance()
                if ident.kind != "ident":
                    raise DslSyntaxError(
                        f"expected constant name, found {ident.text!r}", lineno, ident.column
                    )
                parser.expect("=")
                value_tok = parser.tok
                value = _fold_constant(parser.parse(), value_tok)
                if ident.text in constant_toks:
                    raise DuplicateNameError(
                        f"constant {ident.text!r} declared twice", lineno, ident.column
                    )
                if ident.text == "t" or ident.text in FUNCTIONS or ident.text in KEYWORDS \
                        or ident.text == "pow" or _CHANNEL_RE.match(ident.text) \
                        or _DERIV_RE.match(ident.text):
                    raise DuplicateNameError(
                        f"constant name {ident.text!r} collides with a reserved name",
                        lineno,
                        ident.column,
                    )
                constant_toks[ident.text] = ident
                constants.append((ident.text, value))
        elif keyword == "init":
            init_tok = init_tok or head
            i = 0
            if rest[0].kind == "end":
                raise DslSyntaxError("expected initial values", lineno, rest[0].column)
            while rest[i].kind != "end":
                sign = 1.0
                tok = rest[i]
                if tok.kind == "op" and tok.text in "+-":
                    sign = -1.0 if tok.text == "-" else 1.0
                    i += 1
                    tok = rest[i]
                if tok.kind != "number":
                    found = tok.text or "end of line"
                    raise DslSyntaxError(f"expected a number, found {found!r}", lineno, tok.column)
                value = float(tok.text)
                if not math.isfinite(value):
                    raise DslSyntaxError(f"number {tok.text!r} out of range", lineno, tok.column)
                init.append(sign * value)
                i += 1
        elif keyword == "duration_unit":
            tok = rest[0]
            if tok.kind != "string" or rest[1].kind != "end":
                raise DslSyntaxError('expected: duration_unit "<text>"', lineno, tok.column)
            duration_unit = tok.text[1:-1]
        elif keyword == "duration":
            tok = rest[0]
            if tok.kind != "number" or rest[1].kind != "end":
                raise DslSyntaxError("expected: duration <positive number>", lineno, tok.column)
            duration = float(tok.text)
            if not (math.isfinite(duration) and duration > 0):
                raise DslSyntaxError("duration must be positive and finite", lineno, tok.column)

    if name is None:
        raise DslSyntaxError("missing 'system <name>' statement", 1, 1)
    if channels is None or channels_tok is None:
        raise DslSyntaxError("missing 'channels <count>' statement", 1, 1)
    if len(init) != channels:
        where = init_tok or channels_tok
        raise ArityError(
            f"expected {channels} initial values, got {len(init)}", where.line, where.column
        )
    if len(derivs) != channels:
        raise ArityError(
            f"expected {channels} derivative lines, got {len(derivs)}",
            channels_tok.line,
            channels_tok.column,
        )
    for idx, (_, _, tok) in derivs.items():
        if idx >= channels:
            raise ArityError(
                f"derivative d{idx} out of range for {channels} channels", tok.line, tok.column
            )

    allowed = set(constant_toks) | {"t"}
    rhs = []
    for idx in range(channels):
        expr, refs, _ = derivs[idx]
        for ref, line, col in refs:
            m = _CHANNEL_RE.match(ref)
            if ref in allowed or (m and int(m.group(1)) < channels):
                continue
            raise UnknownSymbolError(ref, line, col)
        rhs.append(expr)

    return SystemSpec(
        name=name,
        channels=channels,
        constants=tuple(constants),
        initial_values=tuple(init),
        rhs=tuple(rhs),
        duration_unit=duration_unit,
        duration=duration,
    )


# --------------------------------------------------------------------------
# rendering


def _prec(node: ExprNode) -> int:
    if isinstance(node, Binary):
        return _POW_PREC if node.op == "^" else _BINARY_PREC[node.op]
    if isinstance(node, Unary) and node.op == "neg":
        return _UNARY_PREC
    return 5


def render_expr(node: ExprNode) -> str:
    """Render an expression with the minimal parentheses that reparse identically."""
    if isinstance(node, Literal):
        text = repr(float(node.value))
        return f"({text})" if node.value < 0 or text[0] == "-" else text
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        if node.op != "neg":
            return f"{node.op}({render_expr(node.arg)})"
        arg = render_expr(node.arg)
        if _prec(node.arg) <= _UNARY_PREC:
            arg = f"({arg})"
        return f"-{arg}"
    left, right = render_expr(node.left), render_expr(node.right)
    if node.op == "^":
        # base binds tighter than anything but atoms; exponent may be unary
        if _prec(node.left) <= _POW_PREC:
            left = f"({left})"
        if _prec(node.right) < _UNARY_PREC:
            right = f"({right})"
        return f"{left}^{right}"
    prec = _BINARY_PREC[node.op]
    if _prec(node.left) < prec:
        left = f"({left})"
    if _prec(node.right) <= prec:
        right = f"({right})"
    return f"{left} {node.op} {right}"


def render_system(spec: SystemSpec) -> str:
    """Render a system back to DSL source."""
    lines = [f"system {spec.name}", f"channels {spec.channels}"]
    if spec.constants:
        lines.append("constants " + " ".join(f"{k}={_render_number(v)}" for k, v in spec.constants))
    lines.append("init " + " ".join(_render_number(v) for v in spec.initial_values))
    if spec.duration_unit:
        lines.append(f'duration_unit "{spec.duration_unit}"')
    lines.append(f"duration {spec.duration!r}")
    for idx, expr in enumerate(spec.rhs):
        lines.append(f"d{idx} = {render_expr(expr)}")
    return "\n".join(lines) + "\n"


def _render_number(value: float) -> str:
    return repr(float(value))


# --------------------------------------------------------------------------
# evaluation

_PY_FUNCS = {
    "sin": "_m.sin",
    "cos": "_m.cos",
    "exp": "_m.exp",
    "log": "_log",
    "sqrt": "_m.sqrt",
    "abs": "abs",
    "tanh": "_m.tanh",
}


def _log(v: float) -> float:
    if v <= 0.0:
        raise ValueError("log of non-positive value")
    return math.log(v)


def _emit(node: ExprNode, names: dict[str, str], lines: list[str], counter: list[int]) -> str:
    """Append straight-line code for ``node``; return the name holding its value.

    Straight-line temporaries keep arbitrarily deep trees away from the
    Python compiler's nesting limits.
    """
    stack: list[tuple[ExprNode, bool]] = [(node, False)]
    results: dict[int, str] = {}
    while stack:
        cur, expanded = stack.pop()
        if isinstance(cur, Literal):
            results[id(cur)] = repr(float(cur.value))
            continue
        if isinstance(cur, Var):
            results[id(cur)] = names[cur.name]
            continue
        if not expanded:
            stack.append((cur, True))
            if isinstance(cur, Unary):
                stack.append((cur.arg, False))
            else:
                stack.append((cur.right, False))
                stack.append((cur.left, False))
            continue
        counter[0] += 1
        out = f"_v{counter[0]}"
        if isinstance(cur, Unary):
            arg = results[id(cur.arg)]
            if cur.op == "neg":
                lines.append(f"{out} = -{arg}")
            else:
                lines.append(f"{out} = {_PY_FUNCS[cur.op]}({arg})")
        else:
            a, b = results[id(cur.left)], results[id(cur.right)]
            if cur.op == "^":
                lines.append(f"{out} = _m.pow({a}, {b})")
            else:
                lines.append(f"{out} = {a} {cur.op} {b}")
        results[id(cur)] = out
    return results[id(node)]


class _Missing(dict):
    def __missing__(self, key):
        raise KeyError(key)


def _compile_expr(node: ExprNode, names: dict[str, str]) -> Callable[[], float]:
    lines: list[str] = []
    out = _emit(node, _Missing(names), lines, [0])
    body = "\n    ".join(lines + [f"return {out}"])
    namespace = {"_m": math, "_log": _log}
    exec(f"def _f():\n    {body}\n", namespace)
    return namespace["_f"]


@lru_cache(maxsize=128)
def compile_rhs(spec: SystemSpec) -> Callable[[float, Sequence[float], Sequence[float]], tuple]:
    """Compile the right-hand side into a fast Python callable ``f(t, x, a)``.

    ``x`` and ``a`` must be sequences of Python floats of length C and A.
    The callable returns a tuple of C floats or raises
    :class:`RhsDomainError` naming the failing channel.
    """
    C, A = spec.channels, len(spec.constants)
    names = {"t": "_t"}
    names.update({f"x{c}": f"_x{c}" for c in range(C)})
    names.update({name: f"_a{j}" for j, name in enumerate(spec.constant_names)})
    counter = [0]
    body: list[str] = []
    outs = []
    for c, expr in enumerate(spec.rhs):
        body.append(f"_ch = {c}")
        outs.append(_emit(expr, names, body, counter))

    xs = ", ".join(f"_x{c}" for c in range(C)) + ","
    src = ["def _rhs(_t, _x, _a):"]
    src.append(f"    {xs} = _x")
    if A:
        src.append("    " + ", ".join(f"_a{j}" for j in range(A)) + ", = _a")
    for c in range(C):
        src.append(f"    if not _fin(_x{c}):")
        src.append(f"        raise _Err({c}, 'non-finite state value')")
    src.append("    _ch = 0")
    src.append("    try:")
    src.extend(f"        {line}" for line in body)
    src.append("    except (ValueError, ZeroDivisionError, OverflowError) as _e:")
    src.append("        raise _Err(_ch, str(_e)) from None")
    for c, out in enumerate(outs):
        src.append(f"    if not _fin({out}):")
        src.append(f"        raise _Err({c}, 'non-finite derivative')")
    src.append(f"    return ({', '.join(outs)},)")

    namespace = {"_m": math, "_log": _log, "_fin": math.isfinite, "_Err": RhsDomainError}
    exec("\n".join(src) + "\n", namespace)
    return namespace["_rhs"]


def eval_rhs(spec: SystemSpec, t: float, x: Sequence[float], a: Sequence[float]) -> tuple:
    """Evaluate ``x'(t)`` for state ``x`` and constants ``a``."""
    if len(x) != spec.channels:
        raise ValueError(f"state has length {len(x)}, expected {spec.channels}")
    if len(a) != len(spec.constants):
        raise ValueError(f"got {len(a)} constants, expected {len(spec.constants)}")
    return compile_rhs(spec)(float(t), [float(v) for v in x], [float(v) for v in a])
