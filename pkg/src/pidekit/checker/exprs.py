"""Expressions of the notepad calculus.

Integer literals (arbitrary precision), identifiers, binary + and *,
fib(expr) and parentheses.  The lexer classifies every token with a
range so the checker can report semantic syntax highlighting; the AST
keeps ranges so warnings can point at the offending tokens.

fib is deliberately naive exponential recursion: the heavy workload for
parallelism and cancellation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

Range = Tuple[int, int]

KEYWORD = "keyword"
IDENT = "ident"
LITERAL = "literal"
OPERATOR = "operator"
DELIMITER = "delimiter"
STRING = "string"
BAD = "bad"

from ..document import KEYWORDS

_OPERATORS = "+*="
_DELIMITERS = "()"


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    start: int
    stop: int


def tokenize(source: str, base: int = 0) -> List[Token]:
    """Lex source into classified tokens with ranges (offset by `base`).

    Never fails: unknown characters become `bad` tokens; an unterminated
    string is a `bad` token to end of input.
    """
    tokens: List[Token] = []
    i = 0
    n = len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        start = i
        if c.isalpha() or c == "_":
            while i < n and (source[i].isalnum() or source[i] == "_"):
                i += 1
            word = source[start:i]
            kind = KEYWORD if word in KEYWORDS else IDENT
            tokens.append(Token(kind, word, base + start, base + i))
        elif c.isdigit():
            while i < n and source[i].isdigit():
                i += 1
            tokens.append(Token(LITERAL, source[start:i],
                                base + start, base + i))
        elif c in _OPERATORS:
            i += 1
            tokens.append(Token(OPERATOR, c, base + start, base + i))
        elif c in _DELIMITERS:
            i += 1
            tokens.append(Token(DELIMITER, c, base + start, base + i))
        elif c == '"':
            i += 1
            closed = False
            while i < n:
                if source[i] == "\\" and i + 1 < n:
                    i += 2
                elif source[i] == '"':
                    i += 1
                    closed = True
                    break
                else:
                    i += 1
            kind = STRING if closed else BAD
            tokens.append(Token(kind, source[start:i], base + start, base + i))
        else:
            i += 1
            tokens.append(Token(BAD, c, base + start, base + i))
    return tokens


# --- AST -----------------------------------------------------------------

@dataclass(frozen=True)
class Lit:
    value: int
    range: Range


@dataclass(frozen=True)
class Var:
    name: str
    range: Range


@dataclass(frozen=True)
class BinOp:
    op: str  # '+' or '*'
    left: "Expr"
    right: "Expr"
    range: Range


@dataclass(frozen=True)
class Call:
    fn: str  # only 'fib'
    arg: "Expr"
    range: Range


Expr = Union[Lit, Var, BinOp, Call]


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, range: Range):
        super().__init__(message)
        self.range = range


class _ExprParser:
    """Recursive descent: sum := product (+ product)*,
    product := primary (* primary)*."""

    def __init__(self, tokens: Sequence[Token], end: Range):
        self.tokens = [t for t in tokens if t.kind != BAD] or []
        self.bad = [t for t in tokens if t.kind == BAD]
        self.pos = 0
        self.end = end

    def error(self, message: str, rng: Optional[Range] = None):
        raise ExprSyntaxError(message, rng or self.here())

    def here(self) -> Range:
        if self.pos < len(self.tokens):
            t = self.tokens[self.pos]
            return (t.start, t.stop)
        return self.end

    def peek(self) -> Optional[Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> Token:
        t = self.peek()
        if t is None:
            self.error("unexpected end of expression")
        self.pos += 1
        return t

    def parse(self) -> Expr:
        if self.bad:
            t = self.bad[0]
            self.error("bad token %r" % t.text, (t.start, t.stop))
        expr = self.sum()
        if self.pos < len(self.tokens):
            t = self.tokens[self.pos]
            self.error("unexpected token %r" % t.text, (t.start, t.stop))
        return expr

    def sum(self) -> Expr:
        left = self.product()
        while (t := self.peek()) and t.kind == OPERATOR and t.text == "+":
            self.take()
            right = self.product()
            left = BinOp("+", left, right, (left.range[0], right.range[1]))
        return left

    def product(self) -> Expr:
        left = self.primary()
        while (t := self.peek()) and t.kind == OPERATOR and t.text == "*":
            self.take()
            right = self.primary()
            left = BinOp("*", left, right, (left.range[0], right.range[1]))
        return left

    def primary(self) -> Expr:
        t = self.take()
        if t.kind == LITERAL:
            return Lit(int(t.text), (t.start, t.stop))
        if t.kind == IDENT:
            if t.text == "fib":
                opening = self.peek()
                if opening is None or opening.text != "(":
                    self.error("fib requires parentheses", (t.start, t.stop))
                self.take()
                arg = self.sum()
                closing = self.peek()
                if closing is None or closing.text != ")":
                    self.error("missing ')'", (t.start, t.stop))
                self.take()
                return Call("fib", arg, (t.start, closing.stop))
            return Var(t.text, (t.start, t.stop))
        if t.kind == DELIMITER and t.text == "(":
            expr = self.sum()
            closing = self.peek()
            if closing is None or closing.text != ")":
                self.error("missing ')'", (t.start, t.stop))
            self.take()
            return expr
        self.error("unexpected token %r" % t.text, (t.start, t.stop))
        raise AssertionError  # unreachable


def parse_expr(tokens: Sequence[Token], end: Range) -> Expr:
    if not tokens:
        raise ExprSyntaxError("empty expression", end)
    return _ExprParser(tokens, end).parse()


def parse_expr_text(text: str, base: int = 0) -> Expr:
    tokens = tokenize(text, base)
    return parse_expr(tokens, (base + len(text), base + len(text)))


# --- analysis ------------------------------------------------------------

def expr_key(expr: Expr):
    """Structural identity of an expression, ignoring source ranges."""
    if isinstance(expr, Lit):
        return ("lit", expr.value)
    if isinstance(expr, Var):
        return ("var", expr.name)
    if isinstance(expr, BinOp):
        return ("op", expr.op, expr_key(expr.left), expr_key(expr.right))
    return ("call", expr.fn, expr_key(expr.arg))


def free_vars(expr: Expr, bound) -> List[Var]:
    """Occurrences of identifiers not bound in `bound`, in source order."""
    out: List[Var] = []

    def walk(e: Expr) -> None:
        if isinstance(e, Var):
            if e.name not in bound:
                out.append(e)
        elif isinstance(e, BinOp):
            walk(e.left)
            walk(e.right)
        elif isinstance(e, Call):
            walk(e.arg)

    walk(expr)
    return out


def fold(expr: Expr, bindings: Dict[str, Expr]) -> Expr:
    """Constant-fold + and * over literals and bound identifiers.

    fib applications stay symbolic (their arguments are folded); unbound
    identifiers stay as themselves.  Cheap by construction: no fib is
    ever evaluated here.
    """
    if isinstance(expr, Lit):
        return expr
    if isinstance(expr, Var):
        binding = bindings.get(expr.name)
        if binding is None:
            return expr
        return fold(binding, bindings)
    if isinstance(expr, BinOp):
        left = fold(expr.left, bindings)
        right = fold(expr.right, bindings)
        if isinstance(left, Lit) and isinstance(right, Lit):
            value = (left.value + right.value if expr.op == "+"
                     else left.value * right.value)
            return Lit(value, expr.range)
        return BinOp(expr.op, left, right, expr.range)
    return Call(expr.fn, fold(expr.arg, bindings), expr.range)


def contains_fib(expr: Expr, bindings: Dict[str, Expr]) -> bool:
    """True when evaluating `expr` may recurse into fib (a potentially
    heavy evaluation that is pushed to a worker subprocess)."""
    seen = set()

    def walk(e: Expr) -> bool:
        if isinstance(e, Call):
            return True
        if isinstance(e, BinOp):
            return walk(e.left) or walk(e.right)
        if isinstance(e, Var):
            if e.name in seen:
                return False
            seen.add(e.name)
            binding = bindings.get(e.name)
            return binding is not None and walk(binding)
        return False

    return walk(expr)


def unparse(expr: Expr) -> str:
    """Render an expression with minimal parentheses."""
    def prec(e: Expr) -> int:
        if isinstance(e, BinOp):
            return 1 if e.op == "+" else 2
        return 3

    def go(e: Expr) -> str:
        if isinstance(e, Lit):
            return str(e.value)
        if isinstance(e, Var):
            return e.name
        if isinstance(e, Call):
            return "fib(%s)" % go(e.arg)
        left = go(e.left)
        right = go(e.right)
        if prec(e.left) < prec(e):
            left = "(%s)" % left
        if prec(e.right) <= prec(e):
            right = "(%s)" % right
        return "%s %s %s" % (left, e.op, right)

    return go(expr)


# --- evaluation ----------------------------------------------------------

class UnboundIdentifier(Exception):
    def __init__(self, names: List[str]):
        super().__init__(", ".join(names))
        self.names = names


class EvalFailure(Exception):
    pass


class Cancelled(Exception):
    pass


_CHECK_EVERY = 16384


def naive_fib(n: int, check: Optional[Callable[[], bool]] = None) -> int:
    """Intentionally exponential; `check` is polled between evaluation
    steps and aborts with Cancelled when it returns True."""
    if n < 0:
        raise EvalFailure("fib of negative argument %d" % n)
    counter = [0]

    def go(k: int) -> int:
        counter[0] += 1
        if check is not None and counter[0] % _CHECK_EVERY == 0 and check():
            raise Cancelled()
        if k < 2:
            return k
        return go(k - 1) + go(k - 2)

    if n > 30000:
        # recursion depth guard; evaluating this naively would never
        # finish anyway
        raise EvalFailure("fib argument %d too large" % n)
    return go(n)


def evaluate(expr: Expr, bindings: Dict[str, Expr],
             check: Optional[Callable[[], bool]] = None) -> int:
    """Total evaluation given bindings for all identifiers.

    Raises UnboundIdentifier listing every unbound name, EvalFailure for
    fib of a negative argument, Cancelled when `check` fires.
    """
    unbound = sorted({v.name for v in free_vars_all(expr, bindings)})
    if unbound:
        raise UnboundIdentifier(unbound)
    memo: Dict[str, int] = {}

    def go(e: Expr) -> int:
        if check is not None and check():
            raise Cancelled()
        if isinstance(e, Lit):
            return e.value
        if isinstance(e, Var):
            if e.name not in memo:
                memo[e.name] = go(bindings[e.name])
            return memo[e.name]
        if isinstance(e, BinOp):
            left = go(e.left)
            right = go(e.right)
            return left + right if e.op == "+" else left * right
        return naive_fib(go(e.arg), check)

    return go(expr)


def free_vars_all(expr: Expr, bindings: Dict[str, Expr]) -> List[Var]:
    """Unbound identifier occurrences, following bindings transitively."""
    out: List[Var] = []
    visiting: set = set()

    def walk(e: Expr) -> None:
        if isinstance(e, Var):
            binding = bindings.get(e.name)
            if binding is None:
                out.append(e)
            elif e.name not in visiting:
                visiting.add(e.name)
                walk(binding)
                visiting.discard(e.name)
        elif isinstance(e, BinOp):
            walk(e.left)
            walk(e.right)
        elif isinstance(e, Call):
            walk(e.arg)

    walk(expr)
    return out
