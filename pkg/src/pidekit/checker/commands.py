"""Notepad calculus: command grammar and the elaboration pass.

Grammar (one command per span):

    notepad | begin | end
    let <ident> = <expr>
    have "<expr> = <expr>"
    also | finally
    print <expr>

Anything else parses to Malformed, never a failure.

Elaboration is a fast, evaluation-free sequential pass that threads the
binding environment and the calculational chain through a node's
commands, so that each command's evaluation depends only on its recorded
input state and can run as an independent parallel task.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

from ..document import MALFORMED, Span
from .exprs import (BAD, IDENT, KEYWORD, OPERATOR, STRING, Expr,
                    ExprSyntaxError, Range, Token, expr_key, fold,
                    parse_expr, tokenize)


@dataclass(frozen=True)
class Notepad:
    pass


@dataclass(frozen=True)
class Begin:
    pass


@dataclass(frozen=True)
class End:
    pass


@dataclass(frozen=True)
class Let:
    name: str
    name_range: Range
    expr: Expr


@dataclass(frozen=True)
class Have:
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Also:
    pass


@dataclass(frozen=True)
class Finally:
    pass


@dataclass(frozen=True)
class Print:
    expr: Expr


@dataclass(frozen=True)
class Malformed:
    text: str
    reason: str
    range: Range


NotepadCommand = Union[Notepad, Begin, End, Let, Have, Also, Finally,
                       Print, Malformed]

_BARE = {"notepad": Notepad, "begin": Begin, "end": End,
         "also": Also, "finally": Finally}


@dataclass(frozen=True)
class ParsedSpan:
    command: NotepadCommand
    tokens: Tuple[Token, ...]


def parse_command(span: Span) -> ParsedSpan:
    """Parse one command span; yields exactly one NotepadCommand."""
    tokens = tuple(tokenize(span.source))
    whole: Range = (0, len(span.source))

    def bad(reason: str, rng: Optional[Range] = None) -> ParsedSpan:
        return ParsedSpan(Malformed(span.source, reason, rng or whole),
                          tokens)

    if span.name == MALFORMED or not tokens:
        return bad("not a command")
    head = tokens[0]
    rest = tokens[1:]
    end: Range = (len(span.source), len(span.source))
    try:
        if head.text in _BARE:
            if rest:
                t = rest[0]
                return bad("unexpected %r after %s" % (t.text, head.text),
                           (t.start, t.stop))
            return ParsedSpan(_BARE[head.text](), tokens)
        if head.text == "let":
            if (len(rest) < 2 or rest[0].kind != IDENT
                    or rest[1].text != "="):
                return bad("expected: let <ident> = <expr>")
            name = rest[0]
            expr = parse_expr(rest[2:], end)
            return ParsedSpan(Let(name.text, (name.start, name.stop), expr),
                              tokens)
        if head.text == "have":
            if len(rest) != 1 or rest[0].kind != STRING:
                return bad('expected: have "<expr> = <expr>"')
            quoted = rest[0]
            inner = span.source[quoted.start + 1:quoted.stop - 1]
            inner_base = quoted.start + 1
            inner_tokens = tokenize(inner, inner_base)
            split = [k for k, t in enumerate(inner_tokens)
                     if t.kind == OPERATOR and t.text == "="]
            if len(split) != 1:
                return bad("equation must contain exactly one top-level '='",
                           (quoted.start, quoted.stop))
            eq = inner_tokens[split[0]]
            lhs = parse_expr(inner_tokens[:split[0]], (eq.start, eq.start))
            rhs = parse_expr(inner_tokens[split[0] + 1:],
                             (inner_base + len(inner),
                              inner_base + len(inner)))
            return ParsedSpan(Have(lhs, rhs), tokens)
        if head.text == "print":
            expr = parse_expr(rest, end)
            return ParsedSpan(Print(expr), tokens)
    except ExprSyntaxError as exc:
        return bad(str(exc), exc.range)
    return bad("unknown command %r" % head.text)


# --- elaboration ---------------------------------------------------------

Eq = Tuple[Expr, Expr]


@dataclass(frozen=True)
class CalcState:
    """Deterministic function of the command prefix of a node: the
    symbolic bindings, the accumulated calculation, and the most recent
    `have` equation."""

    bindings: Tuple[Tuple[str, Expr], ...] = ()
    chain: Optional[Eq] = None
    this: Optional[Eq] = None

    def binding_map(self) -> Dict[str, Expr]:
        return dict(self.bindings)


@dataclass(frozen=True)
class CommandPlan:
    """One command with its recorded input state.

    `error` carries a chain-misuse elaboration error; `derived` is the
    composed equation a Finally checks.
    """

    command: NotepadCommand
    tokens: Tuple[Token, ...]
    state_in: CalcState
    error: Optional[str] = None
    derived: Optional[Eq] = None


def _eq_key(eq: Eq):
    return (expr_key(eq[0]), expr_key(eq[1]))


def _compose(chain: Eq, this: Eq,
             bindings: Dict[str, Expr]) -> Tuple[Optional[Eq], Optional[str]]:
    """Transitivity: the chain's rhs must syntactically link to this lhs
    after constant-folding of bound identifiers."""
    link_l = fold(chain[1], bindings)
    link_r = fold(this[0], bindings)
    if expr_key(link_l) != expr_key(link_r):
        from .exprs import unparse
        return None, ("calculation mismatch: %s does not link to %s"
                      % (unparse(link_l), unparse(link_r)))
    return (chain[0], this[1]), None


def elaborate(parsed: Sequence[ParsedSpan]) -> List[CommandPlan]:
    """Thread CalcState through a node's commands without evaluating."""
    state = CalcState()
    plans: List[CommandPlan] = []
    for item in parsed:
        cmd = item.command
        error: Optional[str] = None
        derived: Optional[Eq] = None
        state_in = state
        if isinstance(cmd, Let):
            bindings = state.binding_map()
            folded = fold(cmd.expr, bindings)
            bindings[cmd.name] = folded
            state = CalcState(tuple(bindings.items()), state.chain,
                              state.this)
        elif isinstance(cmd, Have):
            state = CalcState(state.bindings, state.chain,
                              (cmd.lhs, cmd.rhs))
        elif isinstance(cmd, Also):
            if state.this is None:
                error = "no current calculation"
            elif state.chain is None:
                state = CalcState(state.bindings, state.this, None)
            else:
                composed, error = _compose(state.chain, state.this,
                                           state.binding_map())
                if composed is not None:
                    state = CalcState(state.bindings, composed, None)
                else:
                    # restart the calculation from the latest equation
                    state = CalcState(state.bindings, state.this, None)
        elif isinstance(cmd, Finally):
            if state.chain is None:
                error = "no current calculation"
            else:
                if (state.this is None
                        or _eq_key(state.this) == _eq_key(state.chain)):
                    derived = state.chain
                else:
                    derived, error = _compose(state.chain, state.this,
                                              state.binding_map())
                state = CalcState(state.bindings, None, derived)
        plans.append(CommandPlan(cmd, item.tokens, state_in, error, derived))
    return plans
