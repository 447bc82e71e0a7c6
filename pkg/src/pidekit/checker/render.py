"""Rendering of expressions as symbolic markup.

Terms are printed as block/break layout markup interleaved with semantic
elements: unbound identifiers wrapped in free-within-hilite, operators
and fib wrapped in entity markup pointing at their declaration in the
built-in pseudo-file.  Physical formatting happens later on the
front-end side.
"""
from __future__ import annotations

from typing import Dict, List, Tuple

from ..markup import Elem, MarkupTree, Text
from .exprs import BinOp, Call, Expr, Lit, Var, free_vars_all

BUILTIN_FILE = "builtin/ops"

# pseudo-file "builtin/ops" reads "+ * fib"; (ref, name, def range)
BUILTINS: Dict[str, Tuple[int, str, int, int]] = {
    "+": (1, "ops.plus", 0, 1),
    "*": (2, "ops.times", 2, 3),
    "fib": (3, "ops.fib", 4, 7),
}


def entity(symbol: str) -> Elem:
    ref, name, def_start, def_stop = BUILTINS[symbol]
    return Elem("entity",
                (("ref", str(ref)),
                 ("def_offset", str(def_start)),
                 ("def_end_offset", str(def_stop)),
                 ("def_file", BUILTIN_FILE),
                 ("name", name),
                 ("kind", "constant")),
                (Text(symbol),))


def term_markup(expr: Expr, bindings: Dict[str, Expr]) -> Elem:
    """The symbolic printout of a term: block(indent=0) around the
    rendered expression, with breaks before operator right operands."""
    return Elem("term", (), (Elem("block", (("indent", "0"),),
                                  tuple(_render(expr, bindings, 0))),))


def _break(width: int = 1) -> Elem:
    return Elem("break", (("width", str(width)),), (Text(" " * width),))


def _prec(expr: Expr) -> int:
    if isinstance(expr, BinOp):
        return 1 if expr.op == "+" else 2
    return 3


def _render(expr: Expr, bindings: Dict[str, Expr],
            context_prec: int) -> List[MarkupTree]:
    if isinstance(expr, Lit):
        return [Text(str(expr.value))]
    if isinstance(expr, Var):
        if free_vars_all(expr, bindings):
            return [Elem("hilite", (), (Elem("free", (),
                                             (Text(expr.name),)),))]
        return [Text(expr.name)]
    if isinstance(expr, Call):
        body: List[MarkupTree] = [entity("fib"), Text("(")]
        body += _render(expr.arg, bindings, 0)
        body.append(Text(")"))
        return body
    own = _prec(expr)
    parts: List[MarkupTree] = []
    left = _render(expr.left, bindings, own)
    right = _render(expr.right, bindings, own + 1)
    if _prec(expr.left) < own:
        left = [Text("(")] + left + [Text(")")]
    if _prec(expr.right) <= own:
        right = [Text("(")] + right + [Text(")")]
    parts += left
    parts.append(Text(" "))
    parts.append(entity(expr.op))
    parts.append(_break(1))
    if len(right) > 1:
        parts.append(Elem("block", (("indent", "0"),), tuple(right)))
    else:
        parts += right
    if context_prec > own:
        return [Elem("block", (("indent", "0"),), tuple(parts))]
    return parts
