"""Oppen-style pretty printing as symbolic markup.

Documents are built from text, indented blocks and breaks.  A document
can be lowered to markup (block/break elements) for the wire, and
physically formatted against a margin either directly or on a markup
tree that interleaves layout with semantic markup.

Breaking policy: blocks are consistent (all-or-nothing).  A block is
rendered flat when its one-line width, plus the following material up to
the next break of the enclosing broken block, fits in the remaining
space; otherwise every break in it is taken.  Taken breaks emit a
newline plus the enclosing indentation increased by the block indent,
measured from line start.  There is no backtracking.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

from .markup import Elem, MarkupTree, Text

MARGIN_CEILING = 1000
DEFAULT_MARGIN = 76


class PrettyError(ValueError):
    pass


@dataclass(frozen=True)
class PText:
    content: str


@dataclass(frozen=True)
class PBreak:
    # renders as exactly `width` spaces when not taken
    width: int

    def __post_init__(self) -> None:
        if not (0 <= self.width <= MARGIN_CEILING):
            raise PrettyError("break width out of range: %d" % self.width)


@dataclass(frozen=True)
class PBlock:
    indent: int
    body: Tuple["PrettyDoc", ...]

    def __post_init__(self) -> None:
        if not (0 <= self.indent <= MARGIN_CEILING):
            raise PrettyError("block indent out of range: %d" % self.indent)
        object.__setattr__(self, "body", tuple(self.body))


PrettyDoc = Union[PText, PBreak, PBlock]


def block(*body: PrettyDoc, indent: int = 0) -> PBlock:
    return PBlock(indent, tuple(body))


def flat_width(doc: PrettyDoc) -> int:
    """Width of the document laid out on a single line."""
    if isinstance(doc, PText):
        return len(doc.content)
    if isinstance(doc, PBreak):
        return doc.width
    return sum(flat_width(d) for d in doc.body)


# --- markup round trip ---------------------------------------------------

def pretty_to_markup(doc: PrettyDoc) -> MarkupTree:
    if isinstance(doc, PText):
        return Text(doc.content)
    if isinstance(doc, PBreak):
        return Elem("break", (("width", str(doc.width)),),
                    (Text(" " * doc.width),))
    return Elem("block", (("indent", str(doc.indent)),),
                tuple(pretty_to_markup(d) for d in doc.body))


def markup_to_pretty(tree: MarkupTree) -> PrettyDoc:
    """Inverse of :func:`pretty_to_markup`; rejects non-layout elements."""
    if isinstance(tree, Text):
        return PText(tree.content)
    if tree.name == "break":
        width = tree.get("width")
        if width is None or not width.isdigit():
            raise PrettyError("break element without numeric width")
        return PBreak(int(width))
    if tree.name == "block":
        indent = tree.get("indent")
        if indent is None or not indent.isdigit():
            raise PrettyError("block element without numeric indent")
        return PBlock(int(indent), tuple(markup_to_pretty(t)
                                         for t in tree.body))
    raise PrettyError("not layout markup: <%s>" % tree.name)


# --- physical formatting -------------------------------------------------

def format(doc: PrettyDoc, margin: int = DEFAULT_MARGIN) -> str:
    """Format a document against a physical margin (character width 1)."""
    if margin < 1:
        raise PrettyError("margin must be positive")
    out: List[str] = []
    if flat_width(doc) <= margin:
        _emit_flat(doc, out)
    else:
        _emit_body((doc,), 0, 0, 0, margin, 0, out)
    return "".join(out)


def _after_widths(body: Sequence[PrettyDoc], after: int) -> List[int]:
    """For each position, the flat width of the following material up to
    (excluding) the next break, or to the end plus the enclosing `after`."""
    n = len(body)
    result = [0] * n
    acc = after
    for i in range(n - 1, -1, -1):
        result[i] = acc
        d = body[i]
        acc = 0 if isinstance(d, PBreak) else flat_width(d) + acc
    return result


def _emit_flat(doc: PrettyDoc, out: List[str]) -> None:
    if isinstance(doc, PText):
        out.append(doc.content)
    elif isinstance(doc, PBreak):
        out.append(" " * doc.width)
    else:
        for d in doc.body:
            _emit_flat(d, out)


def _emit_body(body: Sequence[PrettyDoc], block_indent: int,
               enclosing_indent: int, col: int, margin: int,
               after: int, out: List[str]) -> int:
    """Emit a block body; the caller has already decided it breaks.

    Returns the resulting column.
    """
    indent = enclosing_indent + block_indent
    afters = _after_widths(body, after)
    for i, d in enumerate(body):
        if isinstance(d, PText):
            out.append(d.content)
            col += len(d.content)
        elif isinstance(d, PBreak):
            out.append("\n" + " " * indent)
            col = indent
        else:
            width = flat_width(d)
            if col + width + afters[i] <= margin:
                _emit_flat(d, out)
                col += width
            else:
                col = _emit_body(d.body, d.indent, indent, col,
                                 margin, afters[i], out)
    return col


def format_markup(tree: MarkupTree, margin: int = DEFAULT_MARGIN) -> MarkupTree:
    """Resolve layout markup into literal spaces/newlines in text leaves.

    Semantic markup elements (anything other than block/break) are
    preserved with their bodies intact; they are transparent for width.
    """
    if margin < 1:
        raise PrettyError("margin must be positive")
    if _tree_width(tree) <= margin:
        return _fmt_flat(tree)
    body, _ = _fmt_body((tree,), 0, 0, 0, margin, 0)
    if len(body) == 1:
        return body[0]
    # a root-level block that breaks apart keeps its element as container
    if isinstance(tree, Elem):
        return Elem(tree.name, tree.attrs, tuple(body))
    return Text("".join(t.content for t in body if isinstance(t, Text)))


def _tree_width(tree: MarkupTree) -> int:
    if isinstance(tree, Text):
        return len(tree.content)
    if tree.name == "break":
        width = tree.get("width")
        return int(width) if width and width.isdigit() else len(
            "".join(t.content for t in tree.body if isinstance(t, Text)))
    return sum(_tree_width(t) for t in tree.body)


def _tree_afters(body: Sequence[MarkupTree], after: int) -> List[int]:
    n = len(body)
    result = [0] * n
    acc = after
    for i in range(n - 1, -1, -1):
        result[i] = acc
        t = body[i]
        is_break = isinstance(t, Elem) and t.name == "break"
        acc = 0 if is_break else _tree_width(t) + acc
    return result


def _fmt_flat(tree: MarkupTree) -> MarkupTree:
    if isinstance(tree, Text):
        return tree
    if tree.name == "break":
        return Text(" " * _tree_width(tree))
    flat = tuple(_fmt_flat(t) for t in tree.body)
    if tree.name == "block":
        return Text("".join(t.content for t in _merge_text(flat)))  # type: ignore[union-attr]
    return Elem(tree.name, tree.attrs, tuple(_merge_text(flat)))


def _merge_text(body: Sequence[MarkupTree]) -> List[MarkupTree]:
    out: List[MarkupTree] = []
    for t in body:
        if isinstance(t, Text) and out and isinstance(out[-1], Text):
            out[-1] = Text(out[-1].content + t.content)
        else:
            out.append(t)
    return [t for t in out if not (isinstance(t, Text) and not t.content)]


def _fmt_body(body: Sequence[MarkupTree], block_indent: int,
              enclosing_indent: int, col: int, margin: int,
              after: int) -> Tuple[List[MarkupTree], int]:
    indent = enclosing_indent + block_indent
    afters = _tree_afters(body, after)
    out: List[MarkupTree] = []
    for i, t in enumerate(body):
        if isinstance(t, Text):
            out.append(t)
            col += len(t.content)
        elif t.name == "break":
            out.append(Text("\n" + " " * indent))
            col = indent
        elif t.name == "block":
            width = _tree_width(t)
            if col + width + afters[i] <= margin:
                out.append(_fmt_flat(t))
                col += width
            else:
                ind = t.get("indent")
                inner, col = _fmt_body(
                    t.body, int(ind) if ind and ind.isdigit() else 0,
                    indent, col, margin, afters[i])
                out.extend(inner)
        else:
            # semantic element: format its body in place, keep the element
            width = _tree_width(t)
            if col + width + afters[i] <= margin:
                out.append(_fmt_flat(t))
                col += width
            else:
                inner, col = _fmt_body(t.body, 0, indent, col,
                                       margin, afters[i])
                out.append(Elem(t.name, t.attrs, tuple(_merge_text(inner))))
    return _merge_text(out), col
