"""Markup trees: the universal annotation currency.

A markup tree is either a text leaf or a named element with an ordered
attribute list and child trees.  Checker output, protocol payloads and
editor annotations are all built from these values; they are immutable
and safe to share between threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Optional, Sequence, Tuple, Union


class MarkupError(ValueError):
    """Raised for ill-formed markup values."""


def _check_name(name: str) -> None:
    if not name:
        raise MarkupError("element name must be nonempty")
    if any(ord(c) < 32 for c in name):
        raise MarkupError("control character in element name: %r" % name)


def _check_attrs(attrs: Sequence[Tuple[str, str]]) -> None:
    for key, value in attrs:
        if not key:
            raise MarkupError("attribute key must be nonempty")
        if "=" in key:
            raise MarkupError("'=' in attribute key: %r" % key)
        if any(ord(c) < 32 for c in key):
            raise MarkupError("control character in attribute key: %r" % key)
        if any(ord(c) < 32 for c in value):
            raise MarkupError("control character in attribute value: %r" % value)


@dataclass(frozen=True)
class Text:
    """A text leaf.  May be empty only as the sole representation of
    empty output."""

    content: str


@dataclass(frozen=True)
class Elem:
    """A named element with ordered attributes and child trees.

    Attribute order is preserved so encodings are deterministic.
    """

    name: str
    attrs: Tuple[Tuple[str, str], ...] = ()
    body: Tuple["MarkupTree", ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "attrs", tuple((k, v) for k, v in self.attrs))
        object.__setattr__(self, "body", tuple(self.body))
        _check_name(self.name)
        _check_attrs(self.attrs)

    def get(self, key: str) -> Optional[str]:
        for k, v in self.attrs:
            if k == key:
                return v
        return None


MarkupTree = Union[Text, Elem]


def text_content(tree: Union[MarkupTree, Iterable[MarkupTree]]) -> str:
    """Concatenation of all text leaves in document order; markup ignored."""
    if isinstance(tree, Text):
        return tree.content
    if isinstance(tree, Elem):
        return "".join(text_content(t) for t in tree.body)
    return "".join(text_content(t) for t in tree)


class MessageKind(Enum):
    WRITELN = "writeln"
    WARNING = "warning"
    ERROR = "error"
    STATUS = "status"
    REPORT = "report"

    @property
    def is_displayed(self) -> bool:
        # status and report augment document content without a text panel
        return self in (MessageKind.WRITELN, MessageKind.WARNING, MessageKind.ERROR)


@dataclass(frozen=True)
class Message:
    """A serial-numbered output unit tagged with the exec it belongs to.

    ``range`` is an optional position within the owning command span,
    0-based half-open; it becomes the offset/end_offset attributes of the
    rendered message element.
    """

    serial: int
    kind: MessageKind
    exec_id: int
    body: Tuple[MarkupTree, ...]
    range: Optional[Tuple[int, int]] = None

    def __post_init__(self) -> None:
        if self.serial <= 0:
            raise MarkupError("serial must be positive")
        object.__setattr__(self, "body", tuple(self.body))


@dataclass(frozen=True)
class PositionedMarkup:
    """Markup over a half-open character range of a command span."""

    start: int
    stop: int
    name: str
    attrs: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "attrs", tuple((k, v) for k, v in self.attrs))
        if not (0 <= self.start <= self.stop):
            raise MarkupError("invalid range [%d, %d)" % (self.start, self.stop))
        _check_name(self.name)
        _check_attrs(self.attrs)

    def intersects(self, start: int, stop: int) -> bool:
        return self.start < stop and start < self.stop


class StoreBoundsError(MarkupError):
    """An entry's range falls outside the owning span."""


class MarkupStore:
    """Persistent store of positioned markup, bounded by a span length.

    ``add`` returns a new store and never mutates entries visible through
    older references; the common linear-extension case shares the
    underlying list instead of copying.  Duplicates are kept; query
    de-duplication is a renderer concern.
    """

    __slots__ = ("bound", "_entries", "_size")

    def __init__(self, bound: int,
                 _entries: Optional[list] = None, _size: int = 0):
        self.bound = bound
        self._entries = [] if _entries is None else _entries
        self._size = _size

    def __len__(self) -> int:
        return self._size

    def __iter__(self) -> Iterator[PositionedMarkup]:
        return iter(self._entries[: self._size])

    def add(self, entry: PositionedMarkup) -> "MarkupStore":
        if entry.stop > self.bound:
            raise StoreBoundsError(
                "range [%d, %d) exceeds span length %d"
                % (entry.start, entry.stop, self.bound))
        if self._size == len(self._entries):
            self._entries.append(entry)
            return MarkupStore(self.bound, self._entries, self._size + 1)
        forked = self._entries[: self._size] + [entry]
        return MarkupStore(self.bound, forked, self._size + 1)

    def query(self, start: int, stop: int) -> list:
        """All entries intersecting [start, stop), in insertion order."""
        return [e for e in self if e.intersects(start, stop)]


# --- XML text dump -------------------------------------------------------
#
# Standard XML element syntax with attributes in stored order.  Offsets in
# the dump follow the external 1-based convention: any attribute named in
# _OFFSET_ATTRS has 1 added on output and subtracted on input, while the
# internal model stays 0-based half-open.

_OFFSET_ATTRS = frozenset(
    ["offset", "end_offset", "def_offset", "def_end_offset"])

_ESCAPES = [("&", "&amp;"), ("<", "&lt;"), (">", "&gt;"),
            ('"', "&quot;"), ("'", "&apos;")]


def _escape(s: str) -> str:
    for raw, esc in _ESCAPES:
        s = s.replace(raw, esc)
    return s


def _unescape(s: str) -> str:
    out = []
    i = 0
    while i < len(s):
        if s[i] == "&":
            j = s.find(";", i)
            if j < 0:
                raise MarkupError("unterminated entity reference at %d" % i)
            ent = s[i:j + 1]
            for raw, esc in _ESCAPES:
                if ent == esc:
                    out.append(raw)
                    break
            else:
                raise MarkupError("unknown entity reference %r" % ent)
            i = j + 1
        else:
            out.append(s[i])
            i += 1
    return "".join(out)


def _dump_attr(key: str, value: str) -> str:
    if key in _OFFSET_ATTRS and value.lstrip("-").isdigit():
        value = str(int(value) + 1)
    return '%s="%s"' % (key, _escape(value))


def xml_dump(trees: Iterable[MarkupTree]) -> str:
    """Render markup trees as an XML string (no declaration, no namespaces)."""
    out = []
    for tree in trees:
        _xml_dump(tree, out)
    return "".join(out)


def _xml_dump(tree: MarkupTree, out: list) -> None:
    if isinstance(tree, Text):
        out.append(_escape(tree.content))
        return
    head = tree.name
    if tree.attrs:
        head += " " + " ".join(_dump_attr(k, v) for k, v in tree.attrs)
    if not tree.body:
        out.append("<%s/>" % head)
        return
    out.append("<%s>" % head)
    for child in tree.body:
        _xml_dump(child, out)
    out.append("</%s>" % tree.name)


def xml_parse(text: str) -> list:
    """Parse the subset of XML produced by :func:`xml_dump` back into trees.

    Supports elements, attributes and the five standard character escapes;
    offset-carrying attributes are re-encoded back to 0-based.
    """
    parser = _XmlParser(text)
    trees = parser.parse_body(None)
    return trees


class _XmlParser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, what: str):
        raise MarkupError("XML parse error at %d: %s" % (self.pos, what))

    def parse_body(self, closing: Optional[str]) -> list:
        trees: list = []
        buf: list = []
        t = self.text
        while True:
            if self.pos >= len(t):
                if closing is not None:
                    self.error("missing </%s>" % closing)
                break
            if t[self.pos] == "<":
                if t.startswith("</", self.pos):
                    if closing is None:
                        self.error("stray close tag")
                    end = t.find(">", self.pos)
                    if end < 0:
                        self.error("unterminated close tag")
                    name = t[self.pos + 2:end]
                    if name != closing:
                        self.error("expected </%s>, got </%s>" % (closing, name))
                    self.pos = end + 1
                    break
                if buf:
                    trees.append(Text(_unescape("".join(buf))))
                    buf = []
                trees.append(self.parse_elem())
            else:
                nxt = t.find("<", self.pos)
                if nxt < 0:
                    nxt = len(t)
                buf.append(t[self.pos:nxt])
                self.pos = nxt
        if buf:
            trees.append(Text(_unescape("".join(buf))))
        return trees

    def parse_elem(self) -> Elem:
        t = self.text
        assert t[self.pos] == "<"
        self.pos += 1
        name = self._take_name()
        attrs = []
        while True:
            self._skip_ws()
            if self.pos >= len(t):
                self.error("unterminated tag")
            if t.startswith("/>", self.pos):
                self.pos += 2
                return Elem(name, tuple(attrs))
            if t[self.pos] == ">":
                self.pos += 1
                body = self.parse_body(name)
                return Elem(name, tuple(attrs), tuple(body))
            key = self._take_name()
            if not t.startswith('="', self.pos):
                self.error("malformed attribute")
            self.pos += 2
            end = t.find('"', self.pos)
            if end < 0:
                self.error("unterminated attribute value")
            value = _unescape(t[self.pos:end])
            self.pos = end + 1
            if key in _OFFSET_ATTRS and value.lstrip("-").isdigit():
                value = str(int(value) - 1)
            attrs.append((key, value))

    def _take_name(self) -> str:
        t = self.text
        start = self.pos
        while self.pos < len(t) and (t[self.pos].isalnum()
                                     or t[self.pos] in "_-.:"):
            self.pos += 1
        if self.pos == start:
            self.error("expected a name")
        return t[start:self.pos]

    def _skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1
