"""YXML: byte-level transfer syntax for markup trees.

Two reserved control bytes are the only structure markers:

    X = 0x05    chunk separator
    Y = 0x06    marker introducing element names / attributes

An element is emitted as  X Y name (Y key=value)*  X  body  X Y X;
text is emitted verbatim.  This byte syntax is the payload format of
every protocol chunk and must stay bit-exact across implementations.
"""
from __future__ import annotations

from typing import Iterable, List, Sequence

from .markup import Elem, MarkupTree, Text

X = 0x05
Y = 0x06
XS = "\x05"
YS = "\x06"
XB = b"\x05"
YB = b"\x06"


class YxmlError(ValueError):
    pass


class YxmlParseError(YxmlError):
    def __init__(self, message: str, position: int):
        super().__init__("%s (at byte %d)" % (message, position))
        self.position = position


def _check_clean(s: str, what: str) -> None:
    if XS in s or YS in s:
        raise YxmlError("reserved control byte in %s: %r" % (what, s))


def encode(body: Iterable[MarkupTree]) -> bytes:
    """Encode a list of markup trees as YXML bytes."""
    out: List[bytes] = []
    for tree in body:
        _encode(tree, out)
    return b"".join(out)


def _encode(tree: MarkupTree, out: List[bytes]) -> None:
    if isinstance(tree, Text):
        _check_clean(tree.content, "text content")
        out.append(tree.content.encode("utf-8"))
        return
    _check_clean(tree.name, "element name")
    head = [tree.name]
    for key, value in tree.attrs:
        _check_clean(key, "attribute key")
        _check_clean(value, "attribute value")
        head.append("%s=%s" % (key, value))
    out.append(XB + YB + YS.join(head).encode("utf-8") + XB)
    for child in tree.body:
        _encode(child, out)
    out.append(XB + YB + XB)


def parse(data: bytes) -> List[MarkupTree]:
    """Parse YXML bytes back into markup trees.

    Inverse of :func:`encode` on well-formed input; adjacent text chunks
    merge into one text leaf and empty text is dropped.
    """
    # stack of (elem-name, attrs, body-in-progress); index 0 is the root
    stack: List[tuple] = [(None, None, [])]
    pos = 0
    for chunk in data.split(XB):
        here = pos            # chunk start; the X marker sits at here - 1
        pos += len(chunk) + 1
        if not chunk:
            continue
        if chunk == YB:
            if len(stack) == 1:
                raise YxmlParseError("close marker without open element",
                                     here - 1 if here else 0)
            name, attrs, body = stack.pop()
            stack[-1][2].append(Elem(name, attrs, tuple(body)))
        elif chunk.startswith(YB):
            parts = chunk[1:].split(YB)
            name = parts[0].decode("utf-8")
            if not name:
                raise YxmlParseError("empty element name", here - 1)
            attrs = []
            for raw in parts[1:]:
                text = raw.decode("utf-8")
                if "=" not in text:
                    raise YxmlParseError(
                        "attribute chunk without '=': %r" % text, here - 1)
                key, _, value = text.partition("=")
                attrs.append((key, value))
            stack.append((name, tuple(attrs), []))
        else:
            if YB in chunk:
                raise YxmlParseError("stray Y byte in text",
                                     here + chunk.index(YB))
            body = stack[-1][2]
            text = chunk.decode("utf-8")
            if body and isinstance(body[-1], Text):
                body[-1] = Text(body[-1].content + text)
            else:
                body.append(Text(text))
    if len(stack) != 1:
        raise YxmlParseError("unclosed element %r" % stack[-1][0], len(data))
    return stack[0][2]


def normalize(body: Iterable[MarkupTree]) -> List[MarkupTree]:
    """Merge adjacent text siblings and drop empty text leaves.

    parse(encode(t)) == t holds exactly for normalized trees.
    """
    out: List[MarkupTree] = []
    for tree in body:
        if isinstance(tree, Text):
            if not tree.content:
                continue
            if out and isinstance(out[-1], Text):
                out[-1] = Text(out[-1].content + tree.content)
            else:
                out.append(tree)
        else:
            out.append(Elem(tree.name, tree.attrs,
                            tuple(normalize(tree.body))))
    return out
