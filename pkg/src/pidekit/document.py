"""Versioned document model: edits, offset mapping, command spans.

Versions are immutable partitions of node text into command spans.
Creating a new version reuses the longest matching prefix and suffix of
the old command list (identical command ids, byte-identical sources) and
allocates fresh commands only for the middle window.

Offsets are 0-based character offsets; ranges are half-open.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .markup import MarkupStore, Message, MessageKind, PositionedMarkup


class EditError(ValueError):
    """An edit is out of bounds for the text it is applied to."""


@dataclass(frozen=True)
class Insert:
    offset: int
    text: str


@dataclass(frozen=True)
class Remove:
    offset: int
    length: int


TextEdit = Union[Insert, Remove]


def apply_edit(text: str, edit: TextEdit) -> str:
    if isinstance(edit, Insert):
        if not (0 <= edit.offset <= len(text)):
            raise EditError("insert offset %d out of bounds (len %d)"
                            % (edit.offset, len(text)))
        return text[:edit.offset] + edit.text + text[edit.offset:]
    if edit.length <= 0:
        raise EditError("remove length must be positive")
    if not (0 <= edit.offset and edit.offset + edit.length <= len(text)):
        raise EditError("remove range [%d, %d) out of bounds (len %d)"
                        % (edit.offset, edit.offset + edit.length, len(text)))
    return text[:edit.offset] + text[edit.offset + edit.length:]


def apply_edits(text: str, edits: Iterable[TextEdit]) -> str:
    for edit in edits:
        text = apply_edit(text, edit)
    return text


def convert_offset(offset: int, edits: Iterable[TextEdit]) -> int:
    """Map an old-version offset forward through an edit list.

    An insert of n chars at i shifts offsets >= i by +n; a remove of n
    chars at i shifts offsets >= i+n by -n and collapses offsets inside
    the removed range to i.
    """
    for edit in edits:
        if isinstance(edit, Insert):
            if offset >= edit.offset:
                offset += len(edit.text)
        else:
            if offset >= edit.offset + edit.length:
                offset -= edit.length
            elif offset >= edit.offset:
                offset = edit.offset
    return offset


def revert_offset(offset: int, edits: Iterable[TextEdit]) -> int:
    """Map a current-text offset backward through an edit list; inverse of
    :func:`convert_offset` via the reversed list of inverted edits."""
    for edit in reversed(list(edits)):
        if isinstance(edit, Insert):
            n = len(edit.text)
            if offset >= edit.offset + n:
                offset -= n
            elif offset >= edit.offset:
                offset = edit.offset
        else:
            if offset >= edit.offset:
                offset += edit.length
    return offset


# --- command spans -------------------------------------------------------

KEYWORDS = ("notepad", "begin", "end", "let", "have",
            "also", "finally", "print")

MALFORMED = "<malformed>"


def _is_word(c: str) -> bool:
    return c.isalnum() or c == "_"


def keyword_starts(text: str) -> List[int]:
    """Offsets where a command keyword token starts at top level
    (outside double-quoted strings)."""
    starts: List[int] = []
    i = 0
    n = len(text)
    in_string = False
    while i < n:
        c = text[i]
        if in_string:
            if c == "\\" and i + 1 < n:
                i += 2
            else:
                if c == '"':
                    in_string = False
                i += 1
        elif c == '"':
            in_string = True
            i += 1
        elif _is_word(c):
            j = i
            while j < n and _is_word(text[j]):
                j += 1
            if text[i:j] in KEYWORDS:
                starts.append(i)
            i = j
        else:
            i += 1
    return starts


@dataclass(frozen=True)
class Span:
    """A raw command span: keyword name (or MALFORMED) plus exact source
    text including trailing material up to the next command."""

    name: str
    source: str


def parse_spans(text: str) -> List[Span]:
    """Split text before each top-level command keyword; leading
    non-keyword text becomes one malformed span.  Concatenation of the
    span sources always equals the text."""
    if not text:
        return []
    starts = keyword_starts(text)
    spans: List[Span] = []
    if not starts or starts[0] > 0:
        head = text[: starts[0]] if starts else text
        spans.append(Span(MALFORMED, head))
    for k, start in enumerate(starts):
        stop = starts[k + 1] if k + 1 < len(starts) else len(text)
        source = text[start:stop]
        j = start
        while j < len(text) and _is_word(text[j]):
            j += 1
        spans.append(Span(text[start:j], source))
    return spans


@dataclass(frozen=True)
class Command:
    id: int
    name: str
    source: str


@dataclass(frozen=True)
class Version:
    id: int
    nodes: Tuple[Tuple[str, Tuple[Command, ...]], ...]

    def node_names(self) -> List[str]:
        return [name for name, _ in self.nodes]

    def commands(self, node: str) -> Tuple[Command, ...]:
        for name, cmds in self.nodes:
            if name == node:
                return cmds
        return ()

    def node_text(self, node: str) -> str:
        return "".join(c.source for c in self.commands(node))


EMPTY_VERSION = Version(0, ())


def reparse_node(old_commands: Sequence[Command], new_text: str,
                 alloc: Callable[[], int]
                 ) -> Tuple[Tuple[Command, ...], List[int], List[Command]]:
    """Re-partition node text, reusing old commands at the edges.

    The longest prefix and suffix of the old command list whose sources
    match the new span list keep their ids; the middle window is freshly
    allocated.  Returns (new commands, removed ids, inserted commands).
    """
    spans = parse_spans(new_text)
    old = list(old_commands)
    limit = min(len(old), len(spans))
    prefix = 0
    while (prefix < limit and old[prefix].name == spans[prefix].name
           and old[prefix].source == spans[prefix].source):
        prefix += 1
    suffix = 0
    while (suffix < limit - prefix
           and old[-1 - suffix].name == spans[-1 - suffix].name
           and old[-1 - suffix].source == spans[-1 - suffix].source):
        suffix += 1
    inserted = [Command(alloc(), span.name, span.source)
                for span in spans[prefix:len(spans) - suffix]]
    removed = [c.id for c in old[prefix:len(old) - suffix]]
    tail = old[len(old) - suffix:] if suffix else []
    new_commands = tuple(old[:prefix] + inserted + tail)
    return new_commands, removed, inserted


# --- execution-side record types ----------------------------------------

@dataclass(frozen=True)
class Assignment:
    """Mapping from the commands of one version to execution identities.
    Once complete it is never modified."""

    version_id: int
    command_to_exec: Tuple[Tuple[int, int], ...]
    complete: bool = True

    def exec_of(self, command_id: int) -> Optional[int]:
        for cid, eid in self.command_to_exec:
            if cid == command_id:
                return eid
        return None


PENDING = "pending"
RUNNING = "running"
FINISHED = "finished"
FAILED = "failed"
CANCELLED = "cancelled"

TERMINAL = (FINISHED, FAILED, CANCELLED)
_TRANSITIONS = {
    PENDING: (RUNNING, FINISHED, FAILED, CANCELLED),
    RUNNING: (FINISHED, FAILED, CANCELLED),
}


class ExecStateError(ValueError):
    pass


class ExecState:
    """Accumulating result state of one exec.

    Messages and markup only grow; the status moves along
    pending -> running -> {finished | failed | cancelled}.  Appends happen
    under the session's single writer; readers may hold a reference and
    query at any time without locking.
    """

    __slots__ = ("exec_id", "status", "messages", "markup", "outcome")

    def __init__(self, exec_id: int, span_length: int):
        self.exec_id = exec_id
        self.status = PENDING
        self.messages: List[Message] = []
        self.markup = MarkupStore(span_length)
        self.outcome: Optional[str] = None

    def set_status(self, status: str, outcome: Optional[str] = None) -> None:
        if status == self.status:
            return
        if status not in _TRANSITIONS.get(self.status, ()):
            raise ExecStateError("illegal status transition %s -> %s"
                                 % (self.status, status))
        self.status = status
        if outcome is not None:
            self.outcome = outcome

    @property
    def is_terminal(self) -> bool:
        return self.status in TERMINAL

    def add_message(self, message: Message) -> None:
        self.messages.append(message)

    def add_markup(self, entry: PositionedMarkup) -> None:
        self.markup = self.markup.add(entry)


@dataclass(frozen=True)
class Snapshot:
    """The latest assigned version of a node plus the edits submitted
    after it.  An immutable value; queries never block on the checker."""

    version: Version
    node: str
    pending_edits: Tuple[TextEdit, ...]
    assignment: Assignment
    exec_states: Dict[int, ExecState]

    @property
    def is_outdated(self) -> bool:
        return bool(self.pending_edits)

    def current_text(self) -> str:
        return apply_edits(self.version.node_text(self.node),
                           self.pending_edits)

    def command_ranges(self) -> List[Tuple[Command, int, int]]:
        out = []
        pos = 0
        for cmd in self.version.commands(self.node):
            out.append((cmd, pos, pos + len(cmd.source)))
            pos += len(cmd.source)
        return out

    def markup_query(self, start: int, stop: int
                     ) -> List[Tuple[Tuple[int, int], PositionedMarkup]]:
        """Markup intersecting [start, stop) of the *current* text.

        The query range is revert-mapped to version coordinates, answered
        from each command's exec markup store, and result ranges are
        convert-mapped back through the pending edits.  Entries destroyed
        by pending removes are dropped.
        """
        rstart = revert_offset(start, self.pending_edits)
        rstop = revert_offset(stop, self.pending_edits)
        results: List[Tuple[Tuple[int, int], PositionedMarkup]] = []
        for cmd, cstart, cstop in self.command_ranges():
            if not (cstart < rstop and rstart < cstop):
                continue
            eid = self.assignment.exec_of(cmd.id)
            if eid is None:
                continue
            state = self.exec_states.get(eid)
            if state is None:
                continue
            lo = max(rstart - cstart, 0)
            hi = min(rstop - cstart, cstop - cstart)
            for entry in state.markup.query(lo, hi):
                vstart = cstart + entry.start
                vstop = cstart + entry.stop
                nstart = convert_offset(vstart, self.pending_edits)
                nstop = convert_offset(vstop, self.pending_edits)
                if nstart < nstop:
                    results.append(((nstart, nstop), entry))
        return results

    def messages(self, displayed_only: bool = False) -> List[Tuple[Command, Message]]:
        """All messages of the node's commands, in command order."""
        out = []
        for cmd, _, _ in self.command_ranges():
            eid = self.assignment.exec_of(cmd.id)
            state = self.exec_states.get(eid) if eid is not None else None
            if state is None:
                continue
            for msg in list(state.messages):
                if displayed_only and not msg.kind.is_displayed:
                    continue
                out.append((cmd, msg))
        return out
