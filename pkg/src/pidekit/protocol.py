"""Private byte-channel protocol between session and checker.

Chunks are framed as ASCII-decimal payload length, one newline byte,
then exactly that many payload bytes.  Every chunk payload is the YXML
encoding of a single element whose name is the protocol message name.

Inputs (session -> checker): define_commands, update, remove_versions,
cancel_exec.  Outputs (checker -> session): ready, assign_update,
message.  This wire format is the compatibility contract between
independent implementations of the two processes; offsets on the wire
are 0-based half-open.
"""
from __future__ import annotations

from typing import BinaryIO, Dict, Iterable, List, Optional, Sequence, Tuple

from . import yxml
from .markup import Elem, MarkupTree, Message, MessageKind, Text


class ProtocolError(Exception):
    """Fatal framing/decoding error; the session terminates the checker."""


def encode_chunk(payload: bytes) -> bytes:
    return b"%d\n%s" % (len(payload), payload)


def decode_chunk(stream: BinaryIO) -> Optional[bytes]:
    """Consume exactly one frame; None on clean EOF at a frame boundary."""
    header = b""
    while True:
        c = stream.read(1)
        if not c:
            if header:
                raise ProtocolError("EOF inside chunk header %r" % header)
            return None
        if c == b"\n":
            break
        if not c.isdigit():
            raise ProtocolError("non-digit byte %r in chunk header" % c)
        header += c
    if not header:
        raise ProtocolError("empty chunk header")
    length = int(header)
    payload = b""
    while len(payload) < length:
        part = stream.read(length - len(payload))
        if not part:
            raise ProtocolError("EOF mid-payload: got %d of %d bytes"
                                % (len(payload), length))
        payload += part
    return payload


def encode_message_elem(elem: Elem) -> bytes:
    return encode_chunk(yxml.encode([elem]))


def decode_message_elem(payload: bytes) -> Elem:
    body = yxml.parse(payload)
    if len(body) != 1 or not isinstance(body[0], Elem):
        raise ProtocolError("chunk payload is not a single element")
    return body[0]


def read_message(stream: BinaryIO) -> Optional[Elem]:
    payload = decode_chunk(stream)
    if payload is None:
        return None
    return decode_message_elem(payload)


# --- session -> checker --------------------------------------------------

def define_commands_input(commands: Iterable) -> Elem:
    body = tuple(
        Elem("command", (("id", str(c.id)), ("name", c.name)),
             (Text(c.source),) if c.source else ())
        for c in commands)
    return Elem("define_commands", (), body)


def update_input(old_version_id: int, new_version_id: int,
                 node_commands: Dict[str, Sequence[int]]) -> Elem:
    nodes = tuple(
        Elem("node", (("name", name),),
             tuple(Elem("cmd", (("id", str(cid)),)) for cid in cids))
        for name, cids in node_commands.items())
    return Elem("update",
                (("old_version_id", str(old_version_id)),
                 ("new_version_id", str(new_version_id))), nodes)


def remove_versions_input(version_ids: Iterable[int]) -> Elem:
    return Elem("remove_versions", (),
                tuple(Elem("version", (("id", str(v)),))
                      for v in version_ids))


def cancel_exec_input(exec_id: int) -> Elem:
    return Elem("cancel_exec", (("exec_id", str(exec_id)),))


# --- checker -> session --------------------------------------------------

def ready_output() -> Elem:
    return Elem("ready")


def assign_update_output(version_id: int,
                         pairs: Sequence[Tuple[int, int]]) -> Elem:
    return Elem("assign_update", (("version_id", str(version_id)),),
                tuple(Elem("assign",
                           (("command", str(c)), ("exec", str(e))))
                      for c, e in pairs))


def message_output(msg: Message) -> Elem:
    attrs = [("kind", msg.kind.value), ("serial", str(msg.serial)),
             ("exec_id", str(msg.exec_id))]
    if msg.range is not None:
        attrs.append(("offset", str(msg.range[0])))
        attrs.append(("end_offset", str(msg.range[1])))
    return Elem("message", tuple(attrs), msg.body)


def parse_message_output(elem: Elem) -> Message:
    if elem.name != "message":
        raise ProtocolError("not a message element: <%s>" % elem.name)
    kind = elem.get("kind")
    serial = elem.get("serial")
    exec_id = elem.get("exec_id")
    if kind is None or serial is None or exec_id is None:
        raise ProtocolError("message element missing kind/serial/exec_id")
    rng = None
    if elem.get("offset") is not None:
        rng = (int(elem.get("offset")), int(elem.get("end_offset")))
    return Message(int(serial), MessageKind(kind), int(exec_id),
                   elem.body, rng)


def parse_assign_update(elem: Elem) -> Tuple[int, List[Tuple[int, int]]]:
    if elem.name != "assign_update":
        raise ProtocolError("not an assign_update element")
    vid = elem.get("version_id")
    if vid is None:
        raise ProtocolError("assign_update without version_id")
    pairs = []
    for child in elem.body:
        if isinstance(child, Elem) and child.name == "assign":
            pairs.append((int(child.get("command")), int(child.get("exec"))))
    return int(vid), pairs


def parse_update_input(elem: Elem
                       ) -> Tuple[int, int, Dict[str, List[int]]]:
    old_id = int(elem.get("old_version_id"))
    new_id = int(elem.get("new_version_id"))
    nodes: Dict[str, List[int]] = {}
    for child in elem.body:
        if isinstance(child, Elem) and child.name == "node":
            nodes[child.get("name")] = [
                int(c.get("id")) for c in child.body
                if isinstance(c, Elem) and c.name == "cmd"]
    return old_id, new_id, nodes
