"""Session service: the session's public API over a local web socket.

Clients connect to ws://host:port/session and exchange binary frames.
Each frame carries exactly one client event: the YXML encoding of a
single element, wrapped in the protocol chunk framing (so the byte codec
is reused rather than inventing a second serialization).

Inbound events:

    <open_node name="..."/>
    <edit node="..."> <insert offset="..">text</insert>
                      <remove offset=".." length=".."/> </edit>
    <query node="..." start=".." stop=".."/>
    <shutdown/>

Outbound events:

    <node_state node=".." outdated="true|false" generation="..">
        <exec exec_id=".." status=".."/>* </node_state>
    <markup_delta node=".." generation=".."> positioned markup </markup_delta>
    <message_feed kind=".." offset=".." end_offset="..">text</message_feed>

Outbound markup uses current-text coordinates (already convert-mapped);
status/report kinds never appear in message_feed.  `generation` counts
the edits the service has applied to the node, so clients can drop
stale deltas.
"""
from __future__ import annotations

import asyncio
import io
import threading
from typing import Dict, List, Optional, Set, Tuple

from . import protocol, yxml
from .document import Insert, Remove, Snapshot, TextEdit
from .markup import Elem, Text, text_content
from .session import Session

PUSH_INTERVAL = 0.03  # outbound deltas are debounced to >= 30 ms


class ClientProtocolError(Exception):
    pass


def encode_event(elem: Elem) -> bytes:
    return protocol.encode_chunk(yxml.encode([elem]))


def decode_event(frame: bytes) -> Elem:
    stream = io.BytesIO(frame)
    payload = protocol.decode_chunk(stream)
    if payload is None or stream.read(1):
        raise ClientProtocolError("frame is not exactly one chunk")
    body = yxml.parse(payload)
    if len(body) != 1 or not isinstance(body[0], Elem):
        raise ClientProtocolError("frame payload is not a single element")
    return body[0]


def parse_edit_event(elem: Elem) -> Tuple[str, List[TextEdit]]:
    node = elem.get("node")
    if node is None:
        raise ClientProtocolError("edit without node")
    edits: List[TextEdit] = []
    for child in elem.body:
        if not isinstance(child, Elem):
            continue
        if child.name == "insert":
            edits.append(Insert(int(child.get("offset")),
                                text_content(child)))
        elif child.name == "remove":
            edits.append(Remove(int(child.get("offset")),
                                int(child.get("length"))))
        else:
            raise ClientProtocolError("unknown edit kind <%s>" % child.name)
    return node, edits


def node_state_event(snapshot: Snapshot, generation: int) -> Elem:
    execs = []
    for _cid, eid in snapshot.assignment.command_to_exec:
        state = snapshot.exec_states.get(eid)
        execs.append(Elem("exec", (("exec_id", str(eid)),
                                   ("status",
                                    state.status if state else "pending"))))
    return Elem("node_state",
                (("node", snapshot.node),
                 ("outdated", "true" if snapshot.is_outdated else "false"),
                 ("generation", str(generation))),
                tuple(execs))


def markup_delta_event(snapshot: Snapshot, generation: int) -> Elem:
    text_len = len(snapshot.current_text())
    entries = []
    for (start, stop), entry in snapshot.markup_query(0, max(text_len, 1)):
        attrs = (("offset", str(start)),
                 ("end_offset", str(stop))) + entry.attrs
        entries.append(Elem(entry.name, attrs))
    return Elem("markup_delta",
                (("node", snapshot.node), ("generation", str(generation))),
                tuple(entries))


def message_feed_events(snapshot: Snapshot) -> List[Elem]:
    events = []
    for cmd, start, _stop in snapshot.command_ranges():
        eid = snapshot.assignment.exec_of(cmd.id)
        state = snapshot.exec_states.get(eid) if eid is not None else None
        if state is None:
            continue
        for msg in list(state.messages):
            if not msg.kind.is_displayed:
                continue
            attrs = [("kind", msg.kind.value), ("serial", str(msg.serial))]
            rng = msg.range or (0, len(cmd.source))
            attrs.append(("offset", str(start + rng[0])))
            attrs.append(("end_offset", str(start + rng[1])))
            events.append(Elem("message_feed", tuple(attrs),
                               (Text(text_content(msg.body)),)))
    return events


class _Client:
    def __init__(self, service: "SessionService", send):
        self.service = service
        self.send = send
        self.open_nodes: Set[str] = set()
        self.sent_serials: Set[int] = set()

    async def handle_frame(self, frame: bytes) -> bool:
        """Apply one inbound event; False requests shutdown."""
        elem = decode_event(frame)
        session = self.service.session
        if elem.name == "open_node":
            node = elem.get("name")
            if node is None:
                raise ClientProtocolError("open_node without name")
            self.open_nodes.add(node)
            await self.push(node)
        elif elem.name == "edit":
            node, edits = parse_edit_event(elem)
            self.open_nodes.add(node)
            self.service.generations[node] = (
                self.service.generations.get(node, 0) + 1)
            session.edit(node, edits)
        elif elem.name == "query":
            node = elem.get("node")
            await self.push(node)
        elif elem.name == "shutdown":
            return False
        else:
            raise ClientProtocolError("unknown event <%s>" % elem.name)
        return True

    async def push(self, node: Optional[str] = None) -> None:
        nodes = [node] if node else sorted(self.open_nodes)
        for name in nodes:
            snapshot = self.service.session.snapshot(name)
            generation = self.service.generations.get(name, 0)
            await self.send(encode_event(node_state_event(snapshot,
                                                          generation)))
            await self.send(encode_event(markup_delta_event(snapshot,
                                                            generation)))
            for event in message_feed_events(snapshot):
                serial = int(event.get("serial"))
                if serial not in self.sent_serials:
                    self.sent_serials.add(serial)
                    await self.send(encode_event(event))


class SessionService:
    """Accepts any number of clients over one live session.

    Inbound edits are forwarded without blocking; outbound deltas are
    pushed whenever exec states change, debounced to PUSH_INTERVAL.  A
    client protocol violation disconnects that client only.
    """

    def __init__(self, session: Session):
        self.session = session
        self.generations: Dict[str, int] = {}
        self._shutdown = asyncio.Event()

    async def handler(self, websocket) -> None:
        path = getattr(getattr(websocket, "request", None), "path", None)
        if path is not None and path.split("?")[0] != "/session":
            await websocket.close(code=4004, reason="unknown endpoint")
            return
        client = _Client(self, websocket.send)
        watcher = asyncio.create_task(self._watch(client))
        try:
            async for frame in websocket:
                if isinstance(frame, str):
                    frame = frame.encode("utf-8")
                if not await client.handle_frame(frame):
                    self._shutdown.set()
                    break
        except (ClientProtocolError, protocol.ProtocolError,
                yxml.YxmlError, ValueError):
            await websocket.close(code=4002, reason="protocol violation")
        finally:
            watcher.cancel()

    async def _watch(self, client: _Client) -> None:
        session = self.session
        last = -1
        while True:
            current = await asyncio.to_thread(session.wait_change, last, 1.0)
            if current != last:
                last = current
                try:
                    await client.push()
                except Exception:
                    return
            await asyncio.sleep(PUSH_INTERVAL)
            if not session.alive:
                return


async def serve_async(session: Session, host: str, port: int,
                      ready: Optional[threading.Event] = None,
                      bound: Optional[list] = None) -> None:
    import websockets.asyncio.server as ws_server

    service = SessionService(session)
    async with ws_server.serve(service.handler, host, port) as server:
        if bound is not None:
            for sock in server.sockets:
                bound.append(sock.getsockname())
        if ready is not None:
            ready.set()
        await service._shutdown.wait()


def serve(session: Session, host: str, port: int,
          ready: Optional[threading.Event] = None,
          bound: Optional[list] = None) -> None:
    """Run the service until a client sends shutdown."""
    asyncio.run(serve_async(session, host, port, ready, bound))
