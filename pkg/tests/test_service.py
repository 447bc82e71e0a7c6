"""WebSocket session service: event codec and live client behaviour."""
import asyncio
import threading
import time

import pytest

from pidekit.document import Insert
from pidekit.markup import Elem, Text
from pidekit.service import (
    ClientProtocolError,
    decode_event,
    encode_event,
    parse_edit_event,
    serve,
)
from pidekit.session import Session


def elem(name, attrs=(), body=()):
    return Elem(name, tuple(attrs), tuple(body))


class TestEventCodec:
    def test_round_trip(self):
        ev = elem("edit", (("node", "n"),),
                  (elem("insert", (("offset", "0"),), (Text("hi"),)),))
        assert decode_event(encode_event(ev)) == ev

    def test_trailing_bytes_rejected(self):
        with pytest.raises(ClientProtocolError):
            decode_event(encode_event(elem("query")) + b"junk")

    def test_bare_text_payload_rejected(self):
        from pidekit.protocol import encode_chunk
        with pytest.raises(ClientProtocolError):
            decode_event(encode_chunk(b"not yxml"))

    def test_parse_edit_event(self):
        ev = elem("edit", (("node", "doc"),),
                  (elem("insert", (("offset", "2"),), (Text("ab"),)),
                   elem("remove", (("offset", "0"), ("length", "1")))))
        node, edits = parse_edit_event(ev)
        assert node == "doc"
        assert edits[0] == Insert(2, "ab")
        assert edits[1].offset == 0 and edits[1].length == 1

    def test_edit_without_node_rejected(self):
        with pytest.raises(ClientProtocolError):
            parse_edit_event(elem("edit"))


# --- live service --------------------------------------------------------

@pytest.fixture
def server():
    session = Session(workers=1)
    ready = threading.Event()
    bound = []
    thread = threading.Thread(target=serve,
                              args=(session, "127.0.0.1", 0, ready, bound),
                              daemon=True)
    thread.start()
    assert ready.wait(10)
    try:
        yield session, bound[0][1], thread
    finally:
        session.close()


async def connect(port):
    import websockets.asyncio.client as ws_client
    return await ws_client.connect("ws://127.0.0.1:%d/session" % port)


async def collect(ws, want, timeout=20.0):
    """Receive events until every kind in `want` has appeared."""
    seen = {}
    deadline = time.monotonic() + timeout
    while not want <= set(seen):
        remaining = deadline - time.monotonic()
        assert remaining > 0, "timed out; saw %s" % sorted(seen)
        frame = await asyncio.wait_for(ws.recv(), timeout=remaining)
        ev = decode_event(frame)
        seen.setdefault(ev.name, []).append(ev)
    return seen


class TestLiveService:
    def test_edit_streams_state_markup_and_messages(self, server):
        session, port, _thread = server

        async def go():
            ws = await connect(port)
            await ws.send(encode_event(elem("open_node", (("name", "d"),))))
            await ws.send(encode_event(
                elem("edit", (("node", "d"),),
                     (elem("insert", (("offset", "0"),),
                           (Text("let x = 2 print x"),)),))))
            seen = await collect(
                ws, {"node_state", "markup_delta", "message_feed"})
            await ws.close()
            return seen

        seen = asyncio.run(go())
        kinds = {ev.get("kind") for ev in seen["message_feed"]}
        assert kinds <= {"writeln", "warning", "error"}
        state = seen["node_state"][-1]
        assert state.get("node") == "d"
        statuses = {c.get("status") for c in state.body}
        assert statuses <= {"pending", "running", "finished", "failed",
                            "cancelled"}

    def test_markup_delta_matches_snapshot_query(self, server):
        session, port, _thread = server

        async def go():
            ws = await connect(port)
            await ws.send(encode_event(
                elem("edit", (("node", "m"),),
                     (elem("insert", (("offset", "0"),),
                           (Text("let z = 1"),)),))))
            session.await_quiescent(timeout=20)
            await ws.send(encode_event(elem("query", (("node", "m"),))))
            seen = await collect(ws, {"markup_delta"})
            await ws.close()
            return seen["markup_delta"][-1]

        delta = asyncio.run(go())
        snap = session.snapshot("m")
        expected = [(str(rng[0]), str(rng[1]), e.name)
                    for rng, e in snap.markup_query(0, 9)]
        got = [(c.get("offset"), c.get("end_offset"), c.name)
               for c in delta.body]
        assert got == expected

    def test_protocol_violation_disconnects_only_that_client(self, server):
        session, port, _thread = server

        async def go():
            bad = await connect(port)
            good = await connect(port)
            await good.send(encode_event(
                elem("open_node", (("name", "g"),))))
            await collect(good, {"node_state"})
            await bad.send(b"garbage that is not a chunk")
            import websockets.exceptions
            with pytest.raises(websockets.exceptions.ConnectionClosed):
                for _ in range(10):
                    await asyncio.wait_for(bad.recv(), timeout=5)
            # the well-behaved client still gets served
            await good.send(encode_event(elem("query", (("node", "g"),))))
            await collect(good, {"markup_delta"})
            await good.close()

        asyncio.run(go())
        assert session.alive

    def test_shutdown_stops_server(self, server):
        session, port, thread = server

        async def go():
            ws = await connect(port)
            await ws.send(encode_event(elem("shutdown")))
            await ws.close()

        asyncio.run(go())
        thread.join(timeout=5)
        assert not thread.is_alive()
