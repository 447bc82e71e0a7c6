"""Session over a live checker process, plus DocumentState bookkeeping."""
import time

import pytest

from pidekit.document import EditError, Insert, Remove
from pidekit.markup import Elem, Text, text_content
from pidekit.protocol import (
    assign_update_output,
    message_output,
)
from pidekit.markup import Message, MessageKind
from pidekit.session import DocumentState, Session, SessionError


# --- state bookkeeping (no process) --------------------------------------

class TestDocumentState:
    def test_submit_edits_creates_linear_versions(self):
        st = DocumentState()
        v1, inputs = st.submit_edits([("n", [Insert(0, "let x = 1 ")])])
        assert v1.id == 1 and st.tip_id == 1
        assert [e.name for e in inputs] == ["define_commands", "update"]
        v2, _ = st.submit_edits([("n", [Insert(10, "print x")])])
        assert st.version_order == [0, 1, 2]
        assert v2.node_text("n") == "let x = 1 print x"

    def test_bad_edit_leaves_state_untouched(self):
        st = DocumentState()
        with pytest.raises(EditError):
            st.submit_edits([("n", [Insert(5, "x")])])
        assert st.tip_id == 0

    def test_control_bytes_rejected(self):
        st = DocumentState()
        with pytest.raises(EditError):
            st.submit_edits([("n", [Insert(0, "let \x05 = 1")])])

    def test_messages_before_assignment_are_buffered(self):
        st = DocumentState()
        st.submit_edits([("n", [Insert(0, "print 1")])])
        msg = Message(1, MessageKind.WRITELN, 1, (Text("1"),))
        st.handle_output(message_output(msg))
        assert st.exec_states == {}
        st.handle_output(assign_update_output(1, [(1, 1)]))
        assert st.exec_states[1].messages == [msg]

    def test_reuse_counters(self):
        st = DocumentState()
        st.submit_edits([("n", [Insert(0, "let x = 1 print x")])])
        st.handle_output(assign_update_output(1, [(1, 1), (2, 2)]))
        st.submit_edits([("n", [Insert(17, " print x")])])
        st.handle_output(assign_update_output(2, [(1, 1), (2, 2), (3, 3)]))
        assert st.fresh_execs == 3 and st.reused_execs == 2

    def test_snapshot_tracks_pending_edits(self):
        st = DocumentState()
        st.submit_edits([("n", [Insert(0, "print 1")])])
        st.handle_output(assign_update_output(1, [(1, 1)]))
        st.submit_edits([("n", [Insert(0, "x")])])
        snap = st.snapshot("n")
        assert snap.is_outdated
        assert snap.current_text() == "xprint 1"
        assert snap.version.id == 1

    def test_malformed_output_goes_to_diagnostics(self):
        st = DocumentState()
        st.handle_output(Elem("gibberish"))
        st.handle_output(Elem("message", (("kind", "writeln"),)))
        assert len(st.diagnostics) == 2

    def test_remove_versions_walks_reachability(self):
        st = DocumentState()
        for k in range(4):
            st.submit_edits([("n", [Insert(0, "print %d " % k)])])
            st.handle_output(assign_update_output(
                k + 1, [(c.id, 100 + c.id) for c in st.tip().commands("n")]))
        keep = {0, st.tip_id}
        st.remove_versions(keep)
        assert set(st.versions) == keep
        reachable = {eid for a in st.assignments.values()
                     for _c, eid in a.command_to_exec}
        assert set(st.exec_states) == reachable

    def test_tip_version_cannot_be_dropped(self):
        st = DocumentState()
        st.submit_edits([("n", [Insert(0, "print 1")])])
        with pytest.raises(SessionError):
            st.remove_versions({0})


# --- live sessions -------------------------------------------------------

def _node_execs(session, node):
    snap = session.snapshot(node)
    return [(cmd, snap.assignment.exec_of(cmd.id), (start, stop))
            for cmd, start, stop in snap.command_ranges()]


@pytest.fixture(scope="module")
def session():
    with Session(workers=2) as s:
        yield s


class TestLiveSession:
    def test_edit_check_snapshot(self, session):
        session.edit("basic", [Insert(0, "let x = 4 print x * x")])
        assert session.await_quiescent(timeout=30)
        snap = session.snapshot("basic")
        texts = [text_content(m.body)
                 for _c, m in snap.messages(displayed_only=True)]
        assert texts == ["x = 4", "16"]

    def test_markup_accumulates_syntax_reports(self, session):
        session.edit("markup", [Insert(0, "let y = 1 + 2")])
        assert session.await_quiescent(timeout=30)
        snap = session.snapshot("markup")
        names = [e.name for _rng, e in snap.markup_query(0, 13)]
        assert names == ["keyword", "ident", "operator", "literal",
                         "operator", "literal"]
        [(rng, _e)] = [x for x in snap.markup_query(0, 13)
                       if x[1].name == "ident"]
        assert rng == (4, 5)

    def test_incremental_edit_reuses_prefix(self, session):
        session.edit("reuse", [Insert(0, "let a = 1 let b = 2 print a ")])
        assert session.await_quiescent(timeout=30)
        first = {c.id: s for c, s, _ in _node_execs(session, "reuse")}
        session.edit("reuse", [Insert(28, "print b")])
        assert session.await_quiescent(timeout=30)
        second = _node_execs(session, "reuse")
        assert len(second) == 4
        for cmd, eid, _rng in second[:3]:
            assert first[cmd.id] == eid  # untouched commands keep execs
        assert second[3][1] not in first.values()

    def test_snapshot_during_pending_edit_is_outdated(self, session):
        session.edit("outdated", [Insert(0, "print 7")])
        assert session.await_quiescent(timeout=30)
        session.edit("outdated", [Insert(0, "let q = 1 ")])
        snap = session.snapshot("outdated")
        # the reverted query still answers from the old assignment
        assert snap.current_text() == "let q = 1 print 7"
        assert session.await_quiescent(timeout=30)
        snap2 = session.snapshot("outdated")
        assert not snap2.is_outdated

    def test_error_messages_surface(self, session):
        session.edit("errors", [Insert(0, 'have "1 = 2"')])
        assert session.await_quiescent(timeout=30)
        snap = session.snapshot("errors")
        kinds = [m.kind.value for _c, m in snap.messages(displayed_only=True)]
        assert kinds == ["error"]

    def test_cancel_exec_reaches_terminal_state(self, session):
        session.edit("cancel", [Insert(0, "print fib(90)")])
        deadline = time.monotonic() + 10
        eid = None
        while time.monotonic() < deadline and eid is None:
            with session.lock:
                ids = session.state.tip_exec_ids()
                if ids:
                    eid = ids[-1]
            time.sleep(0.01)
        assert eid is not None
        session.cancel_exec(eid)
        assert session.await_quiescent(timeout=30)
        snap = session.snapshot("cancel")
        eid2 = snap.assignment.command_to_exec[-1][1]
        assert snap.exec_states[eid2].status == "cancelled"


def test_close_terminates_checker_within_two_seconds():
    s = Session(workers=1)
    s.edit("n", [Insert(0, "print 1")])
    t0 = time.monotonic()
    s.close()
    assert time.monotonic() - t0 < 2.5
    assert s.process.poll() is not None


def test_dead_session_raises():
    s = Session(workers=1)
    s.close()
    with pytest.raises(SessionError):
        s.edit("n", [Insert(0, "print 1")])
