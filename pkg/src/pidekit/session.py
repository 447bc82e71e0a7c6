"""Front-end session: the public API over the private checker protocol.

The public surface is deliberately small: submit edits, take snapshots,
remove versions, cancel execs, shut down.  All session-state mutation is
serialized through one lock (the single writer); snapshots are immutable
values that any number of readers may query concurrently.  Neither side
ever blocks the other: inputs go through an unbounded send queue, and
outputs are applied by a dedicated receiver thread.
"""
from __future__ import annotations

import io
import os
import queue
import socket
import subprocess
import sys
import threading
import time
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from . import protocol, yxml
from .document import (Assignment, Command, EMPTY_VERSION, EditError,
                       ExecState, Snapshot, TERMINAL, TextEdit, Version,
                       apply_edits, reparse_node)
from .markup import Elem, Message, MessageKind, PositionedMarkup, Text


class SessionError(Exception):
    pass


class DocumentState:
    """Session-side tables: versions, assignments, exec states, edit log.

    Pure bookkeeping with no I/O; `submit_edits` returns the protocol
    inputs to transmit and `handle_output` applies one decoded checker
    output.  The Session wraps this with the lock and the wires.
    """

    def __init__(self):
        self.versions: Dict[int, Version] = {0: EMPTY_VERSION}
        self.assignments: Dict[int, Assignment] = {0: Assignment(0, ())}
        self.exec_states: Dict[int, ExecState] = {}
        # edits that produced each version, per node (versions are linear)
        self.edit_log: Dict[int, Dict[str, Tuple[TextEdit, ...]]] = {0: {}}
        self.version_order: List[int] = [0]
        self.tip_id = 0
        self.latest_assigned = 0
        self._next_version = 0
        self._next_command = 0
        self._buffered: Dict[int, List[Message]] = {}
        self.exec_command: Dict[int, int] = {}
        self.reused_execs = 0
        self.fresh_execs = 0
        self.exec_timing: Dict[int, List[float]] = {}
        self.diagnostics: List[str] = []

    # --- edits -----------------------------------------------------------

    def tip(self) -> Version:
        return self.versions[self.tip_id]

    def submit_edits(self, batches: Sequence[Tuple[str, Sequence[TextEdit]]]
                     ) -> Tuple[Version, List[Elem]]:
        """Apply one multi-node edit batch atomically as a new version.

        Returns the new version and the protocol inputs to send.  Bad
        edits raise EditError and no new version is created.
        """
        old = self.tip()
        new_nodes: Dict[str, Tuple[Command, ...]] = dict(old.nodes)
        defined: List[Command] = []
        changed: Dict[str, List[int]] = {}
        edits_by_node: Dict[str, Tuple[TextEdit, ...]] = {}
        for node, edits in batches:
            edits = tuple(edits)
            old_cmds = new_nodes.get(node, ())
            text = apply_edits("".join(c.source for c in old_cmds), edits)
            if "\x05" in text or "\x06" in text:
                raise EditError("text may not contain YXML control bytes")
            cmds, _removed, inserted = reparse_node(
                old_cmds, text, self._alloc_command)
            new_nodes[node] = cmds
            defined.extend(inserted)
            changed[node] = [c.id for c in cmds]
            prev = edits_by_node.get(node, ())
            edits_by_node[node] = prev + edits
        self._next_version += 1
        version = Version(self._next_version, tuple(new_nodes.items()))
        self.versions[version.id] = version
        self.edit_log[version.id] = edits_by_node
        self.version_order.append(version.id)
        self.tip_id = version.id
        inputs = []
        if defined:
            inputs.append(protocol.define_commands_input(defined))
        inputs.append(protocol.update_input(old.id, version.id, changed))
        return version, inputs

    def _alloc_command(self) -> int:
        self._next_command += 1
        return self._next_command

    # --- checker output --------------------------------------------------

    def handle_output(self, elem: Elem) -> None:
        """Apply one decoded checker output; malformed payloads are logged
        to diagnostics and skipped (robustness over strictness)."""
        try:
            if elem.name == "ready":
                return
            if elem.name == "assign_update":
                self._apply_assign(elem)
            elif elem.name == "message":
                self._apply_message(protocol.parse_message_output(elem))
            else:
                self.diagnostics.append("unknown output <%s>" % elem.name)
        except Exception as exc:
            self.diagnostics.append("malformed output: %s" % exc)

    def _apply_assign(self, elem: Elem) -> None:
        vid, pairs = protocol.parse_assign_update(elem)
        version = self.versions.get(vid)
        if version is None:
            self.diagnostics.append("assign_update for unknown version %d"
                                    % vid)
            return
        span_lengths = {c.id: len(c.source)
                        for _, cmds in version.nodes for c in cmds}
        self.assignments[vid] = Assignment(vid, tuple(pairs))
        for cid, eid in pairs:
            self.exec_command[eid] = cid
            if eid not in self.exec_states:
                self.exec_states[eid] = ExecState(eid,
                                                  span_lengths.get(cid, 0))
                self.fresh_execs += 1
                for msg in self._buffered.pop(eid, []):
                    self._deliver(self.exec_states[eid], msg)
            else:
                self.reused_execs += 1
        if vid > self.latest_assigned:
            self.latest_assigned = vid

    def _apply_message(self, msg: Message) -> None:
        state = self.exec_states.get(msg.exec_id)
        if state is None:
            # assignment and first outputs race by design: buffer
            self._buffered.setdefault(msg.exec_id, []).append(msg)
            return
        self._deliver(state, msg)

    def _deliver(self, state: ExecState, msg: Message) -> None:
        state.add_message(msg)
        if msg.kind is MessageKind.STATUS:
            for part in msg.body:
                if isinstance(part, Elem) and part.name in TERMINAL + ("running",):
                    state.set_status(part.name, part.get("outcome"))
                    timing = self.exec_timing.setdefault(state.exec_id, [])
                    timing.append(time.monotonic())
        elif msg.kind is MessageKind.REPORT:
            for part in msg.body:
                if not isinstance(part, Elem):
                    continue
                start = part.get("offset")
                stop = part.get("end_offset")
                if start is None or stop is None:
                    self.diagnostics.append(
                        "report markup without offsets: <%s>" % part.name)
                    continue
                attrs = tuple((k, v) for k, v in part.attrs
                              if k not in ("offset", "end_offset"))
                state.add_markup(PositionedMarkup(
                    int(start), int(stop), part.name, attrs))

    # --- queries ---------------------------------------------------------

    def pending_edits(self, node: str, since_version: int
                      ) -> Tuple[TextEdit, ...]:
        out: List[TextEdit] = []
        after = False
        for vid in self.version_order:
            if after:
                out.extend(self.edit_log.get(vid, {}).get(node, ()))
            if vid == since_version:
                after = True
        return tuple(out)

    def snapshot(self, node: str) -> Snapshot:
        version = self.versions[self.latest_assigned]
        assignment = self.assignments.get(self.latest_assigned,
                                          Assignment(self.latest_assigned, ()))
        return Snapshot(version, node,
                        self.pending_edits(node, version.id),
                        assignment, self.exec_states)

    def is_quiescent(self) -> bool:
        if self.latest_assigned != self.tip_id:
            return False
        assignment = self.assignments.get(self.tip_id)
        if assignment is None:
            return False
        for _cid, eid in assignment.command_to_exec:
            state = self.exec_states.get(eid)
            if state is None or not state.is_terminal:
                return False
        return True

    def tip_exec_ids(self) -> List[int]:
        assignment = self.assignments.get(self.tip_id)
        if assignment is None:
            return []
        return [eid for _cid, eid in assignment.command_to_exec]

    # --- history GC ------------------------------------------------------

    def remove_versions(self, keep: Set[int]) -> Elem:
        """Drop all versions outside `keep` plus everything only they
        reach; returns the protocol input to forward."""
        if self.tip_id not in keep:
            raise SessionError("cannot drop the tip version")
        if self.latest_assigned not in keep:
            raise SessionError("cannot drop the latest assigned version")
        for vid in list(self.versions):
            if vid not in keep:
                del self.versions[vid]
                self.assignments.pop(vid, None)
                self.edit_log.pop(vid, None)
        self.version_order = [v for v in self.version_order
                              if v in self.versions]
        reachable = {eid for a in self.assignments.values()
                     for _c, eid in a.command_to_exec}
        for eid in list(self.exec_states):
            if eid not in reachable:
                del self.exec_states[eid]
                self.exec_command.pop(eid, None)
        return protocol.remove_versions_input(sorted(keep))


class Session:
    """A live session talking to a spawned checker process."""

    def __init__(self, workers: Optional[int] = None,
                 diagnostics_path: Optional[str] = None):
        self.state = DocumentState()
        self.lock = threading.RLock()
        self.changed = threading.Condition(self.lock)
        self.change_count = 0
        self.alive = False
        self._send_queue: "queue.Queue[Optional[bytes]]" = queue.Queue()
        self._diagnostics_path = diagnostics_path
        self._spawn(workers)

    def _spawn(self, workers: Optional[int]) -> None:
        ours, theirs = socket.socketpair()
        env = dict(os.environ)
        if workers is not None:
            env["PIDE_WORKERS"] = str(workers)
        self.process = subprocess.Popen(
            [sys.executable, "-m", "pidekit.checker",
             "--fd", str(theirs.fileno())],
            pass_fds=(theirs.fileno(),), env=env,
            stdout=subprocess.PIPE, stderr=subprocess.PIPE)
        theirs.close()
        self._conn = ours
        self._stream_in = ours.makefile("rb")
        self._stream_out = ours.makefile("wb")
        self.alive = True
        self._receiver = threading.Thread(target=self._receive_loop,
                                          daemon=True)
        self._sender = threading.Thread(target=self._send_loop, daemon=True)
        self._stdout_drain = threading.Thread(
            target=self._drain, args=(self.process.stdout, "stdout"),
            daemon=True)
        self._stderr_drain = threading.Thread(
            target=self._drain, args=(self.process.stderr, "stderr"),
            daemon=True)
        self._receiver.start()
        self._sender.start()
        self._stdout_drain.start()
        self._stderr_drain.start()

    # --- wires -----------------------------------------------------------

    def _send_loop(self) -> None:
        while True:
            data = self._send_queue.get()
            if data is None:
                break
            try:
                self._stream_out.write(data)
                self._stream_out.flush()
            except (OSError, ValueError):
                break

    def _receive_loop(self) -> None:
        try:
            while True:
                elem = protocol.read_message(self._stream_in)
                if elem is None:
                    break
                with self.changed:
                    self.state.handle_output(elem)
                    self.change_count += 1
                    self.changed.notify_all()
        except protocol.ProtocolError as exc:
            with self.changed:
                self.state.diagnostics.append("protocol error: %s" % exc)
                self.alive = False
                self.changed.notify_all()
            self.process.terminate()
            return
        except (OSError, ValueError):
            pass
        with self.changed:
            self.alive = False
            self.changed.notify_all()

    def _drain(self, pipe, name: str) -> None:
        # raw stdout steps outside the document model: capture it as
        # diagnostics, never let it corrupt the protocol
        for raw in iter(pipe.readline, b""):
            line = "[checker %s] %s" % (name,
                                        raw.decode("utf-8", "replace").rstrip())
            with self.lock:
                self.state.diagnostics.append(line)
            if self._diagnostics_path:
                with open(self._diagnostics_path, "a") as f:
                    f.write(line + "\n")

    def _send_input(self, elem: Elem) -> None:
        if not self.alive:
            raise SessionError("session is dead")
        self._send_queue.put(protocol.encode_message_elem(elem))

    # --- public API ------------------------------------------------------

    def edit(self, node: str, edits: Sequence[TextEdit]) -> int:
        return self.edit_batch([(node, edits)])

    def edit_batch(self, batches: Sequence[Tuple[str, Sequence[TextEdit]]]
                   ) -> int:
        """Submit edits; returns the new version id without waiting for
        any checker response."""
        if not self.alive:
            raise SessionError("session is dead")
        with self.changed:
            version, inputs = self.state.submit_edits(batches)
            for elem in inputs:
                self._send_input(elem)
            self.change_count += 1
            self.changed.notify_all()
        return version.id

    def snapshot(self, node: str) -> Snapshot:
        with self.lock:
            return self.state.snapshot(node)

    def cancel_exec(self, exec_id: int) -> None:
        self._send_input(protocol.cancel_exec_input(exec_id))

    def remove_versions(self, keep: Set[int]) -> None:
        with self.lock:
            elem = self.state.remove_versions(set(keep))
        self._send_input(elem)

    def await_quiescent(self, timeout: Optional[float] = None) -> bool:
        """Block until every exec of the tip version is terminal."""
        deadline = None if timeout is None else time.monotonic() + timeout
        with self.changed:
            while True:
                if self.state.is_quiescent():
                    return True
                if not self.alive:
                    raise SessionError("checker died before quiescence")
                remaining = None
                if deadline is not None:
                    remaining = deadline - time.monotonic()
                    if remaining <= 0:
                        return False
                self.changed.wait(remaining)

    def wait_change(self, last_count: int,
                    timeout: Optional[float] = None) -> int:
        """Block until the state changes past `last_count`; returns the
        current change counter (service push loops poll this)."""
        deadline = None if timeout is None else time.monotonic() + timeout
        with self.changed:
            while self.change_count <= last_count and self.alive:
                remaining = None
                if deadline is not None:
                    remaining = deadline - time.monotonic()
                    if remaining <= 0:
                        break
                self.changed.wait(remaining)
            return self.change_count

    def close(self, timeout: float = 2.0) -> None:
        with self.lock:
            self.alive = False
        self._send_queue.put(None)
        try:
            self._stream_out.close()
            self._conn.shutdown(socket.SHUT_WR)
        except OSError:
            pass
        try:
            self.process.wait(timeout=timeout)
        except subprocess.TimeoutExpired:
            self.process.kill()
            self.process.wait()
        try:
            self._conn.close()
        except OSError:
            pass

    def __enter__(self) -> "Session":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
