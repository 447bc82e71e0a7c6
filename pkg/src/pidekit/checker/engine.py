"""Checker engine: executes command spans per version assignment.

Per update, parsing and elaboration run immediately on the protocol
thread; evaluation of each command is an independent task on a worker
pool, since every evaluation depends only on its recorded input state.
Potentially heavy evaluations (anything touching fib) run in a forked
child process so they parallelize across cores and can be cancelled
cooperatively between evaluation steps.

Message emission funnels through one serial-stamping emitter, so serial
numbers are globally unique and strictly increasing per session.
"""
from __future__ import annotations

import multiprocessing
import os
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import BinaryIO, Dict, List, Optional, Sequence, Tuple

from .. import protocol
from ..document import (CANCELLED, FAILED, FINISHED, MALFORMED, RUNNING,
                        Span)
from ..markup import Elem, Message, MessageKind, PositionedMarkup, Text
from .commands import (Also, Begin, CommandPlan, End, Eq, Finally, Have,
                       Let, Malformed, Notepad, ParsedSpan, Print,
                       elaborate, parse_command)
from .exprs import (Cancelled, EvalFailure, Expr, Token, UnboundIdentifier,
                    contains_fib, evaluate, free_vars_all, unparse)
from .render import term_markup

_mp = multiprocessing.get_context("fork" if sys.platform != "win32"
                                  else "spawn")


def _child_eval(conn, expr: Expr, bindings: Dict[str, Expr], cancel) -> None:
    try:
        # background evaluation must never starve interactive threads
        try:
            os.nice(5)
        except OSError:
            pass
        value = evaluate(expr, bindings, cancel.is_set)
        conn.send(("ok", value))
    except Cancelled:
        conn.send(("cancelled", None))
    except EvalFailure as exc:
        conn.send(("error", str(exc)))
    except Exception as exc:  # pragma: no cover - defensive
        conn.send(("error", "evaluation failed: %s" % exc))
    finally:
        conn.close()


@dataclass
class ExecRecord:
    exec_id: int
    command_id: int
    plan: CommandPlan
    span_length: int
    cancel: "threading.Event" = field(default_factory=_mp.Event)
    scheduled: bool = False


class Emitter:
    """Serial-stamping message funnel; one session-wide counter from 1."""

    def __init__(self, stream: BinaryIO):
        self._stream = stream
        self._lock = threading.Lock()
        self._serial = 0

    def send_elem(self, elem: Elem) -> None:
        data = protocol.encode_message_elem(elem)
        with self._lock:
            self._stream.write(data)
            self._stream.flush()

    def message(self, kind: MessageKind, exec_id: int,
                body: Sequence, range: Optional[Tuple[int, int]] = None
                ) -> None:
        with self._lock:
            self._serial += 1
            msg = Message(self._serial, kind, exec_id, tuple(body), range)
            self._stream.write(
                protocol.encode_message_elem(protocol.message_output(msg)))
            self._stream.flush()


def _status_body(status: str, outcome: Optional[str] = None) -> List[Elem]:
    attrs = (("outcome", outcome),) if outcome else ()
    return [Elem(status, attrs)]


class Checker:
    """Back-end process state: commands, versions, assignments, execs."""

    def __init__(self, stream_in: BinaryIO, stream_out: BinaryIO,
                 workers: Optional[int] = None):
        self.stream_in = stream_in
        self.emitter = Emitter(stream_out)
        self.workers = max(1, workers or os.cpu_count() or 1)
        self.pool = ThreadPoolExecutor(max_workers=self.workers)
        self.commands: Dict[int, Span] = {}
        self.parsed: Dict[int, ParsedSpan] = {}
        self.versions: Dict[int, Dict[str, List[int]]] = {0: {}}
        self.assignments: Dict[int, Dict[int, int]] = {0: {}}
        self.execs: Dict[int, ExecRecord] = {}
        self._next_exec = 0

    # --- protocol loop ---------------------------------------------------

    def run(self) -> None:
        self.emitter.send_elem(protocol.ready_output())
        while True:
            elem = protocol.read_message(self.stream_in)
            if elem is None:
                break
            self.handle(elem)
        self.pool.shutdown(wait=False, cancel_futures=True)

    def handle(self, elem: Elem) -> None:
        if elem.name == "define_commands":
            self.handle_define_commands(elem)
        elif elem.name == "update":
            self.handle_update(elem)
        elif elem.name == "remove_versions":
            self.handle_remove_versions(elem)
        elif elem.name == "cancel_exec":
            self.handle_cancel(elem)
        else:
            print("checker: unknown input <%s>" % elem.name,
                  file=sys.stderr, flush=True)

    def handle_define_commands(self, elem: Elem) -> None:
        for child in elem.body:
            if not isinstance(child, Elem) or child.name != "command":
                continue
            cid = int(child.get("id"))
            name = child.get("name")
            source = "".join(t.content for t in child.body
                             if isinstance(t, Text))
            span = Span(name, source)
            self.commands[cid] = span
            self.parsed[cid] = parse_command(span)

    def handle_update(self, elem: Elem) -> None:
        old_id, new_id, edited = protocol.parse_update_input(elem)
        old_version = self.versions.get(old_id, {})
        new_version = dict(old_version)
        new_version.update(edited)
        self.versions[new_id] = new_version
        old_assignment = self.assignments.get(old_id, {})

        assignment: Dict[int, int] = {}
        pairs: List[Tuple[int, int]] = []
        fresh: List[ExecRecord] = []
        for node, cids in new_version.items():
            old_cids = old_version.get(node, [])
            prefix = 0
            while (prefix < min(len(cids), len(old_cids))
                   and cids[prefix] == old_cids[prefix]
                   and old_cids[prefix] in old_assignment):
                prefix += 1
            plans = elaborate([self.parsed[c] for c in cids])
            for k, cid in enumerate(cids):
                if k < prefix:
                    assignment[cid] = old_assignment[cid]
                    pairs.append((cid, old_assignment[cid]))
                else:
                    self._next_exec += 1
                    rec = ExecRecord(self._next_exec, cid, plans[k],
                                     len(self.commands[cid].source))
                    self.execs[rec.exec_id] = rec
                    assignment[cid] = rec.exec_id
                    pairs.append((cid, rec.exec_id))
                    fresh.append(rec)
        self.assignments[new_id] = assignment
        self.emitter.send_elem(protocol.assign_update_output(new_id, pairs))
        # syntax reports are immediate; evaluation goes to the pool
        for rec in fresh:
            self.emit_report(rec)
        for rec in fresh:
            rec.scheduled = True
            self.pool.submit(self._run_exec, rec)

    def handle_remove_versions(self, elem: Elem) -> None:
        keep_ids = {int(c.get("id")) for c in elem.body
                    if isinstance(c, Elem) and c.name == "version"}
        drop = [v for v in self.versions if v not in keep_ids and v != 0]
        for vid in drop:
            self.versions.pop(vid, None)
            self.assignments.pop(vid, None)
        reachable = {eid for assignment in self.assignments.values()
                     for eid in assignment.values()}
        for eid in list(self.execs):
            if eid not in reachable:
                self.execs[eid].cancel.set()
                del self.execs[eid]
        live_commands = {cid for version in self.versions.values()
                         for cids in version.values() for cid in cids}
        for cid in list(self.commands):
            if cid not in live_commands:
                self.commands.pop(cid, None)
                self.parsed.pop(cid, None)

    def handle_cancel(self, elem: Elem) -> None:
        eid = int(elem.get("exec_id"))
        rec = self.execs.get(eid)
        if rec is not None:
            rec.cancel.set()

    # --- execution -------------------------------------------------------

    def emit_report(self, rec: ExecRecord) -> None:
        """One report message classifying every token of the span, plus
        `free` markup over identifiers that are unbound at evaluation."""
        body: List[Elem] = []
        for token in rec.plan.tokens:
            body.append(Elem(token.kind,
                             (("offset", str(token.start)),
                              ("end_offset", str(token.stop)))))
        bindings = rec.plan.state_in.binding_map()
        for expr in _command_exprs(rec.plan):
            for var in free_vars_all(expr, bindings):
                start, stop = var.range
                if 0 <= start <= stop <= rec.span_length:
                    body.append(Elem("free",
                                     (("offset", str(start)),
                                      ("end_offset", str(stop)))))
        if body:
            self.emitter.message(MessageKind.REPORT, rec.exec_id, body)

    def _run_exec(self, rec: ExecRecord) -> None:
        if rec.cancel.is_set():
            self.emitter.message(MessageKind.STATUS, rec.exec_id,
                                 _status_body(CANCELLED))
            return
        self.emitter.message(MessageKind.STATUS, rec.exec_id,
                             _status_body(RUNNING))
        try:
            status, outcome = self._execute(rec)
        except Cancelled:
            status, outcome = CANCELLED, None
        except Exception as exc:  # pragma: no cover - defensive
            self.emitter.message(MessageKind.ERROR, rec.exec_id,
                                 [Text("internal error: %s" % exc)])
            status, outcome = FAILED, None
        self.emitter.message(MessageKind.STATUS, rec.exec_id,
                             _status_body(status, outcome))

    def _evaluate(self, rec: ExecRecord, expr: Expr,
                  bindings: Dict[str, Expr]) -> int:
        """Evaluate, pushing potentially heavy work to a forked child so
        it can run truly in parallel and be cancelled cooperatively."""
        if not contains_fib(expr, bindings):
            return evaluate(expr, bindings, rec.cancel.is_set)
        parent_conn, child_conn = _mp.Pipe()
        proc = _mp.Process(target=_child_eval,
                           args=(child_conn, expr, bindings, rec.cancel),
                           daemon=True)
        proc.start()
        child_conn.close()
        try:
            try:
                verdict, payload = parent_conn.recv()
            except EOFError:
                raise EvalFailure("evaluation worker died")
        finally:
            parent_conn.close()
            proc.join()
        if verdict == "ok":
            return payload
        if verdict == "cancelled":
            raise Cancelled()
        raise EvalFailure(payload)

    def _execute(self, rec: ExecRecord) -> Tuple[str, Optional[str]]:
        """Run one command; returns its terminal (status, outcome)."""
        plan = rec.plan
        cmd = plan.command
        bindings = plan.state_in.binding_map()
        emit = self.emitter

        if isinstance(cmd, Malformed):
            emit.message(MessageKind.ERROR, rec.exec_id,
                         [Text("malformed command: %s" % cmd.reason)],
                         cmd.range)
            return FAILED, None
        if plan.error is not None:
            emit.message(MessageKind.ERROR, rec.exec_id,
                         [Text(plan.error)])
            return FAILED, None
        if isinstance(cmd, (Notepad, Begin, End, Also)):
            return FINISHED, None

        if isinstance(cmd, Let):
            if self._warn_unbound(rec, bindings, cmd.expr):
                return FINISHED, "unchecked"
            try:
                value = self._evaluate(rec, cmd.expr, bindings)
            except EvalFailure as exc:
                emit.message(MessageKind.ERROR, rec.exec_id,
                             [Text(str(exc))])
                return FAILED, None
            emit.message(MessageKind.WRITELN, rec.exec_id,
                         [Text("%s = %d" % (cmd.name, value))])
            return FINISHED, None

        if isinstance(cmd, Print):
            if self._warn_unbound(rec, bindings, cmd.expr):
                return FINISHED, "unchecked"
            try:
                value = self._evaluate(rec, cmd.expr, bindings)
            except EvalFailure as exc:
                emit.message(MessageKind.ERROR, rec.exec_id,
                             [Text(str(exc))])
                return FAILED, None
            emit.message(MessageKind.WRITELN, rec.exec_id,
                         [Text(str(value))])
            return FINISHED, None

        if isinstance(cmd, (Have, Finally)):
            if isinstance(cmd, Have):
                eq: Eq = (cmd.lhs, cmd.rhs)
                ranged = True
            else:
                assert plan.derived is not None
                eq = plan.derived
                # derived expressions carry ranges of other spans
                ranged = False
                emit.message(MessageKind.WRITELN, rec.exec_id,
                             [Text("finally: %s = %s"
                                   % (unparse(eq[0]), unparse(eq[1])))])
            return self._check_equation(rec, bindings, eq, ranged)

        raise AssertionError("unhandled command %r" % cmd)

    def _check_equation(self, rec: ExecRecord, bindings: Dict[str, Expr],
                        eq: Eq, ranged: bool = True
                        ) -> Tuple[str, Optional[str]]:
        unchecked = False
        for side in eq:
            if self._warn_unbound(rec, bindings, side, ranged):
                unchecked = True
        if unchecked:
            return FINISHED, "unchecked"
        values = []
        for side in eq:
            try:
                values.append(self._evaluate(rec, side, bindings))
            except EvalFailure as exc:
                self.emitter.message(MessageKind.ERROR, rec.exec_id,
                                     [Text(str(exc))])
                return FAILED, None
        if values[0] == values[1]:
            self.emitter.message(
                MessageKind.WRITELN, rec.exec_id,
                [Text("ok: %d = %d" % (values[0], values[1]))])
            return FINISHED, None
        self.emitter.message(MessageKind.ERROR, rec.exec_id,
                             [Text("%d ≠ %d" % (values[0], values[1]))])
        return FAILED, None

    def _warn_unbound(self, rec: ExecRecord, bindings: Dict[str, Expr],
                      expr: Expr, ranged: bool = True) -> bool:
        """Emit the term-printout warning when the expression has unbound
        identifiers; the check is then skipped."""
        if not free_vars_all(expr, bindings):
            return False
        rng = expr.range if ranged else None
        self.emitter.message(
            MessageKind.WARNING, rec.exec_id,
            [Text("Term: "), term_markup(expr, bindings)], rng)
        return True


def _command_exprs(plan: CommandPlan) -> List[Expr]:
    """Expressions whose tokens live inside this command's own span."""
    cmd = plan.command
    if isinstance(cmd, Let):
        return [cmd.expr]
    if isinstance(cmd, Print):
        return [cmd.expr]
    if isinstance(cmd, Have):
        return [cmd.lhs, cmd.rhs]
    return []
