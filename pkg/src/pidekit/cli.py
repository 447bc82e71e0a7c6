"""Command-line harness: replay edit scripts, dump markup, benchmark.

Edit-script format (line-oriented UTF-8):

    node <name>
    insert <offset> <quoted-string>      # escapes: \\n \\t \\\\ \\"
    remove <offset> <length>
    await-quiescent
    snapshot <start> <stop>

Exit codes: 0 success, 1 checker failure, 2 usage/script error.
"""
from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

from . import yxml
from .document import Insert, Remove, Snapshot
from .markup import Elem, MarkupTree, Message, Text, text_content, xml_dump
from .pretty import DEFAULT_MARGIN
from .session import Session, SessionError


class ScriptError(Exception):
    def __init__(self, message: str, line: int):
        super().__init__("line %d: %s" % (line, message))
        self.line = line


@dataclass(frozen=True)
class NodeLine:
    name: str


@dataclass(frozen=True)
class EditLine:
    node: str
    edit: Union[Insert, Remove]


@dataclass(frozen=True)
class AwaitLine:
    pass


@dataclass(frozen=True)
class SnapshotLine:
    node: str
    start: int
    stop: int


ScriptLine = Union[NodeLine, EditLine, AwaitLine, SnapshotLine]


def _unquote(raw: str, line: int) -> str:
    if len(raw) < 2 or not raw.startswith('"') or not raw.endswith('"'):
        raise ScriptError("expected a quoted string", line)
    out = []
    i = 1
    while i < len(raw) - 1:
        c = raw[i]
        if c == "\\":
            i += 1
            if i >= len(raw) - 1:
                raise ScriptError("dangling backslash", line)
            esc = raw[i]
            mapped = {"n": "\n", "t": "\t", "\\": "\\", '"': '"'}.get(esc)
            if mapped is None:
                raise ScriptError("unknown escape \\%s" % esc, line)
            out.append(mapped)
        else:
            out.append(c)
        i += 1
    return "".join(out)


def parse_script(text: str) -> List[ScriptLine]:
    lines: List[ScriptLine] = []
    node = "scratch"
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split(None, 1)
        word = parts[0]
        rest = parts[1] if len(parts) > 1 else ""
        if word == "node":
            if not rest:
                raise ScriptError("node requires a name", lineno)
            node = rest.strip()
            lines.append(NodeLine(node))
        elif word == "insert":
            sub = rest.split(None, 1)
            if len(sub) != 2 or not sub[0].isdigit():
                raise ScriptError("expected: insert <offset> <string>", lineno)
            lines.append(EditLine(node,
                                  Insert(int(sub[0]), _unquote(sub[1].strip(),
                                                               lineno))))
        elif word == "remove":
            sub = rest.split()
            if len(sub) != 2 or not all(s.isdigit() for s in sub):
                raise ScriptError("expected: remove <offset> <length>", lineno)
            lines.append(EditLine(node, Remove(int(sub[0]), int(sub[1]))))
        elif word == "await-quiescent":
            lines.append(AwaitLine())
        elif word == "snapshot":
            sub = rest.split()
            if len(sub) != 2 or not all(s.isdigit() for s in sub):
                raise ScriptError("expected: snapshot <start> <stop>", lineno)
            lines.append(SnapshotLine(node, int(sub[0]), int(sub[1])))
        else:
            raise ScriptError("unknown directive %r" % word, lineno)
    return lines


# --- dumping -------------------------------------------------------------

VOLATILE_ATTRS = ("serial", "exec_id", "id")


def _strip_volatile(tree: MarkupTree) -> MarkupTree:
    if isinstance(tree, Text):
        return tree
    attrs = tuple((k, v) for k, v in tree.attrs if k not in VOLATILE_ATTRS)
    return Elem(tree.name, attrs,
                tuple(_strip_volatile(t) for t in tree.body))


def message_to_markup(msg: Message, stable: bool = False) -> Elem:
    attrs: List[Tuple[str, str]] = [("serial", str(msg.serial))]
    if msg.range is not None:
        attrs.append(("offset", str(msg.range[0])))
        attrs.append(("end_offset", str(msg.range[1])))
    attrs.append(("exec_id", str(msg.exec_id)))
    elem = Elem(msg.kind.value, tuple(attrs), msg.body)
    return _strip_volatile(elem) if stable else elem


def snapshot_to_markup(snapshot: Snapshot, start: int, stop: int,
                       stable: bool = False) -> Elem:
    entries = []
    for (estart, estop), entry in snapshot.markup_query(start, stop):
        attrs = (("offset", str(estart)), ("end_offset", str(estop)))
        entries.append(Elem(entry.name, attrs + entry.attrs))
    messages = [message_to_markup(m, stable)
                for _cmd, m in snapshot.messages()]
    body: List[MarkupTree] = []
    if entries:
        body.append(Elem("markup", (),
                         tuple(_strip_volatile(e) if stable else e
                               for e in entries)))
    if messages:
        body.append(Elem("messages", (), tuple(messages)))
    return Elem("snapshot",
                (("node", snapshot.node),
                 ("outdated", "true" if snapshot.is_outdated else "false")),
                tuple(body))


def dump(tree: Elem, fmt: str, margin: int = DEFAULT_MARGIN) -> str:
    """xml and yxml dump the symbolic markup verbatim; text physically
    formats displayed messages against the margin."""
    if fmt == "xml":
        return xml_dump([tree])
    if fmt == "yxml":
        data = yxml.encode([tree])
        return (data.decode("utf-8")
                .replace("\x05", "\\x05").replace("\x06", "\\x06"))
    from .pretty import format_markup
    lines = []
    for part in tree.body:
        if isinstance(part, Elem) and part.name == "messages":
            for msg in part.body:
                if isinstance(msg, Elem) and msg.name in ("writeln",
                                                          "warning", "error"):
                    formatted = format_markup(Elem("m", (), msg.body), margin)
                    lines.append("%s: %s" % (msg.name,
                                             text_content(formatted)))
    return "\n".join(lines)


# --- subcommands ---------------------------------------------------------

def _workers(args) -> Optional[int]:
    env = os.environ.get("PIDE_WORKERS")
    if args.workers is not None:
        return args.workers
    if env and env.isdigit():
        return int(env)
    return None


def run_replay(args) -> int:
    try:
        script = parse_script(open(args.script).read())
    except OSError as exc:
        print("cannot read script: %s" % exc, file=sys.stderr)
        return 2
    except ScriptError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        with Session(workers=_workers(args)) as session:
            for item in script:
                if isinstance(item, EditLine):
                    session.edit(item.node, [item.edit])
                elif isinstance(item, AwaitLine):
                    session.await_quiescent()
                elif isinstance(item, SnapshotLine):
                    snapshot = session.snapshot(item.node)
                    tree = snapshot_to_markup(snapshot, item.start,
                                              item.stop, args.stable)
                    print(dump(tree, args.dump, args.margin), file=out)
    except SessionError as exc:
        print("checker failure: %s" % exc, file=sys.stderr)
        return 1
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _replay_timed(script, workers: Optional[int]) -> dict:
    t0 = time.monotonic()
    with Session(workers=workers) as session:
        for item in script:
            if isinstance(item, EditLine):
                session.edit(item.node, [item.edit])
            elif isinstance(item, AwaitLine):
                session.await_quiescent()
            elif isinstance(item, SnapshotLine):
                session.snapshot(item.node)
        session.await_quiescent()
        wall = time.monotonic() - t0
        with session.lock:
            timing = {eid: list(ts)
                      for eid, ts in session.state.exec_timing.items()}
            reused = session.state.reused_execs
            fresh = session.state.fresh_execs
    per_exec = {eid: ts[-1] - ts[0] for eid, ts in timing.items()
                if len(ts) >= 2}
    return {"wall": wall, "reused": reused, "fresh": fresh,
            "per_exec": per_exec}


def run_bench(args) -> int:
    try:
        script = parse_script(open(args.script).read())
    except (OSError, ScriptError) as exc:
        print(str(exc), file=sys.stderr)
        return 2
    workers = _workers(args) or os.cpu_count() or 1
    try:
        result = _replay_timed(script, workers)
        base = _replay_timed(script, 1) if workers != 1 else result
    except SessionError as exc:
        print("checker failure: %s" % exc, file=sys.stderr)
        return 1
    print("workers=%d wall_time=%.3fs" % (workers, result["wall"]))
    print("execs_run=%d execs_reused=%d" % (result["fresh"],
                                            result["reused"]))
    for eid in sorted(result["per_exec"]):
        print("exec %d: %.3fs" % (eid, result["per_exec"][eid]))
    if workers != 1:
        print("workers=1 wall_time=%.3fs" % base["wall"])
        speedup = base["wall"] / result["wall"] if result["wall"] else 0.0
        print("speedup_vs_1=%.2f" % speedup)
    return 0


def run_serve(args) -> int:
    from .service import serve
    host, _, port = args.listen.rpartition(":")
    if not port.isdigit():
        print("listen address must be host:port", file=sys.stderr)
        return 2
    with Session(workers=_workers(args)) as session:
        try:
            serve(session, host or "127.0.0.1", int(port))
        except KeyboardInterrupt:
            pass
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="pide", description="Prover-IDE kernel harness")
    sub = parser.add_subparsers(dest="command", required=True)

    replay = sub.add_parser("replay", help="replay an edit script")
    replay.add_argument("script")
    replay.add_argument("--stable", action="store_true",
                        help="exclude volatile attributes from dumps")
    replay.add_argument("--workers", type=int, default=None)
    replay.add_argument("--dump", choices=("xml", "yxml", "text"), default="xml")
    replay.add_argument("--out", default=None)
    replay.add_argument("--margin", type=int, default=DEFAULT_MARGIN)

    bench = sub.add_parser("bench", help="replay with timing")
    bench.add_argument("script")
    bench.add_argument("--workers", type=int, default=None)

    serve = sub.add_parser("serve", help="run the session service")
    serve.add_argument("--listen", default="127.0.0.1:8777")
    serve.add_argument("--workers", type=int, default=None)

    args = parser.parse_args(argv)
    if args.command == "replay":
        return run_replay(args)
    if args.command == "bench":
        return run_bench(args)
    return run_serve(args)


if __name__ == "__main__":
    sys.exit(main())
