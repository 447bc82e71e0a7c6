"""Notepad checker: expressions, command grammar, elaboration, engine."""
import io

import pytest

from pidekit import protocol
from pidekit.document import FAILED, FINISHED, MALFORMED, Span
from pidekit.markup import Elem, MessageKind, Text, text_content
from pidekit.checker.commands import (
    Also,
    Begin,
    CalcState,
    Finally,
    Have,
    Let,
    Malformed,
    Print,
    elaborate,
    parse_command,
)
from pidekit.checker.engine import Checker
from pidekit.checker.exprs import (
    BinOp,
    Call,
    EvalFailure,
    ExprSyntaxError,
    Lit,
    Var,
    contains_fib,
    evaluate,
    fold,
    free_vars_all,
    naive_fib,
    parse_expr_text,
    tokenize,
    unparse,
)
from pidekit.checker.render import BUILTIN_FILE, entity, term_markup


# --- expressions ---------------------------------------------------------

class TestTokenize:
    def test_kinds_and_ranges(self):
        tokens = tokenize('let x = 1 + fib(2) "s"')
        got = [(t.kind, t.text, t.start, t.stop) for t in tokens]
        assert got == [
            ("keyword", "let", 0, 3), ("ident", "x", 4, 5),
            ("operator", "=", 6, 7), ("literal", "1", 8, 9),
            ("operator", "+", 10, 11), ("ident", "fib", 12, 15),
            ("delimiter", "(", 15, 16), ("literal", "2", 16, 17),
            ("delimiter", ")", 17, 18), ("string", '"s"', 19, 22)]

    def test_base_offsets(self):
        tokens = tokenize("x + y", base=10)
        assert [(t.start, t.stop) for t in tokens] == [(10, 11), (12, 13),
                                                       (14, 15)]

    def test_unterminated_string_is_bad(self):
        [t] = tokenize('"oops')
        assert t.kind == "bad"


class TestParseExpr:
    def test_precedence(self):
        expr = parse_expr_text("1 + 2 * 3")
        assert unparse(expr) == "1 + 2 * 3"
        assert isinstance(expr, BinOp) and expr.op == "+"

    def test_parens_and_fib(self):
        expr = parse_expr_text("fib(3) * (1 + 2)")
        assert isinstance(expr, BinOp) and expr.op == "*"
        assert isinstance(expr.left, Call)

    def test_syntax_error_carries_range(self):
        with pytest.raises(ExprSyntaxError) as exc:
            parse_expr_text("1 + + 2")
        start, stop = exc.value.range
        assert 0 <= start <= stop <= 7

    def test_fib_requires_parens(self):
        with pytest.raises(ExprSyntaxError):
            parse_expr_text("fib 3")


class TestEvaluate:
    def test_arithmetic(self):
        assert evaluate(parse_expr_text("2 + 3 * 4"), {}, None) == 14

    def test_bindings_resolve(self):
        env = {"x": Lit(5, (0, 0))}
        assert evaluate(parse_expr_text("x * x"), env, None) == 25

    def test_unbound_raises(self):
        from pidekit.checker.exprs import UnboundIdentifier
        with pytest.raises(UnboundIdentifier):
            evaluate(parse_expr_text("q + 1"), {}, None)

    def test_naive_fib_values(self):
        assert [naive_fib(n) for n in range(8)] == [0, 1, 1, 2, 3, 5, 8, 13]

    def test_fib_evaluates_inside_expression(self):
        assert evaluate(parse_expr_text("fib(10) + 1"), {}, None) == 56


class TestFold:
    def test_constants_fold_but_fib_stays_symbolic(self):
        env = {"x": Lit(2, (0, 0))}
        folded = fold(parse_expr_text("x + 3 + fib(x)"), env)
        assert unparse(folded) == "5 + fib(2)"

    def test_contains_fib_through_bindings(self):
        env = {"h": parse_expr_text("fib(20)")}
        assert contains_fib(parse_expr_text("h + 1"), env)
        assert not contains_fib(parse_expr_text("h + 1"), {})

    def test_free_vars_transitive(self):
        env = {"a": parse_expr_text("b + 1")}
        names = [v.name for v in free_vars_all(parse_expr_text("a + c"), env)]
        assert names == ["b", "c"]


# --- command grammar -----------------------------------------------------

def cmd(source, name=None):
    return parse_command(Span(name or source.split()[0], source)).command


class TestParseCommand:
    def test_bare_commands(self):
        assert isinstance(cmd("begin "), Begin)
        assert isinstance(cmd("also "), Also)
        assert isinstance(cmd("finally"), Finally)

    def test_bare_command_rejects_trailing_tokens(self):
        got = cmd("begin stuff ")
        assert isinstance(got, Malformed)
        assert got.range == (6, 11)

    def test_let(self):
        got = cmd("let x = 1 + 2 ")
        assert isinstance(got, Let) and got.name == "x"
        assert unparse(got.expr) == "1 + 2"

    def test_have_reparses_quoted_equation(self):
        got = cmd('have "x + y = 3" ')
        assert isinstance(got, Have)
        assert unparse(got.lhs) == "x + y" and unparse(got.rhs) == "3"
        # inner token ranges stay span-relative
        assert got.lhs.range[0] >= 6

    def test_have_requires_single_equals(self):
        assert isinstance(cmd('have "x = y = z" '), Malformed)
        assert isinstance(cmd("have x = y "), Malformed)

    def test_print(self):
        got = cmd("print fib(4) ")
        assert isinstance(got, Print)

    def test_malformed_span(self):
        got = parse_command(Span(MALFORMED, "junk ")).command
        assert isinstance(got, Malformed)


class TestElaborate:
    def parse_all(self, *sources):
        return [parse_command(Span(s.split()[0], s)) for s in sources]

    def test_let_folds_into_bindings(self):
        plans = elaborate(self.parse_all("let x = 2 ", "let y = x + 1 ",
                                         "print y "))
        env = plans[2].state_in.binding_map()
        assert unparse(env["y"]) == "3"

    def test_chain_composes_by_transitivity(self):
        plans = elaborate(self.parse_all(
            'have "a + 0 = a" ', "also ", 'have "a = a * 1" ', "finally "))
        derived = plans[3].derived
        assert derived is not None
        assert unparse(derived[0]) == "a + 0"
        assert unparse(derived[1]) == "a * 1"

    def test_also_without_have_errors(self):
        plans = elaborate(self.parse_all("also "))
        assert plans[0].error == "no current calculation"

    def test_mismatch_restarts_chain(self):
        plans = elaborate(self.parse_all(
            'have "a = b" ', "also ", 'have "c = d" ', "also ", "finally "))
        assert plans[3].error is not None  # b does not link to c
        assert plans[4].derived == plans[4].derived
        assert unparse(plans[4].derived[0]) == "c"

    def test_state_in_is_the_prefix_function(self):
        plans = elaborate(self.parse_all("let x = 1 ", "let x = 2 ",
                                         "print x "))
        assert unparse(plans[1].state_in.binding_map()["x"]) == "1"
        assert unparse(plans[2].state_in.binding_map()["x"]) == "2"


# --- rendering -----------------------------------------------------------

class TestRender:
    def test_entity_attribute_vocabulary(self):
        e = entity("+")
        keys = [k for k, _ in e.attrs]
        assert keys == ["ref", "def_offset", "def_end_offset", "def_file",
                        "name", "kind"]
        assert e.get("def_file") == BUILTIN_FILE
        assert e.get("kind") == "constant"

    def test_unbound_term_shape(self):
        expr = parse_expr_text("x + y")
        tree = term_markup(expr, {})
        assert tree.name == "term"
        [blk] = tree.body
        assert blk.name == "block" and blk.get("indent") == "0"
        names = [t.name for t in blk.body if isinstance(t, Elem)]
        assert names == ["hilite", "entity", "break", "hilite"]

    def test_bound_vars_not_highlighted(self):
        expr = parse_expr_text("x + 1")
        tree = term_markup(expr, {"x": Lit(2, (0, 0))})
        assert "hilite" not in [t.name for t in tree.body[0].body
                                if isinstance(t, Elem)]


# --- engine against in-memory streams ------------------------------------

class EngineHarness:
    """Drives a Checker directly, collecting its output messages."""

    def __init__(self, workers=2):
        self.out = io.BytesIO()
        self.checker = Checker(io.BytesIO(), self.out, workers=workers)

    def define(self, commands):
        self.checker.handle(protocol.define_commands_input(commands))

    def update(self, old, new, nodes):
        self.checker.handle(protocol.update_input(old, new, nodes))

    def drain(self):
        self.checker.pool.shutdown(wait=True)
        stream = io.BytesIO(self.out.getvalue())
        elems = []
        while True:
            elem = protocol.read_message(stream)
            if elem is None:
                return elems
            elems.append(elem)

    def messages(self):
        return [protocol.parse_message_output(e) for e in self.drain()
                if e.name == "message"]


class FakeCommand:
    def __init__(self, id, name, source):
        self.id, self.name, self.source = id, name, source


def define_script(harness, sources, start_id=1):
    cmds = [FakeCommand(start_id + k, s.split()[0], s)
            for k, s in enumerate(sources)]
    harness.define(cmds)
    return [c.id for c in cmds]


class TestEngine:
    def test_execution_produces_output_and_statuses(self):
        h = EngineHarness()
        ids = define_script(h, ["let x = 2 ", "print x + 1 "])
        h.update(0, 1, {"n": ids})
        msgs = h.messages()
        texts = [text_content(m.body) for m in msgs
                 if m.kind == MessageKind.WRITELN]
        assert texts == ["x = 2", "3"]
        statuses = [m for m in msgs if m.kind == MessageKind.STATUS]
        assert len(statuses) == 4  # running + terminal per exec

    def test_serials_strictly_increase(self):
        h = EngineHarness()
        ids = define_script(h, ["let a = 1 ", "let b = 2 ", "print a + b "])
        h.update(0, 1, {"n": ids})
        serials = [m.serial for m in h.messages()]
        assert serials == sorted(serials) and len(set(serials)) == len(serials)

    def test_failed_equation(self):
        h = EngineHarness()
        ids = define_script(h, ['have "1 = 2" '])
        h.update(0, 1, {"n": ids})
        msgs = h.messages()
        errors = [text_content(m.body) for m in msgs
                  if m.kind == MessageKind.ERROR]
        assert errors == ["1 ≠ 2"]

    def test_unbound_equation_warns_with_term_markup(self):
        h = EngineHarness()
        ids = define_script(h, ['have "x + y = 0" '])
        h.update(0, 1, {"n": ids})
        warnings = [m for m in h.messages() if m.kind == MessageKind.WARNING]
        assert len(warnings) == 1  # only the lhs has unbound identifiers
        first = warnings[0]
        assert first.range is not None
        assert text_content(first.body).startswith("Term: ")
        term = [t for t in first.body if isinstance(t, Elem)][0]
        assert term.name == "term"

    def test_reports_carry_token_and_free_markup(self):
        h = EngineHarness()
        ids = define_script(h, ["print q "])
        h.update(0, 1, {"n": ids})
        reports = [m for m in h.messages() if m.kind == MessageKind.REPORT]
        [report] = reports
        names = [t.name for t in report.body if isinstance(t, Elem)]
        assert names == ["keyword", "ident", "free"]

    def test_exec_reuse_on_unchanged_prefix(self):
        h = EngineHarness()
        ids = define_script(h, ["let x = 1 ", "print x ", "print x * 2 "])
        h.update(0, 1, {"n": ids})
        first = dict(h.checker.assignments[1])
        ids2 = define_script(h, ["print x * 3 "], start_id=10)
        h.update(1, 2, {"n": ids[:2] + ids2})
        second = h.checker.assignments[2]
        assert second[ids[0]] == first[ids[0]]
        assert second[ids[1]] == first[ids[1]]
        assert second[ids2[0]] not in first.values()
        h.drain()

    def test_remove_versions_drops_unreachable(self):
        h = EngineHarness()
        ids = define_script(h, ["let x = 1 "])
        h.update(0, 1, {"n": ids})
        ids2 = define_script(h, ["let x = 2 "], start_id=5)
        h.update(1, 2, {"n": ids2})
        h.checker.handle(protocol.remove_versions_input([2]))
        assert set(h.checker.versions) == {0, 2}
        reachable = {e for a in h.checker.assignments.values()
                     for e in a.values()}
        assert set(h.checker.execs) == reachable
        h.drain()

    def test_malformed_command_fails_with_range(self):
        h = EngineHarness()
        h.define([FakeCommand(1, MALFORMED, "garbage ")])
        h.update(0, 1, {"n": [1]})
        msgs = h.messages()
        [err] = [m for m in msgs if m.kind == MessageKind.ERROR]
        assert "malformed" in text_content(err.body)
        final = [m for m in msgs if m.kind == MessageKind.STATUS][-1]
        assert final.body[0].name == FAILED
