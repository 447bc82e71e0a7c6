"""Markup trees, messages, positioned stores, and the XML dump."""
import pytest

from pidekit.markup import (
    Elem,
    MarkupError,
    MarkupStore,
    Message,
    MessageKind,
    PositionedMarkup,
    StoreBoundsError,
    Text,
    text_content,
    xml_dump,
    xml_parse,
)


def elem(name, attrs=(), body=()):
    return Elem(name, tuple(attrs), tuple(body))


class TestTrees:
    def test_text_content_concatenates_leaves(self):
        tree = elem("a", (), (Text("x"), elem("b", (), (Text("y"),)),
                              Text("z")))
        assert text_content(tree) == "xyz"
        assert text_content([tree, Text("!")]) == "xyz!"

    def test_get_returns_first_match(self):
        e = elem("a", (("k", "1"), ("k", "2")))
        assert e.get("k") == "1"
        assert e.get("missing") is None

    def test_empty_name_rejected(self):
        with pytest.raises(MarkupError):
            elem("")

    def test_control_bytes_rejected_in_names_and_attrs(self):
        with pytest.raises(MarkupError):
            elem("a\x05")
        with pytest.raises(MarkupError):
            elem("a", (("k\x06", "v"),))
        with pytest.raises(MarkupError):
            elem("a", (("k", "v\x05"),))

    def test_equals_sign_rejected_in_attr_keys(self):
        # keys must survive the key=value wire split
        with pytest.raises(MarkupError):
            elem("a", (("k=x", "v"),))
        elem("a", (("k", "v=x"),))  # values may contain '='


class TestMessages:
    def test_kinds_partition_displayed(self):
        displayed = {k for k in MessageKind if k.is_displayed}
        assert displayed == {MessageKind.WRITELN, MessageKind.WARNING,
                             MessageKind.ERROR}

    def test_serial_must_be_positive(self):
        with pytest.raises(MarkupError):
            Message(serial=0, kind=MessageKind.WRITELN, exec_id=1, body=())

    def test_range_is_optional(self):
        m = Message(serial=1, kind=MessageKind.ERROR, exec_id=2,
                    body=(Text("boom"),), range=(0, 4))
        assert m.range == (0, 4)


class TestStore:
    def test_add_returns_extended_store_and_preserves_old(self):
        store = MarkupStore(10)
        bigger = store.add(PositionedMarkup(0, 3, "keyword", ()))
        assert len(store) == 0
        assert len(bigger) == 1

    def test_query_intersection_in_insertion_order(self):
        store = (MarkupStore(10)
                 .add(PositionedMarkup(0, 4, "a", ()))
                 .add(PositionedMarkup(2, 6, "b", ()))
                 .add(PositionedMarkup(8, 10, "c", ())))
        assert [e.name for e in store.query(3, 8)] == ["a", "b"]
        assert [e.name for e in store.query(0, 10)] == ["a", "b", "c"]
        assert store.query(6, 8) == []

    def test_out_of_bounds_add_rejected(self):
        with pytest.raises(StoreBoundsError):
            MarkupStore(5).add(PositionedMarkup(3, 6, "a", ()))

    def test_shared_tail_isolation(self):
        base = MarkupStore(10).add(PositionedMarkup(0, 1, "a", ()))
        left = base.add(PositionedMarkup(1, 2, "b", ()))
        right = base.add(PositionedMarkup(2, 3, "c", ()))
        assert [e.name for e in left] == ["a", "b"]
        assert [e.name for e in right] == ["a", "c"]


class TestXml:
    def test_dump_escapes_and_offsets(self):
        tree = elem("warning", (("offset", "1"), ("msg", 'a<b&"c')),
                    (Text("x & y"),))
        text = xml_dump([tree])
        # offsets are published 1-based
        assert 'offset="2"' in text
        assert "&amp;" in text and "&lt;" in text and "&quot;" in text

    def test_parse_inverts_dump(self):
        tree = elem("block", (("indent", "2"),),
                    (Text("x <> y"),
                     elem("entity", (("def_offset", "0"), ("name", "plus"))),
                     elem("break", (("width", "1"),), (Text(" "),))))
        assert xml_parse(xml_dump([tree])) == [tree]

    def test_offset_attrs_round_trip_through_rebase(self):
        tree = elem("e", (("offset", "0"), ("end_offset", "3"),
                          ("def_offset", "5"), ("def_end_offset", "7"),
                          ("width", "4")))
        text = xml_dump([tree])
        assert 'offset="1"' in text and 'end_offset="4"' in text
        assert 'width="4"' in text  # only the four offset attrs shift
        assert xml_parse(text) == [tree]

    def test_parse_rejects_mismatched_close(self):
        with pytest.raises(MarkupError):
            xml_parse("<a><b></a></b>")
