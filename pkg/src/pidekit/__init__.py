"""pidekit: a prover-IDE kernel in miniature.

The package splits a document-oriented editing session from a checker
process: the session side keeps a versioned text model and accumulated
markup, the checker side parses and evaluates notepad commands, and the
two talk over an asynchronous byte protocol.
"""
from .document import (
    Insert,
    Remove,
    Snapshot,
    TextEdit,
    Version,
    apply_edits,
    convert_offset,
    revert_offset,
)
from .markup import (
    Elem,
    Message,
    MessageKind,
    PositionedMarkup,
    Text,
    text_content,
    xml_dump,
    xml_parse,
)
from .pretty import DEFAULT_MARGIN, PBlock, PBreak, PText, format, format_markup
from .session import Session, SessionError
from .yxml import YxmlError, YxmlParseError

__all__ = [
    "DEFAULT_MARGIN",
    "Elem",
    "Insert",
    "Message",
    "MessageKind",
    "PBlock",
    "PBreak",
    "PText",
    "PositionedMarkup",
    "Remove",
    "Session",
    "SessionError",
    "Snapshot",
    "Text",
    "TextEdit",
    "Version",
    "YxmlError",
    "YxmlParseError",
    "apply_edits",
    "convert_offset",
    "format",
    "format_markup",
    "revert_offset",
    "text_content",
    "xml_dump",
    "xml_parse",
]

__version__ = "0.1.0"
