import { describe, expect, it } from "vitest";

import { decodeChunk, encodeChunk, ChunkError } from "../src/chunk.js";
import {
  EventError,
  decodeEvent,
  editEvent,
  encodeEvent,
  openNodeEvent,
} from "../src/events.js";
import { elem, parse, text } from "../src/yxml.js";

describe("chunk framing", () => {
  it("prefixes the decimal length and a newline", () => {
    const wire = encodeChunk(new TextEncoder().encode("hello"));
    expect(new TextDecoder().decode(wire)).toBe("5\nhello");
  });

  it("round trips", () => {
    const payload = new Uint8Array([1, 2, 0x0a, 0x35, 4]);
    expect(decodeChunk(encodeChunk(payload))).toEqual(payload);
  });

  it("rejects length mismatches and garbage headers", () => {
    expect(() => decodeChunk(new TextEncoder().encode("9\nabc"))).toThrow(
      ChunkError,
    );
    expect(() => decodeChunk(new TextEncoder().encode("x\nabc"))).toThrow(
      ChunkError,
    );
  });
});

describe("client events", () => {
  it("encodes edits as insert/remove children", () => {
    const frame = editEvent("doc", [
      { kind: "insert", offset: 0, text: "let x = 1" },
      { kind: "remove", offset: 4, length: 2 },
    ]);
    const [tree] = parse(decodeChunk(frame));
    expect(tree).toEqual(
      elem("edit", [["node", "doc"]], [
        elem("insert", [["offset", "0"]], [text("let x = 1")]),
        elem("remove", [["offset", "4"], ["length", "2"]]),
      ]),
    );
  });

  it("encodes open_node", () => {
    const [tree] = parse(decodeChunk(openNodeEvent("doc")));
    expect(tree).toEqual(elem("open_node", [["name", "doc"]]));
  });

  it("decodes node_state", () => {
    const frame = encodeEvent(
      elem(
        "node_state",
        [["node", "d"], ["outdated", "true"], ["generation", "3"]],
        [elem("exec", [["exec_id", "7"], ["status", "running"]])],
      ),
    );
    const event = decodeEvent(frame);
    expect(event).toEqual({
      kind: "node_state",
      node: "d",
      outdated: true,
      generation: 3,
      execs: [{ execId: 7, status: "running" }],
    });
  });

  it("decodes markup_delta keeping extra attributes", () => {
    const frame = encodeEvent(
      elem("markup_delta", [["node", "d"], ["generation", "1"]], [
        elem("entity", [
          ["offset", "4"],
          ["end_offset", "5"],
          ["def_file", "builtin/ops"],
          ["def_offset", "0"],
          ["def_end_offset", "1"],
        ]),
      ]),
    );
    const event = decodeEvent(frame);
    expect(event.kind).toBe("markup_delta");
    if (event.kind === "markup_delta") {
      expect(event.entries).toEqual([
        {
          start: 4,
          stop: 5,
          name: "entity",
          attrs: [
            ["def_file", "builtin/ops"],
            ["def_offset", "0"],
            ["def_end_offset", "1"],
          ],
        },
      ]);
    }
  });

  it("decodes message_feed text", () => {
    const frame = encodeEvent(
      elem(
        "message_feed",
        [["kind", "warning"], ["serial", "9"], ["offset", "0"], ["end_offset", "5"]],
        [text("Term: x + y")],
      ),
    );
    const event = decodeEvent(frame);
    expect(event).toEqual({
      kind: "message_feed",
      messageKind: "warning",
      serial: 9,
      start: 0,
      stop: 5,
      text: "Term: x + y",
    });
  });

  it("rejects unknown events", () => {
    expect(() => decodeEvent(encodeEvent(elem("surprise")))).toThrow(
      EventError,
    );
  });
});
