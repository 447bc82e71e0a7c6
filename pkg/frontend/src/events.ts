/**
 * Client event vocabulary over the /session endpoint.
 *
 * Inbound to the service: open_node, edit, query, shutdown.
 * Outbound from it: node_state, markup_delta, message_feed.
 * Every frame is one chunk whose payload is one YXML element.
 */

import { decodeChunk, encodeChunk } from "./chunk.js";
import { Elem, Tree, attr, elem, encode, parse, text, textContent } from "./yxml.js";

export type TextEdit =
  | { kind: "insert"; offset: number; text: string }
  | { kind: "remove"; offset: number; length: number };

export interface ExecStatus {
  execId: number;
  status: string;
}

export interface NodeState {
  kind: "node_state";
  node: string;
  outdated: boolean;
  generation: number;
  execs: ExecStatus[];
}

export interface MarkupEntry {
  start: number;
  stop: number;
  name: string;
  attrs: [string, string][];
}

export interface MarkupDelta {
  kind: "markup_delta";
  node: string;
  generation: number;
  entries: MarkupEntry[];
}

export interface MessageFeed {
  kind: "message_feed";
  messageKind: string;
  serial: number;
  start: number;
  stop: number;
  text: string;
}

export type ServiceEvent = NodeState | MarkupDelta | MessageFeed;

export class EventError extends Error {}

export function encodeEvent(e: Elem): Uint8Array {
  return encodeChunk(encode([e]));
}

export function openNodeEvent(name: string): Uint8Array {
  return encodeEvent(elem("open_node", [["name", name]]));
}

export function editEvent(node: string, edits: TextEdit[]): Uint8Array {
  const body: Tree[] = edits.map((e) =>
    e.kind === "insert"
      ? elem("insert", [["offset", String(e.offset)]], [text(e.text)])
      : elem("remove", [
          ["offset", String(e.offset)],
          ["length", String(e.length)],
        ]),
  );
  return encodeEvent(elem("edit", [["node", node]], body));
}

export function queryEvent(node: string): Uint8Array {
  return encodeEvent(elem("query", [["node", node]]));
}

export function shutdownEvent(): Uint8Array {
  return encodeEvent(elem("shutdown"));
}

function intAttr(e: Elem, key: string): number {
  const raw = attr(e, key);
  if (raw === undefined || !/^\d+$/.test(raw)) {
    throw new EventError(`<${e.name}> missing integer ${key}`);
  }
  return parseInt(raw, 10);
}

export function decodeEvent(frame: Uint8Array): ServiceEvent {
  const body = parse(decodeChunk(frame));
  if (body.length !== 1 || body[0].kind !== "elem") {
    throw new EventError("frame is not a single element");
  }
  const e = body[0];
  if (e.name === "node_state") {
    const execs: ExecStatus[] = [];
    for (const child of e.body) {
      if (child.kind === "elem" && child.name === "exec") {
        execs.push({
          execId: intAttr(child, "exec_id"),
          status: attr(child, "status") ?? "pending",
        });
      }
    }
    return {
      kind: "node_state",
      node: attr(e, "node") ?? "",
      outdated: attr(e, "outdated") === "true",
      generation: intAttr(e, "generation"),
      execs,
    };
  }
  if (e.name === "markup_delta") {
    const entries: MarkupEntry[] = [];
    for (const child of e.body) {
      if (child.kind !== "elem") continue;
      entries.push({
        start: intAttr(child, "offset"),
        stop: intAttr(child, "end_offset"),
        name: child.name,
        attrs: child.attrs.filter(
          ([k]) => k !== "offset" && k !== "end_offset",
        ),
      });
    }
    return {
      kind: "markup_delta",
      node: attr(e, "node") ?? "",
      generation: intAttr(e, "generation"),
      entries,
    };
  }
  if (e.name === "message_feed") {
    return {
      kind: "message_feed",
      messageKind: attr(e, "kind") ?? "writeln",
      serial: intAttr(e, "serial"),
      start: intAttr(e, "offset"),
      stop: intAttr(e, "end_offset"),
      text: e.body.map(textContent).join(""),
    };
  }
  throw new EventError(`unknown service event <${e.name}>`);
}
