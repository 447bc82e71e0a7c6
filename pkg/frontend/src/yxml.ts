/**
 * YXML transfer syntax: markup trees embedded into byte streams using
 * two reserved control bytes.  Must stay bit-exact with the server
 * codec; this file is the client half of that wire contract.
 */

export const X = 0x05;
export const Y = 0x06;

export interface Text {
  kind: "text";
  content: string;
}

export interface Elem {
  kind: "elem";
  name: string;
  attrs: [string, string][];
  body: Tree[];
}

export type Tree = Text | Elem;

export function text(content: string): Text {
  return { kind: "text", content };
}

export function elem(
  name: string,
  attrs: [string, string][] = [],
  body: Tree[] = [],
): Elem {
  return { kind: "elem", name, attrs, body };
}

export function attr(e: Elem, key: string): string | undefined {
  for (const [k, v] of e.attrs) if (k === key) return v;
  return undefined;
}

export function textContent(tree: Tree): string {
  if (tree.kind === "text") return tree.content;
  return tree.body.map(textContent).join("");
}

export class YxmlError extends Error {}

const encoder = new TextEncoder();
const decoder = new TextDecoder();

function checkClean(s: string, what: string): void {
  if (s.includes("\x05") || s.includes("\x06")) {
    throw new YxmlError(`reserved byte in ${what}`);
  }
}

export function encode(body: Tree[]): Uint8Array {
  const parts: Uint8Array[] = [];
  const XB = new Uint8Array([X]);
  const YB = new Uint8Array([Y]);
  const push = (s: string) => parts.push(encoder.encode(s));
  const go = (tree: Tree): void => {
    if (tree.kind === "text") {
      checkClean(tree.content, "text");
      push(tree.content);
      return;
    }
    checkClean(tree.name, "element name");
    parts.push(XB, YB);
    push(tree.name);
    for (const [k, v] of tree.attrs) {
      checkClean(k, "attribute key");
      checkClean(v, "attribute value");
      if (k.includes("=")) throw new YxmlError("'=' in attribute key");
      parts.push(YB);
      push(`${k}=${v}`);
    }
    parts.push(XB);
    for (const t of tree.body) go(t);
    parts.push(XB, YB, XB);
  };
  body.forEach(go);
  const size = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(size);
  let offset = 0;
  for (const p of parts) {
    out.set(p, offset);
    offset += p.length;
  }
  return out;
}

/** Split on X bytes, then interpret Y-prefixed markers, keeping a stack. */
export function parse(data: Uint8Array): Tree[] {
  const stack: { elem: Elem | null; body: Tree[] }[] = [
    { elem: null, body: [] },
  ];
  const addText = (content: string) => {
    if (!content) return;
    const body = stack[stack.length - 1].body;
    const last = body[body.length - 1];
    if (last && last.kind === "text") last.content += content;
    else body.push(text(content));
  };
  // segments between X bytes; a segment starting with Y is a marker
  let start = 0;
  const segments: { at: number; bytes: Uint8Array }[] = [];
  for (let i = 0; i <= data.length; i++) {
    if (i === data.length || data[i] === X) {
      segments.push({ at: start, bytes: data.subarray(start, i) });
      start = i + 1;
    }
  }
  for (const { at, bytes } of segments) {
    if (bytes.length > 0 && bytes[0] === Y) {
      const markers: string[] = [];
      let s = 1;
      for (let i = 1; i <= bytes.length; i++) {
        if (i === bytes.length || bytes[i] === Y) {
          markers.push(decoder.decode(bytes.subarray(s, i)));
          s = i + 1;
        }
      }
      if (markers.length === 1 && markers[0] === "") {
        // close marker
        const top = stack.pop();
        if (!top || top.elem === null) {
          throw new YxmlError(`unbalanced close at byte ${at - 1}`);
        }
        top.elem.body = top.body;
        stack[stack.length - 1].body.push(top.elem);
      } else {
        const name = markers[0];
        if (!name) throw new YxmlError(`empty element name at byte ${at - 1}`);
        const attrs: [string, string][] = [];
        for (const m of markers.slice(1)) {
          const eq = m.indexOf("=");
          if (eq < 1) {
            throw new YxmlError(`malformed attribute at byte ${at - 1}`);
          }
          attrs.push([m.slice(0, eq), m.slice(eq + 1)]);
        }
        stack.push({ elem: elem(name, attrs), body: [] });
      }
    } else {
      addText(decoder.decode(bytes));
    }
  }
  if (stack.length !== 1) {
    throw new YxmlError("unbalanced element at end of input");
  }
  return stack[0].body;
}
