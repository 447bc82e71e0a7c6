/**
 * The annotation model: service events in, renderable annotations out.
 *
 * Deltas carry the buffer generation they were computed for; anything
 * older than the current generation is dropped, as is any range that
 * falls outside the buffer (a race the staleness rule makes harmless).
 */

import { MarkupDelta, MarkupEntry, MessageFeed, NodeState } from "./events.js";
import { DEFAULT_STYLES, StyleTable, styleOf } from "./styles.js";

export interface LinkTarget {
  file: string;
  start: number;
  stop: number;
}

export interface EditorAnnotation {
  start: number;
  stop: number;
  styleClass: string;
  markupName: string;
  hover?: string;
  link?: LinkTarget;
}

export interface GutterIcon {
  line: number;
  status: string;
}

function linkTarget(entry: MarkupEntry): LinkTarget | undefined {
  const get = (key: string) => {
    for (const [k, v] of entry.attrs) if (k === key) return v;
    return undefined;
  };
  const file = get("def_file");
  const start = get("def_offset");
  const stop = get("def_end_offset");
  if (file === undefined || start === undefined || stop === undefined) {
    return undefined;
  }
  return { file, start: parseInt(start, 10), stop: parseInt(stop, 10) };
}

export class AnnotationModel {
  private styles: StyleTable;
  private markup: EditorAnnotation[] = [];
  private messages: MessageFeed[] = [];
  private state: NodeState | null = null;

  constructor(styles: StyleTable = DEFAULT_STYLES) {
    this.styles = styles;
  }

  /** Apply a delta; stale or out-of-bounds input is dropped, never thrown. */
  applyMarkup(delta: MarkupDelta, generation: number, bufferLength: number): boolean {
    if (delta.generation !== generation) return false;
    const annotations: EditorAnnotation[] = [];
    for (const entry of delta.entries) {
      if (entry.start >= entry.stop) continue;
      if (entry.start < 0 || entry.stop > bufferLength) continue;
      annotations.push({
        start: entry.start,
        stop: entry.stop,
        styleClass: styleOf(this.styles, entry.name),
        markupName: entry.name,
        link: entry.name === "entity" ? linkTarget(entry) : undefined,
      });
    }
    this.markup = annotations;
    return true;
  }

  applyMessages(feed: MessageFeed, bufferLength: number): void {
    if (this.messages.some((m) => m.serial === feed.serial)) return;
    if (feed.start < 0 || feed.start > bufferLength) return;
    this.messages.push(feed);
  }

  applyState(state: NodeState): void {
    this.state = state;
  }

  get outdated(): boolean {
    return this.state?.outdated ?? false;
  }

  /** Squiggle ranges for warning/error messages, hover text attached. */
  annotations(): EditorAnnotation[] {
    const out = [...this.markup];
    for (const m of this.messages) {
      if (m.messageKind !== "warning" && m.messageKind !== "error") continue;
      if (m.start >= m.stop) continue;
      out.push({
        start: m.start,
        stop: m.stop,
        styleClass: styleOf(this.styles, m.messageKind),
        markupName: m.messageKind,
        hover: m.text,
      });
    }
    return out;
  }

  /** Hover payload at an offset: message texts covering it. */
  hoversAt(offset: number): string[] {
    return this.annotations()
      .filter((a) => a.hover && a.start <= offset && offset < a.stop)
      .map((a) => a.hover as string);
  }

  /** Link target at an offset, if the markup there is an entity. */
  linkAt(offset: number): LinkTarget | undefined {
    for (const a of this.annotations()) {
      if (a.link && a.start <= offset && offset < a.stop) return a.link;
    }
    return undefined;
  }

  /** Gutter icons: failed execs mapped to their command's first line. */
  gutterIcons(buffer: string): GutterIcon[] {
    const icons: GutterIcon[] = [];
    for (const m of this.messages) {
      if (m.messageKind !== "error") continue;
      icons.push({ line: lineOf(buffer, m.start), status: "failed" });
    }
    return icons;
  }

  clearOnEdit(): void {
    // markup keeps rendering until a fresh delta arrives; messages for
    // a superseded buffer are pruned by serial on the next feed
  }
}

export function lineOf(buffer: string, offset: number): number {
  let line = 0;
  const stop = Math.min(offset, buffer.length);
  for (let i = 0; i < stop; i++) {
    if (buffer[i] === "\n") line++;
  }
  return line;
}
