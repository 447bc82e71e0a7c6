/**
 * The editor core: a buffer, a socket, and the live checking loop.
 *
 * DOM-free so it can be driven by tests; a host binds it to a real
 * contenteditable/textarea and a real WebSocket.  Edits are sent per
 * keystroke without batching - the kernel's pipelining is the batching
 * mechanism.  The editor never blocks on the service: sends are
 * fire-and-forget and incoming deltas re-render asynchronously.
 */

import { AnnotationModel, EditorAnnotation } from "./annotations.js";
import {
  ServiceEvent,
  TextEdit,
  decodeEvent,
  editEvent,
  openNodeEvent,
  queryEvent,
} from "./events.js";
import { StyleTable } from "./styles.js";
import { DEFAULT_STYLES } from "./styles.js";

/** The slice of the WebSocket API the editor needs; tests fake this. */
export interface Socket {
  send(data: Uint8Array): void;
  readonly open: boolean;
}

export interface EditorView {
  renderAnnotations(annotations: EditorAnnotation[]): void;
  setOutdated(outdated: boolean): void;
  setDisconnected(disconnected: boolean): void;
}

export class EditorClient {
  readonly node: string;
  buffer = "";
  generation = 0;
  readonly model: AnnotationModel;
  private socket: Socket | null = null;
  private view: EditorView | null = null;
  private queued: Uint8Array[] = [];

  constructor(node: string, styles: StyleTable = DEFAULT_STYLES) {
    this.node = node;
    this.model = new AnnotationModel(styles);
  }

  attach(socket: Socket, view?: EditorView): void {
    this.socket = socket;
    if (view) this.view = view;
    this.view?.setDisconnected(false);
    this.send(openNodeEvent(this.node));
    for (const frame of this.queued.splice(0)) this.send(frame);
  }

  detach(): void {
    this.socket = null;
    this.view?.setDisconnected(true);
  }

  private send(frame: Uint8Array): void {
    if (this.socket && this.socket.open) {
      this.socket.send(frame);
    } else {
      // disconnected: queue locally until reconnect
      this.queued.push(frame);
      this.view?.setDisconnected(true);
    }
  }

  /** One keystroke = one edit event; the buffer updates synchronously. */
  applyEdit(edit: TextEdit): void {
    if (edit.kind === "insert") {
      if (edit.offset < 0 || edit.offset > this.buffer.length) {
        throw new RangeError("insert offset out of bounds");
      }
      this.buffer =
        this.buffer.slice(0, edit.offset) +
        edit.text +
        this.buffer.slice(edit.offset);
    } else {
      if (edit.offset < 0 || edit.offset + edit.length > this.buffer.length) {
        throw new RangeError("remove range out of bounds");
      }
      this.buffer =
        this.buffer.slice(0, edit.offset) +
        this.buffer.slice(edit.offset + edit.length);
    }
    this.generation++;
    this.send(editEvent(this.node, [edit]));
  }

  type(text: string): void {
    for (const ch of text) {
      this.applyEdit({ kind: "insert", offset: this.buffer.length, text: ch });
    }
  }

  refresh(): void {
    this.send(queryEvent(this.node));
  }

  /** Feed one raw service frame; rendering happens at the end. */
  receive(frame: Uint8Array): void {
    let event: ServiceEvent;
    try {
      event = decodeEvent(frame);
    } catch {
      return; // a malformed frame never breaks typing
    }
    this.handle(event);
  }

  handle(event: ServiceEvent): void {
    if (event.kind === "node_state") {
      if (event.node !== this.node) return;
      this.model.applyState(event);
      this.view?.setOutdated(event.outdated || event.generation < this.generation);
    } else if (event.kind === "markup_delta") {
      if (event.node !== this.node) return;
      this.model.applyMarkup(event, this.generation, this.buffer.length);
    } else {
      this.model.applyMessages(event, this.buffer.length);
    }
    this.view?.renderAnnotations(this.model.annotations());
  }
}
