/**
 * Browser entry point: binds the editor core to a textarea, a status
 * banner, an annotation overlay, and a real WebSocket.
 */

import { EditorAnnotation } from "./annotations.js";
import { EditorClient, EditorView, Socket } from "./editor.js";

function wrapSocket(ws: WebSocket): Socket {
  return {
    send: (data) => ws.send(data.slice().buffer as ArrayBuffer),
    get open() {
      return ws.readyState === WebSocket.OPEN;
    },
  };
}

class DomView implements EditorView {
  constructor(
    private overlay: HTMLElement,
    private banner: HTMLElement,
    private buffer: () => string,
  ) {}

  renderAnnotations(annotations: EditorAnnotation[]): void {
    const text = this.buffer();
    this.overlay.replaceChildren();
    let pos = 0;
    const ordered = [...annotations].sort((a, b) => a.start - b.start);
    for (const a of ordered) {
      if (a.start < pos) continue; // overlaps render via hover only
      this.overlay.append(text.slice(pos, a.start));
      const span = document.createElement("span");
      span.className = a.styleClass;
      span.textContent = text.slice(a.start, a.stop);
      if (a.hover) span.title = a.hover;
      if (a.link) {
        span.dataset.linkFile = a.link.file;
        span.dataset.linkStart = String(a.link.start);
        span.dataset.linkStop = String(a.link.stop);
        span.addEventListener("click", () => {
          alert(`${a.link!.file}:${a.link!.start}-${a.link!.stop}`);
        });
      }
      this.overlay.append(span);
      pos = a.stop;
    }
    this.overlay.append(text.slice(pos));
  }

  setOutdated(outdated: boolean): void {
    this.overlay.classList.toggle("pide-outdated", outdated);
  }

  setDisconnected(disconnected: boolean): void {
    this.banner.hidden = !disconnected;
  }
}

export function mount(root: HTMLElement, url: string): EditorClient {
  const input = root.querySelector("textarea")!;
  const overlay = root.querySelector<HTMLElement>(".pide-overlay")!;
  const banner = root.querySelector<HTMLElement>(".pide-banner")!;
  const client = new EditorClient("scratch");
  const view = new DomView(overlay, banner, () => client.buffer);

  const ws = new WebSocket(url);
  ws.binaryType = "arraybuffer";
  ws.onopen = () => client.attach(wrapSocket(ws), view);
  ws.onclose = () => client.detach();
  ws.onmessage = (e) => client.receive(new Uint8Array(e.data as ArrayBuffer));

  let previous = "";
  input.addEventListener("input", () => {
    const current = input.value;
    // one keystroke's diff: shared prefix/suffix, replace the middle
    let p = 0;
    while (p < previous.length && p < current.length && previous[p] === current[p]) p++;
    let s = 0;
    while (
      s < previous.length - p &&
      s < current.length - p &&
      previous[previous.length - 1 - s] === current[current.length - 1 - s]
    ) s++;
    const removed = previous.length - p - s;
    const inserted = current.slice(p, current.length - s);
    if (removed > 0) client.applyEdit({ kind: "remove", offset: p, length: removed });
    if (inserted) client.applyEdit({ kind: "insert", offset: p, text: inserted });
    previous = current;
  });
  return client;
}
