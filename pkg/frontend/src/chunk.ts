/**
 * Chunk framing: ASCII-decimal payload length, one newline byte, then
 * the payload.  Each service frame carries exactly one chunk.
 */

export class ChunkError extends Error {}

export function encodeChunk(payload: Uint8Array): Uint8Array {
  const header = new TextEncoder().encode(`${payload.length}\n`);
  const out = new Uint8Array(header.length + payload.length);
  out.set(header, 0);
  out.set(payload, header.length);
  return out;
}

/** Decode a frame that must contain exactly one chunk. */
export function decodeChunk(frame: Uint8Array): Uint8Array {
  let i = 0;
  let length = 0;
  let sawDigit = false;
  for (; i < frame.length; i++) {
    const b = frame[i];
    if (b === 0x0a) break;
    if (b < 0x30 || b > 0x39) {
      throw new ChunkError(`non-digit byte in chunk header: ${b}`);
    }
    length = length * 10 + (b - 0x30);
    sawDigit = true;
  }
  if (!sawDigit || i === frame.length) {
    throw new ChunkError("missing chunk header");
  }
  const payload = frame.subarray(i + 1);
  if (payload.length !== length) {
    throw new ChunkError(
      `chunk length mismatch: header ${length}, payload ${payload.length}`,
    );
  }
  return payload;
}
