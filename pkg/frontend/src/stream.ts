/** Server-sent event reader over fetch streaming.
 *
 * Built on fetch instead of EventSource so resume-after-seq works through a
 * query parameter and the same code runs in the browser and in tests. The
 * connection replays the transcript from the requested position, then tails
 * live events; on network errors it reconnects from the last seen seq, so
 * consumers observe a gapless, strictly ordered sequence.
 */

import type { EngineEvent } from "./types.js";

export interface StreamOptions {
  /** Resume strictly after this seq (-1 = from the start). */
  after?: number;
  /** Delay between reconnection attempts, ms. */
  retryDelayMs?: number;
  /** Stop reconnecting after this many consecutive failures. */
  maxRetries?: number;
  fetchImpl?: typeof fetch;
}

export interface StreamHandle {
  close(): void;
  /** Resolves when the stream ends (session over or handle closed). */
  done: Promise<void>;
}

/** Parse one SSE frame block ("id: N\ndata: {...}") into an event. */
export function parseFrame(block: string): EngineEvent | null {
  let data = "";
  for (const line of block.split("\n")) {
    if (line.startsWith("data: ")) data += line.slice(6);
  }
  if (!data) return null;
  return JSON.parse(data) as EngineEvent;
}

/** Incremental splitter: feed chunks, get complete frame blocks out. */
export class FrameBuffer {
  private buffer = "";

  push(chunk: string): string[] {
    this.buffer += chunk;
    const blocks: string[] = [];
    let index: number;
    while ((index = this.buffer.indexOf("\n\n")) >= 0) {
      blocks.push(this.buffer.slice(0, index));
      this.buffer = this.buffer.slice(index + 2);
    }
    return blocks;
  }
}

export function openEventStream(
  urlFor: (after: number) => string,
  onEvent: (event: EngineEvent) => void,
  options: StreamOptions = {},
): StreamHandle {
  const fetchImpl = options.fetchImpl ?? fetch;
  const retryDelay = options.retryDelayMs ?? 500;
  const maxRetries = options.maxRetries ?? 20;
  let lastSeq = options.after ?? -1;
  let closed = false;
  let abort = new AbortController();

  const done = (async () => {
    let failures = 0;
    while (!closed && failures <= maxRetries) {
      try {
        const response = await fetchImpl(urlFor(lastSeq), {
          headers: { Accept: "text/event-stream" },
          signal: abort.signal,
        });
        if (!response.ok || !response.body) throw new Error(`stream: HTTP ${response.status}`);
        const reader = response.body.getReader();
        const decoder = new TextDecoder();
        const frames = new FrameBuffer();
        for (;;) {
          const { value, done: finished } = await reader.read();
          if (finished) return; // server closed: session is over
          failures = 0;
          for (const block of frames.push(decoder.decode(value, { stream: true }))) {
            const event = parseFrame(block);
            if (event === null || event.seq <= lastSeq) continue; // replay overlap
            lastSeq = event.seq;
            onEvent(event);
          }
        }
      } catch (error) {
        if (closed) return;
        failures += 1;
        await new Promise((resolve) => setTimeout(resolve, retryDelay));
      }
    }
  })();

  return {
    close() {
      closed = true;
      abort.abort();
    },
    done,
  };
}
