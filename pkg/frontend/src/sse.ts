// Live feed over the service's server-sent-event stream.
//
// The server assigns every event a monotonically increasing id and replays
// history past a given id, so a dropped connection resumes exactly where it
// left off: reconnects request `?after=<last seen id>` and the feed drops
// anything it has already rendered. Rendering order is therefore strictly
// ascending by event_id regardless of reconnects.

import type { LiveEvent } from "./types.js";

/** Incremental parser for text/event-stream bodies. */
export class SseParser {
  private buffer = "";

  push(chunk: string): LiveEvent[] {
    this.buffer += chunk;
    const events: LiveEvent[] = [];
    let boundary: number;
    while ((boundary = this.buffer.indexOf("\n\n")) >= 0) {
      const block = this.buffer.slice(0, boundary);
      this.buffer = this.buffer.slice(boundary + 2);
      const dataLines = block
        .split("\n")
        .filter((line) => line.startsWith("data:"))
        .map((line) => line.slice(5).trimStart());
      if (dataLines.length === 0) continue; // comment / keep-alive block
      try {
        events.push(JSON.parse(dataLines.join("\n")) as LiveEvent);
      } catch {
        // Malformed block: skip rather than tear the feed down.
      }
    }
    return events;
  }
}

/** Ordered, de-duplicated view of the event stream. */
export class LiveFeed {
  readonly events: LiveEvent[] = [];
  lastEventId = 0;
  duplicatesDropped = 0;

  accept(event: LiveEvent): boolean {
    if (!Number.isInteger(event.event_id) || event.event_id <= this.lastEventId) {
      this.duplicatesDropped += 1;
      return false;
    }
    this.events.push(event);
    this.lastEventId = event.event_id;
    return true;
  }
}

export interface FeedConnection {
  /** Abort the current HTTP stream; the loop reconnects and resumes. */
  reconnect(): void;
  /** Stop for good. */
  close(): void;
  done: Promise<void>;
  readonly connects: number;
}

export interface FeedOptions {
  reconnectDelayMs?: number;
  fetchImpl?: typeof fetch;
  onEvent?: (event: LiveEvent) => void;
  onStateChange?: (live: boolean) => void;
}

export function connectLiveFeed(
  baseUrl: string,
  feed: LiveFeed,
  options: FeedOptions = {},
): FeedConnection {
  const fetchImpl = options.fetchImpl ?? fetch;
  const delayMs = options.reconnectDelayMs ?? 1000;
  let closed = false;
  let controller: AbortController | null = null;
  const state = { connects: 0 };

  const run = async (): Promise<void> => {
    while (!closed) {
      controller = new AbortController();
      try {
        const response = await fetchImpl(
          `${baseUrl}/events?after=${feed.lastEventId}`,
          {
            signal: controller.signal,
            headers: {
              Accept: "text/event-stream",
              "Last-Event-ID": String(feed.lastEventId),
            },
          },
        );
        if (!response.ok || response.body === null) {
          throw new Error(`stream rejected: ${response.status}`);
        }
        state.connects += 1;
        options.onStateChange?.(true);
        const reader = response.body.getReader();
        const decoder = new TextDecoder();
        const parser = new SseParser();
        for (;;) {
          const { done, value } = await reader.read();
          if (done) break;
          for (const event of parser.push(decoder.decode(value, { stream: true }))) {
            if (feed.accept(event)) options.onEvent?.(event);
          }
        }
      } catch {
        // fall through to reconnect
      }
      options.onStateChange?.(false);
      if (!closed) {
        await new Promise((resolve) => setTimeout(resolve, delayMs));
      }
    }
  };

  const done = run();
  return {
    reconnect() {
      controller?.abort();
    },
    close() {
      closed = true;
      controller?.abort();
    },
    done,
    get connects() {
      return state.connects;
    },
  };
}
