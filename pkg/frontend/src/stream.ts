// Server-sent event subscription with automatic reconnect and backoff.
// The EventSource constructor is injectable so tests can script the feed.

import { StreamEvent } from "./types.js";

export interface EventSourceLike {
    onmessage: ((ev: { data: string }) => void) | null;
    onerror: ((ev: unknown) => void) | null;
    onopen: ((ev: unknown) => void) | null;
    close(): void;
}

export type EventSourceFactory = (url: string) => EventSourceLike;

export interface StreamHandle {
    close(): void;
}

const BACKOFF_MS = [500, 1000, 2000, 5000, 10000];

export function subscribeStream(
    url: string,
    onEvent: (event: StreamEvent) => void,
    onConnection: (state: "connecting" | "open" | "lost") => void,
    factory: EventSourceFactory = (u) => new EventSource(u) as unknown as EventSourceLike,
    schedule: (fn: () => void, ms: number) => unknown = (fn, ms) => setTimeout(fn, ms),
): StreamHandle {
    let source: EventSourceLike | null = null;
    let attempts = 0;
    let closed = false;

    const connect = () => {
        if (closed) return;
        onConnection("connecting");
        source = factory(url);
        source.onopen = () => {
            attempts = 0;
            onConnection("open");
        };
        source.onmessage = (ev) => {
            let parsed: unknown;
            try {
                parsed = JSON.parse(ev.data);
            } catch {
                return; // keepalives and handshakes are not JSON events
            }
            if (parsed && typeof parsed === "object" && "type" in (parsed as object)) {
                onEvent(parsed as StreamEvent);
            }
        };
        source.onerror = () => {
            if (closed) return;
            onConnection("lost");
            source?.close();
            const delay = BACKOFF_MS[Math.min(attempts, BACKOFF_MS.length - 1)];
            attempts += 1;
            schedule(connect, delay);
        };
    };

    connect();
    return {
        close() {
            closed = true;
            source?.close();
        },
    };
}
