// Live session status: SSE stream with a 2-second polling fallback when the
// stream errors or EventSource is unavailable.

import type { SessionSummary } from './api.js';

export type LiveMode = 'stream' | 'poll';

export interface LiveOptions {
  pollFn: () => Promise<SessionSummary>;
  eventSourceFactory?: (url: string) => EventSource;
  pollIntervalMs?: number;
  onModeChange?: (mode: LiveMode) => void;
}

export interface LiveHandle {
  close(): void;
  readonly mode: LiveMode;
}

const EVENT_NAMES = ['stage_started', 'awaiting_gate', 'completed', 'failed'];

export function liveProgress(
  url: string,
  onState: (state: SessionSummary) => void,
  options: LiveOptions,
): LiveHandle {
  const interval = options.pollIntervalMs ?? 2000;
  let mode: LiveMode = 'stream';
  let source: EventSource | null = null;
  let timer: ReturnType<typeof setInterval> | null = null;
  let closed = false;

  const setMode = (next: LiveMode) => {
    if (mode !== next) {
      mode = next;
      options.onModeChange?.(next);
    }
  };

  const startPolling = () => {
    if (closed || timer !== null) return;
    setMode('poll');
    timer = setInterval(() => {
      options.pollFn().then(onState, () => {
        // service unreachable; keep polling, the banner handles visibility
      });
    }, interval);
  };

  const factory =
    options.eventSourceFactory ??
    (typeof EventSource !== 'undefined' ? (u: string) => new EventSource(u) : null);

  if (factory === null) {
    startPolling();
  } else {
    try {
      source = factory(url);
    } catch {
      source = null;
    }
    if (source === null) {
      startPolling();
    } else {
      for (const name of EVENT_NAMES) {
        source.addEventListener(name, (event) => {
          onState(JSON.parse((event as MessageEvent).data) as SessionSummary);
        });
      }
      source.onerror = () => {
        source?.close();
        source = null;
        startPolling();
      };
    }
  }

  return {
    close() {
      closed = true;
      source?.close();
      if (timer !== null) clearInterval(timer);
    },
    get mode() {
      return mode;
    },
  };
}
