import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest';

import type { SessionSummary } from '../src/api.js';
import { liveProgress } from '../src/sse.js';

function summary(status: SessionSummary['status']): SessionSummary {
  return {
    id: 's1',
    status,
    current_stage: 'analysis',
    prompt_kind: 'user',
    created_at: 0,
    stage_count: 1,
  };
}

class FakeEventSource {
  static last: FakeEventSource | null = null;

  listeners = new Map<string, (event: MessageEvent) => void>();
  onerror: (() => void) | null = null;
  closed = false;

  constructor(public url: string) {
    FakeEventSource.last = this;
  }

  addEventListener(name: string, handler: (event: MessageEvent) => void): void {
    this.listeners.set(name, handler);
  }

  emit(name: string, data: unknown): void {
    this.listeners.get(name)?.({ data: JSON.stringify(data) } as MessageEvent);
  }

  close(): void {
    this.closed = true;
  }
}

describe('live progress', () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it('delivers stream events without polling', () => {
    const states: SessionSummary[] = [];
    const handle = liveProgress('/api/sessions/s1/events', (s) => states.push(s), {
      pollFn: () => Promise.reject(new Error('should not poll')),
      eventSourceFactory: (url) => new FakeEventSource(url) as unknown as EventSource,
    });
    FakeEventSource.last!.emit('awaiting_gate', summary('awaiting_gate'));
    FakeEventSource.last!.emit('completed', summary('completed'));
    expect(states.map((s) => s.status)).toEqual(['awaiting_gate', 'completed']);
    expect(handle.mode).toBe('stream');
    handle.close();
    expect(FakeEventSource.last!.closed).toBe(true);
  });

  it('falls back to 2-second polling when the stream drops', async () => {
    const states: SessionSummary[] = [];
    const modes: string[] = [];
    const pollFn = vi.fn(() => Promise.resolve(summary('running')));
    const handle = liveProgress('/api/sessions/s1/events', (s) => states.push(s), {
      pollFn,
      eventSourceFactory: (url) => new FakeEventSource(url) as unknown as EventSource,
      onModeChange: (mode) => modes.push(mode),
    });
    FakeEventSource.last!.onerror!();
    expect(handle.mode).toBe('poll');
    expect(modes).toEqual(['poll']);
    await vi.advanceTimersByTimeAsync(2000);
    expect(pollFn).toHaveBeenCalledTimes(1);
    await vi.advanceTimersByTimeAsync(2000);
    expect(pollFn).toHaveBeenCalledTimes(2);
    expect(states.map((s) => s.status)).toEqual(['running', 'running']);
    handle.close();
    await vi.advanceTimersByTimeAsync(4000);
    expect(pollFn).toHaveBeenCalledTimes(2);
  });

  it('polls from the start when no EventSource is available', async () => {
    const pollFn = vi.fn(() => Promise.resolve(summary('running')));
    const handle = liveProgress('/x', () => {}, {
      pollFn,
      eventSourceFactory: () => {
        throw new Error('no sse here');
      },
      pollIntervalMs: 50,
    });
    expect(handle.mode).toBe('poll');
    await vi.advanceTimersByTimeAsync(120);
    expect(pollFn).toHaveBeenCalledTimes(2);
    handle.close();
  });

  it('keeps polling across poll errors', async () => {
    let calls = 0;
    const pollFn = vi.fn(() => {
      calls += 1;
      return calls === 1
        ? Promise.reject(new Error('blip'))
        : Promise.resolve(summary('running'));
    });
    const states: SessionSummary[] = [];
    const handle = liveProgress('/x', (s) => states.push(s), {
      pollFn,
      eventSourceFactory: () => {
        throw new Error('no sse');
      },
      pollIntervalMs: 10,
    });
    await vi.advanceTimersByTimeAsync(25);
    expect(states).toHaveLength(1);
    handle.close();
  });
});
