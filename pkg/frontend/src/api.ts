// API client plus the server-sent-events reader. Built on fetch so the
// same code path runs in the browser and under the node test runner.

import type {
  Dashboard,
  DeviceOverview,
  DeviceSummary,
  DomainRow,
  Label,
  PushEvent,
  SortKey,
  StatusInfo,
} from './types';

export class ApiError extends Error {
  constructor(public code: string, message: string, public status: number) {
    super(message);
  }
}

interface Envelope<T> {
  status: 'ok' | 'error';
  data?: T;
  error?: { code: string; message: string };
}

async function unwrap<T>(response: Response): Promise<T> {
  const body = (await response.json()) as Envelope<T>;
  if (body.status !== 'ok' || body.data === undefined) {
    const err = body.error ?? { code: 'unknown', message: 'malformed envelope' };
    throw new ApiError(err.code, err.message, response.status);
  }
  return body.data;
}

export class ApiClient {
  constructor(public base: string = '') {}

  private async get<T>(path: string): Promise<T> {
    const response = await fetch(this.base + path);
    return unwrap<T>(response);
  }

  private async post<T>(path: string, payload: unknown): Promise<T> {
    const response = await fetch(this.base + path, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(payload),
    });
    return unwrap<T>(response);
  }

  dashboard(): Promise<Dashboard> {
    return this.get('/api/dashboard');
  }

  devices(): Promise<DeviceSummary[]> {
    return this.get('/api/devices');
  }

  deviceDomains(deviceKey: string, label?: Label, sort?: SortKey): Promise<DomainRow[]> {
    const params = new URLSearchParams();
    if (label) params.set('label', label);
    if (sort) params.set('sort', sort);
    const suffix = params.size ? `?${params}` : '';
    return this.get(`/api/devices/${encodeURIComponent(deviceKey)}/domains${suffix}`);
  }

  overview(deviceKey: string): Promise<DeviceOverview> {
    return this.get(`/api/devices/${encodeURIComponent(deviceKey)}/overview`);
  }

  status(): Promise<StatusInfo> {
    return this.get('/api/status');
  }

  block(domain: string): Promise<{ version: number }> {
    return this.post('/api/block', { domain });
  }

  unblock(domain: string): Promise<{ version: number }> {
    return this.post('/api/unblock', { domain });
  }
}

/** Incremental parser for a text/event-stream byte feed. */
export class SseParser {
  private buffer = '';

  push(chunk: string): PushEvent[] {
    this.buffer += chunk;
    const events: PushEvent[] = [];
    let cut: number;
    while ((cut = this.buffer.indexOf('\n\n')) >= 0) {
      const block = this.buffer.slice(0, cut);
      this.buffer = this.buffer.slice(cut + 2);
      for (const line of block.split('\n')) {
        if (line.startsWith('data: ')) {
          try {
            events.push(JSON.parse(line.slice(6)) as PushEvent);
          } catch {
            // tolerate malformed frames; the resync on reconnect recovers
          }
        }
      }
    }
    return events;
  }
}

export interface StreamHandle {
  close(): void;
}

/**
 * Long-lived push channel with automatic reconnect. `onLive` reports
 * connection state so the UI can fall back to polling while offline.
 */
export function openEventStream(
  base: string,
  onEvent: (event: PushEvent) => void,
  onLive: (live: boolean) => void,
  reconnectDelayMs = 2000,
): StreamHandle {
  let closed = false;
  let controller = new AbortController();

  async function run(): Promise<void> {
    while (!closed) {
      controller = new AbortController();
      try {
        const response = await fetch(`${base}/api/events`, {
          signal: controller.signal,
          headers: { accept: 'text/event-stream' },
        });
        if (!response.ok || !response.body) throw new Error(`stream http ${response.status}`);
        onLive(true);
        const reader = response.body.getReader();
        const decoder = new TextDecoder();
        const parser = new SseParser();
        for (;;) {
          const { done, value } = await reader.read();
          if (done) break;
          for (const event of parser.push(decoder.decode(value, { stream: true }))) {
            onEvent(event);
          }
        }
      } catch {
        // fall through to reconnect
      }
      onLive(false);
      if (!closed) await new Promise((resolve) => setTimeout(resolve, reconnectDelayMs));
    }
  }

  void run();
  return {
    close() {
      closed = true;
      controller.abort();
    },
  };
}
