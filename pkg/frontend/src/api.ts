/** Thin client for the harness HTTP/WebSocket contract — the console's
 * only data source. Transport functions are injected so every code path
 * is testable without a browser.
 */
import type {
  ActionAck,
  ActionRequest,
  AlertRecord,
  DeviceInventory,
  Push,
  RunInfo,
  Snapshot,
  Topology,
} from './types.js';

export interface ResponseLike {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<ResponseLike>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
  }
}

export class ApiClient {
  constructor(
    readonly base: string,
    private readonly fetchFn: FetchLike = (url, init) =>
      (globalThis as { fetch: FetchLike }).fetch(url, init),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchFn(this.base + path);
    if (!response.ok) {
      throw new ApiError(response.status, await detailOf(response));
    }
    return (await response.json()) as T;
  }

  info(): Promise<RunInfo> {
    return this.get('/');
  }

  topology(): Promise<Topology> {
    return this.get('/topology');
  }

  snapshot(at?: number): Promise<Snapshot> {
    return this.get(at === undefined ? '/snapshot' : `/snapshot?at=${at}`);
  }

  alerts(since = 0): Promise<AlertRecord[]> {
    return this.get(`/alerts?since=${since}`);
  }

  devices(node: string): Promise<DeviceInventory> {
    return this.get(`/devices/${encodeURIComponent(node)}`);
  }

  /** POST the action; the HTTP outcome is the terminal acknowledgement.
   * Rejections carry the harness error text verbatim. */
  async issueAction(request: ActionRequest): Promise<ActionAck> {
    const body = JSON.stringify({
      kind: request.kind,
      node: request.target,
      ...request.parameters,
    });
    let response: ResponseLike;
    try {
      response = await this.fetchFn(this.base + '/actions', {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body,
      });
    } catch (error) {
      return { request, status: 'rejected', detail: String(error), at: null };
    }
    if (!response.ok) {
      return { request, status: 'rejected', detail: await detailOf(response), at: null };
    }
    const outcome = (await response.json()) as { at?: number };
    return {
      request,
      status: 'accepted',
      detail: `scheduled at ${outcome.at ?? '?'} ms`,
      at: outcome.at ?? null,
    };
  }
}

async function detailOf(response: ResponseLike): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (body && typeof body.detail === 'string') return body.detail;
    return JSON.stringify(body);
  } catch {
    return `HTTP ${response.status}`;
  }
}

export interface WsLike {
  onopen: (() => void) | null;
  onmessage: ((event: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  close(): void;
}

export type WsFactory = (url: string) => WsLike;

export interface StreamHandlers {
  onUp(): void;
  onPush(push: Push): void;
  /** Fired once per drop; the stream then retries until closed. */
  onDown(): void;
}

export interface StreamHandle {
  close(): void;
}

export const RECONNECT_DELAY_MS = 1000;

/** Open the push stream and keep it open: on drop, report stale and retry.
 * `schedule` is injectable for tests (defaults to setTimeout). */
export function connectStream(
  wsUrl: string,
  handlers: StreamHandlers,
  wsFactory: WsFactory,
  schedule: (fn: () => void, ms: number) => unknown = (fn, ms) => setTimeout(fn, ms),
): StreamHandle {
  let closed = false;
  let socket: WsLike | null = null;

  const open = (): void => {
    if (closed) return;
    socket = wsFactory(wsUrl);
    let sawOpen = false;
    socket.onopen = () => {
      sawOpen = true;
      handlers.onUp();
    };
    socket.onmessage = (event) => {
      handlers.onPush(JSON.parse(event.data) as Push);
    };
    socket.onclose = () => {
      if (closed) return;
      if (sawOpen) handlers.onDown();
      schedule(open, RECONNECT_DELAY_MS);
    };
    socket.onerror = () => {
      // onclose follows; nothing to do here.
    };
  };

  open();
  return {
    close() {
      closed = true;
      socket?.close();
    },
  };
}

/** WebSocket URL for an HTTP base (http→ws, https→wss). */
export function wsUrlFor(base: string): string {
  return base.replace(/^http/, 'ws') + '/ws';
}
