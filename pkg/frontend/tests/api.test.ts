import { describe, expect, it } from 'vitest';

import {
  ApiClient,
  connectStream,
  wsUrlFor,
  type FetchLike,
  type ResponseLike,
  type WsLike,
} from '../src/api.js';
import type { ActionRequest, Push } from '../src/types.js';

function jsonResponse(status: number, body: unknown): ResponseLike {
  return {
    ok: status >= 200 && status < 300,
    status,
    json: () => Promise.resolve(body),
  };
}

function recordingFetch(
  responses: Array<ResponseLike>,
): { fetchFn: FetchLike; calls: Array<{ url: string; init?: Parameters<FetchLike>[1] }> } {
  const calls: Array<{ url: string; init?: Parameters<FetchLike>[1] }> = [];
  const fetchFn: FetchLike = (url, init) => {
    calls.push({ url, init });
    return Promise.resolve(responses.shift() ?? jsonResponse(500, { detail: 'exhausted' }));
  };
  return { fetchFn, calls };
}

const REQUEST: ActionRequest = {
  kind: 'ShieldActivate',
  target: 'phx1',
  parameters: { shield: 'es1', mode: 'SecureIpsec' },
  issued_at: 1234,
};

describe('ApiClient.issueAction', () => {
  it('maps an ActionRequest onto the POST /actions body', async () => {
    const { fetchFn, calls } = recordingFetch([jsonResponse(200, { accepted: true, at: 2000 })]);
    const client = new ApiClient('http://h:1', fetchFn);
    const ack = await client.issueAction(REQUEST);
    expect(calls).toHaveLength(1);
    expect(calls[0].url).toBe('http://h:1/actions');
    expect(JSON.parse(calls[0].init!.body!)).toEqual({
      kind: 'ShieldActivate',
      node: 'phx1',
      shield: 'es1',
      mode: 'SecureIpsec',
    });
    expect(ack.status).toBe('accepted');
    expect(ack.at).toBe(2000);
    expect(ack.request).toBe(REQUEST);
  });

  it('returns the harness error verbatim on rejection', async () => {
    const { fetchFn } = recordingFetch([
      jsonResponse(409, { detail: 'this run already completed; actions need a live session' }),
    ]);
    const ack = await new ApiClient('http://h:1', fetchFn).issueAction(REQUEST);
    expect(ack.status).toBe('rejected');
    expect(ack.detail).toBe('this run already completed; actions need a live session');
    expect(ack.at).toBeNull();
  });

  it('treats transport failure as a rejection acknowledgement', async () => {
    const failing: FetchLike = () => Promise.reject(new Error('connection refused'));
    const ack = await new ApiClient('http://h:1', failing).issueAction(REQUEST);
    expect(ack.status).toBe('rejected');
    expect(ack.detail).toContain('connection refused');
  });

  it('every issued action receives exactly one terminal acknowledgement', async () => {
    const { fetchFn } = recordingFetch([
      jsonResponse(200, { accepted: true, at: 1 }),
      jsonResponse(400, { detail: "ApplyConfig requires 'utility'" }),
    ]);
    const client = new ApiClient('http://h:1', fetchFn);
    const outcomes = await Promise.all([
      client.issueAction(REQUEST),
      client.issueAction({ ...REQUEST, kind: 'ApplyConfig', parameters: {} }),
    ]);
    expect(outcomes.map((a) => a.status)).toEqual(['accepted', 'rejected']);
  });
});

describe('ApiClient reads', () => {
  it('hits the documented endpoints', async () => {
    const { fetchFn, calls } = recordingFetch([
      jsonResponse(200, {}),
      jsonResponse(200, { nodes: [], links: [] }),
      jsonResponse(200, { at: 0, state: {} }),
      jsonResponse(200, []),
      jsonResponse(200, { node: 'n', up: true, devices: [] }),
      jsonResponse(200, { at: 9, state: {} }),
    ]);
    const client = new ApiClient('http://h:1', fetchFn);
    await client.info();
    await client.topology();
    await client.snapshot();
    await client.alerts();
    await client.devices('phx 1');
    await client.snapshot(9);
    expect(calls.map((c) => c.url)).toEqual([
      'http://h:1/',
      'http://h:1/topology',
      'http://h:1/snapshot',
      'http://h:1/alerts?since=0',
      'http://h:1/devices/phx%201',
      'http://h:1/snapshot?at=9',
    ]);
  });

  it('derives the WebSocket URL from the HTTP base', () => {
    expect(wsUrlFor('http://127.0.0.1:8470')).toBe('ws://127.0.0.1:8470/ws');
    expect(wsUrlFor('https://example.test')).toBe('wss://example.test/ws');
  });
});

class FakeWs implements WsLike {
  onopen: (() => void) | null = null;
  onmessage: ((event: { data: string }) => void) | null = null;
  onclose: (() => void) | null = null;
  onerror: (() => void) | null = null;
  closedByClient = false;
  close(): void {
    this.closedByClient = true;
  }
}

describe('connectStream', () => {
  it('reports up, delivers pushes in order, reports one down per drop, and reconnects', () => {
    const sockets: FakeWs[] = [];
    const pending: Array<() => void> = [];
    const log: string[] = [];
    connectStream(
      'ws://h/ws',
      {
        onUp: () => log.push('up'),
        onPush: (push: Push) => log.push(`push:${push.type}`),
        onDown: () => log.push('down'),
      },
      () => {
        const ws = new FakeWs();
        sockets.push(ws);
        return ws;
      },
      (fn) => pending.push(fn),
    );

    expect(sockets).toHaveLength(1);
    sockets[0].onopen!();
    sockets[0].onmessage!({ data: JSON.stringify({ type: 'tick', now: 1000, finished: false }) });
    sockets[0].onmessage!({ data: JSON.stringify({ type: 'tick', now: 2000, finished: false }) });
    sockets[0].onclose!();
    expect(log).toEqual(['up', 'push:tick', 'push:tick', 'down']);

    // The scheduled retry opens a fresh socket; its open clears staleness.
    expect(pending).toHaveLength(1);
    pending.shift()!();
    expect(sockets).toHaveLength(2);
    sockets[1].onopen!();
    expect(log).toEqual(['up', 'push:tick', 'push:tick', 'down', 'up']);
  });

  it('a connection that never opened retries silently (no spurious down)', () => {
    const sockets: FakeWs[] = [];
    const pending: Array<() => void> = [];
    const log: string[] = [];
    connectStream(
      'ws://h/ws',
      {
        onUp: () => log.push('up'),
        onPush: () => log.push('push'),
        onDown: () => log.push('down'),
      },
      () => {
        const ws = new FakeWs();
        sockets.push(ws);
        return ws;
      },
      (fn) => pending.push(fn),
    );
    sockets[0].onclose!(); // refused before open
    expect(log).toEqual([]);
    expect(pending).toHaveLength(1);
  });

  it('close() stops the retry loop and closes the socket', () => {
    const sockets: FakeWs[] = [];
    const pending: Array<() => void> = [];
    const handle = connectStream(
      'ws://h/ws',
      { onUp: () => undefined, onPush: () => undefined, onDown: () => undefined },
      () => {
        const ws = new FakeWs();
        sockets.push(ws);
        return ws;
      },
      (fn) => pending.push(fn),
    );
    handle.close();
    expect(sockets[0].closedByClient).toBe(true);
    sockets[0].onclose!();
    expect(pending).toHaveLength(0); // no retry scheduled after close
  });
});
