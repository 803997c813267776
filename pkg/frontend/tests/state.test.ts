import { describe, expect, it } from 'vitest';

import { apply, initialState, type Msg, type ViewState } from '../src/state.js';
import type { EventRecord, RunInfo } from '../src/types.js';
import { device, emptyMonitor, inventory, link, node, topology } from './helpers.js';

const INFO: RunInfo = {
  scenario: 'demo',
  mode: 'live',
  seed: 7,
  now: 0,
  duration_ms: 60000,
  finished: false,
};

function run(msgs: Msg[], from: ViewState = initialState()): ViewState {
  return msgs.reduce(apply, from);
}

function event(t: number, kind: string, fields: Record<string, unknown> = {}): Msg {
  return {
    type: 'push',
    push: { type: 'event', event: { t, seq: 0, kind, ...fields } as EventRecord },
  };
}

describe('connection state', () => {
  it('marks the view stale on stream drop, preserving the last as-of time', () => {
    const state = run([
      { type: 'connected' },
      { type: 'info', info: { ...INFO, now: 4200 } },
      { type: 'disconnected' },
    ]);
    expect(state.connection).toBe('stale');
    expect(state.asOf).toBe(4200);
  });

  it('clears stale on reconnect', () => {
    const state = run([
      { type: 'connected' },
      { type: 'disconnected' },
      { type: 'connected' },
    ]);
    expect(state.connection).toBe('live');
  });
});

describe('pushes', () => {
  it('advances as-of monotonically from ticks, events, alerts, and samples', () => {
    let state = run([
      { type: 'push', push: { type: 'tick', now: 1000, finished: false } },
    ]);
    expect(state.asOf).toBe(1000);
    state = run([event(5000, 'phase_changed', { node: 'phx1', phase: 2 })], state);
    expect(state.asOf).toBe(5000);
    state = run(
      [{ type: 'push', push: { type: 'tick', now: 3000, finished: false } }],
      state,
    );
    expect(state.asOf).toBe(5000); // never goes backwards
  });

  it('marks a downed link within one push', () => {
    const base = run([
      { type: 'topology', topology: topology([node('a'), node('b')], [link('a', 'b')]) },
    ]);
    const state = run([event(2000, 'link_state', { a: 'b', b: 'a', up: false })], base);
    expect(state.topology!.links[0].up).toBe(false);
  });

  it('applies node, phase, and config events to the topology', () => {
    const base = run([
      {
        type: 'topology',
        topology: topology([node('a', { configured: false, utility: null, substation: null, phase: 1 })]),
      },
    ]);
    const state = run(
      [
        event(1000, 'config_applied', { node: 'a', utility: 'beta', substation: 2 }),
        event(1500, 'phase_changed', { node: 'a', phase: 4, previous: 3 }),
        event(2000, 'node_state', { node: 'a', up: false }),
      ],
      base,
    );
    const n = state.topology!.nodes[0];
    expect(n.configured).toBe(true);
    expect(n.utility).toBe('beta');
    expect(n.substation).toBe(2);
    expect(n.phase).toBe(4);
    expect(n.up).toBe(false);
  });

  it('surfaces rejection events verbatim (NotPaired)', () => {
    const state = run([
      event(900, 'shield_reject', { node: 'phx1', shield: 'es1', reason: 'NotPaired' }),
    ]);
    expect(state.rejection).not.toBeNull();
    expect(state.rejection!.reason).toBe('NotPaired');
  });

  it('quarantine and shield events patch the cached inventory', () => {
    const base = run([
      {
        type: 'inventory',
        inventory: inventory('phx1', [
          device('10.0.0.5', { device: 'rtu5', shield: { id: 'es1', mode: 'Open', policy: 'AuthenticatedOnly' } }),
          device('10.0.0.6', { device: 'ws6' }),
        ]),
      },
    ]);
    const state = run(
      [
        event(100, 'device_quarantined', { node: 'phx1', device: 'ws6' }),
        event(200, 'shield_activated', {
          node: 'phx1',
          shield: 'es1',
          mode: 'SecureIpsec',
          policy: 'AuthenticatedOnly',
        }),
      ],
      base,
    );
    const devices = state.inventories['phx1'].devices;
    expect(devices.find((d) => d.device === 'ws6')!.quarantined).toBe(true);
    expect(devices.find((d) => d.device === 'rtu5')!.shield!.mode).toBe('SecureIpsec');
  });

  it('folds samples into the monitoring view', () => {
    const base = run([
      { type: 'snapshot', snapshot: { at: 0, state: emptyMonitor() }, scrubbed: false },
    ]);
    const seen = run(
      [
        {
          type: 'push',
          push: {
            type: 'sample',
            sample: {
              agent: 'phx1',
              seq: 1,
              at: 11_000,
              kind: 'device_seen',
              data: { address: '10.0.0.5', services: [502] },
            },
          },
        },
      ],
      base,
    );
    expect(seen.monitor!.devices['10.0.0.5'].reachable).toBe(true);
    const lost = run(
      [
        {
          type: 'push',
          push: {
            type: 'sample',
            sample: {
              agent: 'phx1',
              seq: 2,
              at: 21_000,
              kind: 'device_lost',
              data: { address: '10.0.0.5' },
            },
          },
        },
      ],
      seen,
    );
    expect(lost.monitor!.devices['10.0.0.5'].reachable).toBe(false);
    expect(lost.asOf).toBe(21_000);
  });

  it('does not patch a scrubbed (historical) monitor view', () => {
    const base = run([
      { type: 'snapshot', snapshot: { at: 5000, state: emptyMonitor() }, scrubbed: true },
    ]);
    const state = run(
      [
        {
          type: 'push',
          push: {
            type: 'sample',
            sample: {
              agent: 'phx1',
              seq: 1,
              at: 11_000,
              kind: 'device_seen',
              data: { address: '10.0.0.5' },
            },
          },
        },
      ],
      base,
    );
    expect(state.scrubbedAt).toBe(5000);
    expect(state.monitor!.devices['10.0.0.5']).toBeUndefined();
  });

  it('appends pushed alerts', () => {
    const state = run([
      {
        type: 'push',
        push: {
          type: 'alert',
          alert: {
            t: 30_000,
            seq: 9,
            kind: 'alert',
            at: 30_000,
            severity: 'warning',
            subtype: 'link_down',
            subject: 'a|b',
          },
        },
      },
    ]);
    expect(state.alerts).toHaveLength(1);
    expect(state.alerts[0].subtype).toBe('link_down');
    expect(state.asOf).toBe(30_000);
  });
});

describe('purity and replay', () => {
  it('never mutates the previous state', () => {
    const base = run([
      { type: 'topology', topology: topology([node('a'), node('b')], [link('a', 'b')]) },
    ]);
    const frozen = JSON.parse(JSON.stringify(base));
    run([event(100, 'link_state', { a: 'a', b: 'b', up: false })], base);
    expect(base).toEqual(frozen);
  });

  it('replaying the same message sequence yields the same state', () => {
    const msgs: Msg[] = [
      { type: 'connected' },
      { type: 'info', info: INFO },
      { type: 'topology', topology: topology([node('a'), node('b')], [link('a', 'b')]) },
      event(100, 'link_state', { a: 'a', b: 'b', up: false }),
      event(200, 'shield_reject', { node: 'a', shield: 'es', reason: 'NotPaired' }),
      { type: 'disconnected' },
    ];
    expect(run(msgs)).toEqual(run(msgs));
  });
});
