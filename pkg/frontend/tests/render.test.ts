import { describe, expect, it } from 'vitest';

import { apply, initialState, type Msg, type ViewState } from '../src/state.js';
import { buildViewModel } from '../src/viewmodel.js';
import { escapeHtml, hexagonPoints, renderApp, renderTopology } from '../src/render.js';
import { device, inventory, link, node, topology } from './helpers.js';

function stateWith(msgs: Msg[]): ViewState {
  return msgs.reduce(apply, initialState());
}

describe('hexagonPoints', () => {
  it('produces six vertices around the center', () => {
    const points = hexagonPoints({ x: 100, y: 100 }, 10);
    const pairs = points.split(' ');
    expect(pairs).toHaveLength(6);
    for (const pair of pairs) {
      const [x, y] = pair.split(',').map(Number);
      expect(Math.hypot(x - 100, y - 100)).toBeCloseTo(10, 1);
    }
  });
});

describe('renderTopology', () => {
  it('draws hexagon polygons for substations and a rect for the control center', () => {
    const vm = buildViewModel(
      stateWith([
        {
          type: 'topology',
          topology: topology(
            [node('cc', { control_center: true }), node('phx1'), node('phx2')],
            [link('cc', 'phx1'), link('phx1', 'phx2')],
          ),
        },
      ]),
    );
    const svg = renderTopology(vm);
    expect(svg.match(/<polygon class="node/g)).toHaveLength(2);
    expect(svg.match(/<rect class="node/g)).toHaveLength(1);
    expect(svg.match(/<line class="edge/g)).toHaveLength(2);
  });

  it('marks a downed edge with the down class (red styling)', () => {
    const vm = buildViewModel(
      stateWith([
        {
          type: 'topology',
          topology: topology([node('a'), node('b')], [link('a', 'b', { up: false })]),
        },
      ]),
    );
    expect(renderTopology(vm)).toContain('edge edge-down');
  });

  it('marks a faulted node with its status class', () => {
    const vm = buildViewModel(
      stateWith([
        { type: 'topology', topology: topology([node('a', { up: false }), node('b')]) },
      ]),
    );
    const svg = renderTopology(vm);
    expect(svg).toContain('status-faulted');
    expect(svg.match(/status-healthy/g)).toHaveLength(1); // only node b
  });
});

describe('renderApp', () => {
  it('shows the stale banner with the last as-of time after a stream drop', () => {
    const html = renderApp(
      buildViewModel(
        stateWith([
          { type: 'info', info: { scenario: 's', mode: 'live', seed: 0, now: 8000, duration_ms: 60000, finished: false } },
          { type: 'disconnected' },
        ]),
      ),
    );
    expect(html).toContain('banner-stale');
    expect(html).toContain('8000 ms');
  });

  it('omits the stale banner while the stream is up', () => {
    const html = renderApp(buildViewModel(stateWith([{ type: 'connected' }])));
    expect(html).not.toContain('banner-stale');
  });

  it('shows the NotPaired rejection banner verbatim', () => {
    const html = renderApp(
      buildViewModel(
        stateWith([
          {
            type: 'push',
            push: {
              type: 'event',
              event: { t: 1, seq: 0, kind: 'shield_reject', node: 'phx1', shield: 'es1', reason: 'NotPaired' },
            },
          },
        ]),
      ),
    );
    expect(html).toContain('banner-rejected');
    expect(html).toContain('NotPaired');
  });

  it('renders the device table for a selected substation', () => {
    const html = renderApp(
      buildViewModel(
        stateWith([
          { type: 'topology', topology: topology([node('phx1')]) },
          {
            type: 'inventory',
            inventory: inventory('phx1', [
              device('10.0.0.5', { services: [502] }),
              device('10.0.0.6', { quarantined: true }),
            ]),
          },
          { type: 'select', selection: { kind: 'node', id: 'phx1' } },
        ]),
      ),
    );
    expect(html.match(/<tr class="device-row/g)).toHaveLength(2);
    expect(html).toContain('status-quarantined');
  });

  it('escapes HTML in harness-provided text', () => {
    expect(escapeHtml('<img src=x onerror=alert(1)>')).not.toContain('<img');
    const html = renderApp(
      buildViewModel(
        stateWith([
          {
            type: 'push',
            push: {
              type: 'event',
              event: { t: 1, seq: 0, kind: 'config_rejected', node: 'x', reason: '<script>boom</script>' },
            },
          },
        ]),
      ),
    );
    expect(html).not.toContain('<script>boom');
    expect(html).toContain('&lt;script&gt;');
  });

  it('renders action forms for all three operator actions', () => {
    const html = renderApp(buildViewModel(stateWith([
      { type: 'topology', topology: topology([node('phx1')]) },
    ])));
    expect(html).toContain('data-action-form="ApplyConfig"');
    expect(html).toContain('data-action-form="ShieldActivate"');
    expect(html).toContain('data-action-form="QuarantineDevice"');
  });

  it('is a pure function of the view model (replay-identical)', () => {
    const state = stateWith([
      { type: 'topology', topology: topology([node('a'), node('b')], [link('a', 'b')]) },
      { type: 'select', selection: { kind: 'node', id: 'a' } },
    ]);
    expect(renderApp(buildViewModel(state))).toBe(renderApp(buildViewModel(state)));
  });
});
