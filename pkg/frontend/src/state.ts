/** View state and its reducer.
 *
 * Every input — WebSocket pushes, fetched documents, clicks, action
 * acknowledgements — becomes a message applied through `apply`, one at a
 * time, in arrival order. The reducer is pure (it never mutates its
 * input), so replaying the same message sequence always yields the same
 * state, and the rendered view is a function of (state) alone.
 */
import type {
  ActionAck,
  AlertRecord,
  DeviceInventory,
  EventRecord,
  MonitorState,
  Push,
  RunInfo,
  SampleRecord,
  Snapshot,
  Topology,
} from './types.js';

export type Selection =
  | { kind: 'node'; id: string }
  | { kind: 'device'; node: string; address: string }
  | { kind: 'link'; id: string };

export interface Rejection {
  /** Harness reason, rendered verbatim (e.g. "NotPaired"). */
  reason: string;
  record: EventRecord;
}

export interface ViewState {
  connection: 'connecting' | 'live' | 'stale';
  info: RunInfo | null;
  /** Latest simulated time observed on any channel (the view's as-of). */
  asOf: number;
  topology: Topology | null;
  /** GET /devices/{node} results, patched in place by pushed events. */
  inventories: Record<string, DeviceInventory>;
  /** Monitoring fold: authoritative at load/reconnect, then patched by samples. */
  monitor: MonitorState | null;
  /** When set, the monitor pane shows the snapshot as of this time (slider). */
  scrubbedAt: number | null;
  alerts: AlertRecord[];
  events: EventRecord[];
  selection: Selection | null;
  rejection: Rejection | null;
  acks: ActionAck[];
}

export const EVENT_FEED_LIMIT = 200;

export type Msg =
  | { type: 'connected' }
  | { type: 'disconnected' }
  | { type: 'push'; push: Push }
  | { type: 'info'; info: RunInfo }
  | { type: 'topology'; topology: Topology }
  | { type: 'snapshot'; snapshot: Snapshot; scrubbed: boolean }
  | { type: 'alerts'; alerts: AlertRecord[] }
  | { type: 'inventory'; inventory: DeviceInventory }
  | { type: 'select'; selection: Selection | null }
  | { type: 'ack'; ack: ActionAck }
  | { type: 'live' };

export function initialState(): ViewState {
  return {
    connection: 'connecting',
    info: null,
    asOf: 0,
    topology: null,
    inventories: {},
    monitor: null,
    scrubbedAt: null,
    alerts: [],
    events: [],
    selection: null,
    rejection: null,
    acks: [],
  };
}

export function apply(state: ViewState, msg: Msg): ViewState {
  switch (msg.type) {
    case 'connected':
      return { ...state, connection: 'live' };
    case 'disconnected':
      return { ...state, connection: 'stale' };
    case 'push':
      return applyPush(state, msg.push);
    case 'info':
      return { ...state, info: msg.info, asOf: Math.max(state.asOf, msg.info.now) };
    case 'topology':
      return { ...state, topology: msg.topology };
    case 'snapshot':
      if (msg.scrubbed) {
        return { ...state, monitor: msg.snapshot.state, scrubbedAt: msg.snapshot.at };
      }
      return {
        ...state,
        monitor: msg.snapshot.state,
        scrubbedAt: null,
        asOf: Math.max(state.asOf, msg.snapshot.at),
      };
    case 'alerts':
      return { ...state, alerts: msg.alerts };
    case 'inventory':
      return {
        ...state,
        inventories: { ...state.inventories, [msg.inventory.node]: msg.inventory },
      };
    case 'select':
      return { ...state, selection: msg.selection };
    case 'ack':
      return { ...state, acks: [msg.ack, ...state.acks].slice(0, 50) };
    case 'live':
      return { ...state, scrubbedAt: null };
  }
}

function applyPush(state: ViewState, push: Push): ViewState {
  switch (push.type) {
    case 'hello': {
      const { type: _t, cursor: _c, ...info } = push;
      return { ...state, info: info as RunInfo, asOf: Math.max(state.asOf, push.now) };
    }
    case 'tick': {
      const info = state.info ? { ...state.info, now: push.now, finished: push.finished } : null;
      return { ...state, info, asOf: Math.max(state.asOf, push.now) };
    }
    case 'sample':
      return applySample(state, push.sample);
    case 'alert': {
      const { t, seq: _s, kind: _k, node: _n, ...alert } = push.alert;
      return {
        ...state,
        asOf: Math.max(state.asOf, t),
        alerts: [...state.alerts, alert as AlertRecord],
      };
    }
    case 'event':
      return applyEvent(state, push.event);
  }
}

/** Keep the monitor pane current between snapshot fetches: fold the same
 * three sample kinds the backend folds, over the slice we already hold. */
function applySample(state: ViewState, sample: SampleRecord): ViewState {
  const next: ViewState = { ...state, asOf: Math.max(state.asOf, sample.at) };
  if (state.monitor === null || state.scrubbedAt !== null) return next;
  const monitor = {
    ...state.monitor,
    nodes: { ...state.monitor.nodes },
    links: { ...state.monitor.links },
    devices: { ...state.monitor.devices },
  };
  const data = sample.data as Record<string, unknown>;
  if (sample.kind === 'link_stats') {
    const { links, ...rest } = data as { links?: Array<Record<string, unknown>> };
    monitor.nodes[sample.agent] = {
      ...monitor.nodes[sample.agent],
      ...rest,
      last_seen: sample.at,
    };
    for (const l of links ?? []) {
      const peer = l.peer as string;
      const [a, b] = sample.agent < peer ? [sample.agent, peer] : [peer, sample.agent];
      monitor.links[`${a}|${b}`] = {
        a,
        b,
        up: l.up as boolean,
        slow: l.slow as boolean,
        latency_ms: l.latency_ms as number,
        bandwidth_kbps: l.bandwidth_kbps as number,
        reported_at: sample.at,
        reported_by: sample.agent,
      };
    }
  } else if (sample.kind === 'device_seen') {
    const address = data.address as string;
    monitor.devices[address] = {
      ...monitor.devices[address],
      ...data,
      address,
      node: sample.agent,
      reachable: true,
      last_seen: sample.at,
    };
  } else if (sample.kind === 'device_lost') {
    const address = data.address as string;
    monitor.devices[address] = {
      ...monitor.devices[address],
      address,
      node: sample.agent,
      reachable: false,
    };
  }
  next.monitor = monitor;
  return next;
}

function applyEvent(state: ViewState, event: EventRecord): ViewState {
  let next: ViewState = {
    ...state,
    asOf: Math.max(state.asOf, event.t),
    events: [...state.events, event].slice(-EVENT_FEED_LIMIT),
  };
  switch (event.kind) {
    case 'link_state':
      next = patchTopologyLink(next, event.a as string, event.b as string, event.up as boolean);
      break;
    case 'node_state':
      next = patchTopologyNode(next, event.node as string, { up: event.up as boolean });
      break;
    case 'phase_changed':
      next = patchTopologyNode(next, event.node as string, { phase: event.phase as number });
      break;
    case 'config_applied':
      next = patchTopologyNode(next, event.node as string, {
        configured: true,
        utility: event.utility as string,
        substation: event.substation as number,
      });
      break;
    case 'config_rejected':
    case 'shield_reject':
    case 'roam_rejected':
    case 'voip_reject':
    case 'msg_reject':
      next = { ...next, rejection: { reason: String(event.reason ?? event.kind), record: event } };
      break;
    case 'shield_activated':
      next = patchShield(next, event.node as string, event.shield as string, {
        mode: event.mode as string,
        policy: event.policy as string,
      });
      break;
    case 'device_quarantined':
      next = patchDevice(next, event.node as string, event.device as string, {
        quarantined: true,
      });
      break;
  }
  return next;
}

function patchTopologyLink(state: ViewState, a: string, b: string, up: boolean): ViewState {
  if (state.topology === null) return state;
  const links = state.topology.links.map((l) =>
    (l.a === a && l.b === b) || (l.a === b && l.b === a) ? { ...l, up } : l,
  );
  return { ...state, topology: { ...state.topology, links } };
}

function patchTopologyNode(
  state: ViewState,
  id: string,
  patch: Partial<Topology['nodes'][number]>,
): ViewState {
  if (state.topology === null) return state;
  const nodes = state.topology.nodes.map((n) => (n.id === id ? { ...n, ...patch } : n));
  return { ...state, topology: { ...state.topology, nodes } };
}

function patchDevice(
  state: ViewState,
  node: string,
  deviceId: string,
  patch: Partial<DeviceInventory['devices'][number]>,
): ViewState {
  const inventory = state.inventories[node];
  if (inventory === undefined) return state;
  const devices = inventory.devices.map((d) =>
    d.device === deviceId ? { ...d, ...patch } : d,
  );
  return {
    ...state,
    inventories: { ...state.inventories, [node]: { ...inventory, devices } },
  };
}

function patchShield(
  state: ViewState,
  node: string,
  shieldId: string,
  patch: { mode: string; policy: string },
): ViewState {
  const inventory = state.inventories[node];
  if (inventory === undefined) return state;
  const devices = inventory.devices.map((d) =>
    d.shield?.id === shieldId ? { ...d, shield: { ...d.shield, ...patch } } : d,
  );
  return {
    ...state,
    inventories: { ...state.inventories, [node]: { ...inventory, devices } },
  };
}
