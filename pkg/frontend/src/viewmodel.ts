/** Pure projection from view state to a renderable view model.
 *
 * All status coloring is decided here, from the latest state only — an
 * element whose underlying state carries an uncleared fault can never
 * come out 'healthy' (no stale green), and an element whose fault has
 * cleared carries none of the old alert styling.
 */
import { layout, type Point } from './layout.js';
import type { Selection, ViewState } from './state.js';
import type {
  ActionAck,
  AlertRecord,
  DeviceEntry,
  EventRecord,
  MonitorDevice,
} from './types.js';

export type Status = 'healthy' | 'warning' | 'faulted' | 'quarantined' | 'unconfigured';

export interface NodeGlyph {
  id: string;
  /** Substations render as hexagons; the control center as a square. */
  shape: 'hexagon' | 'square';
  at: Point;
  status: Status;
  phase: number;
  label: string;
  selected: boolean;
}

export interface EdgeGlyph {
  id: string;
  from: Point;
  to: Point;
  status: 'up' | 'down' | 'slow';
}

export interface DeviceRow {
  address: string;
  device: string;
  hostname: string | null;
  vlan: string;
  status: Status;
  shield: string | null;
}

export interface DeviceDetail {
  address: string;
  device: string;
  hostname: string | null;
  node: string;
  vlan: string;
  /** Open service ports, rendered as text (e.g. "502"). */
  ports: string[];
  reachable: boolean;
  compromised: boolean;
  quarantined: boolean;
  shield: string | null;
  status: Status;
  alerts: AlertRecord[];
}

export type Pane =
  | { kind: 'node'; node: string; up: boolean; phase: number; role: string; devices: DeviceRow[] }
  | { kind: 'device'; detail: DeviceDetail }
  | { kind: 'link'; id: string; up: boolean; slow: boolean; latency_ms: number; bandwidth_kbps: number };

export interface ViewModel {
  title: string;
  asOf: number;
  /** Set while the push stream is down: banner with the last as-of time. */
  stale: { asOf: number } | null;
  /** Last harness rejection, reason verbatim. */
  rejection: { reason: string; detail: string } | null;
  scrubbedAt: number | null;
  durationMs: number;
  finished: boolean;
  nodes: NodeGlyph[];
  edges: EdgeGlyph[];
  pane: Pane | null;
  alerts: AlertRecord[];
  feed: EventRecord[];
  acks: ActionAck[];
  nodeIds: string[];
}

/** Device status from the authoritative inventory row plus the latest
 * monitoring view. Quarantine wins (the device is deliberately cut off),
 * then compromise, then unreachability; otherwise healthy. */
export function deviceStatus(
  entry: Pick<DeviceEntry, 'compromised' | 'quarantined'>,
  monitor: MonitorDevice | undefined,
): Status {
  if (entry.quarantined) return 'quarantined';
  if (entry.compromised || monitor?.compromised) return 'faulted';
  if (monitor !== undefined && monitor.reachable === false) return 'faulted';
  return 'healthy';
}

export function nodeStatus(node: {
  up: boolean;
  configured: boolean;
}): Status {
  if (!node.up) return 'faulted';
  if (!node.configured) return 'unconfigured';
  return 'healthy';
}

export function linkStatus(link: { up: boolean; slow: boolean }): 'up' | 'down' | 'slow' {
  if (!link.up) return 'down';
  return link.slow ? 'slow' : 'up';
}

function selectedNodeId(selection: Selection | null): string | null {
  if (selection === null) return null;
  if (selection.kind === 'node') return selection.id;
  if (selection.kind === 'device') return selection.node;
  return null;
}

export function buildViewModel(state: ViewState): ViewModel {
  const topology = state.topology ?? { nodes: [], links: [] };
  const points = layout(topology);
  const selectedNode = selectedNodeId(state.selection);

  const nodes: NodeGlyph[] = topology.nodes.map((n) => ({
    id: n.id,
    shape: n.control_center ? 'square' : 'hexagon',
    at: points[n.id],
    status: nodeStatus(n),
    phase: n.phase,
    label: n.configured ? `${n.id} ${n.utility}/${n.substation}` : n.id,
    selected: n.id === selectedNode,
  }));

  const edges: EdgeGlyph[] = topology.links.map((l) => ({
    id: l.a < l.b ? `${l.a}|${l.b}` : `${l.b}|${l.a}`,
    from: points[l.a],
    to: points[l.b],
    status: linkStatus(l),
  }));

  return {
    title: state.info?.scenario ?? 'phoenixsen',
    asOf: state.asOf,
    stale: state.connection === 'stale' ? { asOf: state.asOf } : null,
    rejection: state.rejection
      ? {
          reason: state.rejection.reason,
          detail: describeRejection(state.rejection.record),
        }
      : null,
    scrubbedAt: state.scrubbedAt,
    durationMs: state.info?.duration_ms ?? 0,
    finished: state.info?.finished ?? false,
    nodes,
    edges,
    pane: buildPane(state),
    alerts: activeAlerts(state),
    feed: state.events.slice(-30).reverse(),
    acks: state.acks.slice(0, 10),
    nodeIds: topology.nodes.map((n) => n.id),
  };
}

function describeRejection(record: EventRecord): string {
  const parts = Object.entries(record)
    .filter(([k]) => !['t', 'seq', 'kind', 'reason'].includes(k))
    .map(([k, v]) => `${k}=${String(v)}`);
  return `${record.kind} ${parts.join(' ')}`.trim();
}

/** Alerts whose condition still holds in the current monitoring view. */
export function activeAlerts(state: ViewState): AlertRecord[] {
  const monitor = state.monitor;
  const out: AlertRecord[] = [];
  const seen = new Set<string>();
  for (let i = state.alerts.length - 1; i >= 0; i--) {
    const alert = state.alerts[i];
    const key = `${alert.subtype}:${alert.subject}`;
    if (seen.has(key)) continue;
    seen.add(key);
    if (monitor !== null && cleared(alert, monitor)) continue;
    out.push(alert);
  }
  return out;
}

function cleared(alert: AlertRecord, monitor: NonNullable<ViewState['monitor']>): boolean {
  if (alert.subtype === 'link_down') {
    const link = monitor.links[alert.subject];
    return link !== undefined && link.up;
  }
  if (alert.subtype === 'device_unreachable') {
    const device = monitor.devices[alert.subject];
    return device !== undefined && device.reachable === true;
  }
  if (alert.subtype === 'device_compromised') {
    const device = monitor.devices[alert.subject];
    return device !== undefined && device.compromised !== true;
  }
  return false;
}

function buildPane(state: ViewState): Pane | null {
  const selection = state.selection;
  if (selection === null) return null;

  if (selection.kind === 'link') {
    const link = (state.topology?.links ?? []).find(
      (l) => (l.a < l.b ? `${l.a}|${l.b}` : `${l.b}|${l.a}`) === selection.id,
    );
    if (link === undefined) return null;
    return {
      kind: 'link',
      id: selection.id,
      up: link.up,
      slow: link.slow,
      latency_ms: link.latency_ms,
      bandwidth_kbps: link.bandwidth_kbps,
    };
  }

  if (selection.kind === 'node') {
    const node = (state.topology?.nodes ?? []).find((n) => n.id === selection.id);
    if (node === undefined) return null;
    const inventory = state.inventories[selection.id];
    const devices: DeviceRow[] = (inventory?.devices ?? []).map((d) => ({
      address: d.address,
      device: d.device,
      hostname: d.hostname,
      vlan: `${d.utility}/${d.vlan_type}`,
      status: deviceStatus(d, state.monitor?.devices[d.address]),
      shield: d.shield ? `${d.shield.id} ${d.shield.mode}` : null,
    }));
    return {
      kind: 'node',
      node: node.id,
      up: node.up,
      phase: node.phase,
      role: node.control_center
        ? 'control center'
        : node.configured
          ? `${node.utility} / substation ${node.substation}`
          : 'unconfigured',
      devices,
    };
  }

  const inventory = state.inventories[selection.node];
  const entry = inventory?.devices.find((d) => d.address === selection.address);
  if (entry === undefined) return null;
  const monitorDevice = state.monitor?.devices[selection.address];
  const status = deviceStatus(entry, monitorDevice);
  return {
    kind: 'device',
    detail: {
      address: entry.address,
      device: entry.device,
      hostname: entry.hostname,
      node: selection.node,
      vlan: `${entry.utility}/${entry.vlan_type}`,
      ports: entry.services.map(String),
      reachable: monitorDevice?.reachable !== false,
      compromised: Boolean(entry.compromised || monitorDevice?.compromised),
      quarantined: entry.quarantined,
      shield: entry.shield ? `${entry.shield.id} ${entry.shield.mode}/${entry.shield.policy}` : null,
      status,
      alerts: activeAlerts(state).filter((a) => a.subject === entry.address),
    },
  };
}
