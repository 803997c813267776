/** Payload shapes of the harness HTTP/WebSocket contract (docs/api.md). */

export interface RunInfo {
  scenario: string;
  mode: 'live' | 'inspect';
  seed: number;
  now: number;
  duration_ms: number;
  finished: boolean;
  rate?: number;
  passed?: boolean;
}

export interface TopologyNode {
  id: string;
  up: boolean;
  control_center: boolean;
  phase: number;
  configured: boolean;
  utility: string | null;
  substation: number | null;
}

export interface TopologyLink {
  a: string;
  b: string;
  up: boolean;
  kind: string;
  latency_ms: number;
  bandwidth_kbps: number;
  slow: boolean;
}

export interface Topology {
  nodes: TopologyNode[];
  links: TopologyLink[];
}

export interface ShieldInfo {
  id: string;
  mode: string;
  policy: string;
}

/** One row of GET /devices/{node}. */
export interface DeviceEntry {
  device: string;
  address: string;
  hostname: string | null;
  services: Array<number | string>;
  compromised: boolean;
  quarantined: boolean;
  vni: number;
  utility: string;
  vlan_type: string;
  shield?: ShieldInfo;
}

export interface DeviceInventory {
  node: string;
  up: boolean;
  devices: DeviceEntry[];
}

/** Monitoring-snapshot device row (GET /snapshot state.devices[addr]). */
export interface MonitorDevice {
  address: string;
  node?: string;
  reachable?: boolean;
  compromised?: boolean;
  last_seen?: number;
  [k: string]: unknown;
}

export interface MonitorLink {
  a: string;
  b: string;
  up: boolean;
  slow: boolean;
  latency_ms: number;
  bandwidth_kbps: number;
  reported_at: number;
  reported_by: string;
}

export interface AlertRecord {
  at: number;
  severity: string;
  subtype: string;
  subject: string;
  agent?: string;
  [k: string]: unknown;
}

export interface MonitorState {
  nodes: Record<string, Record<string, unknown>>;
  links: Record<string, MonitorLink>;
  devices: Record<string, MonitorDevice>;
  alerts: AlertRecord[];
}

export interface Snapshot {
  at: number;
  state: MonitorState;
}

/** Append-only log record pushed as an "event" (or "alert"). */
export interface EventRecord {
  t: number;
  seq: number;
  kind: string;
  [k: string]: unknown;
}

export interface SampleRecord {
  agent: string;
  seq: number;
  at: number;
  kind: string;
  data: Record<string, unknown>;
}

/** Messages arriving on WS /ws, in stream order. */
export type Push =
  | ({ type: 'hello'; cursor: number } & RunInfo)
  | { type: 'tick'; now: number; finished: boolean }
  | { type: 'sample'; sample: SampleRecord }
  | { type: 'alert'; alert: EventRecord & AlertRecord }
  | { type: 'event'; event: EventRecord };

export type ActionKind = 'ApplyConfig' | 'ShieldActivate' | 'QuarantineDevice';

/** One operator action; `target` is the node it addresses. */
export interface ActionRequest {
  kind: ActionKind;
  target: string;
  parameters: Record<string, string | number>;
  issued_at: number;
}

/** Terminal acknowledgement of an issued action. */
export interface ActionAck {
  request: ActionRequest;
  status: 'accepted' | 'rejected';
  /** Harness response: scheduling time on acceptance, error text verbatim on rejection. */
  detail: string;
  at: number | null;
}
