/** Shared fixtures for the console tests. */
import type {
  DeviceEntry,
  DeviceInventory,
  MonitorState,
  Topology,
  TopologyLink,
  TopologyNode,
} from '../src/types.js';

export function node(id: string, patch: Partial<TopologyNode> = {}): TopologyNode {
  return {
    id,
    up: true,
    control_center: false,
    phase: 3,
    configured: true,
    utility: 'alpha',
    substation: 1,
    ...patch,
  };
}

export function link(a: string, b: string, patch: Partial<TopologyLink> = {}): TopologyLink {
  return {
    a,
    b,
    up: true,
    kind: 'mesh',
    latency_ms: 1,
    bandwidth_kbps: 1000,
    slow: false,
    ...patch,
  };
}

export function topology(
  nodes: TopologyNode[],
  links: TopologyLink[] = [],
): Topology {
  return { nodes, links };
}

export function device(address: string, patch: Partial<DeviceEntry> = {}): DeviceEntry {
  return {
    device: `dev-${address}`,
    address,
    hostname: null,
    services: [],
    compromised: false,
    quarantined: false,
    vni: 1,
    utility: 'alpha',
    vlan_type: 'SCADA',
    ...patch,
  };
}

export function inventory(nodeId: string, devices: DeviceEntry[]): DeviceInventory {
  return { node: nodeId, up: true, devices };
}

export function emptyMonitor(): MonitorState {
  return { nodes: {}, links: {}, devices: {}, alerts: [] };
}
