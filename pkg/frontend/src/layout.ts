/** Deterministic force-directed graph layout.
 *
 * Positions are a pure function of the topology's shape: the initial
 * placement comes from a PRNG seeded by a hash of the sorted node ids and
 * link pairs, and the relaxation runs a fixed number of steps with no
 * other entropy — so the same topology always renders the same picture
 * (screenshots are reproducible), and any topology change reshuffles it.
 */
import type { Topology } from './types.js';

export interface Point {
  x: number;
  y: number;
}

const ITERATIONS = 250;
const MARGIN = 48;

/** FNV-1a over the canonical topology description (ids and link pairs only). */
export function topologyHash(topology: Topology): number {
  const nodes = topology.nodes.map((n) => n.id).sort();
  const links = topology.links
    .map((l) => (l.a < l.b ? `${l.a}|${l.b}` : `${l.b}|${l.a}`))
    .sort();
  const text = nodes.join(';') + '#' + links.join(';');
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash >>> 0;
}

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function layout(
  topology: Topology,
  width = 800,
  height = 520,
): Record<string, Point> {
  const ids = topology.nodes.map((n) => n.id).sort();
  if (ids.length === 0) return {};
  const index = new Map(ids.map((id, i) => [id, i]));
  const edges: Array<[number, number]> = [];
  const seen = new Set<string>();
  for (const l of topology.links) {
    const key = l.a < l.b ? `${l.a}|${l.b}` : `${l.b}|${l.a}`;
    if (seen.has(key)) continue;
    seen.add(key);
    const a = index.get(l.a);
    const b = index.get(l.b);
    if (a !== undefined && b !== undefined) edges.push([a, b]);
  }

  const rand = mulberry32(topologyHash(topology));
  const xs = ids.map(() => MARGIN + rand() * (width - 2 * MARGIN));
  const ys = ids.map(() => MARGIN + rand() * (height - 2 * MARGIN));
  const n = ids.length;
  const rest = Math.min(width, height) / Math.max(2, Math.sqrt(n) + 1);

  for (let step = 0; step < ITERATIONS; step++) {
    const cool = 1 - step / ITERATIONS;
    const fx = new Array<number>(n).fill(0);
    const fy = new Array<number>(n).fill(0);
    // Pairwise repulsion.
    for (let i = 0; i < n; i++) {
      for (let j = i + 1; j < n; j++) {
        const dx = xs[i] - xs[j];
        const dy = ys[i] - ys[j];
        const d2 = Math.max(dx * dx + dy * dy, 1e-4);
        const f = (rest * rest) / d2;
        const d = Math.sqrt(d2);
        fx[i] += (dx / d) * f;
        fy[i] += (dy / d) * f;
        fx[j] -= (dx / d) * f;
        fy[j] -= (dy / d) * f;
      }
    }
    // Springs along links.
    for (const [a, b] of edges) {
      const dx = xs[b] - xs[a];
      const dy = ys[b] - ys[a];
      const d = Math.max(Math.sqrt(dx * dx + dy * dy), 1e-2);
      const f = (d - rest) * 0.08;
      fx[a] += (dx / d) * f;
      fy[a] += (dy / d) * f;
      fx[b] -= (dx / d) * f;
      fy[b] -= (dy / d) * f;
    }
    // Mild pull to the center keeps disconnected components on screen.
    for (let i = 0; i < n; i++) {
      fx[i] += (width / 2 - xs[i]) * 0.01;
      fy[i] += (height / 2 - ys[i]) * 0.01;
    }
    for (let i = 0; i < n; i++) {
      const d = Math.max(Math.sqrt(fx[i] * fx[i] + fy[i] * fy[i]), 1e-9);
      const cap = Math.min(d, 24 * cool + 1);
      xs[i] += (fx[i] / d) * cap;
      ys[i] += (fy[i] / d) * cap;
      xs[i] = Math.min(Math.max(xs[i], MARGIN), width - MARGIN);
      ys[i] = Math.min(Math.max(ys[i], MARGIN), height - MARGIN);
    }
  }

  const points: Record<string, Point> = {};
  ids.forEach((id, i) => {
    points[id] = { x: Math.round(xs[i] * 100) / 100, y: Math.round(ys[i] * 100) / 100 };
  });
  return points;
}
