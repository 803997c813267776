/** Render a view model to HTML. Pure string construction — the DOM is
 * touched only by the app shell, so rendering stays replayable and
 * testable byte-for-byte.
 */
import type { Point } from './layout.js';
import type { NodeGlyph, Pane, Status, ViewModel } from './viewmodel.js';

export const SVG_WIDTH = 800;
export const SVG_HEIGHT = 520;
const HEX_RADIUS = 22;
const SQUARE_HALF = 18;

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
    .replace(/'/g, '&#39;');
}

/** Flat-top hexagon vertices around a center, as an SVG points string. */
export function hexagonPoints(center: Point, radius = HEX_RADIUS): string {
  const points: string[] = [];
  for (let i = 0; i < 6; i++) {
    const angle = (Math.PI / 3) * i + Math.PI / 6;
    const x = Math.round((center.x + radius * Math.cos(angle)) * 10) / 10;
    const y = Math.round((center.y + radius * Math.sin(angle)) * 10) / 10;
    points.push(`${x},${y}`);
  }
  return points.join(' ');
}

function statusClass(status: Status): string {
  return `status-${status}`;
}

function nodeSvg(glyph: NodeGlyph): string {
  const classes = ['node', statusClass(glyph.status), glyph.selected ? 'selected' : '']
    .filter(Boolean)
    .join(' ');
  const select = `data-select="node:${escapeHtml(glyph.id)}"`;
  const shape =
    glyph.shape === 'hexagon'
      ? `<polygon class="${classes}" points="${hexagonPoints(glyph.at)}" ${select}/>`
      : `<rect class="${classes}" x="${glyph.at.x - SQUARE_HALF}" y="${glyph.at.y - SQUARE_HALF}"` +
        ` width="${SQUARE_HALF * 2}" height="${SQUARE_HALF * 2}" ${select}/>`;
  const label = `<text class="node-label" x="${glyph.at.x}" y="${glyph.at.y + HEX_RADIUS + 14}"` +
    ` text-anchor="middle">${escapeHtml(glyph.label)}</text>`;
  const phase = `<text class="phase-badge" x="${glyph.at.x}" y="${glyph.at.y + 5}"` +
    ` text-anchor="middle" data-select="node:${escapeHtml(glyph.id)}">${glyph.phase}</text>`;
  return shape + label + phase;
}

export function renderTopology(vm: ViewModel): string {
  const edges = vm.edges
    .map(
      (e) =>
        `<line class="edge edge-${e.status}" x1="${e.from.x}" y1="${e.from.y}"` +
        ` x2="${e.to.x}" y2="${e.to.y}" data-select="link:${escapeHtml(e.id)}"/>`,
    )
    .join('');
  const nodes = vm.nodes.map(nodeSvg).join('');
  return (
    `<svg viewBox="0 0 ${SVG_WIDTH} ${SVG_HEIGHT}" class="topology">` +
    edges +
    nodes +
    '</svg>'
  );
}

function renderPane(pane: Pane | null): string {
  if (pane === null) {
    return '<p class="hint">Select a substation, device, or link.</p>';
  }
  if (pane.kind === 'link') {
    return (
      `<h2>link ${escapeHtml(pane.id)}</h2>` +
      `<p class="${pane.up ? 'status-healthy' : 'status-faulted'}">` +
      `${pane.up ? (pane.slow ? 'up (slow)' : 'up') : 'down'}</p>` +
      `<p>latency ${pane.latency_ms} ms · ${pane.bandwidth_kbps} kbps</p>`
    );
  }
  if (pane.kind === 'node') {
    const rows = pane.devices
      .map(
        (d) =>
          `<tr class="device-row ${statusClass(d.status)}"` +
          ` data-select="device:${escapeHtml(pane.node)}:${escapeHtml(d.address)}">` +
          `<td>${escapeHtml(d.address)}</td>` +
          `<td>${escapeHtml(d.device)}</td>` +
          `<td>${escapeHtml(d.hostname ?? '—')}</td>` +
          `<td>${escapeHtml(d.vlan)}</td>` +
          `<td>${escapeHtml(d.shield ?? '—')}</td>` +
          `<td class="${statusClass(d.status)}">${d.status}</td></tr>`,
      )
      .join('');
    return (
      `<h2>${escapeHtml(pane.node)}</h2>` +
      `<p>${escapeHtml(pane.role)} · phase ${pane.phase} · ${pane.up ? 'up' : 'down'}</p>` +
      `<table class="devices"><thead><tr><th>address</th><th>device</th>` +
      `<th>hostname</th><th>vlan</th><th>shield</th><th>status</th></tr></thead>` +
      `<tbody>${rows}</tbody></table>`
    );
  }
  const d = pane.detail;
  const alerts = d.alerts
    .map(
      (a) =>
        `<li class="alert severity-${escapeHtml(a.severity)}">` +
        `${escapeHtml(a.subtype)} @ ${a.at} ms</li>`,
    )
    .join('');
  return (
    `<h2 class="${statusClass(d.status)}">${escapeHtml(d.address)}</h2>` +
    `<p>${escapeHtml(d.device)} on ${escapeHtml(d.node)} · ${escapeHtml(d.vlan)}` +
    `${d.hostname ? ' · ' + escapeHtml(d.hostname) : ''}</p>` +
    `<p>open ports: ${d.ports.length ? d.ports.map(escapeHtml).join(', ') : 'none'}</p>` +
    `<p class="${statusClass(d.status)}">` +
    `${d.quarantined ? 'quarantined' : d.reachable ? 'reachable' : 'unreachable'}` +
    `${d.compromised ? ' · compromised' : ''}</p>` +
    (d.shield ? `<p>shield ${escapeHtml(d.shield)}</p>` : '') +
    (alerts ? `<ul class="alert-list">${alerts}</ul>` : '<p class="hint">no active alerts</p>')
  );
}

function renderBanners(vm: ViewModel): string {
  let html = '';
  if (vm.stale !== null) {
    html +=
      `<div class="banner banner-stale">stream lost — data as of ` +
      `${vm.stale.asOf} ms; reconnecting…</div>`;
  }
  if (vm.rejection !== null) {
    html +=
      `<div class="banner banner-rejected" data-dismiss="rejection">` +
      `rejected: <b>${escapeHtml(vm.rejection.reason)}</b> ` +
      `(${escapeHtml(vm.rejection.detail)}) — click to dismiss</div>`;
  }
  if (vm.scrubbedAt !== null) {
    html +=
      `<div class="banner banner-scrub">viewing snapshot as of ${vm.scrubbedAt} ms ` +
      `<button data-action="go-live">back to live</button></div>`;
  }
  return html;
}

function renderAlerts(vm: ViewModel): string {
  if (vm.alerts.length === 0) return '<p class="hint">no active alerts</p>';
  const items = vm.alerts
    .map(
      (a) =>
        `<li class="alert severity-${escapeHtml(a.severity)}">` +
        `[${a.at} ms] ${escapeHtml(a.subtype)} — ${escapeHtml(a.subject)}</li>`,
    )
    .join('');
  return `<ul class="alert-list">${items}</ul>`;
}

function renderFeed(vm: ViewModel): string {
  const items = vm.feed
    .map((e) => `<li>[${e.t} ms] ${escapeHtml(e.kind)} ${escapeHtml(summary(e))}</li>`)
    .join('');
  return `<ul class="feed">${items}</ul>`;
}

function summary(record: Record<string, unknown>): string {
  return Object.entries(record)
    .filter(([k]) => !['t', 'seq', 'kind'].includes(k))
    .slice(0, 5)
    .map(([k, v]) => `${k}=${String(v)}`)
    .join(' ');
}

function renderActions(vm: ViewModel): string {
  const options = vm.nodeIds
    .map((id) => `<option value="${escapeHtml(id)}">${escapeHtml(id)}</option>`)
    .join('');
  const acks = vm.acks
    .map(
      (a) =>
        `<li class="ack ack-${a.status}">${escapeHtml(a.request.kind)}` +
        ` → ${a.status}: ${escapeHtml(a.detail)}</li>`,
    )
    .join('');
  return (
    `<form class="action" data-action-form="ApplyConfig">` +
    `<b>ApplyConfig</b> <select name="node">${options}</select>` +
    `<input name="utility" placeholder="utility" required/>` +
    `<input name="substation" type="number" placeholder="substation" required/>` +
    `<button>apply</button></form>` +
    `<form class="action" data-action-form="ShieldActivate">` +
    `<b>ShieldActivate</b> <select name="node">${options}</select>` +
    `<input name="shield" placeholder="shield id" required/>` +
    `<input name="mode" placeholder="mode (optional)"/>` +
    `<input name="policy" placeholder="policy (optional)"/>` +
    `<button>activate</button></form>` +
    `<form class="action" data-action-form="QuarantineDevice">` +
    `<b>QuarantineDevice</b> <select name="node">${options}</select>` +
    `<input name="device" placeholder="device id" required/>` +
    `<button>quarantine</button></form>` +
    (acks ? `<ul class="acks">${acks}</ul>` : '')
  );
}

export function renderApp(vm: ViewModel): string {
  const slider =
    `<input type="range" class="timeline" data-action="scrub" min="0"` +
    ` max="${vm.durationMs}" value="${vm.scrubbedAt ?? vm.asOf}"/>`;
  return (
    renderBanners(vm) +
    `<header><h1>${escapeHtml(vm.title)}</h1>` +
    `<span class="asof">t = ${vm.asOf} ms${vm.finished ? ' · finished' : ''}</span>` +
    slider +
    '</header>' +
    `<main><section class="left">${renderTopology(vm)}` +
    `<section class="actions">${renderActions(vm)}</section></section>` +
    `<section class="right"><section class="pane">${renderPane(vm.pane)}</section>` +
    `<section class="alerts"><h2>alerts</h2>${renderAlerts(vm)}</section>` +
    `<section class="events"><h2>events</h2>${renderFeed(vm)}</section></section>` +
    '</main>'
  );
}
