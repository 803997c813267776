/** App shell: wires the API client and push stream into the reducer and
 * repaints on every applied message. All updates flow through one ordered
 * queue; the DOM is written only here.
 */
import { ApiClient, connectStream, wsUrlFor, type WsLike } from './api.js';
import { apply, initialState, type Msg, type Selection, type ViewState } from './state.js';
import { buildViewModel } from './viewmodel.js';
import { renderApp } from './render.js';
import type { ActionKind, ActionRequest } from './types.js';

function apiBase(): string {
  const param = new URLSearchParams(location.search).get('api');
  if (param !== null) return param.replace(/\/$/, '');
  return `${location.protocol}//${location.hostname}:8470`;
}

const root = document.getElementById('app');
if (root === null) throw new Error('missing #app element');

const client = new ApiClient(apiBase());
let state: ViewState = initialState();
let repaintQueued = false;

function dispatch(msg: Msg): void {
  state = apply(state, msg);
  if (!repaintQueued) {
    repaintQueued = true;
    requestAnimationFrame(() => {
      repaintQueued = false;
      root!.innerHTML = renderApp(buildViewModel(state));
    });
  }
}

async function loadAll(): Promise<void> {
  const [info, topology, snapshot, alerts] = await Promise.all([
    client.info(),
    client.topology(),
    client.snapshot(),
    client.alerts(),
  ]);
  dispatch({ type: 'info', info });
  dispatch({ type: 'topology', topology });
  dispatch({ type: 'snapshot', snapshot, scrubbed: false });
  dispatch({ type: 'alerts', alerts });
}

function select(selection: Selection | null): void {
  dispatch({ type: 'select', selection });
  if (selection !== null && selection.kind !== 'link') {
    const node = selection.kind === 'node' ? selection.id : selection.node;
    client
      .devices(node)
      .then((inventory) => dispatch({ type: 'inventory', inventory }))
      .catch(() => undefined);
  }
}

root.addEventListener('click', (event) => {
  const target = event.target as HTMLElement;
  const dismiss = target.closest('[data-dismiss]');
  if (dismiss !== null) {
    state = { ...state, rejection: null };
    dispatch({ type: 'select', selection: state.selection }); // repaint
    return;
  }
  const live = target.closest('[data-action="go-live"]');
  if (live !== null) {
    dispatch({ type: 'live' });
    client
      .snapshot()
      .then((snapshot) => dispatch({ type: 'snapshot', snapshot, scrubbed: false }))
      .catch(() => undefined);
    return;
  }
  const selectable = target.closest('[data-select]');
  if (selectable === null) return;
  const token = (selectable as HTMLElement).dataset.select!;
  const [kind, ...rest] = token.split(':');
  if (kind === 'node') select({ kind: 'node', id: rest.join(':') });
  else if (kind === 'link') select({ kind: 'link', id: rest.join(':') });
  else if (kind === 'device') select({ kind: 'device', node: rest[0], address: rest[1] });
});

root.addEventListener('change', (event) => {
  const target = event.target as HTMLInputElement;
  if (target.dataset.action !== 'scrub') return;
  const at = Number(target.value);
  client
    .snapshot(at)
    .then((snapshot) => dispatch({ type: 'snapshot', snapshot, scrubbed: true }))
    .catch(() => undefined);
});

root.addEventListener('submit', (event) => {
  const form = event.target as HTMLFormElement;
  const kind = form.dataset.actionForm as ActionKind | undefined;
  if (kind === undefined) return;
  event.preventDefault();
  const fields = new FormData(form);
  const parameters: Record<string, string | number> = {};
  let target = '';
  for (const [name, raw] of fields.entries()) {
    const value = String(raw);
    if (value === '') continue;
    if (name === 'node') target = value;
    else if (name === 'substation') parameters[name] = Number(value);
    else parameters[name] = value;
  }
  const request: ActionRequest = { kind, target, parameters, issued_at: state.asOf };
  client.issueAction(request).then((ack) => {
    dispatch({ type: 'ack', ack });
    // Reflect accepted config/quarantine changes promptly; the pushed
    // events will also land, but the pane should not lag the action.
    if (ack.status === 'accepted' && state.selection !== null) select(state.selection);
  });
});

connectStream(
  wsUrlFor(client.base),
  {
    onUp: () => {
      dispatch({ type: 'connected' });
      loadAll().catch(() => dispatch({ type: 'disconnected' }));
    },
    onPush: (push) => dispatch({ type: 'push', push }),
    onDown: () => dispatch({ type: 'disconnected' }),
  },
  (url) => {
    // Adapt the browser WebSocket to the minimal handler surface the
    // stream layer expects, so the latter stays free of DOM event types.
    const ws = new WebSocket(url);
    const like: WsLike = {
      onopen: null,
      onmessage: null,
      onclose: null,
      onerror: null,
      close: () => ws.close(),
    };
    ws.onopen = () => like.onopen?.();
    ws.onmessage = (event) => like.onmessage?.({ data: String(event.data) });
    ws.onclose = () => like.onclose?.();
    ws.onerror = () => like.onerror?.();
    return like;
  },
);
