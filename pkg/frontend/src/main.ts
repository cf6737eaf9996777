// Bootstrap: wires the API client, store, and renderers onto the page.
// The session id lives in the URL hash so reloads restore the view; the
// bearer token lives in session storage.

import { ApiClient, ApiError, fetchWithRetry } from './api.js';
import {
  ConsoleStore,
  POLL_INTERVAL_MS,
  canSubmitFeedback,
  validThetaN,
  validThetaS,
} from './state.js';
import { renderErrorBanner, renderSession, renderSetup } from './ui.js';

const app = document.getElementById('app')!;
const client = new ApiClient(
  (window as { SCIDEA_API_BASE?: string }).SCIDEA_API_BASE ?? 'http://127.0.0.1:8000',
  sessionStorage.getItem('scidea_token'),
);
const store = new ConsoleStore();
let pollTimer: number | null = null;

function sessionIdFromHash(): string | null {
  const match = window.location.hash.match(/#\/session\/(.+)$/);
  return match ? match[1] : null;
}

function setSessionId(id: string): void {
  window.location.hash = `#/session/${id}`;
}

function schedulePoll(): void {
  if (pollTimer !== null) window.clearTimeout(pollTimer);
  if (!store.shouldPoll()) return;
  pollTimer = window.setTimeout(() => void refresh(), POLL_INTERVAL_MS);
}

async function refresh(): Promise<void> {
  const sessionId = sessionIdFromHash();
  if (!sessionId) return;
  try {
    const snapshot = await fetchWithRetry(() => client.getSession(sessionId));
    store.applySnapshot(snapshot);
    render();
    schedulePoll();
  } catch (error) {
    showError(error);
  }
}

function showError(error: unknown): void {
  if (error instanceof ApiError) {
    store.setError(`${error.code}: ${error.message}`);
    if (error.code === 'NOT_FOUND') {
      app.innerHTML = renderErrorBanner(error.code, error.message);
      return;
    }
    render();
    const banner = document.createElement('div');
    banner.innerHTML = renderErrorBanner(error.code, error.message);
    app.prepend(banner);
  } else {
    store.setError(String(error));
    render();
  }
}

async function mutate(run: () => Promise<unknown>): Promise<void> {
  if (!store.beginAction()) return; // one mutating request in flight
  render();
  try {
    await run();
    await flushQueuedFeedback();
    const sessionId = sessionIdFromHash();
    if (sessionId) store.applySnapshot(await client.getSession(sessionId));
  } catch (error) {
    showError(error);
  } finally {
    store.endAction();
    render();
    schedulePoll();
  }
}

async function flushQueuedFeedback(): Promise<void> {
  const sessionId = sessionIdFromHash();
  if (!sessionId) return;
  for (const text of store.drainFeedback()) {
    await client.feedback(sessionId, text);
    await client.advance(sessionId, 'RUN_ITERATION');
  }
}

function wireSetup(): void {
  document.getElementById('create')?.addEventListener('click', () => {
    const orcid = (document.getElementById('orcid') as HTMLInputElement).value.trim();
    const query = (document.getElementById('query') as HTMLInputElement).value.trim();
    const token = (document.getElementById('token') as HTMLInputElement).value.trim();
    if (token) {
      sessionStorage.setItem('scidea_token', token);
      client.setToken(token);
    }
    void mutate(async () => {
      const snapshot = await client.createSession(orcid, query);
      setSessionId(snapshot.id);
      store.applySnapshot(snapshot);
    });
  });
}

function wireSession(): void {
  const sessionId = sessionIdFromHash();
  if (!sessionId) return;

  document.getElementById('apply-selection')?.addEventListener('click', () => {
    const ids = Array.from(document.querySelectorAll<HTMLInputElement>('input.pub:checked')).map(
      (input) => input.dataset.id!,
    );
    void mutate(() => client.select(sessionId, ids));
  });
  document.getElementById('run-facets')?.addEventListener('click', () => {
    void mutate(() => client.advance(sessionId, 'RUN_FACETS'));
  });
  document.getElementById('run-gap')?.addEventListener('click', () => {
    void mutate(() => client.advance(sessionId, 'RUN_GAP'));
  });
  document.getElementById('run-iteration')?.addEventListener('click', () => {
    void mutate(() => client.advance(sessionId, 'RUN_ITERATION'));
  });
  document.getElementById('run-rank')?.addEventListener('click', () => {
    void mutate(() => client.advance(sessionId, 'RUN_RANK'));
  });

  const thetaN = document.getElementById('theta-n') as HTMLInputElement | null;
  const thetaS = document.getElementById('theta-s') as HTMLInputElement | null;
  thetaN?.addEventListener('input', () => {
    document.getElementById('theta-n-value')!.textContent = thetaN.value;
  });
  thetaS?.addEventListener('input', () => {
    document.getElementById('theta-s-value')!.textContent = thetaS.value;
  });
  document.getElementById('apply-thresholds')?.addEventListener('click', () => {
    const n = Number(thetaN?.value);
    const s = Number(thetaS?.value);
    const errorSlot = document.getElementById('threshold-error')!;
    if (!validThetaN(n) || !validThetaS(s)) {
      errorSlot.textContent = 'thresholds out of range (θn in [0,2], θs in [0,10])';
      return; // blocked client-side
    }
    errorSlot.textContent = '';
    void mutate(() => client.setThresholds(sessionId, n, s));
  });

  const feedbackText = document.getElementById('feedback-text') as HTMLTextAreaElement | null;
  const sendFeedback = document.getElementById('send-feedback') as HTMLButtonElement | null;
  feedbackText?.addEventListener('input', () => {
    if (sendFeedback) sendFeedback.disabled = !canSubmitFeedback(feedbackText.value);
  });
  sendFeedback?.addEventListener('click', () => {
    const text = feedbackText?.value ?? '';
    if (!canSubmitFeedback(text)) return;
    if (store.view.pendingAction) {
      store.queueFeedback(text);
      document.getElementById('feedback-pending')!.textContent = 'queued until the running stage finishes';
      return;
    }
    void mutate(async () => {
      await client.feedback(sessionId, text);
      await client.advance(sessionId, 'RUN_ITERATION');
    });
  });

  document.querySelectorAll<HTMLButtonElement>('button.accept').forEach((button) => {
    button.addEventListener('click', () => {
      const candidateId = Number(button.dataset.id);
      void mutate(() => client.advance(sessionId, 'ACCEPT', { candidate_id: candidateId }));
    });
  });
}

function render(): void {
  const snapshot = store.view.snapshot;
  if (!snapshot) {
    app.innerHTML = renderSetup();
    wireSetup();
    return;
  }
  const busy = store.view.pendingAction || snapshot.pending_action !== null;
  app.innerHTML =
    (busy ? '<div class="banner">working…</div>' : '') +
    (store.view.error ? renderErrorBanner('ERROR', store.view.error) : '') +
    renderSession(snapshot);
  wireSession();
  if (busy) {
    app.querySelectorAll('button').forEach((b) => (b.disabled = true));
  }
}

window.addEventListener('hashchange', () => void refresh());
if (sessionIdFromHash()) {
  void refresh();
} else {
  render();
}
