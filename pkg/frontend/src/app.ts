// Review console wiring: hash-routed list and review pages over the ApiClient.
// The UI only mirrors server state; every mutation is a gate POST.

import {
  ApiClient,
  ApiError,
  SessionDetail,
  SessionSummary,
  sortSessions,
  storeToken,
  storedToken,
} from './api.js';
import { renderArtifact } from './render.js';
import { LiveHandle, liveProgress } from './sse.js';

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function banner(root: HTMLElement, message: string, onRetry: () => void): void {
  const box = el('div', 'banner error');
  box.appendChild(el('span', undefined, message));
  const retry = el('button', 'retry', 'Retry');
  retry.addEventListener('click', onRetry);
  box.appendChild(retry);
  root.appendChild(box);
}

export async function renderSessionList(root: HTMLElement, client: ApiClient): Promise<void> {
  root.textContent = '';
  root.appendChild(el('h2', undefined, 'Sessions'));
  let sessions: SessionSummary[];
  try {
    sessions = await client.listSessions();
  } catch {
    banner(root, 'Service unreachable.', () => void renderSessionList(root, client));
    return;
  }
  if (!sessions.length) {
    root.appendChild(el('p', 'empty-state', 'No sessions yet. Start one with the CLI.'));
    return;
  }
  const list = el('ul', 'session-list');
  for (const session of sortSessions(sessions)) {
    const item = el('li', 'session-row');
    const link = el('a', undefined, session.id);
    link.href = `#/session/${session.id}`;
    item.appendChild(link);
    item.appendChild(el('span', `status-badge status-${session.status}`, session.status));
    item.appendChild(
      el('span', 'stage', session.current_stage ?? `${session.stage_count} stages`),
    );
    list.appendChild(item);
  }
  root.appendChild(list);
}

export function gateControls(
  onDecision: (verdict: 'approve' | 'reject', feedback?: string) => void,
): HTMLElement {
  const wrap = el('div', 'gate-controls');
  const approve = el('button', 'approve', 'Approve');
  const feedback = el('textarea', 'feedback');
  feedback.placeholder = 'Feedback (required to reject)';
  const reject = el('button', 'reject', 'Reject');
  reject.disabled = true;
  feedback.addEventListener('input', () => {
    reject.disabled = feedback.value.trim() === '';
  });
  approve.addEventListener('click', () => onDecision('approve'));
  reject.addEventListener('click', () => {
    const text = feedback.value.trim();
    if (text) onDecision('reject', text);
  });
  wrap.appendChild(approve);
  wrap.appendChild(feedback);
  wrap.appendChild(reject);
  return wrap;
}

export async function renderReviewPage(
  root: HTMLElement,
  client: ApiClient,
  sessionId: string,
): Promise<void> {
  root.textContent = '';
  let detail: SessionDetail;
  try {
    detail = await client.getSession(sessionId);
  } catch {
    banner(root, 'Service unreachable.', () => void renderReviewPage(root, client, sessionId));
    return;
  }
  const header = el('header', 'session-header');
  header.appendChild(el('h2', undefined, `Session ${detail.id}`));
  header.appendChild(el('span', `status-badge status-${detail.status}`, detail.status));
  root.appendChild(header);

  if (detail.failure) {
    root.appendChild(
      el(
        'div',
        'banner error',
        `${detail.failure.stage} failed after ${detail.failure.attempts} attempts: ${detail.failure.rule}`,
      ),
    );
  }

  for (const row of detail.history) {
    const artifact = await client.getArtifact(sessionId, row.index);
    const card = renderArtifact(artifact);
    if (row.decision) {
      card.appendChild(
        el('p', `decision decision-${row.decision.verdict}`, row.decision.verdict),
      );
    }
    root.appendChild(card);
  }

  if (detail.status === 'awaiting_gate') {
    root.appendChild(
      gateControls((verdict, feedback) => {
        client
          .submitGate(sessionId, { verdict, feedback })
          .catch((err: unknown) => {
            if (!(err instanceof ApiError && err.status === 409)) throw err;
            // gate already decided elsewhere; fall through to refresh
          })
          .then(() => renderReviewPage(root, client, sessionId));
      }),
    );
  }

  if (detail.status === 'completed' && detail.final_prompt !== null) {
    const panel = el('section', 'final-prompt');
    panel.appendChild(el('h3', undefined, 'Final prompt'));
    const pre = el('pre');
    pre.textContent = detail.final_prompt;
    panel.appendChild(pre);
    const copy = el('button', 'copy', 'Copy');
    copy.addEventListener('click', () => {
      void navigator.clipboard?.writeText(detail.final_prompt ?? '');
    });
    panel.appendChild(copy);
    root.appendChild(panel);
  }
}

export function main(root: HTMLElement, client = new ApiClient()): void {
  if (!storedToken()) {
    const params = new URLSearchParams(location.search);
    const token = params.get('token');
    if (token) storeToken(token);
  }

  let live: LiveHandle | null = null;

  const route = () => {
    live?.close();
    live = null;
    const match = location.hash.match(/^#\/session\/([A-Za-z0-9-]+)$/);
    if (!match) {
      void renderSessionList(root, client);
      return;
    }
    const sessionId = match[1];
    void renderReviewPage(root, client, sessionId);
    const indicator = el('div', 'live-indicator');
    document.body.appendChild(indicator);
    live = liveProgress(
      `/api/sessions/${sessionId}/events`,
      () => void renderReviewPage(root, client, sessionId),
      {
        pollFn: () => client.getSession(sessionId),
        onModeChange: (mode) => {
          indicator.textContent = mode === 'poll' ? 'live stream dropped, polling' : '';
          indicator.classList.toggle('polling', mode === 'poll');
        },
      },
    );
  };

  window.addEventListener('hashchange', route);
  route();
}
