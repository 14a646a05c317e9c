// Typed client for the review service. Every call maps 1:1 onto an /api
// endpoint; the console holds no state the server does not.

export type SessionStatus = 'running' | 'awaiting_gate' | 'completed' | 'failed';

export interface SessionSummary {
  id: string;
  status: SessionStatus;
  current_stage: string | null;
  prompt_kind: 'user' | 'system';
  created_at: number;
  stage_count: number;
}

export interface GateDecision {
  verdict: 'approve' | 'reject';
  feedback?: string;
}

export interface HistoryRow {
  index: number;
  stage: string;
  attempt: number;
  decision: GateDecision | null;
}

export interface FailureInfo {
  stage: string;
  attempts: number;
  rule: string;
  detail: string;
}

export interface SessionDetail extends SessionSummary {
  final_prompt: string | null;
  failure: FailureInfo | null;
  history: HistoryRow[];
}

export interface Artifact {
  index: number;
  stage: string;
  attempt: number;
  payload: unknown;
  decision: GateDecision | null;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

const TOKEN_KEY = 'promptforge-token';

export function storedToken(): string | null {
  try {
    return sessionStorage.getItem(TOKEN_KEY);
  } catch {
    return null;
  }
}

export function storeToken(token: string): void {
  sessionStorage.setItem(TOKEN_KEY, token);
}

export class ApiClient {
  constructor(
    private base: string = '',
    private fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private headers(json = false): Record<string, string> {
    const h: Record<string, string> = {};
    if (json) h['Content-Type'] = 'application/json';
    const token = storedToken();
    if (token) h['Authorization'] = `Bearer ${token}`;
    return h;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchFn(`${this.base}${path}`, init);
    if (!res.ok) {
      let detail = res.statusText;
      try {
        const body = await res.json();
        if (body && typeof body.detail === 'string') detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(res.status, detail);
    }
    return (await res.json()) as T;
  }

  listSessions(): Promise<SessionSummary[]> {
    return this.request('/api/sessions', { headers: this.headers() });
  }

  getSession(id: string): Promise<SessionDetail> {
    return this.request(`/api/sessions/${id}`, { headers: this.headers() });
  }

  getArtifact(id: string, index: number): Promise<Artifact> {
    return this.request(`/api/sessions/${id}/artifacts/${index}`, {
      headers: this.headers(),
    });
  }

  submitGate(id: string, decision: GateDecision): Promise<{ ok: boolean }> {
    return this.request(`/api/sessions/${id}/gate`, {
      method: 'POST',
      headers: this.headers(true),
      body: JSON.stringify(decision),
    });
  }
}

// AwaitingGate sessions need the operator's attention; surface them first,
// newest within each group.
export function sortSessions(sessions: SessionSummary[]): SessionSummary[] {
  return [...sessions].sort((a, b) => {
    const aGate = a.status === 'awaiting_gate' ? 0 : 1;
    const bGate = b.status === 'awaiting_gate' ? 0 : 1;
    if (aGate !== bGate) return aGate - bGate;
    return b.created_at - a.created_at;
  });
}
