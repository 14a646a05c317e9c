// Fixture store mirroring the review service's wire format, plus a fetch
// stub that behaves like the real /api endpoints.

import type { Artifact, GateDecision, HistoryRow, SessionDetail } from '../src/api.js';

export const interviewPayload = {
  turns: [
    {
      question: {
        step: 'components',
        text: 'What are the main components?',
        purpose: 'Fix the decomposition.',
      },
      answers: [
        { template: 'overall_system', subject: 'system', statement: 'consist of a 4x4 board' },
        {
          template: 'component_conditional',
          subject: 'board',
          statement: 'spawn a tile',
          condition: 'a move changes the board',
        },
      ],
    },
  ],
};

export const srsPayload = {
  sections: [
    { heading: 'Purpose', body: 'A sliding-tile game.', source_turn_ids: [1] },
    { heading: 'Scope', body: 'Single player, browser.', source_turn_ids: [1] },
  ],
};

export const chainPayload = {
  prompt_kind: 'user',
  task_list: {
    tasks: [
      { id: 'readme', title: 'Notes', description: 'Write notes.', depends_on: [], category: 'docs' },
      { id: 'board', title: 'Board', description: 'Board logic.', depends_on: [], category: 'code' },
      { id: 'main', title: 'Entry', description: 'Wire it up.', depends_on: ['board'], category: 'entry' },
    ],
  },
};

export const validationPayload = {
  chain_of_thought: chainPayload,
  critique: {
    aspect_notes: { Completeness: 'ok', Clear: 'ok' },
    summary_strengths: 'well ordered',
    summary_weaknesses: 'thin on rendering',
    part_scores: { readme: 4, board: 4, main: 5 },
    feedback: 'expand the rendering task',
  },
};

export interface FakeSession {
  detail: SessionDetail;
  artifacts: Artifact[];
}

export function awaitingSession(id = 'sess1'): FakeSession {
  const stages = ['elicitation', 'analysis', 'specification', 'validation'];
  const payloads = [interviewPayload, srsPayload, chainPayload, validationPayload];
  const history: HistoryRow[] = stages.map((stage, i) => ({
    index: i + 1,
    stage,
    attempt: 1,
    decision: i < 3 ? { verdict: 'approve' as const } : null,
  }));
  return {
    detail: {
      id,
      status: 'awaiting_gate',
      current_stage: 'validation',
      prompt_kind: 'user',
      created_at: 100,
      stage_count: 4,
      final_prompt: null,
      failure: null,
      history,
    },
    artifacts: stages.map((stage, i) => ({
      index: i + 1,
      stage,
      attempt: 1,
      payload: payloads[i],
      decision: history[i].decision,
    })),
  };
}

export class FakeService {
  constructor(public sessions: FakeSession[] = [awaitingSession()]) {}

  gatePosts: GateDecision[] = [];

  fetch = async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
    const url = String(input);
    const json = (body: unknown, status = 200) =>
      new Response(JSON.stringify(body), {
        status,
        headers: { 'Content-Type': 'application/json' },
      });

    if (url.endsWith('/api/sessions')) {
      return json(this.sessions.map((s) => summaryOf(s.detail)));
    }
    let match = url.match(/\/api\/sessions\/([^/]+)\/artifacts\/(\d+)$/);
    if (match) {
      const session = this.find(match[1]);
      if (!session) return json({ detail: 'unknown session' }, 404);
      const artifact = session.artifacts[Number(match[2]) - 1];
      return artifact ? json(artifact) : json({ detail: 'no artifact' }, 404);
    }
    match = url.match(/\/api\/sessions\/([^/]+)\/gate$/);
    if (match) {
      const session = this.find(match[1]);
      if (!session) return json({ detail: 'unknown session' }, 404);
      if (session.detail.status !== 'awaiting_gate') {
        return json({ detail: 'no pending gate' }, 409);
      }
      const decision = JSON.parse(String(init?.body)) as GateDecision;
      if (decision.verdict === 'reject' && !decision.feedback?.trim()) {
        return json({ detail: 'rejection requires feedback' }, 400);
      }
      this.gatePosts.push(decision);
      const pending = session.detail.history[session.detail.history.length - 1];
      pending.decision = decision;
      if (decision.verdict === 'approve') {
        session.detail.status = 'completed';
        session.detail.current_stage = null;
        session.detail.final_prompt = 'Please build the software described above.';
      } else {
        session.detail.status = 'running';
      }
      return json({ ok: true });
    }
    match = url.match(/\/api\/sessions\/([^/]+)$/);
    if (match) {
      const session = this.find(match[1]);
      return session ? json(session.detail) : json({ detail: 'unknown session' }, 404);
    }
    return json({ detail: `unhandled ${url}` }, 500);
  };

  private find(id: string): FakeSession | undefined {
    return this.sessions.find((s) => s.detail.id === id);
  }
}

function summaryOf(detail: SessionDetail) {
  const { final_prompt, failure, history, ...summary } = detail;
  void final_prompt;
  void failure;
  void history;
  return summary;
}

export async function flush(times = 5): Promise<void> {
  for (let i = 0; i < times; i++) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}
