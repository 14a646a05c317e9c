import { describe, expect, it } from 'vitest';

import type { Artifact } from '../src/api.js';
import { renderArtifact } from '../src/render.js';
import {
  chainPayload,
  interviewPayload,
  srsPayload,
  validationPayload,
} from './fixtures.js';

function artifact(stage: string, payload: unknown): Artifact {
  return { index: 1, stage, attempt: 1, payload, decision: null };
}

const ALL_KINDS: [string, unknown][] = [
  ['elicitation', interviewPayload],
  ['analysis', srsPayload],
  ['specification', chainPayload],
  ['validation', validationPayload],
];

describe('lossless rendering', () => {
  it.each(ALL_KINDS)('%s card carries the fetched payload verbatim', (stage, payload) => {
    const card = renderArtifact(artifact(stage, payload));
    const raw = card.querySelector('pre.raw-json');
    expect(raw).not.toBeNull();
    expect(JSON.parse(raw!.textContent ?? '')).toEqual(payload);
  });
});

describe('structured views', () => {
  it('interview turns show step labels and answers', () => {
    const card = renderArtifact(artifact('elicitation', interviewPayload));
    expect(card.querySelector('.step-label')?.textContent).toBe('components');
    expect(card.querySelectorAll('.answer')).toHaveLength(2);
  });

  it('srs sections are headed and traced', () => {
    const card = renderArtifact(artifact('analysis', srsPayload));
    const headings = [...card.querySelectorAll('.srs-section h4')].map((h) => h.textContent);
    expect(headings).toEqual(['Purpose', 'Scope']);
    expect(card.querySelector('.trace')?.textContent).toContain('1');
  });

  it('entry task is rendered last with an entry badge', () => {
    const card = renderArtifact(artifact('specification', chainPayload));
    const tasks = [...card.querySelectorAll('.task')];
    const last = tasks[tasks.length - 1];
    expect(last.querySelector('.badge')?.textContent).toBe('entry');
    expect(last.textContent).toContain('main');
  });

  it('system prompt renders five labeled panels', () => {
    const payload = {
      prompt_kind: 'system',
      system_prompt: {
        role_definition: 'r',
        knowledge: 'k',
        tools: 't',
        context_info: 'c',
        work_modes: [{ name: 'default', conduct: 'be terse', examples: ['e'] }],
      },
    };
    const card = renderArtifact(artifact('specification', payload));
    const titles = [...card.querySelectorAll('.sp-panel h4')].map((h) => h.textContent);
    expect(titles).toEqual(['Role Definition', 'Knowledge', 'Tools', 'Context', 'Work Modes']);
  });

  it('validation shows per-part critique scores', () => {
    const card = renderArtifact(artifact('validation', validationPayload));
    const scores = [...card.querySelectorAll('.part-scores li')].map((li) => li.textContent);
    expect(scores).toContain('main: 5/5');
    expect(card.querySelector('.feedback')?.textContent).toBe('expand the rendering task');
  });

  it('raw body chains render as preformatted text', () => {
    const payload = { prompt_kind: 'user', raw_body: '# Purpose\nA game.' };
    const card = renderArtifact(artifact('specification', payload));
    expect(card.querySelector('pre.raw-body')?.textContent).toBe('# Purpose\nA game.');
  });
});
