// Read-only artifact cards. Rendering is lossless: every card carries the
// fetched payload JSON verbatim in a <pre class="raw-json"> block, and the
// structured views above it never rewrite the data.

import type { Artifact } from './api.js';

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

interface TaskDict {
  id: string;
  title: string;
  description: string;
  depends_on: string[];
  category: string;
}

interface InterviewDict {
  turns: {
    question: { step: string; text: string; purpose: string };
    answers: { template: string; subject: string; statement: string; condition?: string }[];
  }[];
}

interface SrsDict {
  sections: { heading: string; body: string; source_turn_ids: number[] }[];
}

interface ChainDict {
  prompt_kind: string;
  raw_body?: string;
  task_list?: { tasks: TaskDict[] };
  system_prompt?: {
    role_definition: string;
    knowledge: string;
    tools: string;
    context_info: string;
    work_modes: { name: string; conduct: string; examples: string[] }[];
  };
}

interface ValidationDict {
  chain_of_thought: ChainDict;
  critique: {
    aspect_notes: Record<string, string>;
    summary_strengths: string;
    summary_weaknesses: string;
    part_scores: Record<string, number>;
    feedback: string;
  };
}

function renderInterview(payload: InterviewDict): HTMLElement {
  const list = el('ol', 'interview-turns');
  for (const turn of payload.turns) {
    const item = el('li', 'turn');
    item.appendChild(el('span', 'step-label', turn.question.step));
    item.appendChild(el('p', 'question', `Q: ${turn.question.text}`));
    for (const answer of turn.answers) {
      item.appendChild(el('p', 'answer', `A: [${answer.template}] ${answer.statement}`));
    }
    list.appendChild(item);
  }
  if (!payload.turns.length) {
    list.appendChild(el('li', 'turn empty', 'no interview conducted'));
  }
  return list;
}

function renderSrs(payload: SrsDict): HTMLElement {
  const wrap = el('div', 'srs-sections');
  for (const section of payload.sections) {
    const card = el('section', 'srs-section');
    card.appendChild(el('h4', undefined, section.heading));
    card.appendChild(el('p', undefined, section.body));
    card.appendChild(
      el('small', 'trace', `traces turns: ${section.source_turn_ids.join(', ') || 'none'}`),
    );
    wrap.appendChild(card);
  }
  return wrap;
}

function renderChain(payload: ChainDict): HTMLElement {
  const wrap = el('div', 'chain');
  if (payload.raw_body !== undefined) {
    const pre = el('pre', 'raw-body');
    pre.textContent = payload.raw_body;
    wrap.appendChild(pre);
    return wrap;
  }
  if (payload.task_list) {
    const list = el('ol', 'task-list');
    for (const task of payload.task_list.tasks) {
      const item = el('li', 'task');
      item.appendChild(el('span', `badge badge-${task.category}`, task.category));
      item.appendChild(el('strong', undefined, ` ${task.id}: ${task.title}`));
      item.appendChild(el('p', undefined, task.description));
      if (task.depends_on.length) {
        item.appendChild(el('small', 'deps', `after: ${task.depends_on.join(', ')}`));
      }
      list.appendChild(item);
    }
    wrap.appendChild(list);
    return wrap;
  }
  const sp = payload.system_prompt!;
  const panels: [string, string][] = [
    ['Role Definition', sp.role_definition],
    ['Knowledge', sp.knowledge],
    ['Tools', sp.tools],
    ['Context', sp.context_info],
    ['Work Modes', sp.work_modes.map((m) => `${m.name}: ${m.conduct}`).join('\n')],
  ];
  for (const [title, body] of panels) {
    const panel = el('section', 'sp-panel');
    panel.appendChild(el('h4', undefined, title));
    panel.appendChild(el('p', undefined, body));
    wrap.appendChild(panel);
  }
  return wrap;
}

function renderValidation(payload: ValidationDict): HTMLElement {
  const wrap = el('div', 'validation');
  wrap.appendChild(renderChain(payload.chain_of_thought));
  const critique = el('section', 'critique');
  critique.appendChild(el('h4', undefined, 'Critique'));
  const scores = el('ul', 'part-scores');
  for (const [part, score] of Object.entries(payload.critique.part_scores)) {
    scores.appendChild(el('li', undefined, `${part}: ${score}/5`));
  }
  critique.appendChild(scores);
  critique.appendChild(el('p', 'strengths', payload.critique.summary_strengths));
  critique.appendChild(el('p', 'weaknesses', payload.critique.summary_weaknesses));
  critique.appendChild(el('p', 'feedback', payload.critique.feedback));
  wrap.appendChild(critique);
  return wrap;
}

export function renderArtifact(artifact: Artifact): HTMLElement {
  const card = el('article', 'artifact-card');
  const header = el('header');
  header.appendChild(el('h3', undefined, artifact.stage));
  header.appendChild(el('span', 'attempt', `attempt ${artifact.attempt}`));
  card.appendChild(header);

  const payload = artifact.payload;
  let view: HTMLElement;
  switch (artifact.stage) {
    case 'elicitation':
      view = renderInterview(payload as InterviewDict);
      break;
    case 'analysis':
      view = renderSrs(payload as SrsDict);
      break;
    case 'specification':
      view = renderChain(payload as ChainDict);
      break;
    case 'validation':
      view = renderValidation(payload as ValidationDict);
      break;
    default:
      view = el('div', 'unknown-stage', `unknown stage ${artifact.stage}`);
  }
  card.appendChild(view);

  const raw = el('pre', 'raw-json');
  raw.textContent = JSON.stringify(payload);
  card.appendChild(raw);
  return card;
}
