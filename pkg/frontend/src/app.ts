/**
 * Annotation page wiring: blinded side-by-side panels, span highlights,
 * 1-5 rating controls with keyboard shortcuts, progress and retry banner.
 */
import { ApiClient } from './api.js';
import { AnnotationFlow, FlowState } from './flow.js';
import { segmentText } from './highlight.js';
import type { EntityRecord, Sample, SystemLabel } from './types.js';

const api = new ApiClient('');
let flow: AnnotationFlow | null = null;
let state: FlowState | null = null;
let anchors: Record<string, string> = {};
const picked: { A: number | null; B: number | null } = { A: null, B: null };
let activePanel: SystemLabel = 'A';

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function renderHighlights(container: HTMLElement, text: string,
                          entities: EntityRecord[]): void {
  container.textContent = '';
  for (const segment of segmentText(text, entities)) {
    if (segment.highlighted && segment.entity) {
      const mark = document.createElement('mark');
      mark.textContent = segment.text;
      mark.title = `[${segment.entity.claimed_start}, ${segment.entity.claimed_end}) `
        + segment.entity.verification;
      if (segment.entity.verification !== 'exact') {
        mark.classList.add(segment.entity.verification);
      }
      container.appendChild(mark);
    } else {
      container.appendChild(document.createTextNode(segment.text));
    }
  }
}

function renderEntityList(container: HTMLElement, entities: EntityRecord[]): void {
  container.textContent = '';
  if (entities.length === 0) {
    const li = document.createElement('li');
    li.textContent = '(no entities extracted)';
    li.className = 'empty';
    container.appendChild(li);
    return;
  }
  for (const entity of entities) {
    const li = document.createElement('li');
    li.textContent = `"${entity.text}" [${entity.claimed_start}, ${entity.claimed_end})`;
    if (entity.verification !== 'exact') {
      const flag = document.createElement('span');
      flag.className = `flag ${entity.verification}`;
      flag.textContent = ` ${entity.verification}`;
      li.appendChild(flag);
    }
    container.appendChild(li);
  }
}

function renderRatingButtons(panel: SystemLabel): void {
  const container = el(`rate-${panel}`);
  container.textContent = '';
  const already = state?.current?.own_ratings?.[panel];
  for (let score = 1; score <= 5; score += 1) {
    const button = document.createElement('button');
    button.textContent = `${score}`;
    button.title = anchors[String(score)] ?? '';
    button.disabled = already !== undefined;
    if (picked[panel] === score || already === score) {
      button.classList.add('picked');
    }
    button.addEventListener('click', () => {
      picked[panel] = score;
      activePanel = panel === 'A' ? 'B' : 'A';
      renderRatingButtons('A');
      renderRatingButtons('B');
      maybeEnableSubmit();
    });
    container.appendChild(button);
  }
}

function maybeEnableSubmit(): void {
  const sample = state?.current;
  const ratedA = sample?.own_ratings?.A !== undefined || picked.A !== null;
  const ratedB = sample?.own_ratings?.B !== undefined || picked.B !== null;
  el<HTMLButtonElement>('submit').disabled = !(ratedA && ratedB);
}

function showBanner(message: string, kind: 'info' | 'error'): void {
  const banner = el('banner');
  banner.textContent = message;
  banner.className = kind;
  banner.hidden = message === '';
}

function renderState(): void {
  const sample = state?.current ?? null;
  el('progress').textContent =
    state ? `${state.ratedSamples}/${state.totalSamples}` : '';
  const main = el('sample');
  if (!sample) {
    main.hidden = true;
    el('done').hidden = false;
    return;
  }
  main.hidden = false;
  el('done').hidden = true;
  el('sample-id').textContent = sample.sample_id;
  el('event-type').textContent = sample.event_type;
  picked.A = null;
  picked.B = null;
  activePanel = 'A';
  for (const label of ['A', 'B'] as SystemLabel[]) {
    renderHighlights(el(`text-${label}`), sample.text, sample.outputs[label]);
    renderEntityList(el(`entities-${label}`), sample.outputs[label]);
    renderRatingButtons(label);
  }
  maybeEnableSubmit();
}

async function submitCurrent(): Promise<void> {
  if (!flow || !state?.current) return;
  const sample: Sample = state.current;
  showBanner('', 'info');
  for (const label of ['A', 'B'] as SystemLabel[]) {
    const score = picked[label] ?? sample.own_ratings?.[label];
    if (score === undefined || score === null) continue;
    if (sample.own_ratings?.[label] !== undefined) continue;
    const outcome = await flow.rate(sample.sample_id, label, score);
    if (outcome === 'conflict') {
      showBanner(`panel ${label}: already rated on the server`, 'error');
    } else if (outcome === 'queued') {
      showBanner('offline: rating queued, will retry', 'error');
    }
  }
  state = await flow.advance();
  renderState();
}

async function retryQueued(): Promise<void> {
  if (!flow) return;
  const delivered = await flow.retryPending();
  if (delivered > 0) {
    showBanner(`delivered ${delivered} queued rating(s)`, 'info');
    state = await flow.advance();
    renderState();
  }
}

function onKey(event: KeyboardEvent): void {
  if (!state?.current) return;
  if (event.key >= '1' && event.key <= '5') {
    picked[activePanel] = Number(event.key);
    activePanel = activePanel === 'A' ? 'B' : 'A';
    renderRatingButtons('A');
    renderRatingButtons('B');
    maybeEnableSubmit();
  } else if (event.key === 'Enter'
             && !el<HTMLButtonElement>('submit').disabled) {
    void submitCurrent();
  }
}

async function boot(): Promise<void> {
  const annotator = el<HTMLInputElement>('annotator-id').value.trim();
  if (!annotator) {
    showBanner('enter an annotator id first', 'error');
    return;
  }
  anchors = await api.getAnchors();
  flow = new AnnotationFlow(api, annotator);
  try {
    state = await flow.start();
  } catch {
    showBanner('API unreachable; check the server and retry', 'error');
    return;
  }
  el('login').hidden = true;
  el('workspace').hidden = false;
  renderState();
  window.setInterval(retryQueued, 5000);
}

export function init(): void {
  el('start').addEventListener('click', () => void boot());
  el('submit').addEventListener('click', () => void submitCurrent());
  document.addEventListener('keydown', onKey);
}

if (typeof document !== 'undefined' && document.getElementById('start')) {
  init();
}
