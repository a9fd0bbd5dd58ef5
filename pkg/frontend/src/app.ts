/**
 * DOM wiring for the annotation tool. All behavior lives in the imported
 * modules; this file only binds them to the page.
 */

import { AuditClient, Grade, GRADES, MatrixPayload, TextTriple } from './api.js';
import { interpretKey, pressFromEvent } from './keyboard.js';
import { csvDownloadHref, dashboardHtml, escapeHtml } from './matrix.js';
import { DraftStore, ReviewSession, SessionView } from './state.js';

const ANNOTATOR_KEY = 'lingua-bridge.annotator';

const client = new AuditClient('');
const drafts = new DraftStore(window.localStorage);

let session: ReviewSession | null = null;
let latestMatrix: MatrixPayload | null = null;

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (found === null) throw new Error(`missing element #${id}`);
  return found as T;
}

function triplePanes(triple: TextTriple): string {
  const pane = (label: string, text: string) =>
    `<div class="pane"><h4>${label}</h4><p>${escapeHtml(text)}</p></div>`;
  return (
    `<div class="panes">` +
    pane('Source', triple.source) +
    pane('Translation', triple.translated) +
    pane('Back-translation', triple.double_translated) +
    `</div>`
  );
}

function gradeButtons(
  target: 'question' | 'answer',
  selected: Grade | null,
  focused: boolean,
): string {
  const buttons = GRADES.map((grade, i) => {
    const cls = grade === selected ? 'grade selected' : 'grade';
    return (
      `<button type="button" class="${cls}" data-target="${target}" data-grade="${grade}">` +
      `<kbd>${i + 1}</kbd> ${grade}</button>`
    );
  }).join('');
  const cls = focused ? 'grade-group focused' : 'grade-group';
  return `<div class="${cls}" data-group="${target}">${buttons}</div>`;
}

function renderReview(view: Extract<SessionView, { screen: 'review' }>): string {
  const outcome =
    view.lastOutcome === null
      ? ''
      : `<span class="outcome">${view.lastOutcome === 'saved' ? 'saved' : 'updated'}</span>`;
  const error = view.error === null ? '' : `<p class="error">${escapeHtml(view.error)}</p>`;
  return `
    <div class="meta">
      <span class="record-id">${escapeHtml(view.item.record_id)}</span>
      <span>${view.remaining} item${view.remaining === 1 ? '' : 's'} left</span>
      ${outcome}
    </div>
    <section>
      <h2>Question</h2>
      ${triplePanes(view.item.question)}
      ${gradeButtons('question', view.draft.questionGrade, view.focus === 'question')}
    </section>
    <section>
      <h2>Answer</h2>
      ${triplePanes(view.item.answer)}
      ${gradeButtons('answer', view.draft.answerGrade, view.focus === 'answer')}
    </section>
    <label class="note-label" for="note">Note (optional)</label>
    <textarea id="note" rows="2">${escapeHtml(view.draft.note)}</textarea>
    ${error}
    <button type="button" id="submit" ${view.submitting ? 'disabled' : ''}>
      Submit &amp; next <kbd>Enter</kbd>
    </button>
  `;
}

function renderDone(graded: number): string {
  const exportLink =
    latestMatrix === null
      ? ''
      : `<a class="button" download="quality_matrix.csv" href="${csvDownloadHref(latestMatrix)}">Export CSV</a>`;
  return `
    <div class="done">
      <h2>Sample complete</h2>
      <p>You graded ${graded} item${graded === 1 ? '' : 's'} this session. Every item in the sample now has your grades.</p>
      ${exportLink}
    </div>
  `;
}

function renderSession(): void {
  if (session === null) return;
  const view = session.view();
  const panel = el<HTMLDivElement>('review-panel');
  switch (view.screen) {
    case 'loading':
      panel.innerHTML = '<p class="empty">Loading…</p>';
      break;
    case 'review':
      panel.innerHTML = renderReview(view);
      bindReviewHandlers();
      break;
    case 'done':
      panel.innerHTML = renderDone(view.graded);
      break;
    case 'error':
      panel.innerHTML =
        `<p class="error">${escapeHtml(view.message)}</p>` +
        '<button type="button" id="retry">Retry</button>';
      el<HTMLButtonElement>('retry').addEventListener('click', () => void session?.start());
      break;
  }
}

function bindReviewHandlers(): void {
  for (const button of document.querySelectorAll<HTMLButtonElement>('button.grade')) {
    button.addEventListener('click', () => {
      const target = button.dataset['target'] as 'question' | 'answer';
      session?.setGrade(target, button.dataset['grade'] as Grade);
    });
  }
  el<HTMLTextAreaElement>('note').addEventListener('input', (event) => {
    session?.setNote((event.target as HTMLTextAreaElement).value);
  });
  el<HTMLButtonElement>('submit').addEventListener('click', () => void session?.submit());
}

async function refreshDashboard(): Promise<void> {
  try {
    latestMatrix = await client.matrix();
  } catch (err) {
    el<HTMLDivElement>('dashboard-panel').innerHTML =
      `<p class="error">${escapeHtml(String(err))}</p>`;
    return;
  }
  const exportButton =
    latestMatrix === null
      ? ''
      : `<a class="button" download="quality_matrix.csv" href="${csvDownloadHref(latestMatrix)}">Export CSV</a>`;
  el<HTMLDivElement>('dashboard-panel').innerHTML = dashboardHtml(latestMatrix) + exportButton;
}

function startSession(annotatorId: string): void {
  window.localStorage.setItem(ANNOTATOR_KEY, annotatorId);
  session = new ReviewSession(client, drafts, annotatorId);
  session.onChange(renderSession);
  session.onMatrixStale(() => void refreshDashboard());
  el<HTMLDivElement>('signin').hidden = true;
  el<HTMLDivElement>('workspace').hidden = false;
  void session.start();
}

function init(): void {
  const input = el<HTMLInputElement>('annotator-id');
  input.value = window.localStorage.getItem(ANNOTATOR_KEY) ?? '';
  el<HTMLButtonElement>('start').addEventListener('click', () => {
    const annotatorId = input.value.trim();
    if (annotatorId === '') {
      el<HTMLParagraphElement>('signin-error').textContent = 'enter an annotator id';
      return;
    }
    startSession(annotatorId);
  });
  input.addEventListener('keydown', (event) => {
    if (event.key === 'Enter') el<HTMLButtonElement>('start').click();
  });

  document.addEventListener('keydown', (event) => {
    if (session === null) return;
    const action = interpretKey(pressFromEvent(event));
    if (action === null) return;
    event.preventDefault();
    switch (action.kind) {
      case 'grade':
        session.gradeFocused(action.grade);
        break;
      case 'focus':
        session.setFocus(action.target);
        break;
      case 'submit':
        void session.submit();
        break;
    }
  });

  void refreshDashboard();
}

init();
