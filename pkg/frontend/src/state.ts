/**
 * Review-session state machine: which item is on screen, the in-progress
 * grades, validation, submission, and advancement. All statistics stay on
 * the server; this module only tracks what the annotator is doing.
 *
 * Drafts are persisted per (annotator, record) on every change and cleared
 * only after the server acknowledges the submission, so a reload or a flaky
 * connection never loses an in-progress grade.
 */

import {
  AuditApi,
  AuditItem,
  Grade,
  isGrade,
} from './api.js';

export type GradeTarget = 'question' | 'answer';

export interface Draft {
  questionGrade: Grade | null;
  answerGrade: Grade | null;
  note: string;
}

export const EMPTY_DRAFT: Draft = { questionGrade: null, answerGrade: null, note: '' };

/** The subset of window.localStorage the draft store needs; injectable in tests. */
export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export class DraftStore {
  constructor(private readonly storage: StorageLike) {}

  private key(annotatorId: string, recordId: string): string {
    return `lingua-bridge.draft.${annotatorId}.${recordId}`;
  }

  load(annotatorId: string, recordId: string): Draft {
    const raw = this.storage.getItem(this.key(annotatorId, recordId));
    if (raw === null) return { ...EMPTY_DRAFT };
    try {
      const parsed = JSON.parse(raw) as Partial<Draft>;
      return {
        questionGrade: isGrade(parsed.questionGrade) ? parsed.questionGrade : null,
        answerGrade: isGrade(parsed.answerGrade) ? parsed.answerGrade : null,
        note: typeof parsed.note === 'string' ? parsed.note : '',
      };
    } catch {
      return { ...EMPTY_DRAFT };
    }
  }

  save(annotatorId: string, recordId: string, draft: Draft): void {
    this.storage.setItem(this.key(annotatorId, recordId), JSON.stringify(draft));
  }

  clear(annotatorId: string, recordId: string): void {
    this.storage.removeItem(this.key(annotatorId, recordId));
  }
}

/**
 * Why a submission attempt was blocked; shown inline next to the selector
 * it names. Submissions never reach the server while one of these holds.
 */
export function validateDraft(draft: Draft): string | null {
  if (draft.questionGrade === null && draft.answerGrade === null) {
    return 'grade the question and the answer before submitting';
  }
  if (draft.questionGrade === null) return 'question grade is missing';
  if (draft.answerGrade === null) return 'answer grade is missing';
  return null;
}

export type SessionView =
  | { screen: 'loading' }
  | {
      screen: 'review';
      item: AuditItem;
      remaining: number;
      draft: Draft;
      focus: GradeTarget;
      error: string | null;
      lastOutcome: 'saved' | 'updated' | null;
      submitting: boolean;
    }
  | { screen: 'done'; graded: number }
  | { screen: 'error'; message: string };

/**
 * Drives one annotator's pass over the audit sample. The owner renders
 * `view()` after every `onChange` callback; `onMatrixStale` fires whenever
 * a submission landed, so the dashboard can refetch.
 */
export class ReviewSession {
  private view_: SessionView = { screen: 'loading' };
  private focus: GradeTarget = 'question';
  private draft: Draft = { ...EMPTY_DRAFT };
  private error: string | null = null;
  private lastOutcome: 'saved' | 'updated' | null = null;
  private submitting = false;
  private gradedCount = 0;
  private readonly submittedRecords = new Set<string>();
  private listeners: Array<() => void> = [];
  private matrixListeners: Array<() => void> = [];

  constructor(
    private readonly client: AuditApi,
    private readonly drafts: DraftStore,
    readonly annotatorId: string,
  ) {}

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  onMatrixStale(listener: () => void): void {
    this.matrixListeners.push(listener);
  }

  view(): SessionView {
    return this.view_;
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  private notifyMatrixStale(): void {
    for (const listener of this.matrixListeners) listener();
  }

  private setView(view: SessionView): void {
    this.view_ = view;
    this.notify();
  }

  private reviewView(item: AuditItem, remaining: number): SessionView {
    return {
      screen: 'review',
      item,
      remaining,
      draft: { ...this.draft },
      focus: this.focus,
      error: this.error,
      lastOutcome: this.lastOutcome,
      submitting: this.submitting,
    };
  }

  async start(): Promise<void> {
    await this.advance();
  }

  private async advance(): Promise<void> {
    this.setView({ screen: 'loading' });
    let next;
    try {
      next = await this.client.next(this.annotatorId);
    } catch (err) {
      this.setView({ screen: 'error', message: String(err) });
      return;
    }
    if (next.kind === 'exhausted') {
      this.setView({ screen: 'done', graded: this.gradedCount });
      return;
    }
    this.draft = this.drafts.load(this.annotatorId, next.item.record_id);
    this.focus = this.draft.questionGrade === null ? 'question' : 'answer';
    this.error = null;
    this.setView(this.reviewView(next.item, next.remaining));
  }

  private currentItem(): AuditItem | null {
    return this.view_.screen === 'review' ? this.view_.item : null;
  }

  private persistDraft(): void {
    const item = this.currentItem();
    if (item !== null) {
      this.drafts.save(this.annotatorId, item.record_id, this.draft);
    }
  }

  /** Grade one side. Grading the question moves focus to the answer. */
  setGrade(target: GradeTarget, grade: Grade): void {
    const item = this.currentItem();
    if (item === null || this.submitting) return;
    if (target === 'question') {
      this.draft = { ...this.draft, questionGrade: grade };
      this.focus = 'answer';
    } else {
      this.draft = { ...this.draft, answerGrade: grade };
    }
    this.error = null;
    this.persistDraft();
    this.setView(this.reviewView(item, this.remaining()));
  }

  /** Apply a grade to whichever selector currently has focus. */
  gradeFocused(grade: Grade): void {
    this.setGrade(this.focus, grade);
  }

  setNote(note: string): void {
    const item = this.currentItem();
    if (item === null) return;
    this.draft = { ...this.draft, note };
    this.persistDraft();
    this.view_ = this.reviewView(item, this.remaining());
    // No notify: the note field is the source of this change; re-rendering
    // it on every keystroke would fight the cursor.
  }

  setFocus(target: GradeTarget): void {
    const item = this.currentItem();
    if (item === null) return;
    this.focus = target;
    this.setView(this.reviewView(item, this.remaining()));
  }

  private remaining(): number {
    return this.view_.screen === 'review' ? this.view_.remaining : 0;
  }

  /**
   * Validate and submit the current draft. Invalid drafts are blocked here
   * — the request is never sent — and the reason lands in `view().error`.
   */
  async submit(): Promise<void> {
    const item = this.currentItem();
    if (item === null || this.submitting) return;
    const blocked = validateDraft(this.draft);
    if (blocked !== null) {
      this.error = blocked;
      this.focus = this.draft.questionGrade === null ? 'question' : 'answer';
      this.setView(this.reviewView(item, this.remaining()));
      return;
    }
    this.submitting = true;
    this.setView(this.reviewView(item, this.remaining()));
    try {
      await this.client.submit({
        record_id: item.record_id,
        annotator_id: this.annotatorId,
        question_grade: this.draft.questionGrade as Grade,
        answer_grade: this.draft.answerGrade as Grade,
        ...(this.draft.note.trim() === '' ? {} : { note: this.draft.note.trim() }),
      });
    } catch (err) {
      this.submitting = false;
      this.error = String(err);
      this.setView(this.reviewView(item, this.remaining()));
      return;
    }
    this.submitting = false;
    this.lastOutcome = this.submittedRecords.has(item.record_id) ? 'updated' : 'saved';
    this.submittedRecords.add(item.record_id);
    this.gradedCount += 1;
    this.drafts.clear(this.annotatorId, item.record_id);
    this.draft = { ...EMPTY_DRAFT };
    this.notifyMatrixStale();
    await this.advance();
  }
}
