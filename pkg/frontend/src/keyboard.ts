/**
 * Keyboard shortcuts for the review screen: 1/2/3 grade the focused
 * selector (best grade first), q/a move focus, Enter submits. Pure mapping
 * from a key press to an action; the session decides what the action does.
 */

import { Grade } from './api.js';
import { GradeTarget } from './state.js';

export type KeyAction =
  | { kind: 'grade'; grade: Grade }
  | { kind: 'focus'; target: GradeTarget }
  | { kind: 'submit' };

const GRADE_KEYS: Record<string, Grade> = {
  '1': 'High',
  '2': 'Moderate',
  '3': 'Low',
};

export interface KeyPress {
  key: string;
  /** True when the press happened inside a text field (note, annotator id). */
  typing: boolean;
  altKey?: boolean;
  ctrlKey?: boolean;
  metaKey?: boolean;
}

export function interpretKey(press: KeyPress): KeyAction | null {
  if (press.typing || press.altKey || press.ctrlKey || press.metaKey) {
    return null;
  }
  const grade = GRADE_KEYS[press.key];
  if (grade !== undefined) return { kind: 'grade', grade };
  switch (press.key.toLowerCase()) {
    case 'q':
      return { kind: 'focus', target: 'question' };
    case 'a':
      return { kind: 'focus', target: 'answer' };
    case 'enter':
      return { kind: 'submit' };
    default:
      return null;
  }
}

/** True when the event target is a text-entry element shortcuts must not steal from. */
export function isTypingTarget(target: EventTarget | null): boolean {
  if (!(target instanceof HTMLElement)) return false;
  const tag = target.tagName;
  return tag === 'INPUT' || tag === 'TEXTAREA' || tag === 'SELECT' || target.isContentEditable;
}

export function pressFromEvent(event: KeyboardEvent): KeyPress {
  return {
    key: event.key,
    typing: isTypingTarget(event.target),
    altKey: event.altKey,
    ctrlKey: event.ctrlKey,
    metaKey: event.metaKey,
  };
}
