import { describe, expect, it } from 'vitest';

import { interpretKey } from '../src/keyboard.js';

describe('interpretKey', () => {
  it('maps 1/2/3 to grades, best first', () => {
    expect(interpretKey({ key: '1', typing: false })).toEqual({ kind: 'grade', grade: 'High' });
    expect(interpretKey({ key: '2', typing: false })).toEqual({
      kind: 'grade',
      grade: 'Moderate',
    });
    expect(interpretKey({ key: '3', typing: false })).toEqual({ kind: 'grade', grade: 'Low' });
  });

  it('maps q/a to focus moves, case-insensitively', () => {
    expect(interpretKey({ key: 'q', typing: false })).toEqual({
      kind: 'focus',
      target: 'question',
    });
    expect(interpretKey({ key: 'A', typing: false })).toEqual({ kind: 'focus', target: 'answer' });
  });

  it('maps Enter to submit', () => {
    expect(interpretKey({ key: 'Enter', typing: false })).toEqual({ kind: 'submit' });
  });

  it('ignores keys while typing in a text field', () => {
    expect(interpretKey({ key: '1', typing: true })).toBeNull();
    expect(interpretKey({ key: 'Enter', typing: true })).toBeNull();
  });

  it('ignores chords with modifier keys', () => {
    expect(interpretKey({ key: '1', typing: false, ctrlKey: true })).toBeNull();
    expect(interpretKey({ key: 'a', typing: false, metaKey: true })).toBeNull();
    expect(interpretKey({ key: '2', typing: false, altKey: true })).toBeNull();
  });

  it('ignores unmapped keys', () => {
    expect(interpretKey({ key: '4', typing: false })).toBeNull();
    expect(interpretKey({ key: 'x', typing: false })).toBeNull();
    expect(interpretKey({ key: 'Escape', typing: false })).toBeNull();
  });
});
