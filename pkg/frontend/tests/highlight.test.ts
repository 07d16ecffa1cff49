import { describe, expect, it } from 'vitest';

import {
  codePointLength,
  codePointToUtf16,
  segmentText,
  sliceByCodePoints,
} from '../src/highlight.js';
import type { EntityRecord } from '../src/types.js';

function entity(start: number, end: number, text = ''): EntityRecord {
  return {
    text,
    start,
    end,
    verification: 'exact',
    claimed_start: start,
    claimed_end: end,
  };
}

describe('code point conversion', () => {
  it('is the identity for ASCII', () => {
    expect(codePointToUtf16('Acme Corp', 5)).toBe(5);
    expect(codePointLength('Acme Corp')).toBe(9);
  });

  it('counts BMP characters as single units', () => {
    const text = '甲公司收购乙公司';
    expect(codePointLength(text)).toBe(8);
    expect(sliceByCodePoints(text, 0, 3)).toBe('甲公司');
  });

  it('handles astral characters occupying two UTF-16 units', () => {
    const text = '💹 Acme 💹 Corp';
    // code points: 💹(1) space(1) A c m e(4) space 💹 space C o r p
    expect(codePointLength(text)).toBe(13);
    expect(sliceByCodePoints(text, 2, 6)).toBe('Acme');
    expect(codePointToUtf16(text, 2)).toBe(3); // astral char shifts by one
  });

  it('clamps past-the-end indexes', () => {
    expect(codePointToUtf16('ab', 10)).toBe(2);
  });
});

describe('segmentText', () => {
  it('round-trips the text through segments', () => {
    const text = 'Acme Corp acquired Beta Ltd on 2019-03-04.';
    const segments = segmentText(text, [entity(0, 9), entity(19, 27), entity(31, 41)]);
    expect(segments.map((s) => s.text).join('')).toBe(text);
    expect(segments.filter((s) => s.highlighted)).toHaveLength(3);
    expect(segments[0].text).toBe('Acme Corp');
  });

  it('marks the right substrings with multi-byte text', () => {
    const text = '甲公司 acquired 乙公司.';
    const segments = segmentText(text, [entity(0, 3), entity(13, 16)]);
    const marked = segments.filter((s) => s.highlighted).map((s) => s.text);
    expect(marked).toEqual(['甲公司', '乙公司']);
    expect(segments.map((s) => s.text).join('')).toBe(text);
  });

  it('skips invalid and overlapping spans', () => {
    const text = 'short text';
    const segments = segmentText(text, [
      entity(-1, 3),
      entity(2, 2),
      entity(0, 99),
      entity(0, 5),
      entity(3, 7), // overlaps the kept (0,5)
    ]);
    const marked = segments.filter((s) => s.highlighted);
    expect(marked).toHaveLength(1);
    expect(marked[0].text).toBe('short');
    expect(segments.map((s) => s.text).join('')).toBe(text);
  });

  it('handles empty entity lists', () => {
    const segments = segmentText('plain', []);
    expect(segments).toEqual([{ text: 'plain', highlighted: false }]);
  });

  it('handles adjacent spans without gaps', () => {
    const text = 'abcdef';
    const segments = segmentText(text, [entity(0, 3), entity(3, 6)]);
    expect(segments.map((s) => s.text)).toEqual(['abc', 'def']);
    expect(segments.every((s) => s.highlighted)).toBe(true);
  });
});
