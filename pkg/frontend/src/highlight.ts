/**
 * Span highlighting from character offsets.
 *
 * Server-side offsets count Unicode scalar values (code points), while JS
 * string indices count UTF-16 code units. Everything here converts through
 * a code-point index so astral characters cannot desynchronize highlights.
 */
import type { EntityRecord } from './types.js';

export interface TextSegment {
  text: string;
  highlighted: boolean;
  entity?: EntityRecord;
}

/** Map a code-point index to the corresponding UTF-16 code-unit index. */
export function codePointToUtf16(text: string, cpIndex: number): number {
  let units = 0;
  let points = 0;
  for (const ch of text) {
    if (points >= cpIndex) return units;
    units += ch.length;
    points += 1;
  }
  return units;
}

/** Number of Unicode scalar values in the string. */
export function codePointLength(text: string): number {
  let n = 0;
  for (const _ of text) n += 1;
  return n;
}

/** Slice by code-point offsets (the EntitySpan convention). */
export function sliceByCodePoints(text: string, start: number, end: number): string {
  return text.slice(codePointToUtf16(text, start), codePointToUtf16(text, end));
}

/**
 * Split text into contiguous segments, marking the entity spans.
 *
 * Invalid spans (out of range, start >= end) are skipped; overlapping
 * spans keep the earlier-starting one. Output segments concatenate back
 * to the input text exactly.
 */
export function segmentText(text: string, entities: EntityRecord[]): TextSegment[] {
  const length = codePointLength(text);
  const usable = entities
    .filter((e) => e.start >= 0 && e.end <= length && e.start < e.end)
    .sort((a, b) => a.start - b.start || a.end - b.end);

  const segments: TextSegment[] = [];
  let cursor = 0;
  for (const entity of usable) {
    if (entity.start < cursor) continue; // overlap: keep earlier span
    if (entity.start > cursor) {
      segments.push({
        text: sliceByCodePoints(text, cursor, entity.start),
        highlighted: false,
      });
    }
    segments.push({
      text: sliceByCodePoints(text, entity.start, entity.end),
      highlighted: true,
      entity,
    });
    cursor = entity.end;
  }
  if (cursor < length) {
    segments.push({ text: sliceByCodePoints(text, cursor, length), highlighted: false });
  }
  return segments;
}
