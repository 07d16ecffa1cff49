"""Conversion between span annotations and BIOES tag sequences.

Conversion must be lossless: a gold span whose boundaries do not line up
with token boundaries raises AlignmentError instead of being clipped.
"""
from __future__ import annotations

import re

from ..errors import AlignmentError, TagDecodeError
from .types import EntitySpan, EntityType, Instance

TokenOffsets = list[tuple[int, int]]

_WORD_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def simple_token_offsets(text: str) -> TokenOffsets:
    """Word/punctuation token offsets used by the CLI converter."""
    return [(m.start(), m.end()) for m in _WORD_RE.finditer(text)]


def _check_offsets(token_offsets: TokenOffsets, text_len: int) -> None:
    prev_end = 0
    for start, end in token_offsets:
        if not (0 <= start < end <= text_len):
            raise AlignmentError(f"token offset ({start}, {end}) outside text")
        if start < prev_end:
            raise AlignmentError(
                f"token offsets overlap or are unsorted at ({start}, {end})"
            )
        prev_end = end


def spans_to_bioes(instance: Instance, token_offsets: TokenOffsets) -> list[str]:
    """Tag each token with B-/I-/E-/S-<type> or O for the instance's gold spans."""
    _check_offsets(token_offsets, len(instance.text))
    starts = {s: i for i, (s, _) in enumerate(token_offsets)}
    ends = {e: i for i, (_, e) in enumerate(token_offsets)}

    tags = ["O"] * len(token_offsets)
    for span in instance.gold:
        first = starts.get(span.start)
        last = ends.get(span.end)
        if first is None or last is None or first > last:
            raise AlignmentError(
                f"gold span {span.text!r} ({span.start}, {span.end}) does not "
                f"align with token boundaries in instance {instance.id!r}"
            )
        # Tokens inside the span must tile it without gaps extending outside.
        for idx in range(first, last + 1):
            if tags[idx] != "O":
                raise AlignmentError(
                    f"gold span {span.text!r} ({span.start}, {span.end}) overlaps "
                    f"another tagged span in instance {instance.id!r}"
                )
        t = span.entity_type.value
        if first == last:
            tags[first] = f"S-{t}"
        else:
            tags[first] = f"B-{t}"
            for idx in range(first + 1, last):
                tags[idx] = f"I-{t}"
            tags[last] = f"E-{t}"
    return tags


def bioes_to_spans(tags: list[str], token_offsets: TokenOffsets, text: str
                   ) -> list[EntitySpan]:
    """Decode a BIOES tag sequence back to spans; inverse of spans_to_bioes.

    Ill-formed sequences (I/E without an open entity, unterminated B, type
    switches mid-entity) raise TagDecodeError with the offending index.
    """
    if len(tags) != len(token_offsets):
        raise TagDecodeError(
            f"{len(tags)} tags for {len(token_offsets)} tokens", index=0
        )
    _check_offsets(token_offsets, len(text))

    spans: list[EntitySpan] = []
    open_type: str | None = None
    open_start = 0

    def close(end_char: int, index: int) -> None:
        nonlocal open_type
        assert open_type is not None
        spans.append(
            EntitySpan(
                start=open_start,
                end=end_char,
                text=text[open_start:end_char],
                entity_type=EntityType(open_type),
            )
        )
        open_type = None

    for i, tag in enumerate(tags):
        tok_start, tok_end = token_offsets[i]
        if tag == "O":
            if open_type is not None:
                raise TagDecodeError(f"O inside an open entity at index {i}", i)
            continue
        if len(tag) < 3 or tag[1] != "-" or tag[0] not in "BIES":
            raise TagDecodeError(f"malformed tag {tag!r} at index {i}", i)
        prefix, ent_type = tag[0], tag[2:]
        try:
            EntityType(ent_type)
        except ValueError:
            raise TagDecodeError(f"unknown entity type in {tag!r} at index {i}", i)

        if prefix == "S":
            if open_type is not None:
                raise TagDecodeError(f"S inside an open entity at index {i}", i)
            open_type, open_start = ent_type, tok_start
            close(tok_end, i)
        elif prefix == "B":
            if open_type is not None:
                raise TagDecodeError(f"B inside an open entity at index {i}", i)
            open_type, open_start = ent_type, tok_start
        elif prefix == "I":
            if open_type is None:
                raise TagDecodeError(f"I without preceding B at index {i}", i)
            if ent_type != open_type:
                raise TagDecodeError(
                    f"type switch {open_type} -> {ent_type} at index {i}", i
                )
        else:  # E
            if open_type is None:
                raise TagDecodeError(f"E without open entity at index {i}", i)
            if ent_type != open_type:
                raise TagDecodeError(
                    f"type switch {open_type} -> {ent_type} at index {i}", i
                )
            close(tok_end, i)

    if open_type is not None:
        raise TagDecodeError(
            f"entity of type {open_type} left open at sequence end", len(tags) - 1
        )
    return spans
