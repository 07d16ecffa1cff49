"""Prompt/target rendering and byte-level tokenization with offset maps."""
from __future__ import annotations

import json
from dataclasses import dataclass

from .corpus.types import EntitySpan, Instance
from .errors import DatasetValidationError

PROMPT_TEMPLATE = (
    "Instruction: Extract all financial entities related to event type "
    "{event} from the following text. Output in JSON format.\n"
    "Text: {text}\n"
    "Output:"
)

# Fixed vocabulary: 256 byte values plus the three specials.
BOS_ID = 256
EOS_ID = 257
PAD_ID = 258
VOCAB_SIZE = 259
SPECIAL_IDS = frozenset({BOS_ID, EOS_ID, PAD_ID})


def build_prompt(instance: Instance) -> str:
    """Render the instruction prompt for an instance, verbatim, no normalization."""
    return PROMPT_TEMPLATE.format(
        event=instance.event_type.display, text=instance.text
    )


def serialize_target(gold: list[EntitySpan], source_text: str | None = None) -> str:
    """Serialize a gold span list to the canonical target string.

    Canonical form: key order text/start/end, entities ascending by
    (start, end), compact separators, no entity_type. When source_text is
    given, spans that fail substring verification refuse to serialize.
    """
    for span in gold:
        if not (0 <= span.start < span.end):
            raise DatasetValidationError(
                f"cannot serialize invalid span ({span.start}, {span.end})"
            )
        if source_text is not None:
            span.validate(source_text)
    ordered = sorted(gold, key=lambda s: (s.start, s.end))
    payload = {
        "entities": [
            {"text": s.text, "start": s.start, "end": s.end} for s in ordered
        ]
    }
    return json.dumps(payload, ensure_ascii=False, separators=(",", ":"))


@dataclass
class TokenSequence:
    """Token ids plus per-token character offsets.

    Offsets attach to the leading byte of each character; continuation
    bytes of multi-byte characters and special tokens carry None. The
    non-None offsets partition [0, len(text)) exactly.
    """

    ids: list[int]
    offsets: list[tuple[int, int] | None]

    def __len__(self) -> int:
        return len(self.ids)


def tokenize(text: str) -> TokenSequence:
    """Byte-level tokenization with exact character-offset mapping."""
    ids: list[int] = []
    offsets: list[tuple[int, int] | None] = []
    for char_idx, char in enumerate(text):
        encoded = char.encode("utf-8")
        ids.append(encoded[0])
        offsets.append((char_idx, char_idx + 1))
        for byte in encoded[1:]:
            ids.append(byte)
            offsets.append(None)
    return TokenSequence(ids=ids, offsets=offsets)


def detokenize(ids: list[int]) -> str:
    """Inverse of tokenize; strips special tokens.

    Ids outside the vocabulary raise ValueError. Byte sequences that are
    not valid UTF-8 (possible for raw model output) decode with U+FFFD
    replacement rather than failing.
    """
    data = bytearray()
    for token_id in ids:
        if token_id in SPECIAL_IDS:
            continue
        if not 0 <= token_id < 256:
            raise ValueError(f"token id {token_id} outside vocabulary")
        data.append(token_id)
    return data.decode("utf-8", errors="replace")


@dataclass
class PromptPair:
    """A rendered (input prompt, serialized target) pair with token ids."""

    input_text: str
    target_text: str
    input_ids: list[int]
    target_ids: list[int]

    @property
    def total_len(self) -> int:
        # BOS + prompt + target + EOS
        return len(self.input_ids) + len(self.target_ids) + 2


def make_prompt_pair(instance: Instance) -> PromptPair:
    input_text = build_prompt(instance)
    target_text = serialize_target(instance.gold, instance.text)
    return PromptPair(
        input_text=input_text,
        target_text=target_text,
        input_ids=tokenize(input_text).ids,
        target_ids=tokenize(target_text).ids,
    )
