"""Parsing, repair and span verification of generated entity JSON.

Failures never propagate as exceptions: a generation that cannot be parsed
scores as zero predictions downstream, encoded in parse_status.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class ParseStatus(str, Enum):
    CLEAN = "clean"
    REPAIRED = "repaired"
    FAILED = "failed"


class Verification(str, Enum):
    EXACT = "exact"
    RELOCATED = "relocated"
    UNVERIFIABLE = "unverifiable"


@dataclass
class VerifiedEntity:
    """A predicted entity with its verification outcome.

    start/end are the verified offsets (corrected when relocated);
    claimed_start/claimed_end always hold the offsets the model emitted.
    """

    text: str
    start: int
    end: int
    verification: Verification
    claimed_start: int
    claimed_end: int

    def to_record(self) -> dict:
        return {
            "text": self.text,
            "start": self.start,
            "end": self.end,
            "verification": self.verification.value,
            "claimed_start": self.claimed_start,
            "claimed_end": self.claimed_end,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "VerifiedEntity":
        return cls(
            text=rec["text"], start=rec["start"], end=rec["end"],
            verification=Verification(rec["verification"]),
            claimed_start=rec["claimed_start"], claimed_end=rec["claimed_end"],
        )


@dataclass
class ParsedEntities:
    entities: list[VerifiedEntity] = field(default_factory=list)
    parse_status: ParseStatus = ParseStatus.CLEAN
    repair_log: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# JSON repair


def _scan(text: str):
    """Scan JSON-ish text, string-aware: returns (open stack, string state).

    stack holds '{'/'[' characters still open outside strings;
    in_string/string_start describe a double-quoted string left open at the
    end of the text.
    """
    stack: list[str] = []
    in_string = False
    string_start = -1
    escaped = False
    for i, ch in enumerate(text):
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
        elif ch == '"':
            in_string = True
            string_start = i
        elif ch in "{[":
            stack.append(ch)
        elif ch == "}":
            if stack and stack[-1] == "{":
                stack.pop()
        elif ch == "]":
            if stack and stack[-1] == "[":
                stack.pop()
    return stack, in_string, string_start


def _strip_noise(text: str) -> str:
    """Drop anything before the first '{' and after the last balanced point."""
    start = text.find("{")
    if start < 0:
        return text
    text = text[start:]
    depth = 0
    in_string = False
    escaped = False
    last_balanced = -1
    for i, ch in enumerate(text):
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch in "{[":
            depth += 1
        elif ch in "}]":
            depth -= 1
            if depth == 0:
                last_balanced = i
    if last_balanced >= 0:
        return text[: last_balanced + 1]
    return text


def _close_brackets(text: str) -> str:
    """Trim dangling tail fragments, then close open quotes and brackets."""
    while True:
        stack, in_string, string_start = _scan(text)
        stripped = text.rstrip()
        if in_string:
            # Unterminated string: drop it entirely.
            text = text[:string_start].rstrip()
            continue
        if stripped.endswith(":"):
            # Key with no value: drop the colon and its key string.
            head = stripped[:-1].rstrip()
            if head.endswith('"'):
                key_open = head.rfind('"', 0, len(head) - 1)
                if key_open >= 0:
                    text = head[:key_open].rstrip()
                    continue
            text = head
            continue
        if stripped.endswith(","):
            text = stripped[:-1]
            continue
        if stripped.endswith('"') and stack and stack[-1] == "{":
            # A closed string that would be a key with no colon/value.
            body = stripped[:-1]
            key_open = body.rfind('"')
            if key_open >= 0:
                after = text[:key_open].rstrip()
                if not after.endswith(":"):
                    text = after
                    continue
        break
    stack, _, _ = _scan(text)
    closers = {"{": "}", "[": "]"}
    return text + "".join(closers[ch] for ch in reversed(stack))


def _remove_trailing_commas(text: str) -> str:
    out: list[str] = []
    in_string = False
    escaped = False
    pending_comma = ""
    for ch in text:
        if in_string:
            out.append(ch)
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            out.append(pending_comma)
            pending_comma = ""
            out.append(ch)
            in_string = True
        elif ch == ",":
            out.append(pending_comma)
            pending_comma = ","
        elif ch in " \t\n\r":
            out.append(ch) if not pending_comma else None
        elif ch in "}]":
            pending_comma = ""
            out.append(ch)
        else:
            out.append(pending_comma)
            pending_comma = ""
            out.append(ch)
    out.append(pending_comma)
    return "".join(out)


def _normalize_quotes(text: str) -> str:
    """Convert single-quote string delimiters to double quotes."""
    out: list[str] = []
    i = 0
    in_double = False
    escaped = False
    n = len(text)
    while i < n:
        ch = text[i]
        if in_double:
            out.append(ch)
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_double = False
            i += 1
            continue
        if ch == '"':
            in_double = True
            out.append(ch)
            i += 1
        elif ch == "'":
            end = i + 1
            body: list[str] = []
            while end < n:
                if text[end] == "\\" and end + 1 < n:
                    body.append(text[end : end + 2])
                    end += 2
                    continue
                if text[end] == "'":
                    break
                body.append(text[end])
                end += 1
            if end < n:  # found closing quote
                inner = "".join(body).replace('"', '\\"')
                out.append(f'"{inner}"')
                i = end + 1
            else:
                out.append(ch)
                i += 1
        else:
            out.append(ch)
            i += 1
    return "".join(out)


_REPAIR_RULES = (
    ("strip_noise", _strip_noise),
    ("close_brackets", _close_brackets),
    ("remove_trailing_commas", _remove_trailing_commas),
    ("normalize_quotes", _normalize_quotes),
)


def repair_json(raw: str, log: Optional[list[str]] = None) -> str:
    """Apply the repair rules in fixed order; idempotent.

    Rules that changed the text are appended to log by name. The output may
    still fail to parse.
    """
    text = raw
    for name, rule in _REPAIR_RULES:
        fixed = rule(text)
        if fixed != text and log is not None:
            log.append(name)
        text = fixed
    return text


# ---------------------------------------------------------------------------
# Span verification


def verify_span(text: str, start: int, end: int,
                source_text: str) -> VerifiedEntity:
    """Check a claimed span against the source; relocate when possible.

    exact: the slice at (start, end) equals text. Otherwise the source is
    searched for text: a unique occurrence relocates there; multiple
    occurrences relocate to the one nearest the claimed start (ties:
    leftmost); none leaves the entity unverifiable at its claimed offsets.
    """
    if 0 <= start < end <= len(source_text) and source_text[start:end] == text:
        return VerifiedEntity(text=text, start=start, end=end,
                              verification=Verification.EXACT,
                              claimed_start=start, claimed_end=end)
    occurrences = []
    pos = source_text.find(text)
    while pos >= 0:
        occurrences.append(pos)
        pos = source_text.find(text, pos + 1)
    if occurrences:
        best = min(occurrences, key=lambda p: (abs(p - start), p))
        return VerifiedEntity(text=text, start=best, end=best + len(text),
                              verification=Verification.RELOCATED,
                              claimed_start=start, claimed_end=end)
    return VerifiedEntity(text=text, start=start, end=end,
                          verification=Verification.UNVERIFIABLE,
                          claimed_start=start, claimed_end=end)


def parse_output(raw: str, source_text: str) -> ParsedEntities:
    """Parse raw generated text into verified entities; never raises.

    Strict parse first; on failure the repair rules run once and the result
    is re-parsed. Entities with non-integer or negative indices, or with
    empty text, are dropped and logged; duplicates (start, end, text)
    collapse to their first occurrence.
    """
    repair_log: list[str] = []
    payload = None
    try:
        payload = json.loads(raw)
        status = ParseStatus.CLEAN
    except (json.JSONDecodeError, ValueError):
        repaired = repair_json(raw, repair_log)
        try:
            payload = json.loads(repaired)
            status = ParseStatus.REPAIRED
        except (json.JSONDecodeError, ValueError):
            return ParsedEntities(parse_status=ParseStatus.FAILED)

    if not isinstance(payload, dict) or not isinstance(payload.get("entities"), list):
        return ParsedEntities(parse_status=ParseStatus.FAILED)

    entities: list[VerifiedEntity] = []
    seen: set[tuple[int, int, str]] = set()
    dropped = False
    for item in payload["entities"]:
        if not isinstance(item, dict):
            dropped = True
            continue
        text = item.get("text")
        start = item.get("start")
        end = item.get("end")
        if (not isinstance(text, str) or not text
                or not isinstance(start, int) or isinstance(start, bool)
                or not isinstance(end, int) or isinstance(end, bool)
                or start < 0 or end < 0):
            dropped = True
            continue
        key = (start, end, text)
        if key in seen:
            continue
        seen.add(key)
        entities.append(verify_span(text, start, end, source_text))
    if dropped:
        repair_log.append("drop_invalid_entity")
        status = ParseStatus.REPAIRED
    return ParsedEntities(entities=entities, parse_status=status,
                          repair_log=repair_log)


# ---------------------------------------------------------------------------
# Prediction file I/O


@dataclass
class Prediction:
    """One instance's raw model output and its parsed entities."""

    instance_id: str
    raw_output: str
    parsed: ParsedEntities

    def to_record(self) -> dict:
        return {
            "id": self.instance_id,
            "raw_output": self.raw_output,
            "parse_status": self.parsed.parse_status.value,
            "entities": [e.to_record() for e in self.parsed.entities],
            "repair_log": self.parsed.repair_log,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Prediction":
        return cls(
            instance_id=rec["id"],
            raw_output=rec["raw_output"],
            parsed=ParsedEntities(
                entities=[VerifiedEntity.from_record(e) for e in rec["entities"]],
                parse_status=ParseStatus(rec["parse_status"]),
                repair_log=list(rec["repair_log"]),
            ),
        )


def save_predictions(predictions: list[Prediction], path) -> None:
    from pathlib import Path

    lines = [json.dumps(p.to_record(), ensure_ascii=False, separators=(",", ":"))
             for p in predictions]
    Path(path).write_text("".join(line + "\n" for line in lines),
                          encoding="utf-8")


def load_predictions(path) -> list[Prediction]:
    from pathlib import Path

    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(Prediction.from_record(json.loads(line)))
    return out
