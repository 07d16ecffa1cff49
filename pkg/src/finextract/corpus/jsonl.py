"""JSONL serialization of datasets.

One instance per line, canonical key order (id, text, event_type, entities),
compact separators, UTF-8. Serialization is byte-stable: saving the same
dataset twice produces identical files.
"""
from __future__ import annotations

import json
from pathlib import Path

from ..errors import DatasetParseError, DatasetValidationError
from .types import Dataset, EntitySpan, EntityType, EventType, Instance


def instance_to_record(inst: Instance) -> dict:
    return {
        "id": inst.id,
        "text": inst.text,
        "event_type": inst.event_type.value,
        "entities": [
            {
                "text": s.text,
                "start": s.start,
                "end": s.end,
                "entity_type": s.entity_type.value,
            }
            for s in inst.gold
        ],
    }


def record_to_instance(record: dict, line_no: int | None = None) -> Instance:
    where = f" (line {line_no})" if line_no is not None else ""
    try:
        spans = [
            EntitySpan(
                start=e["start"],
                end=e["end"],
                text=e["text"],
                entity_type=EntityType(e["entity_type"]),
            )
            for e in record["entities"]
        ]
        return Instance(
            id=record["id"],
            text=record["text"],
            event_type=EventType(record["event_type"]),
            gold=spans,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetParseError(f"malformed record{where}: {exc}", line_no) from exc


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    path = Path(path)
    lines = [
        json.dumps(instance_to_record(inst), ensure_ascii=False, separators=(",", ":"))
        for inst in dataset.instances
    ]
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def load_dataset(path: str | Path, split: str = "train") -> Dataset:
    """Read a JSONL dataset, validating every invariant.

    The first violation is reported with its instance id and line number.
    An empty file yields an empty dataset.
    """
    path = Path(path)
    instances: list[Instance] = []
    ids: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetParseError(
                    f"invalid JSON on line {line_no}: {exc}", line_no
                ) from exc
            inst = record_to_instance(record, line_no)
            try:
                inst.validate()
                if inst.id in ids:
                    raise DatasetValidationError(f"duplicate instance id {inst.id!r}")
            except DatasetValidationError as exc:
                raise DatasetValidationError(
                    f"line {line_no}, instance {inst.id!r}: {exc}"
                ) from exc
            ids.add(inst.id)
            instances.append(inst)
    from .types import Split

    return Dataset(instances=instances, split=Split(split))
