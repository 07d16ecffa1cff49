"""Core dataset model: entity spans, instances, datasets.

Character indices everywhere are Unicode scalar values (Python string
indices), never bytes. ``start`` is inclusive, ``end`` exclusive.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

from ..errors import DatasetValidationError


class EntityType(str, enum.Enum):
    COMPANY = "Company"
    PERSON = "Person"
    DATE = "Date"
    AMOUNT = "Amount"
    LOCATION = "Location"


class EventType(str, enum.Enum):
    EQUITY_PLEDGE = "EquityPledge"
    FINANCIAL_PENALTY = "FinancialPenalty"
    INVESTMENT = "Investment"
    PRODUCT_LAUNCH = "ProductLaunch"
    BANKRUPTCY = "Bankruptcy"
    ACQUISITION = "Acquisition"

    @property
    def display(self) -> str:
        """Natural-language label used in prompts and reports."""
        return _EVENT_DISPLAY[self]


_EVENT_DISPLAY = {
    EventType.EQUITY_PLEDGE: "Equity Pledge",
    EventType.FINANCIAL_PENALTY: "Financial Penalty",
    EventType.INVESTMENT: "Investment",
    EventType.PRODUCT_LAUNCH: "Product Launch",
    EventType.BANKRUPTCY: "Bankruptcy",
    EventType.ACQUISITION: "Acquisition",
}


class Split(str, enum.Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


@dataclass(frozen=True, order=True)
class EntitySpan:
    """One gold or predicted entity: surface text plus character offsets."""

    start: int
    end: int
    text: str
    entity_type: EntityType

    def validate(self, source_text: str, owner: str = "") -> None:
        """Raise DatasetValidationError unless the span verifies against source_text."""
        where = f" in {owner}" if owner else ""
        if not (0 <= self.start < self.end <= len(source_text)):
            raise DatasetValidationError(
                f"span ({self.start}, {self.end}) out of range for text of "
                f"length {len(source_text)}{where}"
            )
        actual = source_text[self.start : self.end]
        if actual != self.text:
            raise DatasetValidationError(
                f"span text {self.text!r} != source slice {actual!r} at "
                f"({self.start}, {self.end}){where}"
            )


@dataclass
class Instance:
    """One extraction example: source text, event type and gold entities."""

    id: str
    text: str
    event_type: EventType
    gold: list[EntitySpan] = field(default_factory=list)

    def validate(self) -> None:
        seen: set[tuple[int, int, EntityType]] = set()
        for span in self.gold:
            span.validate(self.text, owner=f"instance {self.id!r}")
            key = (span.start, span.end, span.entity_type)
            if key in seen:
                raise DatasetValidationError(
                    f"duplicate gold span (start={span.start}, end={span.end}, "
                    f"type={span.entity_type.value}) in instance {self.id!r}"
                )
            seen.add(key)


@dataclass
class Dataset:
    """An ordered list of instances belonging to one split."""

    instances: list[Instance]
    split: Split = Split.TRAIN

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)

    def validate(self) -> None:
        ids: set[str] = set()
        for inst in self.instances:
            if inst.id in ids:
                raise DatasetValidationError(f"duplicate instance id {inst.id!r}")
            ids.add(inst.id)
            inst.validate()
