"""Cell-level data model for the shared hash-table array.

A cell logically holds two key slots and a two-bit mark: the value stored at
this position, a lookahead copy of the next position's value, and a mark
saying whether an insertion or deletion is currently working on the cell.
The empty slot is represented by ``None``.
"""
from __future__ import annotations

from enum import Enum
from typing import NamedTuple, Optional

Key = int
# ``None`` is the empty slot. It has lower priority than every key.
EMPTY: Optional[Key] = None


class Mark(str, Enum):
    """Per-cell status: stable, or locked by an in-flight insert/delete."""

    STABLE = "S"
    INSERTING = "I"
    DELETING = "D"


class CellContent(NamedTuple):
    """One cell: (val, next, mark). Equality ignores all backend metadata."""

    val: Optional[Key]
    next: Optional[Key]
    mark: Mark

    def to_json(self) -> dict:
        return {"val": self.val, "next": self.next, "mark": self.mark.value}

    @classmethod
    def from_json(cls, obj: dict) -> "CellContent":
        return cls(obj["val"], obj["next"], Mark(obj["mark"]))


EMPTY_CELL = CellContent(EMPTY, EMPTY, Mark.STABLE)


def logical_width_bits(universe: int) -> int:
    """Bits a cell occupies logically: two key slots plus the two mark bits."""
    key_bits = max(1, (universe - 1).bit_length())
    return 2 * key_bits + 2
