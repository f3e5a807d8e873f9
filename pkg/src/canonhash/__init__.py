"""Lock-free Robin Hood hash set with a canonical memory layout.

The table stores keys only. Each cell holds the value at that position, a
lookahead copy of the next position's value, and a two-bit mark; whenever no
insert or delete is in flight, memory is exactly the canonical Robin Hood
placement of the current set, regardless of the operation history that
produced it.
"""
from .cells import EMPTY, EMPTY_CELL, CellContent, Key, Mark
from .memory import AtomicMemory, LinkError, SimulatedMemory
from .oracle import CanonicalRep, CapacityError, canonical, canonical_mult, seq_apply
from .priority import HashConfig
from .table import (DELETE, INSERT, LOOKUP, HashTable, HelpScanOverrun,
                    StepMachine, TableConfig, TableFullError)

__all__ = [
    "AtomicMemory", "CanonicalRep", "CapacityError", "CellContent", "DELETE",
    "EMPTY", "EMPTY_CELL", "HashConfig", "HashTable", "HelpScanOverrun",
    "INSERT", "Key", "LinkError", "LOOKUP", "Mark", "SimulatedMemory",
    "StepMachine", "TableConfig", "TableFullError", "canonical",
    "canonical_mult", "seq_apply",
]
