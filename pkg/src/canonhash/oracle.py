"""Sequential Robin Hood placement: the canonical layout oracle.

For a fixed hash function and table size every key set has exactly one
memory layout satisfying the ordering rule, independent of insertion order.
The oracle computes it by plain sequential insertion with displacement and
doubles as the sequential dictionary specification for the linearizability
checker. Clarity over speed: every call is worst-case quadratic and that is
fine.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, Optional, Tuple

from .cells import CellContent, Key, Mark
from .priority import HashConfig
from .table import DELETE, INSERT, LOOKUP


class CapacityError(ValueError):
    """More keys than the layout can hold."""


class OracleSelfCheckError(AssertionError):
    """The computed layout failed its own ordering cross-check."""


def _place(vals: List[Optional[Key]], v: Key, hcfg: HashConfig) -> None:
    i = hcfg.h(v)
    cur = v
    for _ in range(hcfg.m):
        occupant = vals[i]
        if occupant is None:
            vals[i] = cur
            return
        if hcfg.greater(cur, occupant, i):
            vals[i], cur = cur, occupant
        i = (i + 1) % hcfg.m
    raise CapacityError("no vacant cell while placing keys")


def _check_ordering(vals: List[Optional[Key]], hcfg: HashConfig) -> None:
    m = hcfg.m
    for i, v in enumerate(vals):
        if v is None:
            continue
        j = hcfg.h(v)
        while j != i:
            if not hcfg.greater_eq(vals[j], v, j):
                raise OracleSelfCheckError(
                    f"cell {j} holds {vals[j]} which loses to {v} stored at {i}")
            j = (j + 1) % m


def canonical_vals(keys: Iterable[Key], hcfg: HashConfig, *,
                   allow_full: bool = False,
                   validate: bool = False) -> Tuple[Optional[Key], ...]:
    """Value slots of the canonical layout of a key set (or multiset)."""
    keys = list(keys)
    cap = hcfg.m if allow_full else hcfg.m - 1
    if len(keys) > cap:
        raise CapacityError(f"{len(keys)} keys exceed capacity {cap}")
    vals: List[Optional[Key]] = [None] * hcfg.m
    for v in sorted(keys):
        _place(vals, v, hcfg)
    if validate:
        _check_ordering(vals, hcfg)
    return tuple(vals)


@dataclass(frozen=True)
class CanonicalRep:
    """Full canonical memory image: values, derived lookaheads, all stable."""

    vals: Tuple[Optional[Key], ...]

    @property
    def m(self) -> int:
        return len(self.vals)

    def next_slots(self) -> Tuple[Optional[Key], ...]:
        return tuple(self.vals[(i + 1) % self.m] for i in range(self.m))

    def cells(self) -> Tuple[CellContent, ...]:
        nxt = self.next_slots()
        return tuple(CellContent(self.vals[i], nxt[i], Mark.STABLE)
                     for i in range(self.m))

    def to_json(self) -> List[dict]:
        return [c.to_json() for c in self.cells()]


def canonical(keys: Iterable[Key], hcfg: HashConfig, *,
              validate: bool = False) -> CanonicalRep:
    keys = set(keys)
    return CanonicalRep(canonical_vals(keys, hcfg, validate=validate))


def canonical_mult(keys: Iterable[Key], hcfg: HashConfig, *,
                   validate: bool = False) -> CanonicalRep:
    """Multiset variant: duplicates land in consecutive cells."""
    return CanonicalRep(canonical_vals(list(keys), hcfg, validate=validate))


def seq_apply(state: FrozenSet[Key], op: Tuple[str, Key]) -> Tuple[FrozenSet[Key], bool]:
    """Sequential set semantics: the specification all checkers test against."""
    kind, v = op
    if kind == INSERT:
        if v in state:
            return state, False
        return state | {v}, True
    if kind == DELETE:
        if v in state:
            return state - {v}, True
        return state, False
    if kind == LOOKUP:
        return state, v in state
    raise ValueError(f"unknown operation kind {kind!r}")
