"""Shared-memory array of cells with LL / VL / SC semantics.

Two backends implement the same interface:

* :class:`SimulatedMemory` is deterministic and externally synchronized; a
  single scheduler thread drives every step. Version counters are unbounded.
  This is the backend used by the schedule explorer and the checkers.

* :class:`AtomicMemory` is thread safe. Each cell packs (val, next, mark)
  plus a 32-bit version counter into one 64-bit word, and SC is a
  compare-and-swap on (content, version). The version tag defeats ABA and is
  emulation metadata only: it is never visible through ``ll`` or
  ``snapshot``. CPython has no native single-word CAS, so the swap itself is
  guarded by a per-cell lock; reads are single atomic word loads.

Link rules, identical in both backends:

* ``sc``/``vl`` without a live link raise :class:`LinkError`.
* Any ``sc`` attempt (successful or not) consumes the caller's link; a fresh
  ``ll`` is required before the next attempt on that cell.
* A successful ``sc`` invalidates every other live link on the cell,
  including the writer's own links on other cells are unaffected.
"""
from __future__ import annotations

import threading
from typing import Dict, List, Optional, Sequence

from .cells import EMPTY_CELL, CellContent, Mark


class LinkError(RuntimeError):
    """VL or SC issued without a prior LL on that cell by this process."""


class SimulatedMemory:
    """Deterministic LL/VL/SC cells for single-scheduler execution."""

    __slots__ = ("m", "_cells", "_versions", "_links")

    def __init__(self, m: int, initial: Optional[Sequence[CellContent]] = None):
        if m < 2:
            raise ValueError("need at least two cells")
        if initial is not None and len(initial) != m:
            raise ValueError("initial contents must cover all cells")
        self.m = m
        self._cells: List[CellContent] = list(initial) if initial else [EMPTY_CELL] * m
        self._versions = [0] * m
        self._links: Dict[object, Dict[int, int]] = {}

    def register(self, pid) -> None:
        self._links.setdefault(pid, {})

    def _link_map(self, pid) -> Dict[int, int]:
        try:
            return self._links[pid]
        except KeyError:
            raise LinkError(f"process {pid!r} is not registered") from None

    def ll(self, pid, i: int) -> CellContent:
        self._link_map(pid)[i] = self._versions[i]
        return self._cells[i]

    def vl(self, pid, i: int) -> bool:
        linked = self._link_map(pid).get(i)
        if linked is None:
            raise LinkError(f"vl({pid!r}, {i}) without a live link")
        return linked == self._versions[i]

    def sc(self, pid, i: int, new: CellContent) -> bool:
        linked = self._link_map(pid).pop(i, None)
        if linked is None:
            raise LinkError(f"sc({pid!r}, {i}) without a live link")
        if linked != self._versions[i]:
            return False
        self._cells[i] = new
        self._versions[i] += 1
        return True

    def snapshot(self) -> List[CellContent]:
        return list(self._cells)


_VERSION_BITS = 32
_VERSION_MASK = (1 << _VERSION_BITS) - 1
_WORD_BITS = 64
_MARK_CODE = {Mark.STABLE: 0, Mark.INSERTING: 1, Mark.DELETING: 2}
_MARK_FROM = (Mark.STABLE, Mark.INSERTING, Mark.DELETING)


class AtomicMemory:
    """Thread-safe LL/VL/SC cells over packed 64-bit words.

    A pid's links live in thread-local storage, so each pid must be used
    from a single thread (which is how the table drives operations).
    """

    def __init__(self, m: int, universe: int):
        if m < 2:
            raise ValueError("need at least two cells")
        if universe < 1:
            raise ValueError("universe must be positive")
        if universe > self.max_universe():
            raise ValueError(
                f"universe {universe} exceeds max_universe() = {self.max_universe()}: "
                "packed cell plus version tag must fit one 64-bit word"
            )
        self.m = m
        self.universe = universe
        self._key_bits = (universe + 1).bit_length()  # code 0 is the empty slot
        self._shift_next = 2
        self._shift_val = self._key_bits + 2
        self._shift_ver = 2 * self._key_bits + 2
        self._words: List[int] = [0] * m  # all-empty, mark S, version 0
        self._locks = [threading.Lock() for _ in range(m)]
        self._tls = threading.local()

    @staticmethod
    def max_universe() -> int:
        key_bits = (_WORD_BITS - _VERSION_BITS - 2) // 2
        return (1 << key_bits) - 1

    def _pack(self, cell: CellContent, version: int) -> int:
        v = 0 if cell.val is None else cell.val + 1
        n = 0 if cell.next is None else cell.next + 1
        return (
            (version << self._shift_ver)
            | (v << self._shift_val)
            | (n << self._shift_next)
            | _MARK_CODE[cell.mark]
        )

    def _unpack(self, word: int) -> CellContent:
        v = (word >> self._shift_val) & ((1 << self._key_bits) - 1)
        n = (word >> self._shift_next) & ((1 << self._key_bits) - 1)
        return CellContent(v - 1 if v else None, n - 1 if n else None, _MARK_FROM[word & 3])

    def _link_map(self, pid) -> Dict[int, int]:
        maps = getattr(self._tls, "maps", None)
        if maps is None:
            maps = {}
            self._tls.maps = maps
        m = maps.get(pid)
        if m is None:
            m = {}
            maps[pid] = m
        return m

    def register(self, pid) -> None:
        self._link_map(pid)

    def ll(self, pid, i: int) -> CellContent:
        word = self._words[i]  # single atomic load
        self._link_map(pid)[i] = word >> self._shift_ver
        return self._unpack(word)

    def vl(self, pid, i: int) -> bool:
        linked = self._link_map(pid).get(i)
        if linked is None:
            raise LinkError(f"vl({pid!r}, {i}) without a live link")
        return linked == self._words[i] >> self._shift_ver

    def sc(self, pid, i: int, new: CellContent) -> bool:
        linked = self._link_map(pid).pop(i, None)
        if linked is None:
            raise LinkError(f"sc({pid!r}, {i}) without a live link")
        with self._locks[i]:
            word = self._words[i]
            version = word >> self._shift_ver
            if version != linked:
                return False
            self._words[i] = self._pack(new, (version + 1) & _VERSION_MASK)
            return True

    def snapshot(self) -> List[CellContent]:
        """Logical contents; consistent only at external quiescence."""
        return [self._unpack(w) for w in self._words]
