"""The concurrent Robin Hood hash set.

Operations are written as step machines: generators that pause before every
shared-memory primitive, so that a scheduler can interleave them one LL, VL
or SC at a time. The blocking table methods are thin drivers that loop
``step()`` to completion; on the atomic backend any number of threads may do
so concurrently.

Life cycle of an operation: scan forward from the cell before the key's hash
cell; help any unstable cell on the way; publish the operation by writing
its key into a lookahead slot and locking that cell (mark I or D); then walk
forward propagating the displacement (insert) or back-shift (delete) chain
hand over hand until the end of the run. The mark is a lock owned by the
operation, not by any process, so whoever encounters a locked cell performs
the next propagation step itself.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Tuple

from .cells import EMPTY, CellContent, Key, Mark
from .memory import AtomicMemory, SimulatedMemory
from .priority import HashConfig

INSERT = "insert"
DELETE = "delete"
LOOKUP = "lookup"

# SC site labels, carried on actions so that the checker's ghost state can
# attribute writes without the algorithm ever storing operation identity in
# shared memory.
PUBLISH_INSERT = "publish-insert"
PUBLISH_DELETE = "publish-delete"
UNLOCK_PREV = "unlock-prev"
STABILIZE = "stabilize"
ADVANCE = "advance"        # moves the operation into the next cell, locking it
ADVANCE_END = "advance-end"  # final propagation step, next cell stays stable

S = Mark.STABLE
I = Mark.INSERTING
D = Mark.DELETING


class TableFullError(RuntimeError):
    """No vacant cell remains; raised only when occupancy reaches m."""


class HelpScanOverrun(RuntimeError):
    """Defensive diagnostic: the help scan lapped the table repeatedly.

    Unreachable while the table keeps one empty cell; raised rather than
    silently looping so that a violated assumption surfaces in tests.
    """


@dataclass(frozen=True)
class TableConfig:
    m: int
    universe: int
    seed: int = 0
    restart_policy: str = "full"  # cell-by-cell backtracking is out of scope

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("m must be at least 2")
        if self.universe < 1:
            raise ValueError("universe must be positive")
        if self.restart_policy != "full":
            raise ValueError("only the full restart policy is implemented")


class StepMachine:
    """One in-flight operation, advanced one shared-memory primitive at a time.

    ``step()`` executes exactly one LL, VL or SC (local computation is free)
    and returns the ``(action, result)`` pair, where an action is one of
    ``("ll", i)``, ``("vl", i)`` or ``("sc", i, content, label)``.
    """

    __slots__ = ("kind", "key", "pid", "mem", "hcfg", "steps", "restarts",
                 "done", "result", "error", "_gen", "_next_action")

    def __init__(self, kind: str, key: Key, pid, mem, hcfg: HashConfig):
        if kind not in (INSERT, DELETE, LOOKUP):
            raise ValueError(f"unknown operation kind {kind!r}")
        self.kind = kind
        self.key = key
        self.pid = pid
        self.mem = mem
        self.hcfg = hcfg
        self.steps = 0
        self.restarts = 0
        self.done = False
        self.result: Optional[bool] = None
        self.error: Optional[Exception] = None
        mem.register(pid)
        run = {INSERT: self._run_insert, DELETE: self._run_delete,
               LOOKUP: self._run_lookup}[kind]
        self._gen = run(key)
        self._next_action = next(self._gen)  # local setup up to the first primitive

    def status(self) -> str:
        if not self.done:
            return "running"
        return "aborted" if self.error is not None else "done"

    def step(self) -> Tuple[tuple, object]:
        if self.done:
            raise RuntimeError("operation already finished")
        action = self._next_action
        op = action[0]
        if op == "ll":
            result = self.mem.ll(self.pid, action[1])
        elif op == "vl":
            result = self.mem.vl(self.pid, action[1])
        else:
            result = self.mem.sc(self.pid, action[1], action[2])
        self.steps += 1
        try:
            self._next_action = self._gen.send(result)
        except StopIteration as stop:
            self.done = True
            self.result = stop.value
        except (TableFullError, HelpScanOverrun) as exc:
            self.done = True
            self.error = exc
        return action, result

    def run(self) -> bool:
        """Drive to completion; the blocking form of the operation."""
        while not self.done:
            self.step()
        if self.error is not None:
            raise self.error
        return bool(self.result)

    # The operations. Scans start one cell before the key's hash cell so
    # that an in-flight insert or delete of the same key, which is published
    # in that cell's lookahead slot, is always observed.

    def _run_insert(self, v: Key) -> Iterator[tuple]:
        h = self.hcfg.h
        gt = self.hcfg.greater
        m = self.hcfg.m
        hv = h(v)
        while True:  # full restart
            i = (hv - 1) % m
            a, b, M = yield ("ll", i)
            first = True
            restart = False
            while True:
                if a == v or (b == v and (M != D or h(b) != (i + 1) % m)):
                    return False  # already present
                if M != S:
                    yield from self._help_op(i)
                elif b is EMPTY or gt(v, b, (i + 1) % m):
                    # v belongs in cell i+1; publish it in i's lookahead.
                    if (yield ("sc", i, CellContent(a, v, I), PUBLISH_INSERT)):
                        yield from self._propagate(i, i, (I,))
                        return True
                    restart = True
                else:
                    i = (i + 1) % m
                    if not first and i == hv:
                        raise TableFullError(f"no vacant cell to insert {v}")
                    first = False
                if restart:
                    break
                a, b, M = yield ("ll", i)
                if gt(v, a, i):
                    restart = True  # lost our window; rescan from the start
                    break
            self.restarts += 1

    def _run_delete(self, v: Key) -> Iterator[tuple]:
        h = self.hcfg.h
        gt = self.hcfg.greater
        m = self.hcfg.m
        hv = h(v)
        while True:
            i = (hv - 1) % m
            a, b, M = yield ("ll", i)
            first = True
            restart = False
            while True:
                if (i == hv and gt(v, a, i)) or (
                    gt(a, v, i) and gt(v, b, (i + 1) % m)
                    and (M == S or b is EMPTY or h(b) != (i + 1) % m)
                ):
                    return False  # not in the table
                if M != S:
                    yield from self._help_op(i)
                elif a == v:
                    i = (i - 1) % m  # step back to find v in a lookahead slot
                elif b == v:
                    if (yield ("sc", i, CellContent(a, v, D), PUBLISH_DELETE)):
                        yield from self._propagate(i, i, (D,))
                        return True
                    restart = True
                else:
                    i = (i + 1) % m
                    if not first and i == hv:
                        return False  # looped through every cell
                    first = False
                if restart:
                    break
                a, b, M = yield ("ll", i)
                if i != hv and gt(v, a, i):
                    restart = True
                    break
            self.restarts += 1

    def _run_lookup(self, v: Key) -> Iterator[tuple]:
        h = self.hcfg.h
        gt = self.hcfg.greater
        m = self.hcfg.m
        hv = h(v)
        while True:
            i = (hv - 1) % m
            a, b, M = yield ("ll", i)
            first = True
            restart = False
            while True:
                if a == v or (b == v and (M != D or h(b) != (i + 1) % m)):
                    return True
                if (i == hv and gt(v, a, i)) or (
                    gt(a, v, i) and gt(v, b, (i + 1) % m)
                    and (M == S or b is EMPTY or h(b) != (i + 1) % m)
                ):
                    return False
                if M == I:
                    # An insert that cannot overtake a slow delete can split
                    # the absence certificate across two cells; check both.
                    c = (yield ("ll", (i + 1) % m))[0]
                    if (gt(b, v, i) and gt(v, c, (i + 1) % m)
                            and h(b) != (i + 1) % m and (yield ("vl", i))):
                        return False
                if M != S:
                    yield from self._help_op(i)
                i = (i + 1) % m
                if not first and i == hv:
                    return False
                first = False
                a, b, M = yield ("ll", i)
                if i != hv and gt(v, a, i):
                    restart = True
                    break
            self.restarts += 1

    def _help_op(self, i: int) -> Iterator[tuple]:
        """Advance whatever operation occupies cell i by one cell.

        Operations may not overtake one another, so if the next cell is also
        locked the scan skips ahead to the blocking operation's frontier and
        works there first.
        """
        h = self.hcfg.h
        gt = self.hcfg.greater
        m = self.hcfg.m
        is_lookup = self.kind == LOOKUP
        a, b, M1 = yield ("ll", i)
        c, d, M2 = yield ("ll", (i + 1) % m)
        if M1 == S:
            return
        scanned = 0
        while (M2 != S
               and (M1 != D or M2 != D or b == c)
               and (M1 != I or b != c)
               and (M1 != D or c is not EMPTY)):
            a, b, M1 = c, d, M2
            i = (i + 1) % m
            c, d, M2 = yield ("ll", (i + 1) % m)
            scanned += 1
            if scanned > 4 * m:
                raise HelpScanOverrun(
                    "help scan did not settle within four laps; "
                    "the table has no stable empty cell")
        if M1 == I and (yield ("vl", i)):
            x, y, M3 = yield ("ll", (i - 1) % m)
            if M3 == I and y == a and (yield ("vl", i)):
                # The previous cell still carries this insert; release it.
                yield ("sc", (i - 1) % m, CellContent(x, y, S), UNLOCK_PREV)
            if gt(c, b, (i + 1) % m) and not is_lookup:
                raise TableFullError("displaced element has no cell to move into")
            elif b == c:
                # Someone already moved the insert forward; just release i.
                yield ("sc", i, CellContent(a, b, S), STABILIZE)
            elif c is EMPTY:
                yield from self._dsc((i + 1) % m, CellContent(b, d, S),
                                     i, CellContent(a, b, S), ADVANCE_END)
            else:
                yield from self._dsc((i + 1) % m, CellContent(b, c, I),
                                     i, CellContent(a, b, S), ADVANCE)
        elif M1 == D and (yield ("vl", i)):
            x, y, M3 = yield ("ll", (i - 1) % m)
            if M3 == D and y != a and (yield ("vl", i)):
                yield ("sc", (i - 1) % m, CellContent(x, a, S), UNLOCK_PREV)
            if c is EMPTY or M2 == D:
                # Next cell already emptied or already carries the delete.
                yield ("sc", i, CellContent(a, c, S), STABILIZE)
            elif M2 == S:
                if d is not EMPTY and h(d) != (i + 2) % m:
                    # Shift d one cell back, duplicating it for the moment.
                    yield from self._dsc((i + 1) % m, CellContent(d, d, D),
                                         i, CellContent(a, d, S), ADVANCE)
                elif not is_lookup:
                    done = yield from self._dsc((i + 1) % m, CellContent(EMPTY, d, S),
                                                i, CellContent(a, EMPTY, S), ADVANCE_END)
                    if done and d is not EMPTY:
                        # Punctured the run: keep going so nothing is
                        # stranded in the second segment.
                        yield from self._propagate((i + 1) % m, (i + 2) % m, (I, D))

    def _dsc(self, i: int, tup1: CellContent, j: int, tup2: CellContent,
             label: str) -> Iterator[tuple]:
        """Write tup1 to cell i and, if that took effect, tup2 to cell j.

        A failed first write still attempts the second one when the re-read
        shows an identical val slot: some other helper completed the first
        half, and the second half must not be skipped.
        """
        if (yield ("sc", i, tup1, label)):
            yield ("sc", j, tup2, STABILIZE)
            return True
        t = yield ("ll", i)
        if t[0] == tup1[0]:
            yield ("sc", j, tup2, STABILIZE)
        return False

    def _propagate(self, guard: int, j: int, marks: Tuple[Mark, ...]) -> Iterator[tuple]:
        """Walk forward from cell j, helping matching operations along the run.

        Stops at a truly empty cell, at a stable cell whose lookahead is
        empty (the next cell ends the run), or after wrapping back to
        ``guard``. The walk re-helps a cell only while its content is
        unchanged; once it changes, someone advanced it and the walk moves on.
        """
        m = self.hcfg.m
        while True:
            cur = yield ("ll", j)
            prev = cur
            while cur == prev and cur[2] in marks:
                yield from self._help_op(j)
                prev = cur
                cur = yield ("ll", j)
            j = (j + 1) % m
            if ((cur[2] == S and cur[1] is EMPTY)
                    or (cur[0] is EMPTY and cur[1] is EMPTY)
                    or j == guard):
                return


@dataclass
class OpStats:
    steps: List[int] = field(default_factory=list)
    restarts: int = 0


class HashTable:
    """Blocking facade over the step machines.

    With the default atomic backend every method is thread safe and
    lock-free: a stalled operation never blocks others, it only leaves a
    marked cell that the next operation helps forward.
    """

    def __init__(self, config: TableConfig, backend: str = "atomic",
                 hash_config: Optional[HashConfig] = None,
                 collect_stats: bool = False):
        self.config = config
        self.hcfg = hash_config or HashConfig.seeded(config.m, config.universe,
                                                     config.seed)
        if self.hcfg.m != config.m:
            raise ValueError("hash config does not match table size")
        if backend == "atomic":
            self.mem = AtomicMemory(config.m, config.universe)
        elif backend == "simulated":
            self.mem = SimulatedMemory(config.m)
        else:
            raise ValueError(f"unknown backend {backend!r}")
        self.backend = backend
        self._stats = OpStats() if collect_stats else None

    def machine(self, kind: str, key: Key, pid=None) -> StepMachine:
        if not 0 <= key < self.config.universe:
            raise ValueError(f"key {key} outside universe [0, {self.config.universe})")
        if pid is None:
            pid = threading.get_ident() if self.backend == "atomic" else "solo"
        return StepMachine(kind, key, pid, self.mem, self.hcfg)

    def _drive(self, kind: str, key: Key) -> bool:
        machine = self.machine(kind, key)
        result = machine.run()
        if self._stats is not None:
            self._stats.steps.append(machine.steps)
            self._stats.restarts += machine.restarts
        return result

    def insert(self, key: Key) -> bool:
        return self._drive(INSERT, key)

    def delete(self, key: Key) -> bool:
        return self._drive(DELETE, key)

    def lookup(self, key: Key) -> bool:
        return self._drive(LOOKUP, key)

    @property
    def stats(self) -> OpStats:
        if self._stats is None:
            raise RuntimeError("construct the table with collect_stats=True")
        return self._stats

    def snapshot(self) -> List[CellContent]:
        return self.mem.snapshot()

    def dump_json(self) -> List[dict]:
        return [cell.to_json() for cell in self.snapshot()]
