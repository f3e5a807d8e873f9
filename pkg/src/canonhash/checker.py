"""Verification harness: schedule exploration and per-step auditing.

Everything here runs on the simulated backend, driven by one scheduler. A
run owns fresh memory, one step machine per process, and a ghost state that
attributes every unstable cell to the operation that made it unstable,
tracks each operation's propagation frontier, and maintains the logical set
implied by the order of successful publish writes. The ghost never
influences the algorithm; it only feeds the audits.

Audits run after every step (memory can change only on a successful SC, so
that is when the structural checks actually execute):

* ordering audit: every value and lookahead slot respects the cyclic
  priorities (``check_ordering_invariant``);
* structure audit: stable cells agree with their successor; locked cells
  follow the insert/delete shapes, including the duplication and hole shapes
  that need ghost attribution (``check_stable_unstable``);
* single propagation: no operation crosses the same cell twice;
* quiescence audit: whenever no insert/delete is pending, memory equals the
  canonical layout of the ghost set (``check_sqhi``);
* restart audit: a lookup restarts only if some operation propagated across
  the cell it had just read.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from .cells import CellContent, Key, Mark
from .history import linearizable
from .memory import SimulatedMemory
from .oracle import canonical, seq_apply
from .priority import HashConfig
from .table import (ADVANCE, ADVANCE_END, DELETE, INSERT, LOOKUP,
                    PUBLISH_DELETE, PUBLISH_INSERT, StepMachine)

S = Mark.STABLE
I = Mark.INSERTING
D = Mark.DELETING


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str
    cell: Optional[int] = None
    clause: Optional[str] = None
    schedule: Tuple[int, ...] = ()

    def to_json(self) -> dict:
        return {"kind": self.kind, "detail": self.detail, "cell": self.cell,
                "clause": self.clause, "schedule": list(self.schedule)}


def check_ordering_invariant(snapshot: Sequence[CellContent],
                             hcfg: HashConfig) -> Optional[Violation]:
    """Priority order over value slots and both lookahead clauses."""
    m = hcfg.m
    ge = hcfg.greater_eq
    h = hcfg.h
    for i, cell in enumerate(snapshot):
        v = cell.val
        if v is not None:
            j = h(v)
            while j != i:
                if not ge(snapshot[j].val, v, j):
                    return Violation(
                        "ordering", cell=j, clause="a",
                        detail=f"cell {j} holds {snapshot[j].val}, outranked by "
                               f"{v} stored at cell {i}")
                j = (j + 1) % m
    for i, cell in enumerate(snapshot):
        nxt = (i + 1) % m
        b = cell.next
        hashes_next = b is not None and h(b) == nxt
        if not (ge(b, snapshot[nxt].val, nxt) or hashes_next):
            return Violation(
                "ordering", cell=i, clause="b",
                detail=f"lookahead {b} of cell {i} loses to next value "
                       f"{snapshot[nxt].val}")
        if not (ge(cell.val, b, i)
                or (hashes_next and ge(b, snapshot[nxt].val, nxt))):
            return Violation(
                "ordering", cell=i, clause="c",
                detail=f"value {cell.val} of cell {i} loses to its own "
                       f"lookahead {b}")
    return None


def check_stable_unstable(snapshot: Sequence[CellContent], hcfg: HashConfig,
                          ghost: Optional["GhostState"] = None) -> Optional[Violation]:
    """Stable/locked cell shapes. Ghost attribution enables the d/e clauses."""
    m = hcfg.m
    h = hcfg.h
    for i, cell in enumerate(snapshot):
        nxt = (i + 1) % m
        succ = snapshot[nxt]
        if cell.mark != D and cell.val == cell.next and cell.val is not None:
            return Violation("structure", cell=i, clause="a",
                             detail=f"non-delete cell {i} duplicates {cell.val}")
        if cell.mark == S and cell.next != succ.val:
            return Violation(
                "structure", cell=i, clause="b",
                detail=f"stable cell {i} lookahead {cell.next} != next value "
                       f"{succ.val}")
        if cell.mark != S:
            if cell.next is None:
                return Violation("structure", cell=i, clause="c",
                                 detail=f"locked cell {i} has empty lookahead")
            if cell.val is None and h(cell.next) != nxt:
                return Violation(
                    "structure", cell=i, clause="c",
                    detail=f"locked cell {i} is empty but {cell.next} does not "
                           f"hash to cell {nxt}")
        if ghost is None:
            continue
        op = ghost.tags.get(i)
        if cell.mark == D:
            if nxt in ghost.propagated.get(op, ()):  # crossed into nxt already
                if not hcfg.greater(cell.next, succ.val, nxt):
                    return Violation(
                        "structure", cell=i, clause="d",
                        detail=f"deleting cell {i}: lookahead {cell.next} does "
                               f"not outrank next value {succ.val}")
                same_op = succ.mark == D and ghost.tags.get(nxt) == op
                if same_op and succ.val is None:
                    return Violation(
                        "structure", cell=i, clause="d",
                        detail=f"cell {nxt} carries the same delete but is empty")
                if not same_op and succ.val is not None:
                    return Violation(
                        "structure", cell=i, clause="d",
                        detail=f"delete crossed cell {nxt} yet its value "
                               f"{succ.val} was not cleared")
            elif cell.next != succ.val:
                return Violation(
                    "structure", cell=i, clause="d",
                    detail=f"deleting cell {i} not yet propagated but lookahead "
                           f"{cell.next} != next value {succ.val}")
        if cell.mark == I:
            crossed = nxt in ghost.propagated.get(op, ())
            if crossed and cell.next != succ.val:
                return Violation(
                    "structure", cell=i, clause="e",
                    detail=f"insert crossed cell {nxt} but lookahead "
                           f"{cell.next} != its value {succ.val}")
            if not crossed and cell.next == succ.val:
                return Violation(
                    "structure", cell=i, clause="e",
                    detail=f"insert at cell {i} looks propagated into {nxt} "
                           f"without a recorded crossing")
    return None


def check_sqhi(snapshot: Sequence[CellContent], state: FrozenSet[Key],
               hcfg: HashConfig) -> bool:
    """Memory equals the canonical layout of the logical state: every cell
    stable, values canonically placed, each lookahead a copy of its
    successor's value."""
    rep = canonical(state, hcfg)
    return tuple(snapshot) == rep.cells()


OpId = Tuple[int, int]  # (process, index in that process's op list)


class GhostState:
    """Simulator-side attribution, invisible to the algorithm."""

    def __init__(self, initial: FrozenSet[Key]):
        self.tags: Dict[int, OpId] = {}
        self.propagated: Dict[OpId, Set[int]] = {}
        self.state: Set[Key] = set(initial)
        self.publish_order: List[Tuple[OpId, str, Key]] = []
        self.prop_events: List[Tuple[int, OpId, int, int]] = []  # step, op, src, dst

    def on_write(self, step_idx: int, op_id: OpId, cell: int,
                 new: CellContent, label: str, m: int) -> Optional[Violation]:
        prev_cell = (cell - 1) % m
        if label == PUBLISH_INSERT:
            self.tags[cell] = op_id
            self.propagated[op_id] = set()
            self.state.add(new.next)
            self.publish_order.append((op_id, INSERT, new.next))
        elif label == PUBLISH_DELETE:
            self.tags[cell] = op_id
            self.propagated[op_id] = set()
            self.state.discard(new.next)
            self.publish_order.append((op_id, DELETE, new.next))
        elif label in (ADVANCE, ADVANCE_END):
            owner = self.tags.get(prev_cell)
            if owner is None:
                return Violation("ghost", cell=cell,
                                 detail=f"propagation into cell {cell} from an "
                                        f"unattributed cell {prev_cell}")
            crossed = self.propagated.setdefault(owner, set())
            if cell in crossed:
                return Violation(
                    "single-propagation", cell=cell,
                    detail=f"operation {owner} propagated into cell {cell} twice")
            crossed.add(cell)
            self.prop_events.append((step_idx, owner, prev_cell, cell))
            if new.mark == S:
                self.tags.pop(cell, None)
            else:
                self.tags[cell] = owner
        else:  # stabilize / unlock-prev always write a stable cell
            self.tags.pop(cell, None)
        return None


@dataclass(frozen=True)
class Program:
    """A closed desk-scale scenario: table shape plus one op list per process."""

    m: int
    u: int
    ops: Tuple[Tuple[Tuple[str, Key], ...], ...]
    initial: Tuple[Key, ...] = ()
    hash_table: Optional[Tuple[int, ...]] = None  # explicit key -> cell map
    seed: int = 0

    def hash_config(self) -> HashConfig:
        if self.hash_table is not None:
            return HashConfig.explicit(self.m, self.hash_table)
        return HashConfig.seeded(self.m, self.u, self.seed)

    def to_json(self) -> dict:
        return {"m": self.m, "u": self.u, "ops": [list(map(list, p)) for p in self.ops],
                "initial": list(self.initial),
                "hash_table": list(self.hash_table) if self.hash_table else None,
                "seed": self.seed}


def two_proc(m: int, u: int, hash_table: Sequence[int], initial: Sequence[Key],
             op0: Tuple[str, Key], op1: Tuple[str, Key]) -> Program:
    return Program(m, u, ((op0,), (op1,)), tuple(initial), tuple(hash_table))


class ScheduleError(ValueError):
    pass


@dataclass
class RunResult:
    schedule: Tuple[int, ...]
    events: Tuple[tuple, ...]
    violations: List[Violation]
    steps: int
    snapshot: Tuple[CellContent, ...]
    final_state: FrozenSet[Key]
    completed: bool
    max_completion_gap: int
    restarts: int
    linearizable: Optional[bool] = None

    def to_json(self) -> dict:
        return {"schedule": list(self.schedule),
                "events": [list(e) for e in self.events],
                "violations": [v.to_json() for v in self.violations],
                "steps": self.steps,
                "snapshot": [c.to_json() for c in self.snapshot],
                "linearizable": self.linearizable}


class _Run:
    """One live execution of a program under construction."""

    def __init__(self, explorer: "Explorer", machine_cls):
        program = explorer.program
        self.explorer = explorer
        self.hcfg = explorer.hcfg
        self.mem = SimulatedMemory(
            program.m, canonical(set(program.initial), self.hcfg).cells())
        self.machines: List[Optional[StepMachine]] = [None] * len(program.ops)
        self.next_op = [0] * len(program.ops)
        self.machine_ids: List[Optional[OpId]] = [None] * len(program.ops)
        self.machine_cls = machine_cls
        self.events: List[tuple] = []
        self.ghost = GhostState(frozenset(program.initial))
        self.violations: List[Violation] = []
        self.steps = 0
        self.schedule: List[int] = []
        self.completions: List[int] = []
        self.last_ll: Dict[Tuple[int, int], int] = {}
        self.restarts = 0

    def live(self, p: int) -> bool:
        mach = self.machines[p]
        if mach is not None and not mach.done:
            return True
        return self.next_op[p] < len(self.explorer.program.ops[p])

    def live_procs(self) -> List[int]:
        return [p for p in range(len(self.machines)) if self.live(p)]

    def pending_set_changing(self) -> bool:
        return any(m is not None and not m.done and m.kind != LOOKUP
                   for m in self.machines)

    def step(self, p: int, audit: bool = True) -> None:
        program = self.explorer.program
        mach = self.machines[p]
        if mach is None or mach.done:
            if self.next_op[p] >= len(program.ops[p]):
                raise ScheduleError(f"process {p} has no live operation")
            kind, key = program.ops[p][self.next_op[p]]
            op_id = (p, self.next_op[p])
            self.next_op[p] += 1
            mach = self.machine_cls(kind, key, f"p{p}", self.mem, self.hcfg)
            self.machines[p] = mach
            self.machine_ids[p] = op_id
            self.events.append(("inv", p, op_id, kind, key))
        before_restarts = mach.restarts
        action, result = mach.step()
        self.steps += 1
        self.schedule.append(p)
        if action[0] == "ll":
            self.last_ll[(p, action[1])] = self.steps
        wrote = action[0] == "sc" and result
        if wrote:
            bad = self.ghost.on_write(self.steps, self.machine_ids[p], action[1],
                                      action[2], action[3], program.m)
            if bad is not None and audit:
                self.violations.append(bad)
        if mach.restarts > before_restarts and mach.kind == LOOKUP and audit:
            self._audit_restart(p, mach)
        if mach.done:
            if mach.error is not None:
                if audit:
                    self.violations.append(Violation(
                        "abort", detail=f"{mach.kind}({mach.key}) aborted: "
                                        f"{mach.error}"))
            else:
                self.events.append(("ret", p, self.machine_ids[p], mach.result))
                self.completions.append(self.steps)
            self.restarts += mach.restarts
        if audit and wrote:
            self._audit_memory()
        if audit:
            self._audit_quiescence()

    def _audit_memory(self) -> None:
        snap = tuple(self.mem.snapshot())
        cache = self.explorer._ordering_cache
        verdict = cache.get(snap)
        if verdict is None:
            verdict = check_ordering_invariant(snap, self.hcfg)
            cache[snap] = verdict
        if verdict is not None:
            self.violations.append(verdict)
        bad = check_stable_unstable(snap, self.hcfg, self.ghost)
        if bad is not None:
            self.violations.append(bad)

    def _audit_quiescence(self) -> None:
        if self.pending_set_changing():
            return
        snap = tuple(self.mem.snapshot())
        state = frozenset(self.ghost.state)
        cache = self.explorer._sqhi_cache
        key = (snap, state)
        verdict = cache.get(key)
        if verdict is None:
            verdict = check_sqhi(snap, state, self.hcfg)
            cache[key] = verdict
        if not verdict:
            self.violations.append(Violation(
                "quiescence", detail=f"quiescent memory differs from the "
                                     f"canonical layout of {sorted(state)}"))

    def _audit_restart(self, p: int, mach: StepMachine) -> None:
        # The cell read just before restarting is one behind the scan index;
        # some operation must have crossed it since this process read it.
        restart_cell = self.schedule and self.last_ll
        last_reads = [(cell, step) for (proc, cell), step in self.last_ll.items()
                      if proc == p]
        if not last_reads:
            return
        read_cell, read_step = max(last_reads, key=lambda t: t[1])
        prev_cell = (read_cell - 1) % self.explorer.program.m
        prev_read = self.last_ll.get((p, prev_cell))
        if prev_read is None:
            return
        crossed = any(src == prev_cell and prev_read <= step <= self.steps
                      for step, _op, src, _dst in self.ghost.prop_events)
        if not crossed:
            self.violations.append(Violation(
                "restart", cell=read_cell,
                detail=f"lookup by process {p} restarted at cell {read_cell} "
                       f"with no propagation across cell {prev_cell}"))

    def finish(self) -> RunResult:
        events = tuple(self.events)
        gaps: List[int] = []
        prev = 0
        for c in self.completions:
            gaps.append(c - prev)
            prev = c
        result = RunResult(
            schedule=tuple(self.schedule), events=events,
            violations=self.violations, steps=self.steps,
            snapshot=tuple(self.mem.snapshot()),
            final_state=frozenset(self.ghost.state),
            completed=not self.live_procs(),
            max_completion_gap=max(gaps, default=0),
            restarts=self.restarts)
        return result


@dataclass
class Report:
    runs: int = 0
    steps: int = 0
    violations: List[Violation] = field(default_factory=list)
    histories_checked: int = 0
    nonlinearizable: int = 0
    max_completion_gap: int = 0
    restarts: int = 0

    @property
    def clean(self) -> bool:
        return not self.violations and self.nonlinearizable == 0

    def to_json(self) -> dict:
        return {"runs": self.runs, "steps": self.steps,
                "violations": [v.to_json() for v in self.violations[:50]],
                "violation_count": len(self.violations),
                "histories_checked": self.histories_checked,
                "nonlinearizable": self.nonlinearizable,
                "max_completion_gap": self.max_completion_gap}


class Explorer:
    """Deterministic schedule exploration over one program.

    Exhaustive mode enumerates every interleaving (feasible for two
    processes at desk scale); random mode samples seeded schedules, the
    strategy used for three or more processes.
    """

    def __init__(self, program: Program, machine_cls=StepMachine,
                 max_steps: int = 2000):
        self.program = program
        self.hcfg = program.hash_config()
        self.machine_cls = machine_cls
        self.max_steps = max_steps
        self._ordering_cache: Dict[tuple, Optional[Violation]] = {}
        self._sqhi_cache: Dict[tuple, bool] = {}
        self._linz_cache: Dict[tuple, bool] = {}

    def _new_run(self) -> _Run:
        return _Run(self, self.machine_cls)

    def _finalize(self, run: _Run, report: Report) -> RunResult:
        result = run.finish()
        if result.completed:
            sig = result.events
            verdict = self._linz_cache.get(sig)
            if verdict is None:
                verdict = linearizable(result.events,
                                       initial=frozenset(self.program.initial))
                self._linz_cache[sig] = verdict
            result.linearizable = verdict
            report.histories_checked += 1
            if not verdict:
                report.nonlinearizable += 1
                report.violations.append(Violation(
                    "linearizability", schedule=result.schedule,
                    detail="history admits no valid linearization"))
        report.runs += 1
        report.steps += result.steps
        report.max_completion_gap = max(report.max_completion_gap,
                                        result.max_completion_gap)
        report.restarts += result.restarts
        for v in result.violations:
            report.violations.append(Violation(v.kind, v.detail, v.cell,
                                               v.clause, result.schedule))
        return result

    def run_schedule(self, schedule: Sequence[int], audit: bool = True) -> RunResult:
        """Scripted mode: the schedule must name live processes only."""
        report = Report()
        run = self._new_run()
        for p in schedule:
            run.step(p, audit=audit)
        while True:
            live = run.live_procs()
            if not live or run.steps >= self.max_steps:
                break
            run.step(live[0], audit=audit)
        return self._finalize(run, report)

    def run_random(self, seed: int, report: Optional[Report] = None,
                   audit: bool = True) -> RunResult:
        rng = random.Random(seed)
        run = self._new_run()
        while run.steps < self.max_steps:
            live = run.live_procs()
            if not live:
                break
            run.step(rng.choice(live), audit=audit)
        return self._finalize(run, report if report is not None else Report())

    def explore_random(self, schedules: int, seed: int = 0) -> Report:
        report = Report()
        for k in range(schedules):
            self.run_random(seed + k, report=report)
        return report

    def explore_all(self, max_depth: Optional[int] = None) -> Report:
        """Every interleaving, by depth-first replay of schedule prefixes.

        Each prefix is replayed once with auditing on its final step only;
        earlier steps were audited when their own prefix was expanded.
        """
        report = Report()
        stack: List[Tuple[int, ...]] = [()]
        while stack:
            prefix = stack.pop()
            run = self._new_run()
            last = len(prefix) - 1
            for k, p in enumerate(prefix):
                run.step(p, audit=(k == last))
            live = run.live_procs()
            capped = max_depth is not None and len(prefix) >= max_depth
            if not live or capped or run.steps >= self.max_steps:
                if live:  # depth-capped: finish deterministically, no audit
                    while run.live_procs() and run.steps < self.max_steps:
                        run.step(run.live_procs()[0], audit=False)
                self._finalize(run, report)
            else:
                for p in live:
                    stack.append(prefix + (p,))
        return report


def report_to_json(program: Program, report: Report) -> str:
    return json.dumps({"program": program.to_json(), "report": report.to_json()},
                      indent=2)


def progress_audit(report: Report, bound: int) -> bool:
    """Lock-freedom proxy: while work is pending, completions keep landing
    within the configured step bound."""
    return report.max_completion_gap <= bound
