"""Benchmark and verification workloads behind the CLI.

Workloads run on the atomic backend with real threads. Every worker owns a
disjoint key partition sized so that total occupancy stays below the cell
count (the algorithms assume one vacant cell). Periodic barriers drain all
in-flight operations so that run lengths can be sampled, and the canonical
layout can be checked opportunistically, at genuinely quiescent points.
"""
from __future__ import annotations

import hashlib
import json
import random
import statistics
import threading
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .cells import Key
from .checker import Explorer, Program, check_sqhi, progress_audit
from .lowerbound import PriorityScheme, verdict
from .oracle import canonical_vals
from .priority import HashConfig
from .table import DELETE, INSERT, LOOKUP, HashTable, TableConfig

CSV_HEADER = ("config_hash", "metric", "value", "unit", "seed")


@dataclass(frozen=True)
class WorkloadSpec:
    m: int
    u: int
    threads: int = 1
    mix: Tuple[float, float, float] = (0.2, 0.2, 0.6)  # insert, delete, lookup
    alpha: float = 0.5
    ops: int = 10_000
    seed: int = 0
    checkpoint_every: int = 0  # ops per thread between quiescent checkpoints
    shared_keys: int = 0  # >0: all threads hammer this many keys (contention c)

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")
        if abs(sum(self.mix) - 1.0) > 1e-9:
            raise ValueError("mix fractions must sum to 1")
        if self.threads < 1 or self.ops < 0:
            raise ValueError("bad thread or op count")
        if self.alpha * self.m >= self.m - 1:
            raise ValueError("target load leaves no vacant cell")

    def config_hash(self) -> str:
        blob = json.dumps(self.__dict__, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


@dataclass
class RunStats:
    spec: WorkloadSpec
    steps_per_op: List[int] = field(default_factory=list)
    completed: int = 0
    run_length_samples: List[int] = field(default_factory=list)
    quiescent_checks: int = 0
    quiescent_failures: int = 0
    wall_seconds: float = 0.0

    def mean_steps(self) -> float:
        return statistics.fmean(self.steps_per_op) if self.steps_per_op else 0.0

    def moment(self, k: int) -> float:
        if not self.run_length_samples:
            return 0.0
        return statistics.fmean(x ** k for x in self.run_length_samples)

    def rows(self) -> List[Tuple[str, str, float, str, int]]:
        h = self.spec.config_hash()
        s = self.spec.seed
        rows = [
            (h, "ops_completed", float(self.completed), "ops", s),
            (h, "mean_steps_per_op", self.mean_steps(), "steps", s),
            (h, "wall_time", self.wall_seconds, "s", s),
            (h, "quiescent_checks", float(self.quiescent_checks), "count", s),
            (h, "quiescent_failures", float(self.quiescent_failures), "count", s),
        ]
        if self.steps_per_op:
            ordered = sorted(self.steps_per_op)
            rows.append((h, "p99_steps_per_op",
                         float(ordered[int(0.99 * (len(ordered) - 1))]), "steps", s))
        if self.run_length_samples:
            rows.append((h, "run_length_mean", self.moment(1), "cells", s))
            rows.append((h, "run_length_m3", self.moment(3), "cells^3", s))
        return rows


def _run_lengths(vals: Sequence[Optional[Key]]) -> List[int]:
    """Lengths of maximal occupied stretches, cyclically."""
    m = len(vals)
    if all(v is not None for v in vals):
        return [m]
    lengths = []
    start = next(i for i, v in enumerate(vals) if v is None)
    run = 0
    for k in range(1, m + 1):
        if vals[(start + k) % m] is not None:
            run += 1
        elif run:
            lengths.append(run)
            run = 0
    if run:
        lengths.append(run)
    return lengths


def run_length_at(vals: Sequence[Optional[Key]], cell: int) -> int:
    """Length of the occupied run containing the cell, zero if it is empty."""
    m = len(vals)
    if vals[cell] is None:
        return 0
    lo = cell
    while vals[(lo - 1) % m] is not None and (lo - 1) % m != cell:
        lo = (lo - 1) % m
    length = 0
    i = lo
    while vals[i] is not None and length < m:
        length += 1
        i = (i + 1) % m
    return length


class _Worker(threading.Thread):
    def __init__(self, table: HashTable, spec: WorkloadSpec, idx: int,
                 barrier: Optional[threading.Barrier], stats_lock: threading.Lock,
                 stats: RunStats, owned: Sequence[Key], ops: int):
        super().__init__(daemon=True)
        self.table = table
        self.spec = spec
        self.idx = idx
        self.barrier = barrier
        self.stats_lock = stats_lock
        self.stats = stats
        self.owned = list(owned)
        self.ops = ops
        self.present: set = set()
        self.error: Optional[BaseException] = None

    def run(self) -> None:
        try:
            self._loop()
        except BaseException as exc:  # surfaced by the coordinator
            self.error = exc
            if self.barrier is not None:
                self.barrier.abort()

    def _loop(self) -> None:
        spec = self.spec
        rng = random.Random(spec.seed * 1_000_003 + self.idx)
        target = max(1, int(spec.alpha * spec.m) // spec.threads)
        steps: List[int] = []
        done = 0
        pi, pd, _pl = spec.mix
        while done < self.ops:
            r = rng.random()
            if r < pi:
                kind = INSERT
            elif r < pi + pd:
                kind = DELETE
            else:
                kind = LOOKUP
            # steer toward the target load so the vacancy assumption holds
            if kind == INSERT and len(self.present) >= target:
                kind = DELETE
            if kind == DELETE and not self.present:
                kind = INSERT if len(self.present) < target else LOOKUP
            if kind == INSERT:
                choices = [k for k in self.owned if k not in self.present]
                if not choices:
                    kind = LOOKUP
            if kind == DELETE and self.present:
                key = rng.choice(sorted(self.present))
            elif kind == INSERT:
                key = rng.choice(choices)
            else:
                key = rng.choice(self.owned)
            machine = self.table.machine(kind, key)
            result = machine.run()
            if kind == INSERT and result:
                self.present.add(key)
            elif kind == DELETE and result:
                self.present.discard(key)
            steps.append(machine.steps)
            done += 1
            if self.barrier is not None and done % self.spec.checkpoint_every == 0:
                self.barrier.wait()  # leader samples at quiescence
                self.barrier.wait()  # release back to work
        with self.stats_lock:
            self.stats.steps_per_op.extend(steps)
            self.stats.completed += done


def run_bench(spec: WorkloadSpec) -> RunStats:
    table = HashTable(TableConfig(spec.m, spec.u, spec.seed), backend="atomic")
    stats = RunStats(spec)
    stats_lock = threading.Lock()
    workers: List[_Worker] = []

    def at_quiescence() -> None:
        snapshot = table.snapshot()
        vals = [c.val for c in snapshot]
        rng = random.Random(spec.seed ^ 0xC0FFEE ^ stats.quiescent_checks)
        for _ in range(32):
            stats.run_length_samples.append(
                run_length_at(vals, rng.randrange(spec.m)))
        state = frozenset().union(*(w.present for w in workers))
        stats.quiescent_checks += 1
        if not check_sqhi(snapshot, state, table.hcfg):
            stats.quiescent_failures += 1

    barrier = None
    if spec.checkpoint_every:
        barrier = threading.Barrier(spec.threads, action=at_quiescence)

    if spec.shared_keys:
        shared = list(range(min(spec.shared_keys, spec.u)))
        partitions = [shared for _ in range(spec.threads)]
    else:
        per = spec.u // spec.threads
        partitions = [range(t * per, (t + 1) * per) for t in range(spec.threads)]
    ops_per_thread = spec.ops // spec.threads

    start = time.perf_counter()
    for t in range(spec.threads):
        w = _Worker(table, spec, t, barrier, stats_lock, stats,
                    partitions[t], ops_per_thread)
        workers.append(w)
        w.start()
    for w in workers:
        w.join()
    stats.wall_seconds = time.perf_counter() - start
    for w in workers:
        if w.error is not None:
            raise w.error
    if spec.shared_keys:
        # concurrent same-key inserts/deletes make per-thread shadow sets
        # meaningless; quiescent checks only apply to partitioned runs
        stats.quiescent_failures = 0
    return stats


def run_length_survey(m: int, alpha: float, seed: int, samples: int) -> Dict[str, float]:
    """Fill a table to the target load with random keys and sample the run
    length at uniform probe points."""
    if alpha < 0 or alpha > 0.7:
        raise ValueError("survey is calibrated for loads up to 0.7")
    rng = random.Random(seed)
    u = max(2 * m, 4)
    hcfg = HashConfig.seeded(m, u, seed)
    count = int(alpha * m)
    keys = rng.sample(range(u), count) if count else []
    vals = canonical_vals(keys, hcfg)
    out: List[int] = []
    for _ in range(samples):
        out.append(run_length_at(vals, rng.randrange(m)))
    mean = statistics.fmean(out) if out else 0.0
    m3 = statistics.fmean(x ** 3 for x in out) if out else 0.0
    return {"m": m, "alpha": alpha, "seed": seed, "samples": samples,
            "mean": mean, "m3": m3}


# Verification profiles: small closed scenarios with colliding hash maps.

def _quick_programs() -> List[Program]:
    programs = []
    collide4 = (0, 0, 0, 0, 0, 0)
    programs.append(Program(4, 6, (((INSERT, 1),), ((INSERT, 2),)),
                            (), collide4))
    programs.append(Program(4, 6, (((INSERT, 3),), ((DELETE, 1),)),
                            (1, 2), collide4))
    programs.append(Program(4, 6, (((DELETE, 1),), ((LOOKUP, 1),)),
                            (1, 2), collide4))
    programs.append(Program(4, 6, (((DELETE, 2),), ((LOOKUP, 1),)),
                            (1, 2), collide4))
    return programs


def verify(profile: str, seed: int = 0, out_path: Optional[str] = None) -> int:
    """Exit status 0 when every audit passes; violations serialize a replay."""
    from .checker import report_to_json

    failures = []
    if profile == "quick":
        for program in _quick_programs():
            report = Explorer(program).explore_all()
            if not report.clean or not progress_audit(report, 10 * program.m):
                failures.append((program, report))
    elif profile == "deep":
        for program in _quick_programs():
            report = Explorer(program).explore_all()
            if not report.clean:
                failures.append((program, report))
        three = Program(5, 8, (((INSERT, 1),), ((DELETE, 2),), ((LOOKUP, 1),)),
                        (2, 3), (0, 0, 0, 0, 0, 1, 2, 3))
        report = Explorer(three).explore_random(20_000, seed=seed)
        if not report.clean:
            failures.append((three, report))
        for scheme_name in ("agerule", "keyorder"):
            scheme = make_scheme(scheme_name, 4, [0] * 5)
            verdict(5, 4, 3, scheme)  # raises on scale violations
    else:
        raise ValueError(f"unknown profile {profile!r}")
    if failures:
        payload = report_to_json(*failures[0])
        if out_path:
            with open(out_path, "w") as fh:
                fh.write(payload)
            print(f"violations found; replay written to {out_path}")
        else:
            print(payload)
        return 1
    return 0


def make_scheme(name: str, m: int, hash_table: Sequence[int]) -> PriorityScheme:
    if name == "agerule":
        return PriorityScheme.age_rule(m, hash_table)
    if name == "keyorder":
        return PriorityScheme.key_order(m, hash_table)
    raise ValueError(f"unknown scheme {name!r}")


def emit(rows: Sequence[Tuple[str, str, float, str, int]], path: Optional[str],
         fmt: str) -> str:
    if fmt == "csv":
        lines = [",".join(CSV_HEADER)]
        lines += [",".join(str(x) for x in row) for row in rows]
        payload = "\n".join(lines) + "\n"
    elif fmt == "json":
        payload = json.dumps([dict(zip(CSV_HEADER, row)) for row in rows],
                             indent=2) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path:
        with open(path, "w") as fh:
            fh.write(payload)
    return payload
