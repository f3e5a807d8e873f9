"""Invocation/response histories and the brute-force linearizability check.

A history is a list of events, each either ``("inv", proc, op_id, kind,
key)`` or ``("ret", proc, op_id, value)``. The checker searches every
linearization respecting the real-time order of non-overlapping operations;
pending operations may be assigned an output and included, or left out.
Exhaustive search with memoized (chosen-set, abstract-state) pruning is
plenty at desk scale.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple

from .cells import Key
from .oracle import seq_apply

Event = tuple


@dataclass(frozen=True)
class OpRecord:
    proc: int
    op_id: object
    kind: str
    key: Key
    inv: int
    ret: Optional[int]  # event index of the response, None while pending
    out: Optional[bool]


class MalformedHistory(ValueError):
    pass


def parse_history(events: Sequence[Event]) -> List[OpRecord]:
    open_by_proc: Dict[int, tuple] = {}
    ops: Dict[object, OpRecord] = {}
    for idx, ev in enumerate(events):
        tag = ev[0]
        if tag == "inv":
            _, proc, op_id, kind, key = ev
            if proc in open_by_proc:
                raise MalformedHistory(f"process {proc} invoked twice without response")
            if op_id in ops:
                raise MalformedHistory(f"duplicate operation id {op_id}")
            open_by_proc[proc] = (op_id, kind, key, idx)
            ops[op_id] = OpRecord(proc, op_id, kind, key, idx, None, None)
        elif tag == "ret":
            _, proc, op_id, value = ev
            pending = open_by_proc.pop(proc, None)
            if pending is None or pending[0] != op_id:
                raise MalformedHistory(f"response without matching invocation: {ev}")
            rec = ops[op_id]
            ops[op_id] = OpRecord(rec.proc, rec.op_id, rec.kind, rec.key,
                                  rec.inv, idx, bool(value))
        else:
            raise MalformedHistory(f"unknown event {ev}")
    return list(ops.values())


def linearizable(events: Sequence[Event],
                 spec: Callable = seq_apply,
                 initial: FrozenSet[Key] = frozenset()) -> bool:
    ops = parse_history(events)
    if not ops:
        return True
    completed = frozenset(o.op_id for o in ops if o.ret is not None)
    # precedes[i] = ids that must be linearized before op i may be chosen
    precedes = {
        o.op_id: frozenset(p.op_id for p in ops
                           if p.ret is not None and p.ret < o.inv)
        for o in ops
    }
    by_id = {o.op_id: o for o in ops}
    seen = set()

    def search(done: FrozenSet, state: FrozenSet[Key]) -> bool:
        if completed <= done:
            return True
        key = (done, state)
        if key in seen:
            return False
        seen.add(key)
        for op_id, op in by_id.items():
            if op_id in done or not precedes[op_id] <= done:
                continue
            new_state, out = spec(state, (op.kind, op.key))
            if op.ret is not None and out != op.out:
                continue  # output for a completed op must match
            if search(done | {op_id}, new_state):
                return True
        return False

    return search(frozenset(), initial)
