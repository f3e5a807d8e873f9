"""Brute-force verification of the cell-width lower-bound machinery.

At tiny scales we can enumerate every dictionary state and check, by
exhaustion, the facts the impossibility argument rests on: natural
assignments admit an element whose membership no single cell can decide
(and, when capacity matches the cell count, whose cells are non-constant on
both sides); age-rule placement is exactly the class of linear assignments;
and any non-linear priority scheme leaves some two-cell window ambiguous.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple

from .cells import Key
from .priority import HashConfig

SCALE_U = 8
SCALE_M = 6

State = FrozenSet[Key]
Layout = Tuple[Optional[Key], ...]


class ScaleError(ValueError):
    """Instance too large for exhaustive checking."""


def _guard(u: int, m: int) -> None:
    if u > SCALE_U or m > SCALE_M:
        raise ScaleError(f"brute force is limited to u <= {SCALE_U}, m <= {SCALE_M}")


def enumerate_states(u: int, n: int) -> List[State]:
    """All subsets of [0, u) with at most n elements."""
    if u > SCALE_U:
        raise ScaleError(f"brute force is limited to u <= {SCALE_U}")
    if n > u:
        raise ValueError("max size cannot exceed the universe")
    states: List[State] = []
    for k in range(n + 1):
        states.extend(frozenset(c) for c in itertools.combinations(range(u), k))
    return states


class PriorityScheme:
    """A hash function plus an arbitrary total order per cell (empty loses)."""

    def __init__(self, name: str, m: int, hash_table: Sequence[int],
                 gt: Callable[[Key, Key, int], bool]):
        self.name = name
        self.m = m
        self.hash_table = list(hash_table)
        self._gt = gt

    def h(self, key: Key) -> int:
        return self.hash_table[key]

    def greater(self, x: Optional[Key], y: Optional[Key], i: int) -> bool:
        if x is None:
            return False
        if y is None:
            return True
        return self._gt(x, y, i)

    @classmethod
    def age_rule(cls, m: int, hash_table: Sequence[int]) -> "PriorityScheme":
        table = list(hash_table)

        def gt(x: Key, y: Key, i: int) -> bool:
            rx = (i - table[x]) % m
            ry = (i - table[y]) % m
            return rx > ry or (rx == ry and x > y)

        return cls("agerule", m, table, gt)

    @classmethod
    def key_order(cls, m: int, hash_table: Sequence[int]) -> "PriorityScheme":
        """Priority by key value alone, ignoring probe distance."""
        return cls("keyorder", m, hash_table, lambda x, y, i: x > y)


def _scheme_layout(scheme: PriorityScheme, state: State) -> Layout:
    vals: List[Optional[Key]] = [None] * scheme.m
    for v in sorted(state):
        cur = v
        i = scheme.h(cur)
        for _ in range(scheme.m):
            occupant = vals[i]
            if occupant is None:
                vals[i] = cur
                break
            if scheme.greater(cur, occupant, i):
                vals[i], cur = cur, occupant
            i = (i + 1) % scheme.m
        else:
            raise ScaleError("state does not fit the table")
    return tuple(vals)


@dataclass
class Assignment:
    """A total map from dictionary states to fixed memory layouts."""

    name: str
    u: int
    m: int
    n: int
    table: Dict[State, Layout]

    @property
    def states(self) -> List[State]:
        return list(self.table)

    def layout(self, q: State) -> Layout:
        return self.table[q]


def scheme_assignment(scheme: PriorityScheme, u: int, n: int) -> Assignment:
    _guard(u, scheme.m)
    if n > scheme.m:
        raise ValueError("states larger than the table cannot be laid out")
    states = enumerate_states(u, n)
    return Assignment(scheme.name, u, scheme.m, n,
                      {q: _scheme_layout(scheme, q) for q in states})


def robinhood_assignment(u: int, m: int, n: int,
                         hash_table: Optional[Sequence[int]] = None,
                         seed: int = 0) -> Assignment:
    if hash_table is None:
        hcfg = HashConfig.seeded(m, u, seed)
        hash_table = [hcfg.h(k) for k in range(u)]
    return scheme_assignment(PriorityScheme.age_rule(m, hash_table), u, n)


def bitmap_assignment(u: int, n: int) -> Assignment:
    """One cell per element: cell k holds k when k is in the set.

    The degenerate m = u design that trivially evades the lower bound.
    """
    _guard(u, u)
    states = enumerate_states(u, n)
    table = {q: tuple(k if k in q else None for k in range(u)) for q in states}
    return Assignment("bitmap", u, u, n, table)


def is_natural(assign: Assignment) -> bool:
    """Cells hold only current members (or nothing) and no member is missing."""
    for q, layout in assign.table.items():
        stored = set()
        for v in layout:
            if v is None:
                continue
            if v not in q:
                return False
            stored.add(v)
        if not q <= stored:
            return False
    return True


def property1_witnesses(assign: Assignment) -> List[Key]:
    """Elements whose membership no single cell can decide: for every cell
    some member-state and some non-member-state store the same value there."""
    witnesses = []
    for v in range(assign.u):
        ok = True
        for cell in range(assign.m):
            with_v = {lay[cell] for q, lay in assign.table.items() if v in q}
            without = {lay[cell] for q, lay in assign.table.items() if v not in q}
            if not with_v & without:
                ok = False
                break
        if ok:
            witnesses.append(v)
    return witnesses


def check_property1(assign: Assignment) -> Optional[Key]:
    witnesses = property1_witnesses(assign)
    return witnesses[0] if witnesses else None


def property2_witnesses(assign: Assignment) -> List[Key]:
    """Elements for which every cell varies among member states and also
    among non-member states, so a validated read can always be spoiled."""
    witnesses = []
    for v in range(assign.u):
        ok = True
        for cell in range(assign.m):
            with_v = {lay[cell] for q, lay in assign.table.items() if v in q}
            without = {lay[cell] for q, lay in assign.table.items() if v not in q}
            if len(with_v) < 2 or len(without) < 2:
                ok = False
                break
        if ok:
            witnesses.append(v)
    return witnesses


def check_property2(assign: Assignment) -> Optional[Key]:
    witnesses = property2_witnesses(assign)
    return witnesses[0] if witnesses else None


def _positions(layout: Layout) -> Dict[Key, int]:
    return {v: i for i, v in enumerate(layout) if v is not None}


def check_linear(assign: Assignment) -> Tuple[bool, Optional[Tuple[State, Key, Key]]]:
    """An assignment is linear when inserting any element moves every
    existing element forward by at most one cell. Returns a counterexample
    (state, inserted, moved) when it is not."""
    m = assign.m
    for q, layout in assign.table.items():
        if len(q) + 1 > assign.n or len(q) + 1 > m - 1:
            continue
        pos_before = _positions(layout)
        for v in range(assign.u):
            if v in q:
                continue
            bigger = assign.table.get(q | {v})
            if bigger is None:
                continue
            pos_after = _positions(bigger)
            for w in q:
                delta = (pos_after[w] - pos_before[w]) % m
                if delta > 1:
                    return False, (q, v, w)
    return True, None


def two_cell_ambiguity(assign: Assignment, v: Key) -> Optional[State]:
    """A state without v whose every adjacent cell pair also occurs, with
    identical contents, in some state containing v. Such a state defeats any
    lookup that decides absence from a one-cell lookahead window."""
    m = assign.m
    with_v = [lay for q, lay in assign.table.items() if v in q]
    for q, layout in assign.table.items():
        if v in q:
            continue
        ambiguous = True
        for i in range(m):
            pair = (layout[i], layout[(i + 1) % m])
            if not any((lay[i], lay[(i + 1) % m]) == pair for lay in with_v):
                ambiguous = False
                break
        if ambiguous:
            return q
    return None


def counting_bound_holds(u: int, m: int, n: int, k: int, t: int) -> bool:
    """Arithmetic core of the metadata variant: with m < u/t cells and
    k metadata bits, t below the partition-counting threshold forces a
    membership-ambiguous element to exist."""
    if m >= u / t:
        return False
    threshold = sum(comb(t + 1, j) for j in range(min(t + 1, n) + 1)) / (1 << k)
    return t < threshold - 2


def verdict(u: int, m: int, n: int, scheme: PriorityScheme) -> dict:
    assign = scheme_assignment(scheme, u, n)
    p1 = property1_witnesses(assign)
    p2 = property2_witnesses(assign)
    linear, counterexample = check_linear(assign)
    ambiguity = {}
    for v in range(u):
        q = two_cell_ambiguity(assign, v)
        if q is not None:
            ambiguity[v] = sorted(q)
    return {
        "scheme": scheme.name,
        "u": u, "m": m, "n": n,
        "natural": is_natural(assign),
        "property1_witnesses": p1,
        "property2_witnesses": p2,
        "property1_implies_property2": all(v in p2 for v in p1),
        "linear": linear,
        "linearity_counterexample":
            None if counterexample is None else
            {"state": sorted(counterexample[0]), "inserted": counterexample[1],
             "moved": counterexample[2]},
        "two_cell_ambiguous_elements": ambiguity,
    }
