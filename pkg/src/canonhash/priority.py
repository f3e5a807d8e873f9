"""Hash placement and Robin Hood cell priorities.

``rank(v, i)`` is the cyclic distance of cell ``i`` from v's hash cell. At
cell ``i`` the element with the larger rank wins; rank ties are broken by
the numeric order on keys. The empty slot loses everywhere.
"""
from __future__ import annotations

from typing import Callable, Optional, Sequence

from .cells import Key

_GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


class HashConfig:
    """A hash function h: key -> cell plus the cyclic priority comparisons."""

    __slots__ = ("m", "universe", "_table", "_fn")

    def __init__(self, m: int, universe: int, fn: Callable[[Key], int],
                 table: Optional[Sequence[int]] = None):
        self.m = m
        self.universe = universe
        self._table = list(table) if table is not None else None
        self._fn = fn

    @classmethod
    def seeded(cls, m: int, universe: int, seed: int = 0) -> "HashConfig":
        """Pseudorandom placement, fixed by the seed at initialization."""
        base = _splitmix64(seed ^ 0x5BF0_3635)
        if universe <= 1 << 20:
            table = [_splitmix64(base ^ (k * _GOLDEN)) % m for k in range(universe)]
            return cls(m, universe, table.__getitem__, table)
        return cls(m, universe, lambda k: _splitmix64(base ^ (k * _GOLDEN)) % m)

    @classmethod
    def explicit(cls, m: int, table: Sequence[int]) -> "HashConfig":
        """Injected placement table, used by tests to craft collisions."""
        table = list(table)
        if any(not 0 <= c < m for c in table):
            raise ValueError("hash table entries must be cells in [0, m)")
        return cls(m, len(table), table.__getitem__, table)

    def h(self, key: Key) -> int:
        return self._fn(key)

    def rank(self, key: Key, i: int) -> int:
        return (i - self._fn(key)) % self.m

    def greater(self, x: Optional[Key], y: Optional[Key], i: int) -> bool:
        """x beats y at cell i: larger rank, or equal rank and larger key."""
        if x is None:
            return False
        if y is None:
            return True
        rx = (i - self._fn(x)) % self.m
        ry = (i - self._fn(y)) % self.m
        return rx > ry or (rx == ry and x > y)

    def greater_eq(self, x: Optional[Key], y: Optional[Key], i: int) -> bool:
        return x == y or self.greater(x, y, i)

    def to_json(self) -> dict:
        if self._table is not None:
            return {"m": self.m, "table": self._table}
        return {"m": self.m, "universe": self.universe}
