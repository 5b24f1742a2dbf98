"""Simple Temporal Problem networks.

A constraint ``L(i, j) = [a, b]`` bounds the difference ``T_j - T_i``.  The
network keeps the raw constraints (used for solution checking) and, once it
has been queried, the all-pairs shortest-path matrix of its distance graph,
which is maintained incrementally as constraints are tightened.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

INF = math.inf


def _as_bound(x):
    if isinstance(x, float) and x.is_integer():
        return int(x)
    return x


@dataclass(frozen=True)
class Interval:
    """Closed interval of admissible differences, in integer milliseconds."""

    lower: float = -INF
    upper: float = INF

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"empty interval [{self.lower}, {self.upper}]")
        object.__setattr__(self, "lower", _as_bound(self.lower))
        object.__setattr__(self, "upper", _as_bound(self.upper))

    def intersect(self, other: Interval) -> Interval | None:
        """Return the intersection, or ``None`` when it is empty."""
        lo = max(self.lower, other.lower)
        hi = min(self.upper, other.upper)
        if lo > hi:
            return None
        return Interval(lo, hi)

    def reverse(self) -> Interval:
        return Interval(-self.upper, -self.lower)

    def shift(self, offset: int) -> Interval:
        return Interval(self.lower + offset, self.upper + offset)

    def __contains__(self, value) -> bool:
        return self.lower <= value <= self.upper

    def __iter__(self):
        yield self.lower
        yield self.upper

    def __repr__(self):
        return f"[{self.lower}, {self.upper}]"


UNCONSTRAINED = Interval(-INF, INF)


class InconsistentNetwork(ValueError):
    pass


class STPNetwork:
    """Simple temporal network over integer variable ids.

    Variable 0 is the time origin.  Infeasibility is a state: once an
    intersection becomes empty or a negative cycle appears, ``feasible`` is
    ``False`` and every later consistency query answers ``False``.
    """

    ORIGIN = 0

    def __init__(self, with_origin: bool = True):
        self.n = 0
        self.feasible = True
        self._constraints: dict[tuple[int, int], Interval] = {}
        self._dist: np.ndarray | None = None
        if with_origin:
            self.add_variable()

    @property
    def variables(self) -> range:
        return range(self.n)

    def copy(self) -> STPNetwork:
        other = STPNetwork.__new__(STPNetwork)
        other.n = self.n
        other.feasible = self.feasible
        other._constraints = dict(self._constraints)
        other._dist = None if self._dist is None else self._dist.copy()
        return other

    def add_variable(self) -> int:
        vid = self.n
        self.n += 1
        if self._dist is not None:
            d = np.full((self.n, self.n), INF)
            d[:-1, :-1] = self._dist
            d[-1, -1] = 0.0
            self._dist = d
        return vid

    def _check(self, i, j):
        for v in (i, j):
            if not 0 <= v < self.n:
                raise IndexError(f"unknown temporal variable {v}")

    def constraint(self, i: int, j: int) -> Interval:
        """Stored (not propagated) constraint on ``T_j - T_i``."""
        self._check(i, j)
        if (i, j) in self._constraints:
            return self._constraints[(i, j)]
        if (j, i) in self._constraints:
            return self._constraints[(j, i)].reverse()
        return UNCONSTRAINED

    def constraints(self) -> dict[tuple[int, int], Interval]:
        return dict(self._constraints)

    def set_constraint(self, i: int, j: int, c: Interval) -> bool:
        """Intersect ``L(i, j)`` with ``c``.  Returns the feasibility flag."""
        self._check(i, j)
        if i == j:
            if 0 not in c:
                self.feasible = False
            return self.feasible
        if i > j:
            i, j, c = j, i, c.reverse()
        old = self._constraints.get((i, j), UNCONSTRAINED)
        new = old.intersect(c)
        if new is None:
            self.feasible = False
            return False
        self._constraints[(i, j)] = new
        if self._dist is not None and self.feasible:
            if new.upper < INF:
                self._tighten(i, j, new.upper)
            if self.feasible and new.lower > -INF:
                self._tighten(j, i, -new.lower)
        return self.feasible

    def _tighten(self, u: int, v: int, w: float):
        d = self._dist
        if w >= d[u, v]:
            return
        if d[v, u] + w < 0:
            self.feasible = False
            return
        np.minimum(d, d[:, u, None] + w + d[None, v, :], out=d)

    def _minimize(self):
        n = self.n
        d = np.full((n, n), INF)
        np.fill_diagonal(d, 0.0)
        for (i, j), c in self._constraints.items():
            d[i, j] = min(d[i, j], c.upper)
            d[j, i] = min(d[j, i], -c.lower)
        for k in range(n):
            np.minimum(d, d[:, k, None] + d[None, k, :], out=d)
        if n and np.any(np.diag(d) < 0):
            self.feasible = False
        self._dist = d

    def is_consistent(self) -> bool:
        if not self.feasible:
            return False
        if self._dist is None:
            self._minimize()
        return self.feasible

    def minimal_interval(self, i: int, j: int) -> Interval:
        """Tightest interval for ``T_j - T_i`` implied by the network."""
        self._check(i, j)
        if not self.is_consistent():
            raise InconsistentNetwork("network has no solution")
        d = self._dist
        return Interval(-d[j, i], d[i, j])

    def project(self, keep) -> STPNetwork:
        """Minimal network restricted to ``keep`` (renumbered in that order)."""
        if not self.is_consistent():
            raise InconsistentNetwork("network has no solution")
        keep = list(keep)
        d = self._dist[np.ix_(keep, keep)].copy()
        other = STPNetwork(with_origin=False)
        other.n = len(keep)
        other._dist = d
        for a in range(len(keep)):
            for b in range(a + 1, len(keep)):
                lo, hi = -d[b, a], d[a, b]
                if lo > -INF or hi < INF:
                    other._constraints[(a, b)] = Interval(lo, hi)
        return other

    def check_solution(self, assignment) -> bool:
        for (i, j), c in self._constraints.items():
            for v in (i, j):
                if v not in assignment:
                    raise KeyError(f"assignment misses temporal variable {v}")
            if assignment[j] - assignment[i] not in c:
                return False
        return True
