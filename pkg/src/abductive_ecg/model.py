"""Observables, pattern grammars and abstraction patterns.

A grammar is a small regular grammar whose terminals are observables, each
annotated with a constraint generator.  Patterns are built incrementally
from a grammar: every extension appends a finding (two temporal variables)
and intersects the generated constraints into the pattern network.  The
grammar cursor is kept as a set of non-terminals so that productions such as
``B -> q B | q`` can be followed without committing to either branch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .stp import INF, Interval, STPNetwork

ACCEPT = "<accept>"

# Logical variable names inside a pattern.
HB = "Hb"
HE = "He"


def fvar(k: int, which: str = "b") -> tuple[int, str]:
    """Logical name of the begin (``"b"``) or end (``"e"``) of finding ``k``."""
    return (k, which)


@dataclass(frozen=True)
class Observable:
    name: str
    attributes: tuple[str, ...] = ()
    instantaneous: bool = False


@dataclass(frozen=True)
class Observation:
    observable: str
    tb: int
    te: int
    values: tuple[tuple[str, object], ...] = ()

    def __post_init__(self):
        if self.tb > self.te:
            raise ValueError(f"observation ends before it begins: {self}")

    @property
    def time(self) -> int:
        return self.tb


@dataclass(frozen=True)
class Finding:
    observable: str
    tb_var: object
    te_var: object
    ordinal: int


@dataclass(frozen=True)
class DescriptorContext:
    """What a constraint generator may look at when a finding is added."""

    index: int
    times: tuple[Optional[int], ...]

    def time(self, k: int) -> int:
        t = self.times[k]
        if t is None:
            raise ValueError(f"finding {k} has no concrete time yet")
        return t


# A constraint generator maps the extension context to a list of
# (logical var, logical var, Interval) entries.
ConstraintGenerator = Callable[[DescriptorContext], list]


@dataclass(frozen=True)
class Production:
    lhs: str
    observable: Optional[str] = None
    descriptor: Optional[ConstraintGenerator] = None
    rhs: Optional[str] = None

    @property
    def is_lambda(self) -> bool:
        return self.observable is None


@dataclass(frozen=True, eq=False)
class PatternGrammar:
    """Grammar ``(V_N, V_T, H, R)`` with an optional observation procedure.

    ``procedure(pattern, evidence, context)`` computes the hypothesis
    observation (or ``None`` when it cannot).  ``closing`` is applied when a
    pattern is terminated by the search and may add constraints that only
    hold for the final finding.
    """

    name: str
    hypothesis: Observable
    productions: tuple[Production, ...]
    procedure: Optional[Callable] = None
    closing: Optional[ConstraintGenerator] = None
    span: Optional[Interval] = None
    start: str = "H"

    def __post_init__(self):
        starts = [p for p in self.productions if p.lhs == self.start]
        if not starts:
            raise ValueError(f"{self.name}: no initial production")
        lhs = {p.lhs for p in self.productions}
        reachable = {self.start}
        frontier = [self.start]
        while frontier:
            nt = frontier.pop()
            for p in self.productions:
                if p.lhs == nt and p.rhs is not None and p.rhs not in reachable:
                    reachable.add(p.rhs)
                    frontier.append(p.rhs)
        for p in self.productions:
            if p.rhs is not None and p.rhs not in lhs:
                raise ValueError(f"{self.name}: non-terminal {p.rhs} has no production")
            if p.observable == self.hypothesis.name:
                raise ValueError(f"{self.name}: hypothesis observable used as terminal")
        if lhs - reachable:
            raise ValueError(f"{self.name}: unreachable non-terminals {sorted(lhs - reachable)}")

    @property
    def terminals(self) -> set[str]:
        return {p.observable for p in self.productions if p.observable is not None}

    def hypothesis_span(self) -> Interval:
        if self.span is not None:
            return self.span
        if self.hypothesis.instantaneous:
            return Interval(0, 0)
        return Interval(0, INF)


class AbstractionPattern:
    """Pattern instance under construction.

    ``network`` holds the temporal origin, ``Hb``/``He`` and two variables per
    finding.  With ``compact=True`` the variables of findings that already
    have a concrete time are dropped from the network; constraints that
    mention them are re-expressed against the origin, which is exact because
    those variables are pinned.  ``log`` always records every constraint in
    terms of logical variable names.
    """

    def __init__(self, grammar: PatternGrammar, compact: bool = False):
        self.grammar = grammar
        self.compact = compact
        self.findings: tuple[Finding, ...] = ()
        self.times: tuple[Optional[int], ...] = ()
        self.states: frozenset = frozenset({grammar.start})
        # history[k] = cursor after k findings
        self.history: tuple[frozenset, ...] = (self.states,)
        self.network = STPNetwork()
        self.varmap: dict = {}
        self.pinned: dict = {}
        self.log: tuple = ()
        self.closed = False
        self.varmap[HB] = self.network.add_variable()
        self.varmap[HE] = self.network.add_variable()

    def copy(self) -> AbstractionPattern:
        other = AbstractionPattern.__new__(AbstractionPattern)
        other.__dict__.update(self.__dict__)
        other.network = self.network.copy()
        other.varmap = dict(self.varmap)
        other.pinned = dict(self.pinned)
        return other

    # -- temporal bookkeeping ------------------------------------------------

    @property
    def feasible(self) -> bool:
        return self.network.is_consistent()

    def _resolve(self, name):
        if name == "T0":
            return STPNetwork.ORIGIN, 0
        if name in self.pinned:
            return STPNetwork.ORIGIN, self.pinned[name]
        return self.varmap[name], 0

    def constrain(self, a, b, c: Interval) -> bool:
        """Intersect ``L(a, b)`` with ``c``; ``a``/``b`` are logical names."""
        self.log = self.log + ((a, b, c),)
        va, oa = self._resolve(a)
        vb, ob = self._resolve(b)
        # T_b - T_a = (V_b + ob) - (V_a + oa)
        return self.network.set_constraint(va, vb, c.shift(oa - ob))

    def interval(self, name) -> Interval:
        """Admissible absolute times of a logical variable."""
        if name in self.pinned:
            t = self.pinned[name]
            return Interval(t, t)
        return self.network.minimal_interval(STPNetwork.ORIGIN, self.varmap[name])

    def constraints(self) -> dict:
        """Logged constraints, intersected per ordered pair of names."""
        out: dict = {}
        for a, b, c in self.log:
            key, iv = (a, b), c
            if (b, a) in out:
                key, iv = (b, a), c.reverse()
            prev = out.get(key)
            out[key] = iv if prev is None else prev.intersect(iv) or iv
        return out

    def full_network(self) -> tuple[STPNetwork, dict]:
        """Uncompacted network rebuilt from the log, with its variable map."""
        net = STPNetwork()
        names = {"T0": STPNetwork.ORIGIN}
        for name in [HB, HE] + [v for f in self.findings for v in (f.tb_var, f.te_var)]:
            names[name] = net.add_variable()
        for a, b, c in self.log:
            net.set_constraint(names[a], names[b], c)
        return net, names

    def _pin(self, name, t: int):
        if not self.compact or name in self.pinned:
            return
        self.pinned[name] = t
        self.varmap.pop(name, None)
        names = list(self.varmap)
        self.network = self.network.project(
            [STPNetwork.ORIGIN] + [self.varmap[n] for n in names])
        self.varmap = {n: i + 1 for i, n in enumerate(names)}

    # -- grammar cursor ------------------------------------------------------

    def productions_at(self):
        g = self.grammar
        return [p for p in g.productions if p.lhs in self.states]

    @property
    def complete(self) -> bool:
        return ACCEPT in self.states or any(p.is_lambda for p in self.productions_at())

    def complete_at(self, k: int) -> bool:
        states = self.history[k]
        return ACCEPT in states or any(
            p.is_lambda for p in self.grammar.productions if p.lhs in states)

    @property
    def n_matched(self) -> int:
        n = 0
        for t in self.times:
            if t is None:
                break
            n += 1
        return n

    def __repr__(self):
        return f"<{self.grammar.name} findings={len(self.findings)} times={self.times}>"


def init_pattern(grammar: PatternGrammar, compact: bool = False) -> AbstractionPattern:
    p = AbstractionPattern(grammar, compact=compact)
    p.constrain(HB, HE, grammar.hypothesis_span())
    return p


def next_findings(p: AbstractionPattern) -> list[tuple[str, tuple[Production, ...]]]:
    """Candidate next findings as ``(observable, productions)`` groups.

    Productions from the current cursor that emit the same observable with
    the same descriptor are one candidate (e.g. ``B -> q B | q``).
    """
    if p.closed:
        return []
    groups: dict = {}
    for prod in p.productions_at():
        if prod.is_lambda:
            continue
        key = (prod.observable, id(prod.descriptor))
        groups.setdefault(key, []).append(prod)
    return [(prods[0].observable, tuple(prods)) for prods in groups.values()]


def is_complete(p: AbstractionPattern) -> bool:
    return p.complete


def _after_constraints(ctx: DescriptorContext) -> list:
    new = fvar(ctx.index)
    return [(fvar(k, w), new, Interval(1, INF)) for k in range(ctx.index) for w in "be"]


def extend_pattern(p: AbstractionPattern, observables: dict, candidate=None,
                   matched_times: Sequence[Optional[int]] | None = None) -> AbstractionPattern:
    """Return a copy of ``p`` with one more finding.

    Raises ``ValueError`` if the cursor has no applicable production and
    ``InconsistentPattern`` if the generated constraints are unsatisfiable.
    """
    options = next_findings(p)
    if candidate is None:
        if len(options) != 1:
            raise ValueError(f"{p.grammar.name}: {len(options)} candidate findings, choose one")
        candidate = options[0]
    obs_name, prods = candidate
    q = p.copy()
    k = len(q.findings)
    finding = Finding(obs_name, fvar(k, "b"), fvar(k, "e"), k)
    q.findings = q.findings + (finding,)
    times = tuple(p.times) if matched_times is None else tuple(matched_times)
    times = times[:k] + (None,) * (k - len(times[:k]))
    q.times = times + (None,)
    q.states = frozenset(pr.rhs if pr.rhs is not None else ACCEPT for pr in prods)
    q.history = q.history + (q.states,)
    q.varmap[finding.tb_var] = q.network.add_variable()
    q.varmap[finding.te_var] = q.network.add_variable()
    inst = observables[obs_name].instantaneous
    q.constrain(finding.tb_var, finding.te_var, Interval(0, 0) if inst else Interval(0, INF))
    descriptor = prods[0].descriptor
    ctx = DescriptorContext(k, q.times[:k])
    entries = _after_constraints(ctx) if descriptor is None else descriptor(ctx)
    for a, b, c in entries:
        if c is None or not q.constrain(a, b, c):
            raise InconsistentPattern(f"{p.grammar.name}: finding {k} cannot be placed")
    if not q.feasible:
        raise InconsistentPattern(f"{p.grammar.name}: finding {k} cannot be placed")
    return q


def match_finding(p: AbstractionPattern, k: int, obs: Observation) -> AbstractionPattern:
    """Copy of ``p`` with finding ``k`` assigned to the times of ``obs``."""
    f = p.findings[k]
    if f.observable != obs.observable:
        raise ValueError(f"cannot match {obs.observable} to a {f.observable} finding")
    q = p.copy()
    ok = q.constrain("T0", f.tb_var, Interval(obs.tb, obs.tb))
    ok = ok and q.constrain("T0", f.te_var, Interval(obs.te, obs.te))
    if not ok or not q.feasible:
        raise InconsistentPattern(f"{p.grammar.name}: {obs} violates finding {k}")
    q.times = q.times[:k] + (obs.tb,) + q.times[k + 1:]
    q._pin(f.tb_var, obs.tb)
    q._pin(f.te_var, obs.te)
    return q


def close_pattern(p: AbstractionPattern) -> AbstractionPattern:
    """Terminate the pattern at its current findings, applying ``closing``."""
    if not p.complete:
        raise InconsistentPattern(f"{p.grammar.name}: evidence is not a sentence of the grammar")
    q = p.copy()
    q.closed = True
    if p.grammar.closing is not None and q.findings:
        ctx = DescriptorContext(len(q.findings), q.times)
        for a, b, c in p.grammar.closing(ctx):
            if c is None or not q.constrain(a, b, c):
                raise InconsistentPattern(f"{p.grammar.name}: closing constraints fail")
    if not q.feasible:
        raise InconsistentPattern(f"{p.grammar.name}: closing constraints fail")
    return q


class InconsistentPattern(ValueError):
    pass


def min_accepted_length(g: PatternGrammar) -> int:
    """Length of the shortest evidence sequence in ``L(g)``."""
    dist = {g.start: 0}
    frontier = [g.start]
    best = math.inf
    while frontier:
        nxt = []
        for nt in frontier:
            for p in g.productions:
                if p.lhs != nt:
                    continue
                if p.is_lambda:
                    best = min(best, dist[nt])
                elif p.rhs is None:
                    best = min(best, dist[nt] + 1)
                elif p.rhs not in dist:
                    dist[p.rhs] = dist[nt] + 1
                    nxt.append(p.rhs)
        frontier = nxt
    return best


@dataclass
class AbstractionModel:
    observables: dict[str, Observable]
    grammars: list[PatternGrammar] = field(default_factory=list)

    def __post_init__(self):
        for g in self.grammars:
            for name in g.terminals | {g.hypothesis.name}:
                if name not in self.observables:
                    raise ValueError(f"{g.name}: unknown observable {name}")
        self.relation = abstraction_relation(self)

    def abstractors(self, observable: str) -> list[PatternGrammar]:
        """Grammars whose first finding can be matched to ``observable``."""
        out = []
        for g in self.grammars:
            firsts = {p.observable for p in g.productions if p.lhs == g.start}
            if observable in firsts:
                out.append(g)
        return out

    def producers(self, observable: str) -> list[PatternGrammar]:
        """Grammars that hypothesize ``observable``."""
        return [g for g in self.grammars if g.hypothesis.name == observable]

    @property
    def domain(self) -> set[str]:
        return {a for a, _ in self.relation}

    def default_k(self) -> int:
        counts: dict = {}
        for a, b in self.relation:
            counts.setdefault(a, set()).add(b)
        return max((len(v) for v in counts.values()), default=1)

    def level(self, observable: str) -> int:
        below = [a for a, b in self.relation if b == observable]
        return 1 + max(self.level(a) for a in below) if below else 0


def abstraction_relation(m: AbstractionModel) -> set[tuple[str, str]]:
    rel = {(q, g.hypothesis.name) for g in m.grammars for q in g.terminals}
    closure = set(rel)
    while True:
        extra = {(a, d) for a, b in closure for c, d in closure if b == c} - closure
        if not extra:
            break
        closure |= extra
    loops = sorted(a for a, b in closure if a == b)
    if loops:
        raise ValueError(f"abstraction relation is cyclic through {loops}")
    return rel
