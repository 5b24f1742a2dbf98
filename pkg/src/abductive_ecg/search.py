"""Interpretation search over abstraction hypotheses.

An interpretation is a set of abstraction hypotheses with disjoint evidence.
Its focus of attention is a stack: the top is either an observation waiting
to be abstracted (hypothesis step) or a hypothesis whose last finding is
still unmatched (test step).  Lower frames are hypotheses waiting for the
observation conjectured by the frame above them (deduction chains).

The search is a partial-expansion K-best-first search: each expansion asks a
node for one more successor, the node goes back to ``open`` with the
child's valuation, and exhausted nodes move to ``closed``.
"""
from __future__ import annotations

import bisect
import heapq
import itertools
import logging
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

from .model import (HB, HE, AbstractionModel, AbstractionPattern, InconsistentPattern,
                    Observation, PatternGrammar, close_pattern, extend_pattern, fvar,
                    init_pattern, match_finding, next_findings)
from .stp import Interval

log = logging.getLogger(__name__)

Valuation = tuple  # (1 - coverage, 1 / simplicity), compared lexicographically


@dataclass(frozen=True)
class Hypothesis:
    grammar: PatternGrammar
    pattern: AbstractionPattern
    oid: int
    evidence: tuple = ()
    parent: Optional[tuple[int, int]] = None
    done: bool = False
    before_last: Optional[AbstractionPattern] = None
    may_stop: bool = False


@dataclass(eq=False)
class InterpretationProblem:
    observations: list
    model: AbstractionModel
    context: object = None
    budget: int = 10_000
    time_limit: Optional[float] = None

    def __post_init__(self):
        self.observations = sorted(self.observations, key=lambda o: (o.tb, o.te, o.observable))
        m = self.model
        self.domain = m.domain
        self.levels = {name: m.level(name) for name in m.observables}
        self.observables = m.observables
        self.by_observable: dict = {}
        for oid, o in enumerate(self.observations):
            self.by_observable.setdefault(o.observable, []).append((o.tb, oid))
        self.n_domain = sum(1 for o in self.observations if o.observable in self.domain)

    def root(self) -> Interpretation:
        return Interpretation.root(self)


class Interpretation:
    """Search node.  Treat as immutable once handed to the search."""

    __slots__ = ("problem", "conj", "hyps", "owner", "dismissed", "stack",
                 "n_domain", "next_oid", "next_hid", "via", "_children", "_cursor")

    @classmethod
    def root(cls, problem: InterpretationProblem) -> Interpretation:
        node = cls.__new__(cls)
        node.problem = problem
        node.conj = {}
        node.hyps = {}
        node.owner = {}
        node.dismissed = frozenset()
        node.n_domain = problem.n_domain
        node.next_oid = len(problem.observations)
        node.next_hid = 0
        node.via = "root"
        node._children = None
        node._cursor = 0
        node.stack = ()
        if problem.observations:
            node.stack = (("obs", 0),)
        return node

    def clone(self, via: str) -> Interpretation:
        node = Interpretation.__new__(Interpretation)
        node.problem = self.problem
        node.conj = dict(self.conj)
        node.hyps = dict(self.hyps)
        node.owner = dict(self.owner)
        node.dismissed = self.dismissed
        node.stack = self.stack
        node.n_domain = self.n_domain
        node.next_oid = self.next_oid
        node.next_hid = self.next_hid
        node.via = via
        node._children = None
        node._cursor = 0
        return node

    # -- observations --------------------------------------------------------

    def observation(self, oid: int) -> Optional[Observation]:
        obs = self.problem.observations
        if oid < len(obs):
            return obs[oid]
        return self.conj[oid][1]

    def observable_of(self, oid: int) -> str:
        obs = self.problem.observations
        if oid < len(obs):
            return obs[oid].observable
        return self.conj[oid][0]

    def _new_observation(self, observable: str) -> int:
        oid = self.next_oid
        self.next_oid += 1
        self.conj[oid] = (observable, None)
        if observable in self.problem.domain:
            self.n_domain += 1
        return oid

    @property
    def conjectured(self) -> list:
        return [self.conj[h.oid][1] for h in self.hyps.values()]

    # -- valuation -------------------------------------------------------------

    @property
    def coverage(self) -> Fraction:
        if self.n_domain == 0:
            return Fraction(1)
        return Fraction(len(self.owner), self.n_domain)

    @property
    def simplicity(self) -> Fraction:
        return Fraction(1, 1 + len(self.hyps))

    def valuation(self) -> Valuation:
        return (1 - self.coverage, 1 + len(self.hyps))

    @property
    def focus(self):
        if not self.stack:
            return None
        kind, ref = self.stack[-1]
        if kind == "obs":
            return ("observation", ref)
        return ("finding", ref, len(self.hyps[ref].evidence) - 1)

    def is_valid(self) -> bool:
        """Whether truncating the open frames leaves well-formed hypotheses."""
        frames = [ref for kind, ref in self.stack if kind == "hyp"]
        if len(frames) > 1:
            return False
        for hid in frames:
            h = self.hyps[hid]
            n = len(h.evidence) - (1 if h.evidence and h.evidence[-1] is None else 0)
            if not h.pattern.complete_at(n):
                return False
        return True

    # -- successor generation ----------------------------------------------------

    def successors(self) -> list[Interpretation]:
        """All successors, best valuation first (generation order on ties)."""
        if not self.stack:
            return []
        kind, ref = self.stack[-1]
        if kind == "obs":
            out = abduce(self, ref)
        else:
            out = subsume(self, ref) + deduce(self, ref) + self._stop(ref)
        order = sorted(range(len(out)), key=lambda i: (out[i].valuation(), i))
        return [out[i] for i in order]

    def next_successor(self) -> Optional[Interpretation]:
        if self._children is None:
            self._children = self.successors()
        if self._cursor >= len(self._children):
            self._children = []
            return None
        child = self._children[self._cursor]
        self._children[self._cursor] = None
        self._cursor += 1
        return child

    # -- focus management ------------------------------------------------------------

    def _next_focus(self) -> Optional[int]:
        """Highest-level, then earliest, unexplained observation of the domain."""
        pb = self.problem
        best = None
        for oid, o in enumerate(pb.observations):
            if o.observable in pb.domain and oid not in self.owner and oid not in self.dismissed:
                key = (-pb.levels[o.observable], o.tb, oid)
                if best is None or key < best:
                    best = key
        for oid, (name, o) in self.conj.items():
            if o is not None and name in pb.domain and oid not in self.owner \
                    and oid not in self.dismissed:
                key = (-pb.levels[name], o.tb, oid)
                if best is None or key < best:
                    best = key
        return None if best is None else best[2]

    def _finish(self, hid: int) -> bool:
        """Close hypothesis ``hid`` (top of stack) and compute its observation."""
        h = self.hyps[hid]
        ctx = self.problem.context
        try:
            p = close_pattern(h.pattern)
        except InconsistentPattern:
            return False
        evidence = [self.observation(o) for o in h.evidence]
        if h.grammar.procedure is not None:
            o = h.grammar.procedure(p, evidence, ctx)
        else:
            o = Observation(h.grammar.hypothesis.name, p.interval(HB).lower, p.interval(HE).lower)
        if o is None:
            return False
        if not (p.constrain("T0", HB, Interval(o.tb, o.tb))
                and p.constrain("T0", HE, Interval(o.te, o.te)) and p.feasible):
            return False
        self.conj[h.oid] = (o.observable, o)
        self.hyps[hid] = replace(h, pattern=p, done=True, before_last=None)
        self.stack = self.stack[:-1]
        if h.parent is not None:
            phid, k = h.parent
            ph = self.hyps[phid]
            try:
                pp = match_finding(ph.pattern, k, o)
            except InconsistentPattern:
                return False
            self.hyps[phid] = replace(ph, pattern=pp)
        elif o.observable in self.problem.domain and h.oid not in self.owner:
            self.stack = self.stack + (("obs", h.oid),)
        return True

    def _settle(self) -> list[Interpretation]:
        """Resolve bookkeeping after an inference step into focus-ready nodes.

        A hypothesis that can still predict a finding is kept open; stopping
        it there is offered later, as the last successor of that finding.
        """
        if not self.stack:
            nxt = self._next_focus()
            if nxt is not None:
                self.stack = (("obs", nxt),)
            return [self]
        kind, ref = self.stack[-1]
        if kind == "obs":
            return [self]
        h = self.hyps[ref]
        if h.evidence and h.evidence[-1] is None:
            return [self]
        out = []
        observables = self.problem.observables
        for cand in next_findings(h.pattern):
            try:
                p = extend_pattern(h.pattern, observables, cand)
            except InconsistentPattern:
                continue
            node = self.clone(self.via)
            node.hyps[ref] = replace(h, pattern=p, evidence=h.evidence + (None,),
                                     before_last=h.pattern, may_stop=not out)
            out.append(node)
        if not out and h.pattern.complete:
            node = self.clone(self.via)
            if node._finish(ref):
                out.extend(node._settle())
        return out

    def _stop(self, hid: int) -> list[Interpretation]:
        """Drop the pending finding of ``hid`` and close it at its evidence."""
        h = self.hyps[hid]
        if not (h.may_stop and h.before_last is not None and h.before_last.complete):
            return []
        node = self.clone("stop")
        node.hyps[hid] = replace(h, pattern=h.before_last, evidence=h.evidence[:-1],
                                 before_last=None, may_stop=False)
        if not node._finish(hid):
            return []
        return node._settle()

    # -- results -------------------------------------------------------------------------

    def finalized(self) -> Interpretation:
        """Copy with the open hypothesis truncated to its matched evidence."""
        if not self.is_valid():
            raise ValueError("interpretation has pending deductions")
        node = self.clone(self.via)
        if node.stack and node.stack[-1][0] == "obs":
            node.stack = node.stack[:-1]
        if node.stack:
            _, hid = node.stack[-1]
            h = node.hyps[hid]
            if h.evidence and h.evidence[-1] is None:
                h = replace(h, pattern=h.before_last, evidence=h.evidence[:-1])
                node.hyps[hid] = h
            if not node._finish(hid):
                node._drop(hid)
        node.stack = ()
        return node

    def _drop(self, hid: int):
        h = self.hyps.pop(hid)
        for oid in h.evidence:
            if oid is not None:
                self.owner.pop(oid, None)
        self.stack = tuple(f for f in self.stack if f != ("hyp", hid))
        name = self.conj.pop(h.oid)[0]
        if name in self.problem.domain:
            self.n_domain -= 1

    def hypotheses(self) -> list[tuple[Observation, list[Observation], Hypothesis]]:
        out = []
        for h in self.hyps.values():
            if h.done:
                out.append((self.observation(h.oid), [self.observation(o) for o in h.evidence], h))
        return out

    def __repr__(self):
        return (f"<Interpretation C={self.coverage} hyps={len(self.hyps)} "
                f"focus={self.focus} via={self.via}>")


# -- inference modes ---------------------------------------------------------------


def abduce(node: Interpretation, oid: int) -> list[Interpretation]:
    """Hypothesize every pattern that can abstract observation ``oid``."""
    pb = node.problem
    obs = node.observation(oid)
    grammars = pb.model.abstractors(obs.observable)
    if not grammars:
        return []
    out = []
    for g in grammars:
        p = init_pattern(g, compact=True)
        cand = next(c for c in next_findings(p) if c[0] == obs.observable)
        try:
            p = extend_pattern(p, pb.observables, cand)
            p = match_finding(p, 0, obs)
        except InconsistentPattern:
            continue
        child = node.clone("abduce")
        hid = child.next_hid
        child.next_hid += 1
        hoid = child._new_observation(g.hypothesis.name)
        child.hyps[hid] = Hypothesis(g, p, hoid, (oid,))
        child.owner[oid] = hid
        child.stack = child.stack[:-1] + (("hyp", hid),)
        out.extend(child._settle())
    # leaving the observation unexplained (a spurious annotation)
    skip = node.clone("skip")
    skip.dismissed = node.dismissed | {oid}
    skip.stack = skip.stack[:-1]
    out.extend(skip._settle())
    return out


def _candidates(node: Interpretation, observable: str, window: Interval) -> list[int]:
    pb = node.problem
    found = []
    entries = pb.by_observable.get(observable, [])
    lo = bisect.bisect_left(entries, (window.lower, -1))
    for t, oid in itertools.islice(entries, lo, None):
        if t > window.upper:
            break
        if oid not in node.owner:
            found.append((t, oid))
    for oid, (name, o) in node.conj.items():
        if name == observable and o is not None and oid not in node.owner and o.tb in window:
            found.append((o.tb, oid))
    found.sort()
    return [oid for _, oid in found]


def subsume(node: Interpretation, hid: int) -> list[Interpretation]:
    """Match the focused finding of ``hid`` with existing observations,
    nearest in time first."""
    h = node.hyps[hid]
    k = len(h.evidence) - 1
    finding = h.pattern.findings[k]
    window = h.pattern.interval(fvar(k, "b"))
    out = []
    for oid in _candidates(node, finding.observable, window):
        try:
            p = match_finding(h.pattern, k, node.observation(oid))
        except InconsistentPattern:
            continue
        child = node.clone("subsume")
        child.hyps[hid] = replace(h, pattern=p, evidence=h.evidence[:-1] + (oid,))
        child.owner[oid] = hid
        out.extend(child._settle())
    return out


def deduce(node: Interpretation, hid: int) -> list[Interpretation]:
    """Conjecture an observation for the focused finding and look for its
    own evidence."""
    pb = node.problem
    h = node.hyps[hid]
    k = len(h.evidence) - 1
    finding = h.pattern.findings[k]
    wb = h.pattern.interval(fvar(k, "b"))
    we = h.pattern.interval(fvar(k, "e"))
    out = []
    for g in pb.model.producers(finding.observable):
        p = init_pattern(g, compact=True)
        if not (p.constrain("T0", HB, wb) and p.constrain("T0", HE, we) and p.feasible):
            continue
        child = node.clone("deduce")
        sub = child.next_hid
        child.next_hid += 1
        hoid = child._new_observation(finding.observable)
        child.hyps[hid] = replace(h, evidence=h.evidence[:-1] + (hoid,))
        child.owner[hoid] = hid
        child.hyps[sub] = Hypothesis(g, p, hoid, (), parent=(hid, k))
        child.stack = child.stack + (("hyp", sub),)
        out.extend(child._settle())
    return out


# -- search ---------------------------------------------------------------------------


@dataclass
class SearchStats:
    expansions: int = 0
    closed: int = 0
    truncated: bool = False
    elapsed: float = 0.0
    max_open: int = 0
    visited: list = field(default_factory=list)


def pe_kbfs(problem: InterpretationProblem, k: Optional[int] = None,
            stats: Optional[SearchStats] = None, max_expansions: Optional[int] = None,
            observer=None) -> Interpretation:
    """Partial-expansion K-best-first search for the best interpretation.

    Returns the first valid interpretation with full coverage, otherwise the
    best valid exhausted node.  After ``problem.budget`` expansions (or
    ``problem.time_limit`` seconds) ``open`` is capped at ``k`` entries.
    """
    if k is None:
        k = problem.model.default_k()
    if k < 1:
        raise ValueError("k must be >= 1")
    stats = stats if stats is not None else SearchStats()
    root = problem.root()
    if not problem.observations:
        return root
    if max_expansions is None:
        max_expansions = 20 * problem.budget
    start = time.perf_counter()
    seq = itertools.count()
    open_ = [((Fraction(1), 1), next(seq), root)]
    best = None

    def close(val, s, node):
        nonlocal best
        stats.closed += 1
        if node.is_valid() and (best is None or (val, s) < best[:2]):
            best = (val, s, node)

    while open_:
        batch = [heapq.heappop(open_) for _ in range(min(k, len(open_)))]
        for val, s, node in batch:
            child = node.next_successor()
            stats.expansions += 1
            if observer is not None:
                observer(node, child)
            if child is None:
                close(node.valuation(), s, node)
                continue
            if child.coverage == 1 and child.is_valid():
                stats.elapsed = time.perf_counter() - start
                return child.finalized()
            v = child.valuation()
            heapq.heappush(open_, (v, next(seq), child))
            heapq.heappush(open_, (v, next(seq), node))
        stats.max_open = max(stats.max_open, len(open_))
        over_budget = stats.expansions >= problem.budget or (
            problem.time_limit is not None and time.perf_counter() - start > problem.time_limit)
        if over_budget and len(open_) > k:
            stats.truncated = True
            open_ = heapq.nsmallest(k, open_)
            heapq.heapify(open_)
        if stats.expansions >= max_expansions:
            log.warning("search stopped after %d expansions", stats.expansions)
            for val, s, node in open_:
                close(node.valuation(), s, node)
            break
    stats.elapsed = time.perf_counter() - start
    if best is None:
        return root
    return best[2].finalized()


def emit_annotations(interp: Interpretation, rhythms=None) -> list[int]:
    """Times of the observations that support a top-level hypothesis.

    By default the top level is every hypothesis whose observable is not
    itself abstracted by any pattern (the rhythms of the ECG model).
    """
    domain = interp.problem.domain
    times = set()
    for o, evidence, h in interp.hypotheses():
        top = (o.observable in rhythms) if rhythms is not None else o.observable not in domain
        if top:
            times.update(e.tb for e in evidence if e is not None)
    return sorted(times)


def verify(interp: Interpretation) -> bool:
    """Re-check evidence disjointness and every hypothesis network against
    the concrete times of its observations."""
    seen = set()
    for o, evidence, h in interp.hypotheses():
        for oid in h.evidence:
            if oid in seen:
                return False
            seen.add(oid)
        net, names = h.pattern.full_network()
        assignment = {names["T0"]: 0, names[HB]: o.tb, names[HE]: o.te}
        for f, e in zip(h.pattern.findings, evidence):
            if e is None:
                return False
            assignment[names[f.tb_var]] = e.tb
            assignment[names[f.te_var]] = e.te
        if not net.check_solution(assignment):
            return False
    return True
