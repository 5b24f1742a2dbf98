"""Record-level interpretation: fragmenting, per-fragment search, merging."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

from .ecg_kb import BEAT, RHYTHMS, EcgContext, build_model
from .model import Observation
from .search import InterpretationProblem, SearchStats, emit_annotations, pe_kbfs, verify
from .signal import Annotation, SignalRecord
from .stp import Interval

log = logging.getLogger(__name__)


class InvariantViolation(RuntimeError):
    pass


@dataclass
class InterpretConfig:
    fragment_ms: int = 30_000
    overlap_ms: int = 3_000
    k: Optional[int] = None
    budget: int = 10_000
    realtime: bool = False
    scale: int = 4
    merge_ms: int = 50
    jobs: int = 1
    gate_qrs: bool = True

    def __post_init__(self):
        if not self.fragment_ms > self.overlap_ms >= 0:
            raise ValueError("fragment length must exceed the overlap, which must be >= 0")
        if self.budget <= 0:
            raise ValueError("budget must be positive")


@dataclass
class FragmentResult:
    begin: int
    end: int
    times: list
    coverage: float
    simplicity: float
    expansions: int


def fragments(duration_ms: float, fragment_ms: int, overlap_ms: int) -> list[tuple[int, int]]:
    step = fragment_ms - overlap_ms
    out = []
    begin = 0
    while True:
        end = min(int(duration_ms), begin + fragment_ms)
        out.append((begin, end))
        if end >= duration_ms:
            break
        begin += step
    return out


def interpret_fragment(record: SignalRecord, times, begin: int, end: int,
                       cfg: InterpretConfig) -> FragmentResult:
    margin = record.index(1000)
    lo = max(0, record.index(begin) - margin)
    hi = min(len(record), record.index(end) + margin)
    sub = SignalRecord(record.fs, record.samples[lo:hi], record.gain)
    extent = Interval(begin, max(begin, end - 1))
    local = [t for t in times if begin <= t < end]
    ctx = EcgContext.build(sub, local, extent=extent, scale=cfg.scale, gate_qrs=cfg.gate_qrs,
                           origin=lo)
    problem = InterpretationProblem(
        [Observation(BEAT, t, t) for t in local], build_model(), ctx, budget=cfg.budget,
        time_limit=(end - begin) / 1000.0 if cfg.realtime else None)
    stats = SearchStats()
    interp = pe_kbfs(problem, cfg.k, stats=stats)
    if not verify(interp):
        raise InvariantViolation(f"fragment [{begin}, {end}): interpretation violates its networks")
    out = [t for t in emit_annotations(interp, RHYTHMS) if begin <= t < end]
    log.info("fragment [%d, %d) ms: C=%.4f S=%.4f expansions=%d", begin, end,
             float(interp.coverage), float(interp.simplicity), stats.expansions)
    return FragmentResult(begin, end, out, float(interp.coverage), float(interp.simplicity),
                          stats.expansions)


def _job(args):
    return interpret_fragment(*args)


def merge_times(times, within_ms: int = 50) -> list[int]:
    """Sorted union keeping the earlier of any two times closer than ``within_ms``."""
    out: list[int] = []
    for t in sorted(times):
        if out and t - out[-1] < within_ms:
            continue
        out.append(t)
    return out


def interpret_record(record: SignalRecord, annotations, cfg: InterpretConfig | None = None
                     ) -> tuple[list[Annotation], list[FragmentResult]]:
    cfg = cfg or InterpretConfig()
    times = sorted(int(a[0]) for a in annotations)
    jobs = [(record, times, b, e, cfg)
            for b, e in fragments(record.duration_ms, cfg.fragment_ms, cfg.overlap_ms)]
    workers = cfg.jobs if cfg.jobs > 0 else (os.cpu_count() or 1)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_job, jobs))
    else:
        results = [_job(j) for j in jobs]
    merged = merge_times([t for r in results for t in r.times], cfg.merge_ms)
    limit = record.duration_ms
    if any(t < 0 or t >= limit for t in merged):
        raise InvariantViolation("emitted annotation outside the signal")
    return [Annotation(t, "N") for t in merged], results
