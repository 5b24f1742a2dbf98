"""Beat-by-beat scoring and the Wilcoxon signed-rank test on paired scores."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction


def _ratio(num: int, den: int) -> Fraction:
    return Fraction(1) if den == 0 else Fraction(num, den)


@dataclass(frozen=True)
class MatchReport:
    tp: int
    fp: int
    fn: int

    @property
    def se(self) -> Fraction:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def ppv(self) -> Fraction:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def f1(self) -> Fraction:
        se, ppv = self.se, self.ppv
        if se + ppv == 0:
            return Fraction(0)
        return 2 * se * ppv / (se + ppv)

    def __add__(self, other: "MatchReport") -> "MatchReport":
        return MatchReport(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def __str__(self):
        return (f"TP={self.tp} FP={self.fp} FN={self.fn} Se={float(self.se):.4f} "
                f"P+={float(self.ppv):.4f} F1={float(self.f1):.4f}")


def _times(anns) -> list[int]:
    return sorted(int(a[0]) if isinstance(a, tuple) else int(a) for a in anns)


def match_pairs(test, ref, tol: float = 150) -> list[tuple[int, int]]:
    """Greedy chronological one-to-one matching within ``tol``.

    Both streams are walked in time order; a beat that can no longer be
    reached by anything on the other side is left unmatched.  On a line this
    greedy pairs the maximum number of beats, so the match count does not
    depend on which stream is called the reference.
    """
    test, ref = _times(test), _times(ref)
    pairs = []
    i = j = 0
    while i < len(test) and j < len(ref):
        t, r = test[i], ref[j]
        if r < t - tol:
            j += 1
        elif t < r - tol:
            i += 1
        else:
            pairs.append((t, r))
            i += 1
            j += 1
    return pairs


def match_beats(test, ref, tol: float = 150) -> MatchReport:
    tp = len(match_pairs(test, ref, tol))
    return MatchReport(tp, len(test) - tp, len(ref) - tp)


# -- Wilcoxon signed-rank ----------------------------------------------------------

EXACT_MAX_N = 15


def signed_ranks(differences) -> list[tuple[Fraction, int]]:
    """(mid-rank, sign) of each nonzero difference, zeros dropped."""
    nz = [d for d in differences if d != 0]
    order = sorted(range(len(nz)), key=lambda i: abs(nz[i]))
    ranks: list[Fraction] = [Fraction(0)] * len(nz)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and abs(nz[order[j + 1]]) == abs(nz[order[i]]):
            j += 1
        mid = Fraction(i + j + 2, 2)
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return [(r, 1 if d > 0 else -1) for r, d in zip(ranks, nz)]


def _exact_p(ranks: list[Fraction], w_plus: Fraction) -> float:
    # ranks are multiples of 1/2: count sign assignments on doubled integer ranks
    doubled = [int(2 * r) for r in ranks]
    total = sum(doubled)
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in doubled:
        for s in range(total, r - 1, -1):
            counts[s] += counts[s - r]
    w = int(2 * w_plus)
    n_assign = 2 ** len(ranks)
    lower = sum(counts[: w + 1])
    upper = sum(counts[w:])
    return min(1.0, 2 * min(lower, upper) / n_assign)


def _normal_p(ranks: list[Fraction], w_plus: Fraction) -> float:
    n = len(ranks)
    mean = n * (n + 1) / 4
    ties: dict[Fraction, int] = {}
    for r in ranks:
        ties[r] = ties.get(r, 0) + 1
    var = n * (n + 1) * (2 * n + 1) / 24 - sum(t ** 3 - t for t in ties.values()) / 48
    if var <= 0:
        return 1.0
    z = max(0.0, abs(float(w_plus) - mean) - 0.5) / math.sqrt(var)
    return min(1.0, math.erfc(z / math.sqrt(2)))


def wilcoxon_signed_rank(differences) -> float:
    """Two-sided p-value of the signed-rank statistic.

    Exact over all sign assignments for up to 15 nonzero differences, normal
    approximation with tie and continuity correction above that.
    """
    sr = signed_ranks(differences)
    if not sr:
        return 1.0
    ranks = [r for r, _ in sr]
    w_plus = sum((r for r, s in sr if s > 0), Fraction(0))
    if len(sr) <= EXACT_MAX_N:
        return _exact_p(ranks, w_plus)
    return _normal_p(ranks, w_plus)


# -- reports ----------------------------------------------------------------------

@dataclass
class RecordRow:
    record: str
    after: MatchReport
    before: MatchReport | None = None


def gross(rows: list[RecordRow]) -> RecordRow:
    """Pooled TP/FP/FN over all records."""
    after = sum((r.after for r in rows), MatchReport(0, 0, 0))
    before = None
    if rows and all(r.before is not None for r in rows):
        before = sum((r.before for r in rows), MatchReport(0, 0, 0))
    return RecordRow("Gross (pooled)", after, before)


def _pct(x: Fraction) -> str:
    return f"{100 * float(x):.2f}"


def _columns(row: RecordRow, with_before: bool) -> list[str]:
    cols = [row.record]
    if with_before:
        b = row.before
        cols += [_pct(b.se), _pct(b.ppv), _pct(b.f1)] if b else ["", "", ""]
    a = row.after
    return cols + [_pct(a.se), _pct(a.ppv), _pct(a.f1)]


def _header(with_before: bool) -> list[str]:
    if with_before:
        return ["Record", "Se before", "P+ before", "F1 before", "Se after", "P+ after", "F1 after"]
    return ["Record", "Se", "P+", "F1"]


def report_rows(rows: list[RecordRow]) -> tuple[list[str], list[list[str]]]:
    with_before = bool(rows) and all(r.before is not None for r in rows)
    body = [_columns(r, with_before) for r in rows]
    if len(rows) > 1:
        body.append(_columns(gross(rows), with_before))
    return _header(with_before), body


def format_table(rows: list[RecordRow]) -> str:
    header, body = report_rows(rows)
    widths = [max(len(c) for c in col) for col in zip(header, *body)]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
             for r in [header, *body]]
    return "\n".join(lines)


def format_csv(rows: list[RecordRow]) -> str:
    header, body = report_rows(rows)
    return "\n".join(",".join(r) for r in [header, *body]) + "\n"


def f1_differences(rows: list[RecordRow]) -> list[Fraction]:
    return [r.after.f1 - r.before.f1 for r in rows if r.before is not None]
