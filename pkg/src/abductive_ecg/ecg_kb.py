"""Rhythm knowledge base for beat-annotation correction.

Observables: BeatAnn and QRS (instantaneous), NormalRhythm, Bradycardia,
Tachycardia and Extrasystole.  All constraint values are in milliseconds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .model import (HB, HE, AbstractionModel, Observable, Observation,
                    PatternGrammar, Production, fvar)
from .signal import SignalRecord
from .stp import INF, Interval

BEAT = "BeatAnn"
QRS = "QRS"
RHYTHMS = ("NormalRhythm", "Bradycardia", "Tachycardia", "Extrasystole")

NRR = Interval(475, 1333)
BRR = Interval(1000, 2000)
TRR = Interval(200, 600)
RR_BANDS = {"NormalRhythm": NRR, "Bradycardia": BRR, "Tachycardia": TRR}

BEAT_TO_QRS = Interval(-150, 150)
EXTRA_FIRST_RR = Interval(200, 2000)

OBSERVABLES = {
    BEAT: Observable(BEAT, instantaneous=True),
    QRS: Observable(QRS, instantaneous=True),
    **{name: Observable(name) for name in RHYTHMS},
}

# -- wavelet energy ------------------------------------------------------------

LOWPASS = np.array([1.0, 3.0, 3.0, 1.0]) / 8.0
HIGHPASS = np.array([2.0, -2.0])


def _dilate(h: np.ndarray, j: int) -> np.ndarray:
    if j == 0:
        return h
    out = np.zeros((len(h) - 1) * 2 ** j + 1)
    out[:: 2 ** j] = h
    return out


def wavelet_filter(scale: int = 4) -> np.ndarray:
    """Equivalent filter of the a-trous detail at dyadic ``scale``."""
    level = int(round(np.log2(scale)))
    if level < 1 or 2 ** level != scale:
        raise ValueError(f"scale must be a power of two >= 2, got {scale}")
    filt = np.array([1.0])
    for j in range(level - 1):
        filt = np.convolve(filt, _dilate(LOWPASS, j))
    return np.convolve(filt, _dilate(HIGHPASS, level - 1))


def dyadic_wavelet(x, scale: int = 4) -> np.ndarray:
    """Quadratic-spline a-trous detail coefficients, delay compensated."""
    x = np.asarray(x, dtype=float)
    filt = wavelet_filter(scale)
    shift = (len(filt) - 1) // 2
    return np.convolve(x, filt)[shift:shift + len(x)]


def wavelet_energy(x, fs: float, scale: int = 4, sigma_ms: float = 25.0) -> np.ndarray:
    """Squared detail smoothed with a Gaussian so its peak sits on the QRS
    rather than on one of the two modulus maxima around it."""
    psi2 = dyadic_wavelet(x, scale) ** 2
    sigma = sigma_ms * fs / 1000.0
    if sigma <= 0 or len(psi2) == 0:
        return psi2
    return gaussian_filter1d(psi2, sigma, mode="nearest")


def signal_mode(segment) -> int:
    """Most frequent amplitude; ties resolve to the smaller amplitude."""
    values, counts = np.unique(np.asarray(segment).astype(np.int64), return_counts=True)
    return int(values[np.argmax(counts)])


def max_deviation_index(segment) -> int:
    seg = np.asarray(segment)
    return int(np.argmax(np.abs(seg.astype(np.int64) - signal_mode(seg))))


# -- observation procedures ------------------------------------------------------


@dataclass(eq=False)
class EcgContext:
    """Signal-side state the procedures of one fragment share.

    ``energy`` covers ``record.samples`` in full; ``extent`` limits the
    windows procedures may look at (the fragment).
    """

    record: SignalRecord
    energy: np.ndarray
    extent: Interval
    threshold: float = 0.0
    gate_qrs: bool = True
    gate_halfwidth_ms: float = 50.0
    origin: int = 0

    @classmethod
    def build(cls, record: SignalRecord, annotation_times=(), extent: Interval | None = None,
              scale: int = 4, sigma_ms: float = 25.0, gate_qrs: bool = True,
              relative_threshold: float = 0.1, floor_factor: float = 4.0, origin: int = 0):
        """``origin`` is the absolute sample index of ``record.samples[0]``."""
        energy = wavelet_energy(record.samples, record.fs, scale, sigma_ms)
        if extent is None:
            extent = Interval(record.time(origin), max(0, record.time(origin + len(record)) - 1))
        ctx = cls(record, energy, extent, 0.0, gate_qrs, origin=origin)
        lo, hi = ctx._indices(extent)
        noise = energy[lo:min(hi + 1, lo + record.index(1000))]
        floor = floor_factor * float(np.median(noise)) if len(noise) else 0.0
        peaks = []
        for t in annotation_times:
            w = ctx.clip(BEAT_TO_QRS.shift(int(t)))
            if w is not None:
                a, b = ctx._indices(w)
                peaks.append(energy[a:b + 1].max())
        ref = relative_threshold * float(np.median(peaks)) if peaks else 0.0
        ctx.threshold = max(ref, floor)
        return ctx

    def clip(self, window: Interval) -> Interval | None:
        return window.intersect(self.extent)

    def _indices(self, window: Interval) -> tuple[int, int]:
        rec = self.record
        a = max(0, int(np.ceil(window.lower * rec.fs / 1000.0)) - self.origin)
        b = min(len(rec) - 1, int(np.floor(window.upper * rec.fs / 1000.0)) - self.origin)
        return a, b

    def _window(self, window: Interval):
        w = self.clip(window)
        if w is None:
            return None
        a, b = self._indices(w)
        return (a, b) if a <= b else None

    def locate_beat(self, window: Interval) -> int | None:
        """Time of maximum wavelet energy in ``window``, if above threshold."""
        idx = self._window(window)
        if idx is None:
            return None
        a, b = idx
        i = a + int(np.argmax(self.energy[a:b + 1]))
        if not self.energy[i] > self.threshold:
            return None
        return self._time_in(i, window)

    def locate_qrs(self, window: Interval) -> int | None:
        """Point of maximum deviation from the window's mode."""
        idx = self._window(window)
        if idx is None:
            return None
        a, b = idx
        i = a + max_deviation_index(self.record.samples[a:b + 1])
        if self.gate_qrs:
            half = self.record.index(self.gate_halfwidth_ms)
            lo, hi = max(0, i - half), min(len(self.energy), i + half + 1)
            if not self.energy[lo:hi].max() > self.threshold:
                return None
        return self._time_in(i, window)

    def _time_in(self, i: int, window: Interval) -> int:
        t = self.record.time(i + self.origin)
        return int(min(max(t, window.lower), window.upper))


def pi_beatann(record: SignalRecord, window: Interval, threshold: float = 0.0,
               scale: int = 4, sigma_ms: float = 25.0) -> Observation | None:
    """Beat annotation at the wavelet-energy maximum of ``window``."""
    _require_inside(record, window)
    ctx = EcgContext(record, wavelet_energy(record.samples, record.fs, scale, sigma_ms),
                     Interval(0, record.duration_ms), threshold)
    t = ctx.locate_beat(window)
    return None if t is None else Observation(BEAT, t, t)


def pi_qrs(record: SignalRecord, window: Interval) -> Observation:
    """QRS at the maximum deviation from the mode of ``window``."""
    _require_inside(record, window)
    ctx = EcgContext(record, np.zeros(len(record)), Interval(0, record.duration_ms), gate_qrs=False)
    t = ctx.locate_qrs(window)
    return Observation(QRS, t, t)


def _require_inside(record, window):
    if window.lower < 0 or window.upper > record.duration_ms:
        raise ValueError(f"window {window} outside record of {record.duration_ms} ms")


def _proc_beatann(pattern, evidence, ctx):
    if ctx is None:
        return None
    t = ctx.locate_beat(pattern.interval(HB))
    return None if t is None else Observation(BEAT, t, t)


def _proc_qrs(pattern, evidence, ctx):
    window = pattern.interval(HB)
    if ctx is None:
        t = evidence[0].tb
        return Observation(QRS, t, t) if t in window else None
    t = ctx.locate_qrs(window)
    return None if t is None else Observation(QRS, t, t)


# -- temporal descriptors ----------------------------------------------------------


def _cdiv(a: int, b: int) -> int:
    return -(-a // b)


def _fixed(*entries):
    def gen(ctx):
        return list(entries)
    return gen


def _first_beat(ctx):
    return [(fvar(0), HB, Interval(0, 0))]


def _second_beat(band):
    def gen(ctx):
        return [(fvar(0), fvar(1), band), (fvar(1), HE, Interval(0, INF))]
    return gen


def _next_beat(band):
    def gen(ctx):
        n = ctx.index
        rr = ctx.time(n - 1) - ctx.time(n - 2)
        local = Interval(_cdiv(rr, 2), (3 * rr) // 2) if rr > 0 else None
        step = band.intersect(local) if local is not None else None
        return [(fvar(n - 1), fvar(n), step), (fvar(n), HE, Interval(0, INF))]
    return gen


def _pin_end(ctx):
    return [(fvar(ctx.index - 1), HE, Interval(0, 0))]


def _premature_beat(ctx):
    rr0 = ctx.time(1) - ctx.time(0)
    hi = (9 * rr0) // 10
    return [(fvar(1), fvar(2), Interval(200, hi) if hi >= 200 else None)]


def _compensatory_pause(ctx):
    rr0 = ctx.time(1) - ctx.time(0)
    rr1 = ctx.time(2) - ctx.time(1)
    return [
        (fvar(1), fvar(3), Interval(_cdiv(17 * rr0, 10), (23 * rr0) // 10)),
        (fvar(2), fvar(3), Interval(_cdiv(5 * rr1, 4), 4 * rr1)),
        (fvar(3), HE, Interval(0, 0)),
    ]


def rhythm_grammar(name: str, band: Interval) -> PatternGrammar:
    l2n = _next_beat(band)
    return PatternGrammar(
        name=f"P2-{name}",
        hypothesis=OBSERVABLES[name],
        productions=(
            Production("H", QRS, _first_beat, "A"),
            Production("A", QRS, _second_beat(band), "B"),
            Production("B", QRS, l2n, "B"),
            Production("B", QRS, l2n, None),
        ),
        closing=_pin_end,
    )


def build_model() -> AbstractionModel:
    p0 = PatternGrammar("P0", OBSERVABLES[BEAT], (Production("H"),), procedure=_proc_beatann)
    p1 = PatternGrammar(
        "P1", OBSERVABLES[QRS],
        (Production("H", BEAT, _fixed((HB, fvar(0), BEAT_TO_QRS)), None),),
        procedure=_proc_qrs)
    rhythms = [rhythm_grammar(name, band) for name, band in RR_BANDS.items()]
    p5 = PatternGrammar(
        "P5", OBSERVABLES["Extrasystole"],
        (
            Production("H", QRS, _first_beat, "C"),
            Production("C", QRS, _fixed((fvar(0), fvar(1), EXTRA_FIRST_RR)), "D"),
            Production("D", QRS, _premature_beat, "E"),
            Production("E", QRS, _compensatory_pause, None),
        ),
    )
    return AbstractionModel(dict(OBSERVABLES), [p0, p1, *rhythms, p5])
