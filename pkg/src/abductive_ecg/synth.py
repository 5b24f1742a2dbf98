"""Synthetic ECG traces and annotation corruption for experiments and tests."""
from __future__ import annotations

import numpy as np

from .signal import Annotation, SignalRecord

# (offset ms, relative amplitude, width ms) of the Gaussian waves of one beat
QRS_WAVES = ((-20.0, -0.12, 6.0), (0.0, 1.0, 8.0), (20.0, -0.25, 6.0))
T_WAVE = (260.0, 0.25, 45.0)


def synthetic_ecg(beat_times_ms, duration_ms: float, fs: float = 250.0,
                  amplitude: float = 1000.0, noise: float = 5.0, t_wave: bool = True,
                  seed: int | None = 0, gain: float = 200.0) -> SignalRecord:
    """Integer-valued single-channel ECG with a QRS at each beat time."""
    n = int(round(duration_ms * fs / 1000.0))
    t = np.arange(n) * 1000.0 / fs
    x = np.zeros(n)
    waves = QRS_WAVES + ((T_WAVE,) if t_wave else ())
    for beat in beat_times_ms:
        for off, amp, width in waves:
            c = beat + off
            lo = np.searchsorted(t, c - 5 * width)
            hi = np.searchsorted(t, c + 5 * width)
            x[lo:hi] += amp * np.exp(-0.5 * ((t[lo:hi] - c) / width) ** 2)
    x *= amplitude
    if noise:
        x += np.random.default_rng(seed).normal(0.0, noise, n)
    return SignalRecord(fs, np.round(x).astype(np.int64), gain)


def regular_beats(duration_ms: float, rr_ms: float = 800.0, jitter_ms: float = 20.0,
                  start_ms: float = 400.0, seed: int | None = 0) -> list[int]:
    rng = np.random.default_rng(seed)
    beats = []
    t = start_ms
    while t < duration_ms - 300:
        beats.append(int(round(t)))
        t += rr_ms + rng.uniform(-jitter_ms, jitter_ms)
    return beats


def spike_train(spike_times_ms, duration_ms: float, fs: float = 250.0,
                height: int = 1000) -> SignalRecord:
    """Zero signal with a single-sample spike at each time."""
    x = np.zeros(int(round(duration_ms * fs / 1000.0)), dtype=np.int64)
    for s in spike_times_ms:
        x[int(round(s * fs / 1000.0))] = height
    return SignalRecord(fs, x)


def corrupt_annotations(annotations, fp_rate: float, fn_rate: float, seed: int | None = 0,
                        duration_ms: float | None = None, min_gap_ms: float = 200.0,
                        label: str = "N") -> list[Annotation]:
    """Delete each beat with probability ``fn_rate`` and insert
    ``round(fp_rate * n)`` spurious beats at least ``min_gap_ms`` away from
    every true beat."""
    if not (0 <= fp_rate < 1 and 0 <= fn_rate < 1):
        raise ValueError("rates must lie in [0, 1)")
    anns = sorted(Annotation(int(a[0]), a[1] if len(a) > 1 else label) for a in annotations)
    rng = np.random.default_rng(seed)
    keep = rng.random(len(anns)) >= fn_rate
    out = [a for a, k in zip(anns, keep) if k]
    n_fp = int(round(fp_rate * len(anns)))
    if duration_ms is None:
        duration_ms = (anns[-1].time + 1000) if anns else 0
    times = np.array([a.time for a in anns])
    inserted = 0
    attempts = 0
    while inserted < n_fp and attempts < 1000 * max(n_fp, 1):
        attempts += 1
        t = int(rng.integers(0, max(1, int(duration_ms))))
        if len(times) and np.min(np.abs(times - t)) < min_gap_ms:
            continue
        out.append(Annotation(t, label))
        times = np.append(times, t)
        inserted += 1
    return sorted(out)
