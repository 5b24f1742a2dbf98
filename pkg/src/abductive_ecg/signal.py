"""ECG sample records and beat annotation files."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

log = logging.getLogger(__name__)


class SignalFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SignalRecord:
    fs: float
    samples: np.ndarray
    gain: float = 200.0

    def __post_init__(self):
        if not self.fs > 0:
            raise ValueError("sampling rate must be positive")
        arr = np.asarray(self.samples)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return len(self.samples)

    @property
    def duration_ms(self) -> float:
        return len(self.samples) * 1000.0 / self.fs

    def index(self, t_ms: float) -> int:
        return int(round(t_ms * self.fs / 1000.0))

    def time(self, index: int) -> int:
        return int(round(index * 1000.0 / self.fs))


def slice_ms(record: SignalRecord, t_begin: float, t_end: float) -> np.ndarray:
    """Read-only samples of the half-open window ``[t_begin, t_end)``."""
    if not 0 <= t_begin <= t_end <= record.duration_ms:
        raise ValueError(f"window [{t_begin}, {t_end}) outside record of {record.duration_ms} ms")
    return record.samples[record.index(t_begin):record.index(t_end)]


def read_signal_csv(path, channel: int = 0) -> SignalRecord:
    """Parse ``fs=<hz>`` [``gain=<units/mV>``] followed by one row per sample."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise SignalFormatError(f"{path}: empty file")
    head = lines[0].strip()
    if not head.startswith("fs="):
        raise SignalFormatError(f"{path}:1: expected 'fs=<rate>' header, got {head!r}")
    try:
        fs = float(head[3:])
    except ValueError:
        raise SignalFormatError(f"{path}:1: bad sampling rate {head[3:]!r}") from None
    gain = 200.0
    start = 1
    if len(lines) > 1 and lines[1].strip().startswith("gain="):
        try:
            gain = float(lines[1].strip()[5:])
        except ValueError:
            raise SignalFormatError(f"{path}:2: bad gain") from None
        start = 2
    samples = []
    for lineno, line in enumerate(lines[start:], start=start + 1):
        line = line.strip()
        if not line:
            continue
        cols = line.split(",")
        if channel >= len(cols):
            raise SignalFormatError(f"{path}:{lineno}: no channel {channel}")
        try:
            samples.append(int(cols[channel]))
        except ValueError:
            raise SignalFormatError(f"{path}:{lineno}: non-numeric sample {cols[channel]!r}") from None
    if not samples:
        raise SignalFormatError(f"{path}: no samples")
    return SignalRecord(fs, np.array(samples, dtype=np.int64), gain)


def write_signal_csv(record: SignalRecord, path):
    with open(path, "w") as fh:
        fh.write(f"fs={record.fs:g}\ngain={record.gain:g}\n")
        fh.write("\n".join(str(int(v)) for v in record.samples))
        fh.write("\n")


class Annotation(NamedTuple):
    time: int
    label: str = "N"


def canonical(annotations) -> list[Annotation]:
    return sorted(set(Annotation(int(t), str(lab)) for t, lab in annotations))


def read_annotations(path) -> list[Annotation]:
    out = []
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    first = 1
    if rows and rows[0] and rows[0][0].strip() == "time_ms":
        rows = rows[1:]
        first = 2
    for lineno, row in enumerate(rows, start=first):
        if not row or not row[0].strip():
            continue
        try:
            t = int(row[0])
        except ValueError:
            raise SignalFormatError(f"{path}:{lineno}: bad time {row[0]!r}") from None
        if t < 0:
            raise SignalFormatError(f"{path}:{lineno}: negative time {t}")
        label = row[1].strip() if len(row) > 1 and row[1].strip() else "N"
        out.append(Annotation(t, label))
    if any(a.time > b.time for a, b in zip(out, out[1:])):
        log.warning("%s: annotations are not sorted; sorting", path)
        out.sort()
    return out


def write_annotations(annotations, path):
    with open(path, "w", newline="") as fh:
        fh.write("time_ms,label\n")
        for a in canonical(annotations):
            fh.write(f"{a.time},{a.label}\n")
