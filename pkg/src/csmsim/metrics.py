"""Waveform containers, CSV I/O and the expected-waveform-similarity metric."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, ParseError

GRID_RTOL = 1e-9


@dataclass
class Waveform:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape or self.times.ndim != 1 or len(self.times) < 2:
            raise ContractViolation("waveform needs matching 1-D times/values with >= 2 samples")
        if np.any(np.diff(self.times) <= 0):
            raise ContractViolation("waveform times must be strictly increasing")


def _same_grid(a, b) -> bool:
    if a.shape != b.shape:
        return False
    span = max(abs(a[-1] - a[0]), 1e-300)
    return bool(np.all(np.abs(a - b) <= GRID_RTOL * span))


def e_sim(reference: Waveform, test: Waveform, v_dd: float) -> float:
    """Time-averaged |reference - test| normalised by v_dd (trapezoidal rule).

    Returns a ratio; multiply by 100 for percent.
    """
    if not v_dd > 0:
        raise ContractViolation("v_dd must be positive")
    if not _same_grid(reference.times, test.times):
        raise ContractViolation("waveforms are on different time grids; resample first")
    t = reference.times
    horizon = t[-1] - t[0]
    if horizon <= 0:
        raise ContractViolation("zero-length horizon")
    return float(np.trapezoid(np.abs(reference.values - test.values), t) / (horizon * v_dd))


def resample(w: Waveform, grid) -> Waveform:
    grid = np.asarray(grid, dtype=float)
    span = w.times[-1] - w.times[0]
    tol = GRID_RTOL * span
    if grid.min() < w.times[0] - tol or grid.max() > w.times[-1] + tol:
        raise ContractViolation("resample grid extends outside the waveform span")
    return Waveform(grid, np.interp(grid, w.times, w.values))


@dataclass
class WaveformSet:
    """Voltage traces for a set of nets sampled on one uniform grid."""

    times: np.ndarray
    traces: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        for name, vals in self.traces.items():
            vals = np.asarray(vals, dtype=float)
            if vals.shape != self.times.shape:
                raise ContractViolation(f"trace {name!r} length differs from the time grid")
            self.traces[name] = vals

    @property
    def nets(self) -> list:
        return list(self.traces)

    @property
    def dT(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def horizon(self) -> float:
        return float(self.times[-1] - self.times[0])

    def waveform(self, net: str) -> Waveform:
        return Waveform(self.times, self.traces[net])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time"] + self.nets)
        cols = [self.traces[n] for n in self.nets]
        for i, t in enumerate(self.times):
            w.writerow([repr(float(t))] + [repr(float(c[i])) for c in cols])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "WaveformSet":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or not rows[0] or rows[0][0] != "time":
            raise ParseError("waveform CSV must start with a 'time' header", line=1)
        header = rows[0]
        data = []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
            try:
                data.append([float(v) for v in row])
            except ValueError:
                raise ParseError(f"non-numeric field in {row!r}", line=lineno) from None
        arr = np.asarray(data, dtype=float).reshape(-1, len(header))
        return cls(arr[:, 0], {name: arr[:, j + 1] for j, name in enumerate(header[1:])})


def e_sim_multi(refs: WaveformSet, tests: WaveformSet, v_dd: float) -> dict:
    """Per-net E_sim plus the max (acceptance statistic) and mean."""
    if set(refs.nets) != set(tests.nets):
        raise ContractViolation(f"net sets differ: {sorted(set(refs.nets) ^ set(tests.nets))}")
    per_net = {n: e_sim(refs.waveform(n), tests.waveform(n), v_dd) for n in refs.nets}
    vals = list(per_net.values())
    return {"per_net": per_net, "max": max(vals), "mean": float(np.mean(vals))}
