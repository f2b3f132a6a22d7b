"""D-dimensional lookup tables with clamped multilinear interpolation."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .celllib import CellKind
from .errors import ContractViolation, ParseError


@dataclass
class Lut:
    kind: CellKind
    axes: list
    values: np.ndarray

    def __post_init__(self):
        self.kind = CellKind.parse(self.kind)
        self.axes = [np.asarray(a, dtype=float) for a in self.axes]
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        for a in self.axes:
            if a.ndim != 1 or len(a) < 2 or np.any(np.diff(a) <= 0):
                raise ContractViolation("LUT axes must be strictly increasing with >= 2 points")
        if self.values.size != int(np.prod(self.shape)):
            raise ContractViolation("LUT value count does not match the axis lengths")
        if not np.all(np.isfinite(self.values)):
            raise ContractViolation("LUT values must be finite")

    @property
    def dims(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return tuple(len(a) for a in self.axes)

    def __len__(self):
        return self.values.size

    def query(self, points) -> np.ndarray:
        return query(self, points)

    def to_json(self) -> str:
        header = {"kind": self.kind.value, "dims": self.dims, "axes": [a.tolist() for a in self.axes]}
        return json.dumps({"header": header, "values": self.values.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "Lut":
        try:
            doc = json.loads(text)
            header = doc["header"]
            lut = cls(header["kind"], header["axes"], doc["values"])
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ParseError(f"bad LUT file: {exc}") from None
        if lut.dims != header.get("dims", lut.dims):
            raise ParseError("LUT header dims disagree with axes")
        return lut


def query(lut: Lut, points) -> np.ndarray:
    """Interpolate at ``points`` of shape (..., D); out-of-grid coordinates are clamped."""
    p = np.asarray(points, dtype=float)
    if p.shape[-1:] != (lut.dims,):
        raise ContractViolation(f"expected points with {lut.dims} coordinates, got shape {p.shape}")
    lead = p.shape[:-1]
    p = p.reshape(-1, lut.dims)
    lo_idx, frac = [], []
    for d, axis in enumerate(lut.axes):
        x = np.clip(p[:, d], axis[0], axis[-1])
        j = np.clip(np.searchsorted(axis, x, side="right") - 1, 0, len(axis) - 2)
        lo_idx.append(j)
        frac.append((x - axis[j]) / (axis[j + 1] - axis[j]))
    strides = np.cumprod((lut.shape[1:] + (1,))[::-1])[::-1]
    out = np.zeros(len(p))
    for corner in itertools.product((0, 1), repeat=lut.dims):
        w = np.ones(len(p))
        flat = np.zeros(len(p), dtype=np.int64)
        for d, bit in enumerate(corner):
            w = w * (frac[d] if bit else 1.0 - frac[d])
            flat += (lo_idx[d] + bit) * strides[d]
        out += w * lut.values[flat]
    return out.reshape(lead)


def queries_per_eval(lut: Lut, override: int | None = None) -> int:
    """Memory transactions charged per CSM evaluation (2^D corners unless overridden)."""
    if override is not None:
        if override < 1:
            raise ContractViolation("queries_per_eval override must be >= 1")
        return int(override)
    return 2 ** lut.dims
