"""Analytical current-source models for the INV / NAND2 / NOR2 library.

Each cell is described by a voltage-controlled output current plus three
constant capacitors (input, Miller, output).  The closed forms below act as
the device-accurate ground truth that LUTs and neural surrogates are fitted
against:

    sp(x) = ln(1 + e^x)
    f(v)  = sp(k_sharp * (v - v_th))**2       gate drive
    g(v)  = tanh(alpha_sat * v)               drain saturation

    INV    i = G * [f(vdd - vi) g(vdd - vo) - f(vi) g(vo)]
    NAND2  i = G * [(f(vdd - a) + f(vdd - b)) g(vdd - vo) - 2 S(a, b) g(vo)]
           S(a, b) = f(a) f(b) / (f(a) + f(b) + eps)
    NOR2   i(a, b, vo) = -NAND2(vdd - a, vdd - b, vdd - vo)

The output current is positive when it charges the output node.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, ContractViolation

SERIES_EPS = 1e-18


class CellKind(enum.Enum):
    INV = "INV"
    NAND2 = "NAND2"
    NOR2 = "NOR2"

    @property
    def input_count(self) -> int:
        return 1 if self is CellKind.INV else 2

    @property
    def dim(self) -> int:
        return self.input_count + 1

    @classmethod
    def parse(cls, name) -> "CellKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).upper())
        except ValueError:
            raise ConfigError(f"unknown cell kind {name!r}") from None


ALL_KINDS = (CellKind.INV, CellKind.NAND2, CellKind.NOR2)


def csm_input_dim(kind: CellKind) -> int:
    """Number of voltages a cell's CSM components depend on (inputs + output)."""
    return CellKind.parse(kind).dim


def _per_kind(value):
    return {k: value for k in ALL_KINDS}


@dataclass(frozen=True)
class TechnologyParams:
    v_dd: float = 0.7
    v_th: float = 0.2
    k_sharp: float = 20.0
    alpha_sat: float = 10.0
    g_scale: float = 1e-6
    c_in: dict = field(default_factory=lambda: _per_kind(0.1e-15))
    c_m: dict = field(default_factory=lambda: _per_kind(0.02e-15))
    c_out: dict = field(default_factory=lambda: _per_kind(0.1e-15))
    name: str = "surrogate-7nm"

    def __post_init__(self):
        if not self.v_dd > 0:
            raise ConfigError("v_dd must be positive")
        if not 0 < self.v_th < self.v_dd:
            raise ConfigError("v_th must lie strictly inside (0, v_dd)")
        for attr in ("k_sharp", "alpha_sat", "g_scale"):
            if not getattr(self, attr) > 0:
                raise ConfigError(f"{attr} must be positive")
        for attr in ("c_in", "c_m", "c_out"):
            table = {CellKind.parse(k): float(v) for k, v in getattr(self, attr).items()}
            missing = set(ALL_KINDS) - set(table)
            if missing:
                raise ConfigError(f"{attr} missing for {sorted(k.value for k in missing)}")
            if any(not c > 0 for c in table.values()):
                raise ConfigError(f"{attr} entries must be positive")
            object.__setattr__(self, attr, table)

    @property
    def v_lo(self) -> float:
        return -0.2 * self.v_dd

    @property
    def v_hi(self) -> float:
        return 1.2 * self.v_dd

    def with_(self, **changes) -> "TechnologyParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "v_dd": self.v_dd,
            "v_th": self.v_th,
            "k_sharp": self.k_sharp,
            "alpha_sat": self.alpha_sat,
            "g_scale": self.g_scale,
            "c_in": {k.value: v for k, v in self.c_in.items()},
            "c_m": {k.value: v for k, v in self.c_m.items()},
            "c_out": {k.value: v for k, v in self.c_out.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TechnologyParams":
        d = dict(d)
        for attr in ("c_in", "c_m", "c_out"):
            if attr in d and not isinstance(d[attr], dict):
                d[attr] = _per_kind(float(d[attr]))
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown technology fields: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class CsmComponents:
    i_out: float
    c_in: float
    c_m: float
    c_out: float


def _drive(tech: TechnologyParams, v):
    return np.logaddexp(0.0, tech.k_sharp * (v - tech.v_th)) ** 2


def _sat(tech: TechnologyParams, v):
    return np.tanh(tech.alpha_sat * v)


def _nand2(tech, a, b, vo):
    vdd = tech.v_dd
    pull_up = _drive(tech, vdd - a) + _drive(tech, vdd - b)
    fa, fb = _drive(tech, a), _drive(tech, b)
    series = fa * fb / (fa + fb + SERIES_EPS)
    return tech.g_scale * (pull_up * _sat(tech, vdd - vo) - 2.0 * series * _sat(tech, vo))


def output_current(kind: CellKind, tech: TechnologyParams, v) -> np.ndarray:
    """Vectorised output current; ``v`` has shape (..., D), result shape (...)."""
    kind = CellKind.parse(kind)
    v = np.asarray(v, dtype=float)
    if v.shape[-1:] != (kind.dim,):
        raise ContractViolation(f"{kind.value} expects {kind.dim} voltages, got shape {v.shape}")
    vdd = tech.v_dd
    if kind is CellKind.INV:
        vi, vo = v[..., 0], v[..., 1]
        return tech.g_scale * (
            _drive(tech, vdd - vi) * _sat(tech, vdd - vo) - _drive(tech, vi) * _sat(tech, vo)
        )
    if kind is CellKind.NAND2:
        return _nand2(tech, v[..., 0], v[..., 1], v[..., 2])
    return -_nand2(tech, vdd - v[..., 0], vdd - v[..., 1], vdd - v[..., 2])


def eval_csm(kind: CellKind, tech: TechnologyParams, v) -> CsmComponents:
    """Evaluate all CSM components of one cell at a single voltage point."""
    kind = CellKind.parse(kind)
    v = np.asarray(v, dtype=float)
    if v.shape != (kind.dim,):
        raise ContractViolation(f"{kind.value} expects {kind.dim} voltages, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ContractViolation("non-finite voltage")
    return CsmComponents(
        i_out=float(output_current(kind, tech, v)),
        c_in=tech.c_in[kind],
        c_m=tech.c_m[kind],
        c_out=tech.c_out[kind],
    )
