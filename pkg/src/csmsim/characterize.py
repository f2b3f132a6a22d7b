"""Characterization: sample cell models into training sets and LUTs."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .celllib import CellKind, TechnologyParams, output_current
from .errors import ConfigError, ParseError

MIN_SAMPLES = 10
DEFAULT_I_REF = 1e-4
DEFAULT_RAIL_FRACTION = 0.5


@dataclass(frozen=True)
class SignedLog:
    """Odd, invertible log compression ``T(i) = sign(i) log10(1 + |i| / i_ref)``.

    ``i_ref = None`` disables the transform (identity), which keeps toy
    models and hand-computed test cases readable.
    """

    i_ref: float | None = DEFAULT_I_REF

    def __post_init__(self):
        if self.i_ref is not None and not self.i_ref > 0:
            raise ConfigError("i_ref must be positive")

    def forward(self, i):
        i = np.asarray(i, dtype=float)
        if self.i_ref is None:
            return i
        return np.sign(i) * np.log1p(np.abs(i) / self.i_ref) / math.log(10.0)

    def inverse(self, t):
        t = np.asarray(t, dtype=float)
        if self.i_ref is None:
            return t
        return np.sign(t) * np.expm1(np.abs(t) * math.log(10.0)) * self.i_ref

    def to_dict(self):
        return {"type": "signed_log10" if self.i_ref is not None else "identity", "i_ref": self.i_ref}

    @classmethod
    def from_dict(cls, d):
        return cls(i_ref=d.get("i_ref"))


IDENTITY = SignedLog(None)


@dataclass
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    kind: CellKind
    transform: SignedLog = field(default_factory=SignedLog)
    seed: int = 0

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.targets = np.asarray(self.targets, dtype=float).reshape(-1)
        if len(self.inputs) != len(self.targets):
            raise ConfigError("inputs and targets differ in length")
        if self.inputs.shape[1] != self.kind.dim:
            raise ConfigError(f"{self.kind.value} datasets need {self.kind.dim} columns")
        if not np.all(np.isfinite(self.targets)):
            raise ConfigError("non-finite targets")

    def __len__(self):
        return len(self.targets)

    @property
    def currents(self) -> np.ndarray:
        return self.transform.inverse(self.targets)


def sample_dataset(kind, tech: TechnologyParams, n: int = 500, seed: int = 0,
                   transform: SignedLog | None = None,
                   rail_fraction: float = DEFAULT_RAIL_FRACTION) -> Dataset:
    """Draw ``n`` points in [0, v_dd]^D and label them with T(i_out).

    Each coordinate is uniform on [0, v_dd], except that with probability
    ``rail_fraction`` it is snapped to 0 or v_dd (equal odds).  Settled
    circuits sit on these rail faces and corners, so the surrogate needs
    samples there; ``rail_fraction=0`` gives plain uniform sampling.
    """
    kind = CellKind.parse(kind)
    if n < MIN_SAMPLES:
        raise ConfigError(f"need at least {MIN_SAMPLES} samples, got {n}")
    if not 0.0 <= rail_fraction <= 1.0:
        raise ConfigError("rail_fraction must lie in [0, 1]")
    transform = SignedLog() if transform is None else transform
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, tech.v_dd, size=(n, kind.dim))
    if rail_fraction > 0:
        snap = rng.random((n, kind.dim)) < rail_fraction
        rails = rng.integers(0, 2, size=(n, kind.dim)) * tech.v_dd
        x = np.where(snap, rails, x)
    y = transform.forward(output_current(kind, tech, x))
    return Dataset(x, y, kind, transform, seed)


def split_dataset(d: Dataset, train_fraction: float = 0.9, seed: int = 0):
    """Seeded random partition into (train, test) of sizes ceil(n f) and the rest."""
    if not 0 < train_fraction < 1:
        raise ConfigError("train_fraction must lie in (0, 1)")
    if len(d) == 0:
        raise ConfigError("cannot split an empty dataset")
    n_train = math.ceil(len(d) * train_fraction)
    perm = np.random.default_rng(seed).permutation(len(d))
    parts = perm[:n_train], perm[n_train:]
    return tuple(Dataset(d.inputs[p], d.targets[p], d.kind, d.transform, d.seed) for p in parts)


@dataclass(frozen=True)
class GridSpec:
    points_per_axis: int = 33
    lo: float | tuple = 0.0
    hi: float | tuple | None = None

    def __post_init__(self):
        if self.points_per_axis < 2:
            raise ConfigError("points_per_axis must be at least 2")

    def axes(self, dim: int, v_dd: float) -> list[np.ndarray]:
        lo = np.broadcast_to(np.asarray(self.lo, dtype=float), (dim,))
        hi = np.broadcast_to(np.asarray(v_dd if self.hi is None else self.hi, dtype=float), (dim,))
        if np.any(lo >= hi):
            raise ConfigError("grid lo must be below hi on every axis")
        if np.any(lo > 0) or np.any(hi < v_dd):
            raise ConfigError("grid must cover [0, v_dd] on every axis")
        return [np.linspace(a, b, self.points_per_axis) for a, b in zip(lo, hi)]


def build_lut(kind, tech: TechnologyParams, grid: GridSpec | None = None):
    """Tabulate raw output current on a full tensor grid (no log transform)."""
    from .lut import Lut

    kind = CellKind.parse(kind)
    grid = GridSpec() if grid is None else grid
    axes = grid.axes(kind.dim, tech.v_dd)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    values = output_current(kind, tech, mesh).reshape(-1)
    return Lut(kind, axes, values)


DATASET_HEADER_PREFIX = "# csmsim-dataset"


def dataset_to_csv(d: Dataset) -> str:
    buf = io.StringIO()
    buf.write(f"{DATASET_HEADER_PREFIX} kind={d.kind.value} i_ref={d.transform.i_ref!r} seed={d.seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"v{j}" for j in range(d.kind.dim)] + ["target"])
    for x, y in zip(d.inputs, d.targets):
        w.writerow([repr(float(v)) for v in x] + [repr(float(y))])
    return buf.getvalue()


def dataset_from_csv(text: str) -> Dataset:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(DATASET_HEADER_PREFIX):
        raise ParseError("missing dataset header", line=1)
    meta = dict(tok.split("=", 1) for tok in lines[0][len(DATASET_HEADER_PREFIX):].split())
    kind = CellKind.parse(meta["kind"])
    i_ref = None if meta["i_ref"] == "None" else float(meta["i_ref"])
    rows = []
    for lineno, row in enumerate(csv.reader(lines[2:]), start=3):
        if not row:
            continue
        try:
            rows.append([float(v) for v in row])
        except ValueError:
            raise ParseError(f"non-numeric field in {row!r}", line=lineno) from None
        if len(row) != kind.dim + 1:
            raise ParseError(f"expected {kind.dim + 1} fields, got {len(row)}", line=lineno)
    arr = np.asarray(rows, dtype=float).reshape(-1, kind.dim + 1)
    return Dataset(arr[:, :-1], arr[:, -1], kind, SignedLog(i_ref), int(meta.get("seed", 0)))
