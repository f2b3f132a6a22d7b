"""One declarative JSON run configuration shared by every CLI command."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .celllib import TechnologyParams
from .characterize import DEFAULT_I_REF, DEFAULT_RAIL_FRACTION, GridSpec, SignedLog
from .costmodel import CpuSpec, GpuSpec
from .engine import SimConfig
from .errors import ConfigError
from .mlp import SearchSetup, TrainConfig


@dataclass(frozen=True)
class DatasetConfig:
    samples: int = 500
    train_fraction: float = 0.9
    rail_fraction: float = DEFAULT_RAIL_FRACTION
    i_ref: float | None = DEFAULT_I_REF


@dataclass(frozen=True)
class SearchConfig:
    min_hidden: int = 5
    max_hidden: int = 40
    threshold: float = 0.01
    suite_size: int = 20
    horizon: float = 10e-12

    def __post_init__(self):
        if not 1 <= self.min_hidden <= self.max_hidden:
            raise ConfigError("need 1 <= min_hidden <= max_hidden")
        if self.threshold < 0:
            raise ConfigError("threshold must be non-negative")
        if self.suite_size < 1:
            raise ConfigError("suite_size must be >= 1")

    @property
    def sizes(self) -> tuple:
        return tuple(range(self.min_hidden, self.max_hidden + 1))


def _build(cls, d, section: str):
    if d is None:
        return cls()
    if not isinstance(d, dict):
        raise ConfigError(f"section {section!r} must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")
    kwargs = dict(d)
    if cls is SimConfig and kwargs.get("trace") is not None:
        kwargs["trace"] = tuple(kwargs["trace"])
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad {section!r} section: {exc}") from None


@dataclass
class RunConfig:
    seed: int = 0
    technology: TechnologyParams = field(default_factory=TechnologyParams)
    grid: GridSpec = field(default_factory=GridSpec)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    reference_refine: int = 100
    cpu: CpuSpec = field(default_factory=CpuSpec)
    gpu: GpuSpec = field(default_factory=GpuSpec)
    allocation: str = "cores"
    out_dir: str = "csmsim-out"
    bench_dirs: list = field(default_factory=list)

    def __post_init__(self):
        if self.reference_refine < 1:
            raise ConfigError("reference_refine must be >= 1")
        if self.allocation not in ("cores", "sm"):
            raise ConfigError("allocation must be 'cores' or 'sm'")

    @property
    def transform(self) -> SignedLog:
        return SignedLog(self.dataset.i_ref)

    def train_config(self) -> TrainConfig:
        return dataclasses.replace(self.train, seed=self.seed)

    def search_setup(self) -> SearchSetup:
        return SearchSetup(samples=self.dataset.samples, train_fraction=self.dataset.train_fraction,
                           data_seed=self.seed, rail_fraction=self.dataset.rail_fraction,
                           suite_size=self.search.suite_size, suite_seed=self.seed + 1,
                           horizon=self.search.horizon, train=self.train_config(),
                           transform=self.transform)

    def to_dict(self) -> dict:
        def plain(obj):
            return {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)}

        sim = plain(self.sim)
        sim["trace"] = list(sim["trace"]) if sim["trace"] is not None else None
        grid = plain(self.grid)
        return {
            "seed": self.seed,
            "technology": self.technology.to_dict(),
            "grid": grid,
            "dataset": plain(self.dataset),
            "train": plain(self.train),
            "search": plain(self.search),
            "sim": sim,
            "reference_refine": self.reference_refine,
            "cpu": plain(self.cpu),
            "gpu": plain(self.gpu),
            "allocation": self.allocation,
            "out_dir": self.out_dir,
            "bench_dirs": list(self.bench_dirs),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = {k: v for k, v in d.items() if k in ("seed", "reference_refine", "allocation", "out_dir", "bench_dirs")}
        if "technology" in d:
            kw["technology"] = TechnologyParams.from_dict(d["technology"])
        sections = {"grid": GridSpec, "dataset": DatasetConfig, "train": TrainConfig,
                    "search": SearchConfig, "sim": SimConfig, "cpu": CpuSpec, "gpu": GpuSpec}
        for name, sec_cls in sections.items():
            if name in d:
                kw[name] = _build(sec_cls, d[name], name)
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "RunConfig":
        p = Path(path)
        try:
            doc = json.loads(p.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {p} is not valid JSON: {exc}") from None
        return cls.from_dict(doc)
