"""Analytical CPU (LUT) vs GPU (resident NN models) per-interval timing model."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .celllib import ALL_KINDS, CellKind
from .errors import CapacityError, ConfigError, ContractViolation, NumericalError
from .lut import queries_per_eval
from .mlp import core_requirement_dims, gpu_latency_cycles


@dataclass(frozen=True)
class CpuSpec:
    cores: int = 24
    base_freq: float = 2.4e9
    dram_latency: int = 250
    l1_latency: int = 4
    memory_channels: int = 4
    memory_tier: str = "dram"

    def __post_init__(self):
        if min(self.cores, self.base_freq, self.dram_latency, self.l1_latency, self.memory_channels) <= 0:
            raise ConfigError("CPU spec fields must be positive")
        if self.memory_tier not in ("dram", "l1"):
            raise ConfigError("memory_tier must be 'dram' or 'l1'")

    @property
    def query_latency(self) -> int:
        """Cycles per LUT transaction: DRAM by default, L1 when tables are assumed cache-resident."""
        return self.dram_latency if self.memory_tier == "dram" else self.l1_latency


@dataclass(frozen=True)
class GpuSpec:
    sms: int = 80
    cores_per_sm: int = 64
    base_freq: float = 1.45e9

    def __post_init__(self):
        if min(self.sms, self.cores_per_sm, self.base_freq) <= 0:
            raise ConfigError("GPU spec fields must be positive")

    @property
    def total_cores(self) -> int:
        return self.sms * self.cores_per_sm


@dataclass(frozen=True)
class ModelShape:
    """The two numbers the cost model needs from a network: input dim and hidden width."""

    d_in: int
    hidden: int

    @property
    def cores(self) -> int:
        return core_requirement_dims(self.d_in, self.hidden)

    @property
    def latency(self) -> int:
        return gpu_latency_cycles(self.d_in, self.hidden)

    @classmethod
    def of(cls, model) -> "ModelShape":
        if isinstance(model, ModelShape):
            return model
        return cls(model.d_in, model.hidden)


def _shapes(models: dict) -> dict:
    return {CellKind.parse(k): ModelShape.of(m) for k, m in models.items()}


def _hist(hist: dict) -> dict:
    out = {CellKind.parse(k): int(v) for k, v in hist.items()}
    if any(v < 0 for v in out.values()):
        raise ContractViolation("gate counts must be non-negative")
    return out


@dataclass
class Allocation:
    instances: dict
    cores_used: int
    total_cores: int
    granularity: str = "cores"

    def to_dict(self) -> dict:
        return {"instances": {k.value: n for k, n in self.instances.items()},
                "cores_used": self.cores_used, "total_cores": self.total_cores,
                "granularity": self.granularity}


def allocate_models(hist: dict, models: dict, gpu: GpuSpec | None = None,
                    granularity: str = "cores") -> Allocation:
    """Decide how many copies of each cell's network stay resident on the GPU.

    ``granularity="cores"`` shares the core pool in proportion to each kind's
    core demand ``count_k * c_k``, floors, then adds single instances greedily
    to the kind with the most gates per instance while any model still fits.
    ``granularity="sm"`` treats every streaming multiprocessor as one slot that
    hosts a single model (a model needing more than one SM's cores spans
    ``ceil(c_k / cores_per_sm)`` slots) and shares slots by gate count.
    """
    gpu = GpuSpec() if gpu is None else gpu
    hist = {k: v for k, v in _hist(hist).items() if v > 0}
    if not hist:
        raise ContractViolation("gate histogram is empty")
    shapes = _shapes(models)
    missing = [k.value for k in hist if k not in shapes]
    if missing:
        raise ContractViolation(f"no model for {missing}")
    kinds = [k for k in ALL_KINDS if k in hist]
    if granularity == "cores":
        unit = {k: shapes[k].cores for k in kinds}
        budget = gpu.total_cores
        share = {k: hist[k] * unit[k] for k in kinds}
    elif granularity == "sm":
        unit = {k: math.ceil(shapes[k].cores / gpu.cores_per_sm) for k in kinds}
        budget = gpu.sms
        share = {k: hist[k] * unit[k] for k in kinds}
    else:
        raise ConfigError(f"unknown allocation granularity {granularity!r}")
    if sum(unit.values()) > budget:
        raise CapacityError(f"one instance of every kind needs {sum(unit.values())} units, "
                            f"only {budget} available")
    total_share = sum(share.values())
    inst = {k: max(1, math.floor(budget * share[k] / total_share / unit[k])) for k in kinds}
    while sum(inst[k] * unit[k] for k in kinds) > budget:
        k = max((k for k in kinds if inst[k] > 1), key=lambda k: (inst[k] / hist[k], -kinds.index(k)))
        inst[k] -= 1
    while True:
        free = budget - sum(inst[k] * unit[k] for k in kinds)
        fits = [k for k in kinds if unit[k] <= free]
        if not fits:
            break
        k = max(fits, key=lambda k: (hist[k] / inst[k], -kinds.index(k)))
        inst[k] += 1
    cores = sum(inst[k] * shapes[k].cores for k in kinds)
    if cores > gpu.total_cores:
        raise CapacityError(f"allocation needs {cores} cores, GPU has {gpu.total_cores}")
    return Allocation(inst, cores, gpu.total_cores, granularity)


def gpu_interval_time(active: dict, alloc: Allocation, models: dict, gpu: GpuSpec | None = None) -> float:
    """Batches of the busiest kind times the slowest model's latency, in seconds."""
    gpu = GpuSpec() if gpu is None else gpu
    active = {k: v for k, v in _hist(active).items() if v > 0}
    if not active:
        return 0.0
    shapes = _shapes(models)
    for k in active:
        if alloc.instances.get(k, 0) < 1:
            raise ContractViolation(f"allocation has no {k.value} instances")
    batches = max(math.ceil(n / alloc.instances[k]) for k, n in active.items())
    latency = max(shapes[k].latency for k in active)
    return batches * latency / gpu.base_freq


def cpu_interval_time(active: dict, queries: dict, cpu: CpuSpec | None = None) -> float:
    """Memory-bound LUT time: every query costs ``cpu.query_latency`` cycles, spread over the channels.

    ``queries`` maps a cell kind to its memory transactions per evaluation
    (a :class:`~csmsim.lut.Lut`, or an int override).
    """
    cpu = CpuSpec() if cpu is None else cpu
    total = 0
    for k, n in _hist(active).items():
        if n == 0:
            continue
        q = queries[k] if k in queries else queries[k.value]
        total += n * (int(q) if isinstance(q, (int, np.integer)) else queries_per_eval(q))
    return total * cpu.query_latency / (cpu.memory_channels * cpu.base_freq)


def default_queries() -> dict:
    """2^D transactions per evaluation (multilinear interpolation corners)."""
    return {k: 2 ** k.dim for k in ALL_KINDS}


@dataclass
class CostReport:
    cpu_intervals: list
    gpu_intervals: list
    allocation: Allocation
    latency_cycles: int
    label: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def cpu_total(self) -> float:
        return float(sum(self.cpu_intervals))

    @property
    def gpu_total(self) -> float:
        return float(sum(self.gpu_intervals))

    @property
    def improvement(self) -> float:
        return self.cpu_total / self.gpu_total

    def to_dict(self) -> dict:
        return {"label": self.label, "intervals": len(self.cpu_intervals),
                "cpu_total_s": self.cpu_total, "gpu_total_s": self.gpu_total,
                "improvement": self.improvement, "latency_cycles": self.latency_cycles,
                "allocation": self.allocation.to_dict(), "meta": self.meta}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def table(self) -> str:
        a = self.allocation
        lines = [f"cost report {self.label}".rstrip(),
                 f"  intervals        {len(self.cpu_intervals)}",
                 f"  cpu total        {self.cpu_total:.4e} s",
                 f"  gpu total        {self.gpu_total:.4e} s",
                 f"  improvement      {self.improvement:.2f}x",
                 f"  latency          {self.latency_cycles} cycles",
                 f"  allocation ({a.granularity})"]
        for k, n in a.instances.items():
            lines.append(f"    {k.value:<6} {n:>6} instances")
        lines.append(f"    cores used {a.cores_used} / {a.total_cores}")
        return "\n".join(lines)


def improvement(trace, alloc: Allocation, models: dict, queries: dict | None = None,
                cpu: CpuSpec | None = None, gpu: GpuSpec | None = None, label: str = "") -> CostReport:
    """Price every interval of ``trace`` on both platforms from the same active counts."""
    cpu = CpuSpec() if cpu is None else cpu
    gpu = GpuSpec() if gpu is None else gpu
    queries = default_queries() if queries is None else queries
    cpu_t, gpu_t = [], []
    for i in range(len(trace.active)):
        active = trace.kind_counts(i)
        cpu_t.append(cpu_interval_time(active, queries, cpu))
        gpu_t.append(gpu_interval_time(active, alloc, models, gpu))
    if sum(gpu_t) <= 0:
        raise NumericalError("GPU time is zero; improvement ratio is undefined")
    shapes = _shapes(models)
    latency = max(shapes[k].latency for k, n in alloc.instances.items() if n > 0)
    return CostReport(cpu_t, gpu_t, alloc, latency, label,
                      {"cpu": asdict(cpu), "gpu": asdict(gpu)})


__all__ = ["Allocation", "CostReport", "CpuSpec", "GpuSpec", "ModelShape", "allocate_models",
           "cpu_interval_time", "default_queries", "gpu_interval_time", "improvement"]
