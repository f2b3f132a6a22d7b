"""Interval-based CSM transient simulation with an event-driven active set.

Every interval of length ``dT`` reads the node voltages and deltas at ``t_i``
and writes a fresh buffer for ``t_{i+1}``:

    V_O(t_{i+1}) = V_O(t_i) + dT * (I_out(v(t_i)) + c_m * sum(dV_in(t_i)) / dT) / C_tot
    C_tot        = c_out + C_load + n_inputs * c_m

where ``dV_in(t_i) = V_in(t_i) - V_in(t_{i-1})``.  Because nothing written
during an interval is read in the same interval, gates may be evaluated in
any order (or concurrently) with identical results.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .celllib import ALL_KINDS, CellKind, TechnologyParams, output_current
from .errors import ConfigError, ContractViolation, NumericalError
from .metrics import WaveformSet
from .netlist import DEFAULT_WIRE_CAP, MappedCircuit, MappedGate, evaluate_mapped

MAX_STEPS = 50_000_000


# ------------------------------------------------------------------ stimuli


@dataclass
class PwlWaveform:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.ndim != 1 or self.times.shape != self.values.shape or len(self.times) == 0:
            raise ContractViolation("PWL waveform needs matching 1-D times and values")
        if self.times[0] != 0.0:
            raise ContractViolation("PWL waveform must start at t = 0")
        if np.any(np.diff(self.times) <= 0):
            raise ContractViolation("PWL times must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ContractViolation("PWL values must be finite")

    def __call__(self, t):
        return np.interp(t, self.times, self.values)

    @classmethod
    def constant(cls, v):
        return cls([0.0], [v])


@dataclass
class Stimulus:
    waveforms: dict
    horizon: float

    def __post_init__(self):
        if not self.horizon > 0:
            raise ContractViolation("stimulus horizon must be positive")

    def values_at(self, names, t) -> np.ndarray:
        return np.array([self.waveforms[n](t) for n in names], dtype=float)


def ramp(v0: float, v1: float, t_start: float, slew: float) -> PwlWaveform:
    if t_start <= 0:
        return PwlWaveform([0.0, slew], [v0, v1])
    return PwlWaveform([0.0, t_start, t_start + slew], [v0, v0, v1])


@dataclass(frozen=True)
class NoiseSpec:
    """Parameters of the noisy ramp suite used to grade surrogate models."""

    inputs: tuple = ("in",)
    v_dd: float = 0.7
    dT: float = 0.05e-12
    horizon: float = 10e-12
    slew_intervals: tuple = (1.0, 20.0)
    start_window: tuple = (0.1, 0.3)
    amplitude: float | None = None

    @property
    def noise(self) -> float:
        return 0.05 * self.v_dd if self.amplitude is None else self.amplitude


def generate_noisy_inputs(n: int, seed: int, spec: NoiseSpec) -> list:
    """``n`` stimuli: each input is a saturated rail-to-rail ramp (random
    direction, slew in ``slew_intervals * dT``, start in ``start_window *
    horizon``) plus uniform noise sampled at every interval boundary."""
    if n < 1:
        raise ConfigError("need at least one stimulus")
    rng = np.random.default_rng(seed)
    steps = int(round(spec.horizon / spec.dT))
    t = np.arange(steps + 1) * spec.dT
    lo, hi = -0.2 * spec.v_dd, 1.2 * spec.v_dd
    suite = []
    for _ in range(n):
        waves = {}
        for name in spec.inputs:
            rising = bool(rng.integers(0, 2))
            slew = rng.uniform(*spec.slew_intervals) * spec.dT
            start = rng.uniform(*spec.start_window) * spec.horizon
            v0, v1 = (0.0, spec.v_dd) if rising else (spec.v_dd, 0.0)
            clean = ramp(v0, v1, start, slew)(t)
            noise = rng.uniform(-spec.noise, spec.noise, size=t.shape)
            waves[name] = PwlWaveform(t, np.clip(clean + noise, lo, hi))
        suite.append(Stimulus(waves, spec.horizon))
    return suite


# ------------------------------------------------------------------ backends


class AnalyticBackend:
    name = "analytic"

    def __init__(self, tech: TechnologyParams):
        self.tech = tech

    def current(self, kind: CellKind, v: np.ndarray) -> np.ndarray:
        return output_current(kind, self.tech, v)


class LutBackend:
    name = "lut"

    def __init__(self, luts: dict):
        self.luts = {CellKind.parse(k): v for k, v in luts.items()}

    def current(self, kind, v):
        return self.luts[kind].query(v)


class NNBackend:
    name = "nn"

    def __init__(self, models: dict):
        self.models = {CellKind.parse(k): m for k, m in models.items()}

    def current(self, kind, v):
        return self.models[kind].forward(v)


def make_backend(name: str, tech: TechnologyParams, models=None, luts=None):
    if name == "analytic":
        return AnalyticBackend(tech)
    if name == "lut":
        if not luts:
            raise ConfigError("lut backend needs LUTs")
        return LutBackend(luts)
    if name == "nn":
        if not models:
            raise ConfigError("nn backend needs trained models")
        return NNBackend(models)
    raise ConfigError(f"unknown backend {name!r}")


# ------------------------------------------------------------------ config


@dataclass(frozen=True)
class SimConfig:
    dT: float = 0.05e-12
    horizon: float = 20e-12
    theta: float | None = None
    backend: str = "analytic"
    refine: int = 1
    scheduler: bool = True
    current_floor: float = 1e-6
    wire_cap: float = DEFAULT_WIRE_CAP
    po_load: float | None = None
    trace: tuple | None = None

    def __post_init__(self):
        if not self.dT > 0:
            raise ConfigError("dT must be positive")
        if self.theta is not None and self.theta < 0:
            raise ConfigError("theta must be non-negative")
        if self.refine < 1:
            raise ConfigError("refine must be >= 1")
        if not self.horizon > 0:
            raise ConfigError("horizon must be positive")

    def theta_volts(self, tech: TechnologyParams) -> float:
        return 1e-3 * tech.v_dd if self.theta is None else self.theta

    def intervals(self) -> int:
        ratio = self.horizon / self.dT
        if not math.isfinite(ratio) or ratio * self.refine > MAX_STEPS:
            raise ConfigError(f"horizon/dT = {ratio:g} (x refine {self.refine}) is too large")
        return max(1, math.ceil(ratio - 1e-9))

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)


# ------------------------------------------------------------------ state


class _KindBlock:
    """Index arrays for all gates of one cell kind."""

    def __init__(self, kind, gates, loads, tech):
        self.kind = kind
        self.ids = np.array([g.id for g in gates], dtype=np.int64)
        self.inputs = np.array([g.inputs for g in gates], dtype=np.int64).reshape(len(gates), kind.input_count)
        self.output = np.array([g.output for g in gates], dtype=np.int64)
        self.c_m = tech.c_m[kind]
        self.c_total = tech.c_out[kind] + loads[self.output] + kind.input_count * self.c_m


@dataclass
class ScheduleTrace:
    active: np.ndarray
    evaluations: np.ndarray
    active_by_kind: np.ndarray

    @property
    def total_evaluations(self) -> int:
        return int(self.evaluations.sum())

    def kind_counts(self, interval: int) -> dict:
        return {k: int(self.active_by_kind[interval, j]) for j, k in enumerate(ALL_KINDS)}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["interval", "active", "evaluations"] + [k.value for k in ALL_KINDS])
        for i in range(len(self.active)):
            w.writerow([i, int(self.active[i]), int(self.evaluations[i])]
                       + [int(c) for c in self.active_by_kind[i]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ScheduleTrace":
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        arr = np.asarray([[int(v) for v in r] for r in rows[1:]], dtype=np.int64).reshape(-1, 6)
        return cls(arr[:, 1], arr[:, 2], arr[:, 3:])

    @classmethod
    def all_active(cls, circuit: MappedCircuit, intervals: int = 1) -> "ScheduleTrace":
        from .netlist import gate_counts

        counts = np.array([gate_counts(circuit)[k] for k in ALL_KINDS], dtype=np.int64)
        total = int(counts.sum())
        return cls(np.full(intervals, total), np.full(intervals, total), np.tile(counts, (intervals, 1)))


class SimState:
    """Per-net voltages and deltas at ``t_i`` plus the active gate set."""

    def __init__(self, circuit: MappedCircuit, tech: TechnologyParams, cfg: SimConfig, backend,
                 stimulus: Stimulus):
        self.circuit, self.tech, self.cfg, self.backend, self.stimulus = circuit, tech, cfg, backend, stimulus
        loads = circuit.net_loads(tech, cfg.wire_cap, cfg.po_load)
        self.c_load = loads
        self.blocks = [
            _KindBlock(k, [g for g in circuit.gates if g.kind is k], loads, tech)
            for k in ALL_KINDS
            if any(g.kind is k for g in circuit.gates)
        ]
        self.pi_nets = np.array([circuit.net_index[n] for n in circuit.primary_inputs], dtype=np.int64)
        missing = [n for n in circuit.primary_inputs if n not in stimulus.waveforms]
        if missing:
            raise ConfigError(f"stimulus lacks waveforms for {missing[:5]}")
        self.h = cfg.dT / cfg.refine
        self.theta = cfg.theta_volts(tech)
        self.floor = cfg.current_floor * tech.g_scale
        self.step_index = 0
        self.voltage = self._dc_voltages()
        self.delta = np.zeros(len(circuit.nets))
        n_g = len(circuit.gates)
        self.active = np.ones(n_g, dtype=bool)
        self.last_current = np.full(n_g, np.inf)
        self._pi_waves = [stimulus.waveforms[n] for n in circuit.primary_inputs]

    def _dc_voltages(self) -> np.ndarray:
        c, vdd = self.circuit, self.tech.v_dd
        levels = {n: np.asarray(float(self.stimulus.waveforms[n](0.0)) > vdd / 2) for n in c.primary_inputs}
        logic = evaluate_mapped(c, levels)
        v = np.zeros(len(c.nets))
        for name, bit in logic.items():
            v[c.net_index[name]] = vdd if bool(bit) else 0.0
        for n in c.primary_inputs:
            v[c.net_index[n]] = float(self.stimulus.waveforms[n](0.0))
        return self._settle(v)

    def _settle(self, v: np.ndarray, iters: int = 60) -> np.ndarray:
        """Move each gate output from its rail to the backend's zero-current voltage.

        The current model leaks slightly at the rails, so a rail-valued output
        is not a fixed point. Gates are processed by logic depth; each output
        is bisected on the half of the box selected by its logic value. If the
        backend shows no sign change there, the rail value is kept.
        """
        c, tech = self.circuit, self.tech
        depth = np.zeros(len(c.gates), dtype=np.int64)
        net_depth = np.zeros(len(c.nets), dtype=np.int64)
        for gid in c.topological_order:
            g = c.gates[gid]
            depth[gid] = 1 + max(net_depth[s] for s in g.inputs)
            net_depth[g.output] = depth[gid]
        mid = tech.v_dd / 2
        for level in range(1, int(depth.max(initial=0)) + 1):
            for blk in self.blocks:
                sel = np.flatnonzero(depth[blk.ids] == level)
                if len(sel) == 0:
                    continue
                ins, out = blk.inputs[sel], blk.output[sel]
                high = v[out] > mid
                lo = np.where(high, mid, tech.v_lo)
                hi = np.where(high, tech.v_hi, mid)

                def cur(vo):
                    return self.backend.current(blk.kind, np.concatenate([v[ins], vo[:, None]], axis=1))

                ok = (cur(lo) > 0) & (cur(hi) < 0)
                for _ in range(iters):
                    m = 0.5 * (lo + hi)
                    up = cur(m) > 0
                    lo, hi = np.where(up, m, lo), np.where(up, hi, m)
                v[out] = np.where(ok, 0.5 * (lo + hi), v[out])
        return v

    @property
    def time(self) -> float:
        return self.step_index * self.h

    def gate_voltages(self, gate: MappedGate) -> np.ndarray:
        return self.voltage[list(gate.inputs) + [gate.output]]

    def step(self, order=None) -> int:
        """Advance one sub-step; returns the number of gate evaluations.

        With ``order`` (a sequence of gate ids) active gates are evaluated one
        at a time in that order through :func:`step_gate`; otherwise each cell
        kind is evaluated as one vectorised batch.
        """
        v_next = self.voltage.copy()
        t_next = (self.step_index + 1) * self.h
        if len(self.pi_nets):
            v_next[self.pi_nets] = [w(t_next) for w in self._pi_waves]
        evaluated = 0
        if order is None:
            for blk in self.blocks:
                sel = np.flatnonzero(self.active[blk.ids]) if self.cfg.scheduler else slice(None)
                ids = blk.ids[sel]
                if len(ids) == 0:
                    continue
                ins, out = blk.inputs[sel], blk.output[sel]
                x = np.concatenate([self.voltage[ins], self.voltage[out][:, None]], axis=1)
                cur = self.backend.current(blk.kind, x)
                miller = blk.c_m * self.delta[ins].sum(axis=1) / self.h
                vo = self.voltage[out] + self.h * (cur + miller) / blk.c_total[sel]
                if not np.all(np.isfinite(vo)):
                    bad = int(ids[np.flatnonzero(~np.isfinite(vo))[0]])
                    raise NumericalError(f"non-finite voltage update at gate {bad}", bad, self.step_index)
                v_next[out] = np.clip(vo, self.tech.v_lo, self.tech.v_hi)
                self.last_current[ids] = cur
                evaluated += len(ids)
        else:
            for gid in order:
                if self.cfg.scheduler and not self.active[gid]:
                    continue
                g = self.circuit.gates[gid]
                v_next[g.output] = step_gate(g, self, self.backend, self.h)
                evaluated += 1
        delta_next = v_next - self.voltage
        if self.cfg.scheduler:
            self.active = self._next_active(delta_next)
        self.voltage, self.delta = v_next, delta_next
        self.step_index += 1
        return evaluated

    def _next_active(self, delta_next: np.ndarray) -> np.ndarray:
        return update_active_set(self, delta_next, self.theta)


def step_gate(gate: MappedGate, state: SimState, backend, dT: float) -> float:
    """Forward-Euler update of one gate's output node over one step of ``dT``."""
    kind = gate.kind
    c_m = state.tech.c_m[kind]
    c_total = state.tech.c_out[kind] + state.c_load[gate.output] + kind.input_count * c_m
    x = state.gate_voltages(gate)[None, :]
    cur = float(backend.current(kind, x)[0])
    miller = c_m * sum(state.delta[s] for s in gate.inputs) / dT
    vo = state.voltage[gate.output] + dT * (cur + miller) / c_total
    if not math.isfinite(vo):
        raise NumericalError(f"non-finite voltage update at gate {gate.id}", gate.id, state.step_index)
    state.last_current[gate.id] = cur
    return min(max(vo, state.tech.v_lo), state.tech.v_hi)


def update_active_set(state: SimState, delta_next: np.ndarray, theta: float) -> np.ndarray:
    """Gates to evaluate in the next step.

    A gate stays active when any of its nodes moved by more than ``theta`` in
    the step just taken, when one of its inputs moved in the step before that
    (the Miller term consumes that delta one step late), or when its last
    evaluated current exceeded the floor ``current_floor * g_scale``.
    Everything else keeps its voltage and records a zero delta.
    """
    moved_now = np.abs(delta_next) > theta
    moved_before = np.abs(state.delta) > theta
    active = np.abs(state.last_current) > state.floor
    for blk in state.blocks:
        hit = moved_now[blk.output] | moved_now[blk.inputs].any(axis=1) | moved_before[blk.inputs].any(axis=1)
        active[blk.ids] |= hit
    return active


# ------------------------------------------------------------------ drivers


def _trace_nets(circuit: MappedCircuit, cfg: SimConfig) -> list:
    names = list(cfg.trace) if cfg.trace is not None else list(circuit.primary_outputs)
    unknown = [n for n in names if n not in circuit.net_index]
    if unknown:
        raise ConfigError(f"cannot trace unknown nets {unknown[:5]}")
    return names


def simulate(circuit: MappedCircuit, stimulus: Stimulus, cfg: SimConfig, tech: TechnologyParams,
             backend=None, models=None, luts=None, order=None):
    """Run the transient and return ``(WaveformSet, ScheduleTrace)``."""
    if stimulus.horizon < cfg.horizon * (1 - 1e-9):
        raise ConfigError("stimulus horizon is shorter than the simulation horizon")
    if backend is None:
        backend = make_backend(cfg.backend, tech, models=models, luts=luts)
    n_int = cfg.intervals()
    state = SimState(circuit, tech, cfg, backend, stimulus)
    names = _trace_nets(circuit, cfg)
    idx = np.array([circuit.net_index[n] for n in names], dtype=np.int64)
    samples = np.empty((n_int + 1, len(idx)))
    samples[0] = state.voltage[idx]
    active = np.zeros(n_int, dtype=np.int64)
    evals = np.zeros(n_int, dtype=np.int64)
    by_kind = np.zeros((n_int, len(ALL_KINDS)), dtype=np.int64)
    kind_col = {k: j for j, k in enumerate(ALL_KINDS)}
    for i in range(n_int):
        for blk in state.blocks:
            by_kind[i, kind_col[blk.kind]] = (
                int(state.active[blk.ids].sum()) if cfg.scheduler else len(blk.ids)
            )
        active[i] = by_kind[i].sum()
        for _ in range(cfg.refine):
            evals[i] += state.step(order)
        samples[i + 1] = state.voltage[idx]
    times = np.arange(n_int + 1) * cfg.dT
    waves = WaveformSet(times, {n: samples[:, j] for j, n in enumerate(names)})
    return waves, ScheduleTrace(active, evals, by_kind)


def reference_simulate(circuit: MappedCircuit, stimulus: Stimulus, cfg: SimConfig,
                       tech: TechnologyParams, refine: int | None = None) -> WaveformSet:
    """Ground-truth run: analytic currents, scheduler off, ``refine`` sub-steps per interval."""
    ref_cfg = cfg.with_(backend="analytic", scheduler=False,
                        refine=refine if refine is not None else max(cfg.refine, 100))
    waves, _ = simulate(circuit, stimulus, ref_cfg, tech)
    return waves


# ------------------------------------------------------------------ batching helpers


def replicate(circuit: MappedCircuit, copies: int) -> MappedCircuit:
    """``copies`` disjoint instances of ``circuit``; net ``x`` of copy k is ``x@k``.

    Lets a suite of stimuli run as one vectorised simulation.
    """
    nets, gates = [], []
    n_nets = len(circuit.nets)
    for k in range(copies):
        nets += [f"{n}@{k}" for n in circuit.nets]
        base = k * n_nets
        for g in circuit.gates:
            gates.append(MappedGate(len(gates), g.kind, tuple(s + base for s in g.inputs), g.output + base))
    pis = [f"{n}@{k}" for k in range(copies) for n in circuit.primary_inputs]
    pos = [f"{n}@{k}" for k in range(copies) for n in circuit.primary_outputs]
    extra = {f"{n}@{k}": c for k in range(copies) for n, c in circuit.extra_load.items()}
    return MappedCircuit(nets, gates, pis, pos, f"{circuit.name}x{copies}", extra)


def merge_stimuli(stimuli: list) -> Stimulus:
    waves = {}
    for k, s in enumerate(stimuli):
        waves.update({f"{n}@{k}": w for n, w in s.waveforms.items()})
    return Stimulus(waves, min(s.horizon for s in stimuli))


def split_waveforms(ws: WaveformSet, copies: int) -> list:
    out = [dict() for _ in range(copies)]
    for name, vals in ws.traces.items():
        base, k = name.rsplit("@", 1)
        out[int(k)][base] = vals
    return [WaveformSet(ws.times, d) for d in out]


def single_cell_circuit(kind: CellKind) -> MappedCircuit:
    """One cell driving a primary output; inputs are named ``a``, ``b`` (or ``in``)."""
    kind = CellKind.parse(kind)
    ins = ["in"] if kind is CellKind.INV else ["a", "b"]
    nets = ins + ["out"]
    gate = MappedGate(0, kind, tuple(range(len(ins))), len(ins))
    return MappedCircuit(nets, [gate], ins, ["out"], f"single_{kind.value}")


def simulate_suite(circuit: MappedCircuit, suite: list, cfg: SimConfig, tech: TechnologyParams,
                   backend=None, models=None, luts=None, reference: bool = False, refine=None):
    """Simulate every stimulus of ``suite`` in one batched run; returns a list of WaveformSets."""
    big = replicate(circuit, len(suite))
    stim = merge_stimuli(suite)
    if cfg.trace is not None:
        cfg = cfg.with_(trace=tuple(f"{n}@{k}" for k in range(len(suite)) for n in cfg.trace))
    if reference:
        ws = reference_simulate(big, stim, cfg, tech, refine=refine)
    else:
        ws, _ = simulate(big, stim, cfg, tech, backend=backend, models=models, luts=luts)
    return split_waveforms(ws, len(suite))


__all__ = [
    "AnalyticBackend", "LutBackend", "NNBackend", "NoiseSpec", "PwlWaveform", "ScheduleTrace",
    "SimConfig", "SimState", "Stimulus", "generate_noisy_inputs", "make_backend", "merge_stimuli",
    "ramp", "reference_simulate", "replicate", "simulate", "simulate_suite", "single_cell_circuit",
    "split_waveforms", "step_gate", "update_active_set",
]
