"""``csmsim`` command-line entry point.

Exit codes: 0 success, 1 usage, 2 validation, 3 numerical, 4 capacity.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .benchmarks import load_netlist
from .celllib import ALL_KINDS, CellKind
from .characterize import build_lut, dataset_from_csv, dataset_to_csv, sample_dataset, split_dataset
from .config import RunConfig
from .costmodel import ModelShape, allocate_models, improvement
from .engine import (NoiseSpec, PwlWaveform, ScheduleTrace, Stimulus, generate_noisy_inputs, ramp,
                     reference_simulate, simulate)
from .errors import ConfigError, CsmSimError, SearchFailure, ValidationError
from .lut import Lut
from .metrics import WaveformSet, e_sim_multi
from .mlp import MlpModel, architecture_search
from .netlist import emit_bench, gate_counts, mapped_to_raw, random_equivalence_check, tech_map


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _existing_dir(path) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise ConfigError(f"output directory {p} does not exist; create it first")
    return p


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _read(path: Path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def _out_dir(args, cfg: RunConfig) -> Path:
    return _existing_dir(args.out if args.out else cfg.out_dir)


def load_models(directory) -> dict:
    models = {}
    for k in ALL_KINDS:
        p = Path(directory) / f"{k.value}.json"
        if p.is_file():
            models[k] = MlpModel.from_json(p.read_text())
    if not models:
        raise ConfigError(f"no model files (INV.json, NAND2.json, NOR2.json) in {directory}")
    return models


def load_luts(directory) -> dict:
    luts = {}
    for k in ALL_KINDS:
        p = Path(directory) / f"{k.value}.lut.json"
        if p.is_file():
            luts[k] = Lut.from_json(p.read_text())
    if not luts:
        raise ConfigError(f"no LUT files in {directory}")
    return luts


# ------------------------------------------------------------------ commands


def cmd_characterize(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    grid = cfg.grid if args.points is None else type(cfg.grid)(args.points, cfg.grid.lo, cfg.grid.hi)
    samples = cfg.dataset.samples if args.samples is None else args.samples
    for k in ALL_KINDS:
        lut = build_lut(k, cfg.technology, grid)
        _write(out / "luts" / f"{k.value}.lut.json", lut.to_json())
        d = sample_dataset(k, cfg.technology, samples, cfg.seed, cfg.transform, cfg.dataset.rail_fraction)
        _write(out / "datasets" / f"{k.value}.csv", dataset_to_csv(d))
        print(f"{k.value:<6} LUT {len(lut):>6} entries ({'x'.join(map(str, lut.shape))})  dataset {len(d)} rows")
    return 0


def cmd_search(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    data_dir = Path(args.data) if args.data else out / "datasets"
    threshold = cfg.search.threshold if args.threshold is None else args.threshold
    kinds = [CellKind.parse(k) for k in args.kinds] if args.kinds else list(ALL_KINDS)
    setup = cfg.search_setup()
    reports, failed = [], []
    for k in kinds:
        path = data_dir / f"{k.value}.csv"
        if not path.is_file():
            raise ConfigError(f"dataset {path} not found; run characterize first")
        train_split, _ = split_dataset(dataset_from_csv(_read(path)), cfg.dataset.train_fraction, cfg.seed)
        try:
            model, report = architecture_search(k, cfg.technology, cfg.search.sizes, threshold=threshold,
                                                setup=setup, data=train_split,
                                                sim_cfg=cfg.sim.with_(horizon=cfg.search.horizon))
        except SearchFailure as exc:
            reports.append(exc.report)
            failed.append(k.value)
            print(f"{k.value:<6} FAILED: {exc}", file=sys.stderr)
            continue
        reports.append(report)
        _write(out / "models" / f"{k.value}.json", model.to_json())
        print(f"{k.value:<6} H={model.hidden:<3} max E_sim {100 * report.rows[-1].max_e_sim:.3f}%  "
              f"({len(report.rows)} sizes tried)")
    lines = ["kind,hidden,max_e_sim,train_mse,selected"]
    for r in reports:
        lines += r.to_csv().splitlines()[1:]
    _write(out / "search_report.csv", "\n".join(lines) + "\n")
    return SearchFailure.exit_code if failed else 0


def _stimulus(args, cfg: RunConfig, circuit) -> Stimulus:
    tech, sim = cfg.technology, cfg.sim
    if args.stimulus == "noisy":
        spec = NoiseSpec(inputs=tuple(circuit.primary_inputs), v_dd=tech.v_dd, dT=sim.dT,
                         horizon=sim.horizon)
        return generate_noisy_inputs(1, cfg.seed, spec)[0]
    if args.stimulus == "step":
        switch = args.switch or circuit.primary_inputs[0]
        if switch not in circuit.primary_inputs:
            raise ConfigError(f"--switch {switch!r} is not a primary input")
        waves = {n: PwlWaveform.constant(0.0) for n in circuit.primary_inputs}
        waves[switch] = ramp(0.0, tech.v_dd, 0.1 * sim.horizon, 10 * sim.dT)
        return Stimulus(waves, sim.horizon)
    ws = WaveformSet.from_csv(_read(Path(args.stimulus)))
    missing = [n for n in circuit.primary_inputs if n not in ws.traces]
    if missing:
        raise ConfigError(f"stimulus file lacks columns for {missing[:5]}")
    return Stimulus({n: PwlWaveform(ws.times, ws.traces[n]) for n in circuit.primary_inputs}, ws.horizon)


def cmd_simulate(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    raw = load_netlist(args.netlist, cfg.bench_dirs)
    circuit = tech_map(raw)
    sim = cfg.sim
    changes = {}
    if args.backend:
        changes["backend"] = args.backend
    if args.theta is not None:
        changes["theta"] = args.theta
    if args.horizon is not None:
        changes["horizon"] = args.horizon
    if args.refine is not None:
        changes["refine"] = args.refine
    if args.no_scheduler:
        changes["scheduler"] = False
    if args.trace_nets:
        changes["trace"] = tuple(args.trace_nets.split(","))
    sim = sim.with_(**changes)
    cfg.sim = sim
    stimulus = _stimulus(args, cfg, circuit)
    models = load_models(args.models or out / "models") if sim.backend == "nn" else None
    luts = load_luts(args.luts or out / "luts") if sim.backend == "lut" else None
    t0 = time.perf_counter()
    if args.reference:
        refine = args.refine if args.refine is not None else cfg.reference_refine
        waves = reference_simulate(circuit, stimulus, sim, cfg.technology, refine=refine)
        trace = None
    else:
        waves, trace = simulate(circuit, stimulus, sim, cfg.technology, models=models, luts=luts)
    wall = time.perf_counter() - t0
    _write(out / "waveforms.csv", waves.to_csv())
    summary = {"circuit": circuit.name, "backend": "analytic" if args.reference else sim.backend,
               "reference": bool(args.reference), "gates": len(circuit),
               "counts": {k.value: v for k, v in gate_counts(circuit).items()},
               "intervals": len(waves.times) - 1}
    if trace is not None:
        _write(out / "trace.csv", trace.to_csv())
        summary["evaluations"] = trace.total_evaluations
    _write(out / "summary.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
    print(json.dumps(dict(summary, wall_time_s=round(wall, 3)), sort_keys=True))
    return 0


def cmd_compare(args) -> int:
    cfg = _config(args)
    v_dd = args.vdd if args.vdd is not None else cfg.technology.v_dd
    ref = WaveformSet.from_csv(_read(Path(args.reference)))
    test = WaveformSet.from_csv(_read(Path(args.test)))
    res = e_sim_multi(ref, test, v_dd)
    for net, v in res["per_net"].items():
        print(f"{net:<20} {100 * v:8.4f}%")
    print(f"{'max':<20} {100 * res['max']:8.4f}%")
    print(f"{'mean':<20} {100 * res['mean']:8.4f}%")
    if args.max_esim is not None and 100 * res["max"] > args.max_esim:
        print(f"max E_sim {100 * res['max']:.4f}% exceeds {args.max_esim}%", file=sys.stderr)
        return ValidationError.exit_code
    return 0


def _parse_hidden(text: str) -> dict:
    shapes = {}
    for item in text.split(","):
        try:
            name, h = item.split("=")
            kind = CellKind.parse(name.strip())
            shapes[kind] = ModelShape(kind.dim, int(h))
        except ValueError:
            raise ConfigError(f"--hidden expects KIND=H pairs, got {item!r}") from None
    return shapes


def cmd_cost(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg) if args.out or args.write else None
    circuit = tech_map(load_netlist(args.netlist, cfg.bench_dirs))
    if args.hidden:
        models = _parse_hidden(args.hidden)
    else:
        models = load_models(args.models or Path(args.out or cfg.out_dir) / "models")
    granularity = args.granularity or cfg.allocation
    alloc = allocate_models(gate_counts(circuit), models, cfg.gpu, granularity)
    reports = {"all_active": improvement(ScheduleTrace.all_active(circuit), alloc, models,
                                         cpu=cfg.cpu, gpu=cfg.gpu, label=f"{circuit.name} all-active")}
    if args.trace:
        trace = ScheduleTrace.from_csv(_read(Path(args.trace)))
        reports["trace"] = improvement(trace, alloc, models, cpu=cfg.cpu, gpu=cfg.gpu,
                                       label=f"{circuit.name} trace")
    for name, rep in reports.items():
        print(rep.table())
        if out is not None:
            _write(out / f"cost_{name}.json", rep.to_json() + "\n")
    return 0


def cmd_map(args) -> int:
    cfg = _config(args)
    raw = load_netlist(args.netlist, cfg.bench_dirs)
    mapped = tech_map(raw)
    counts = gate_counts(mapped)
    ok = random_equivalence_check(raw, mapped, args.vectors, cfg.seed)
    print(f"{raw.name}: {len(raw.gates)} gates -> {len(mapped)} cells "
          + " ".join(f"{k.value}={v}" for k, v in counts.items())
          + f"  equivalence({args.vectors} vectors)={'ok' if ok else 'MISMATCH'}")
    if args.emit:
        _write(Path(args.emit), emit_bench(mapped_to_raw(mapped)))
    if args.json:
        _write(Path(args.json), mapped.to_json() + "\n")
    return 0 if ok else ValidationError.exit_code


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (defaults apply to missing keys)")
    common.add_argument("--seed", type=int, help="override the configuration seed")

    p = _Parser(prog="csmsim", description="CSM gate-level simulation with neural current surrogates.")
    p.add_argument("--version", action="version", version=f"csmsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("characterize", parents=[common], help="write LUTs and training datasets per cell")
    c.add_argument("--out", help="existing output directory")
    c.add_argument("--points", type=int, help="LUT grid points per axis")
    c.add_argument("--samples", type=int, help="dataset rows per cell")
    c.set_defaults(func=cmd_characterize)

    s = sub.add_parser("search", parents=[common], help="pick the smallest hidden layer meeting the E_sim threshold")
    s.add_argument("--out", help="existing output directory (models/, search_report.csv)")
    s.add_argument("--data", help="dataset directory (default OUT/datasets)")
    s.add_argument("--threshold", type=float, help="E_sim threshold as a ratio (0.01 = 1%%)")
    s.add_argument("--kinds", nargs="+", help="restrict to these cell kinds")
    s.set_defaults(func=cmd_search)

    m = sub.add_parser("simulate", parents=[common], help="transient simulation of a netlist")
    m.add_argument("netlist", help=".bench path or bundled benchmark name")
    m.add_argument("--out", help="existing output directory")
    m.add_argument("--backend", choices=["analytic", "lut", "nn"])
    m.add_argument("--theta", type=float, help="activity threshold in volts")
    m.add_argument("--no-scheduler", action="store_true", help="evaluate every gate every interval")
    m.add_argument("--refine", type=int, help="sub-steps per interval")
    m.add_argument("--reference", action="store_true",
                   help="ground-truth run: analytic currents, no scheduler, refined steps")
    m.add_argument("--horizon", type=float, help="simulated time in seconds")
    m.add_argument("--stimulus", default="noisy",
                   help="'noisy' (seeded noisy ramps), 'step', or a waveform CSV with one column per input")
    m.add_argument("--switch", help="input that ramps for --stimulus step")
    m.add_argument("--trace-nets", help="comma-separated nets to record (default: primary outputs)")
    m.add_argument("--models", help="model directory for --backend nn")
    m.add_argument("--luts", help="LUT directory for --backend lut")
    m.set_defaults(func=cmd_simulate)

    cp = sub.add_parser("compare", parents=[common], help="E_sim between two waveform CSVs")
    cp.add_argument("reference")
    cp.add_argument("test")
    cp.add_argument("--vdd", type=float)
    cp.add_argument("--max-esim", type=float, help="fail (exit 2) when the max exceeds this percentage")
    cp.set_defaults(func=cmd_compare)

    co = sub.add_parser("cost", parents=[common], help="CPU-LUT vs GPU-NN timing estimate")
    co.add_argument("netlist")
    co.add_argument("--models", help="model directory")
    co.add_argument("--hidden", help="model sizes instead of files, e.g. INV=10,NAND2=20,NOR2=20")
    co.add_argument("--trace", help="schedule trace CSV from simulate")
    co.add_argument("--granularity", choices=["cores", "sm"])
    co.add_argument("--out", help="existing directory for cost_*.json")
    co.add_argument("--write", action="store_true", help="write JSON reports to the configured out_dir")
    co.set_defaults(func=cmd_cost)

    mp = sub.add_parser("map", parents=[common], help="technology-map a netlist to INV/NAND2/NOR2")
    mp.add_argument("netlist")
    mp.add_argument("--vectors", type=int, default=1000, help="random vectors for the equivalence check")
    mp.add_argument("--emit", help="write the mapped netlist as .bench")
    mp.add_argument("--json", help="write the mapped netlist as JSON")
    mp.set_defaults(func=cmd_map)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CsmSimError as exc:
        print(f"csmsim {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
