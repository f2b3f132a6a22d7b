"""ISCAS85 ``.bench`` parsing and mapping onto the INV/NAND2/NOR2 library."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .celllib import ALL_KINDS, CellKind, TechnologyParams
from .errors import MappingError, ParseError, ValidationError

GATE_TOKENS = {"AND", "NAND", "OR", "NOR", "NOT", "BUFF", "XOR", "XNOR"}
_ALIASES = {"BUF": "BUFF", "INV": "NOT"}
_SEQUENTIAL = {"DFF", "LATCH", "DFFR", "SDFF"}

_IO_RE = re.compile(r"^(INPUT|OUTPUT)\s*\(\s*([^\s()]+)\s*\)$", re.IGNORECASE)
_GATE_RE = re.compile(r"^([^\s=]+)\s*=\s*([A-Za-z_][A-Za-z0-9_]*)\s*\(([^()]*)\)$")

DEFAULT_WIRE_CAP = 0.05e-15


@dataclass(frozen=True)
class RawGate:
    output: str
    op: str
    inputs: tuple


@dataclass
class RawCircuit:
    primary_inputs: list
    primary_outputs: list
    gates: list
    name: str = "circuit"

    def __post_init__(self):
        self.validate()

    @property
    def nets(self) -> list:
        return list(self.primary_inputs) + [g.output for g in self.gates]

    def validate(self):
        seen = set()
        for net in self.nets:
            if net in seen:
                raise ValidationError(f"net {net!r} is driven more than once")
            seen.add(net)
        for g in self.gates:
            for src in g.inputs:
                if src not in seen:
                    raise ValidationError(f"gate {g.output!r} reads undriven net {src!r}")
        for po in self.primary_outputs:
            if po not in seen:
                raise ValidationError(f"primary output {po!r} is never driven")
        self._order = _topo_order({g.output: g.inputs for g in self.gates}, "raw circuit")

    def topological_gates(self) -> list:
        by_out = {g.output: g for g in self.gates}
        return [by_out[n] for n in self._order]


def _topo_order(deps: dict, what: str) -> list:
    """Kahn's algorithm over ``node -> input nodes``; raises on cycles."""
    indeg = {n: sum(1 for s in ins if s in deps) for n, ins in deps.items()}
    users = {}
    for n, ins in deps.items():
        for s in ins:
            users.setdefault(s, []).append(n)
    stack = [n for n, d in indeg.items() if d == 0]
    stack.reverse()
    order = []
    while stack:
        n = stack.pop()
        order.append(n)
        for u in users.get(n, ()):
            indeg[u] -= 1
            if indeg[u] == 0:
                stack.append(u)
    if len(order) != len(deps):
        stuck = sorted(n for n, d in indeg.items() if d > 0)[:5]
        raise ValidationError(f"combinational cycle in {what} (involving {stuck})")
    return order


def parse_bench(text: str, name: str = "circuit") -> RawCircuit:
    inputs, outputs, gates = [], [], []
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        m = _IO_RE.match(line)
        if m:
            (inputs if m.group(1).upper() == "INPUT" else outputs).append(m.group(2))
            continue
        m = _GATE_RE.match(line)
        if not m:
            raise ParseError(f"cannot parse {raw_line.strip()!r}", line=lineno)
        out, op, args = m.group(1), m.group(2).upper(), m.group(3)
        op = _ALIASES.get(op, op)
        if op in _SEQUENTIAL:
            raise ParseError(f"sequential element {op} is not supported", line=lineno)
        if op not in GATE_TOKENS:
            raise ParseError(f"unknown gate type {m.group(2)!r}", line=lineno)
        ins = tuple(a.strip() for a in args.split(",") if a.strip())
        if not ins:
            raise ParseError(f"gate {out!r} has no inputs", line=lineno)
        if op in ("NOT", "BUFF") and len(ins) != 1:
            raise ParseError(f"{op} takes exactly one input", line=lineno)
        gates.append(RawGate(out, op, ins))
    return RawCircuit(inputs, outputs, gates, name)


def emit_bench(raw: RawCircuit) -> str:
    """Canonical text form: inputs, outputs, then gates in file order."""
    lines = [f"# {raw.name}"]
    lines += [f"INPUT({n})" for n in raw.primary_inputs]
    lines += [f"OUTPUT({n})" for n in raw.primary_outputs]
    lines += [f"{g.output} = {g.op}({', '.join(g.inputs)})" for g in raw.gates]
    return "\n".join(lines) + "\n"


def _apply(op: str, vals: list):
    if op in ("AND", "NAND"):
        r = np.logical_and.reduce(vals)
    elif op in ("OR", "NOR"):
        r = np.logical_or.reduce(vals)
    elif op in ("XOR", "XNOR"):
        r = np.logical_xor.reduce(vals)
    else:
        r = vals[0]
    return ~r if op in ("NAND", "NOR", "NOT", "XNOR") else r


def evaluate_raw(raw: RawCircuit, assignment: dict) -> dict:
    """Boolean evaluation; ``assignment`` maps each PI to a bool array (vectors)."""
    vals = {n: np.asarray(assignment[n], dtype=bool) for n in raw.primary_inputs}
    for g in raw.topological_gates():
        vals[g.output] = _apply(g.op, [vals[s] for s in g.inputs])
    return vals


# ---------------------------------------------------------------- mapping


@dataclass(frozen=True)
class MappedGate:
    id: int
    kind: CellKind
    inputs: tuple
    output: int


@dataclass
class MappedCircuit:
    nets: list
    gates: list
    primary_inputs: list
    primary_outputs: list
    name: str = "circuit"
    extra_load: dict = field(default_factory=dict)

    def __post_init__(self):
        self.net_index = {n: i for i, n in enumerate(self.nets)}
        self.driver = {}
        for g in self.gates:
            if g.output in self.driver:
                raise ValidationError(f"net {self.nets[g.output]!r} has two drivers")
            self.driver[g.output] = g.id
        pis = {self.net_index[n] for n in self.primary_inputs}
        for g in self.gates:
            if g.output in pis:
                raise ValidationError(f"gate {g.id} drives primary input {self.nets[g.output]!r}")
            for s in g.inputs:
                if s not in self.driver and s not in pis:
                    raise ValidationError(f"gate {g.id} reads undriven net {self.nets[s]!r}")
        self.fanout = [[] for _ in self.nets]
        for g in self.gates:
            for s in g.inputs:
                self.fanout[s].append(g.id)
        deps = {g.id: tuple(self.driver[s] for s in g.inputs if s in self.driver) for g in self.gates}
        self.topological_order = _topo_order(deps, "mapped circuit")

    def __len__(self):
        return len(self.gates)

    def net_loads(self, tech: TechnologyParams, wire_cap: float = DEFAULT_WIRE_CAP,
                  po_load: float | None = None) -> np.ndarray:
        """External capacitance on every net: fanout pin caps + wire per fanout.

        Primary outputs additionally see ``po_load`` (default: one INV pin plus
        one wire segment) so that unloaded outputs still switch realistically.
        """
        if po_load is None:
            po_load = tech.c_in[CellKind.INV] + wire_cap
        loads = np.zeros(len(self.nets))
        for g in self.gates:
            for s in g.inputs:
                loads[s] += tech.c_in[g.kind] + wire_cap
        for n in self.primary_outputs:
            loads[self.net_index[n]] += po_load
        for n, c in self.extra_load.items():
            loads[self.net_index[n]] += c
        return loads

    def to_json(self) -> str:
        return json.dumps({
            "name": self.name,
            "nets": self.nets,
            "primary_inputs": self.primary_inputs,
            "primary_outputs": self.primary_outputs,
            "gates": [{"id": g.id, "kind": g.kind.value, "inputs": list(g.inputs), "output": g.output}
                      for g in self.gates],
            "counts": {k.value: v for k, v in gate_counts(self).items()},
        }, indent=1)


class _Builder:
    def __init__(self, raw: RawCircuit):
        self.nets = list(raw.nets)
        self.index = {n: i for i, n in enumerate(self.nets)}
        self.gates = []
        self._tmp = 0

    def fresh(self, base: str) -> int:
        while True:
            self._tmp += 1
            name = f"{base}~{self._tmp}"
            if name not in self.index:
                break
        self.index[name] = len(self.nets)
        self.nets.append(name)
        return self.index[name]

    def gate(self, kind, ins, out) -> int:
        self.gates.append(MappedGate(len(self.gates), kind, tuple(ins), out))
        return out

    # Each helper returns the net id carrying its function; ``out`` pins the
    # final gate onto an existing net (the raw gate's output).
    def inv(self, a, base, out=None):
        return self.gate(CellKind.INV, [a], self.fresh(base) if out is None else out)

    def nand(self, ins, base, out=None):
        if len(ins) == 1:
            return self.inv(ins[0], base, out)
        half = len(ins) // 2
        left, right = self.and_(ins[:half], base), self.and_(ins[half:], base)
        return self.gate(CellKind.NAND2, [left, right], self.fresh(base) if out is None else out)

    def and_(self, ins, base, out=None):
        if len(ins) == 1 and out is None:
            return ins[0]
        return self.inv(self.nand(ins, base), base, out)

    def nor(self, ins, base, out=None):
        if len(ins) == 1:
            return self.inv(ins[0], base, out)
        half = len(ins) // 2
        left, right = self.or_(ins[:half], base), self.or_(ins[half:], base)
        return self.gate(CellKind.NOR2, [left, right], self.fresh(base) if out is None else out)

    def or_(self, ins, base, out=None):
        if len(ins) == 1 and out is None:
            return ins[0]
        return self.inv(self.nor(ins, base), base, out)

    def xor(self, ins, base, out=None):
        if len(ins) == 1:
            if out is None:
                return ins[0]
            return self.inv(self.inv(ins[0], base), base, out)
        half = len(ins) // 2
        a, b = self.xor(ins[:half], base), self.xor(ins[half:], base)
        n = self.gate(CellKind.NAND2, [a, b], self.fresh(base))
        p = self.gate(CellKind.NAND2, [a, n], self.fresh(base))
        q = self.gate(CellKind.NAND2, [b, n], self.fresh(base))
        return self.gate(CellKind.NAND2, [p, q], self.fresh(base) if out is None else out)


def tech_map(raw: RawCircuit) -> MappedCircuit:
    """Rewrite every raw gate into INV/NAND2/NOR2 cells, preserving logic.

    NOT -> INV, BUFF -> INV.INV, AND2 -> NAND2+INV, OR2 -> NOR2+INV; wider
    AND/NAND/OR/NOR become balanced two-input trees; XOR2 -> four NAND2.
    """
    b = _Builder(raw)
    for g in raw.topological_gates():
        out = b.index[g.output]
        ins = [b.index[s] for s in g.inputs]
        base = g.output
        if g.op == "NOT":
            b.inv(ins[0], base, out)
        elif g.op == "BUFF":
            b.inv(b.inv(ins[0], base), base, out)
        elif g.op == "NAND":
            b.nand(ins, base, out)
        elif g.op == "AND":
            b.and_(ins, base, out)
        elif g.op == "NOR":
            b.nor(ins, base, out)
        elif g.op == "OR":
            b.or_(ins, base, out)
        elif g.op == "XOR":
            b.xor(ins, base, out)
        elif g.op == "XNOR":
            b.inv(b.xor(ins, base), base, out)
        else:
            raise MappingError(f"no mapping rule for {g.op}")
    return MappedCircuit(b.nets, b.gates, list(raw.primary_inputs), list(raw.primary_outputs), raw.name)


def gate_counts(c: MappedCircuit) -> dict:
    counts = Counter(g.kind for g in c.gates)
    return {k: counts.get(k, 0) for k in ALL_KINDS}


def evaluate_mapped(c: MappedCircuit, assignment: dict) -> dict:
    """Boolean evaluation of the mapped netlist, keyed by net name."""
    vals = [None] * len(c.nets)
    for n in c.primary_inputs:
        vals[c.net_index[n]] = np.asarray(assignment[n], dtype=bool)
    for gid in c.topological_order:
        g = c.gates[gid]
        ins = [vals[s] for s in g.inputs]
        if g.kind is CellKind.INV:
            vals[g.output] = ~ins[0]
        elif g.kind is CellKind.NAND2:
            vals[g.output] = ~(ins[0] & ins[1])
        else:
            vals[g.output] = ~(ins[0] | ins[1])
    return {n: v for n, v in zip(c.nets, vals) if v is not None}


def random_equivalence_check(raw: RawCircuit, mapped: MappedCircuit, n_vectors: int = 1000,
                             seed: int = 0) -> bool:
    rng = np.random.default_rng(seed)
    assignment = {n: rng.integers(0, 2, n_vectors).astype(bool) for n in raw.primary_inputs}
    a, b = evaluate_raw(raw, assignment), evaluate_mapped(mapped, assignment)
    return all(np.array_equal(a[po], b[po]) for po in raw.primary_outputs)


_CELL_OPS = {CellKind.INV: "NOT", CellKind.NAND2: "NAND", CellKind.NOR2: "NOR"}


def mapped_to_raw(c: MappedCircuit) -> RawCircuit:
    """View a mapped circuit as a NOT/NAND/NOR netlist (for ``.bench`` export)."""
    gates = [RawGate(c.nets[g.output], _CELL_OPS[g.kind], tuple(c.nets[s] for s in g.inputs))
             for g in (c.gates[i] for i in c.topological_order)]
    return RawCircuit(list(c.primary_inputs), list(c.primary_outputs), gates, c.name)
