"""Model allocation on the GPU and the CPU-LUT vs GPU-NN timing estimate.

Run: python demos/04_cost_model.py
"""

from csmsim.benchmarks import load_benchmark
from csmsim.celllib import CellKind
from csmsim.costmodel import CpuSpec, ModelShape, allocate_models, improvement
from csmsim.engine import ScheduleTrace
from csmsim.netlist import gate_counts, tech_map

INV, NAND2, NOR2 = CellKind.INV, CellKind.NAND2, CellKind.NOR2
# widths reported for a 7 nm high-performance library, with D = 2 / 3 / 3
shapes = {INV: ModelShape(2, 10), NAND2: ModelShape(3, 20), NOR2: ModelShape(3, 20)}

hist = {NAND2: 2625, INV: 799, NOR2: 401}
for gran in ("cores", "sm"):
    a = allocate_models(hist, shapes, granularity=gran)
    print(f"allocation ({gran}): " + ", ".join(f"{k.value} {n}" for k, n in a.instances.items())
          + f"  cores {a.cores_used}/{a.total_cores}")

for tier in ("dram", "l1"):
    cpu = CpuSpec(memory_tier=tier)
    row = []
    for name in ("fa", "c880", "c1355", "c7552"):
        c = tech_map(load_benchmark(name))
        alloc = allocate_models(gate_counts(c), shapes)
        rep = improvement(ScheduleTrace.all_active(c), alloc, shapes, cpu=cpu)
        row.append(f"{name} {rep.improvement:.1f}x")
    print(f"all-active improvement, CPU {tier} latency: " + ", ".join(row))
