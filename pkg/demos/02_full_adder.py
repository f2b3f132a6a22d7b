"""Architecture search for all three cells, then a noisy full-adder run.

Run: python demos/02_full_adder.py   (about half a minute)
"""

from csmsim.benchmarks import load_benchmark
from csmsim.celllib import ALL_KINDS, TechnologyParams
from csmsim.engine import NoiseSpec, SimConfig, generate_noisy_inputs, simulate_suite
from csmsim.metrics import e_sim_multi
from csmsim.mlp import architecture_search
from csmsim.netlist import gate_counts, tech_map

tech = TechnologyParams()

models = {}
for kind in ALL_KINDS:
    model, report = architecture_search(kind, tech)
    models[kind] = model
    tried = ", ".join(f"H={r.hidden}:{100 * r.max_e_sim:.2f}%" for r in report.rows)
    print(f"{kind.value:<6} selected H={model.hidden}  ({tried})")

fa = tech_map(load_benchmark("fa"))
print("full adder cells:", {k.value: v for k, v in gate_counts(fa).items()})

cfg = SimConfig(backend="nn")
spec = NoiseSpec(inputs=tuple(fa.primary_inputs), v_dd=tech.v_dd, dT=cfg.dT, horizon=cfg.horizon)
suite = generate_noisy_inputs(10, seed=7, spec=spec)
nn = simulate_suite(fa, suite, cfg, tech, models=models)
ref = simulate_suite(fa, suite, cfg, tech, reference=True)
for i, (r, n) in enumerate(zip(ref, nn)):
    per = e_sim_multi(r, n, tech.v_dd)["per_net"]
    print(f"stimulus {i}: " + "  ".join(f"{net} {100 * v:.3f}%" for net, v in per.items()))
