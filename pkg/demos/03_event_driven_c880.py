"""How the activity threshold trades gate evaluations for accuracy on c880.

Run: python demos/03_event_driven_c880.py
"""

from csmsim.benchmarks import load_benchmark
from csmsim.celllib import TechnologyParams
from csmsim.engine import PwlWaveform, SimConfig, Stimulus, ramp, simulate
from csmsim.metrics import e_sim_multi
from csmsim.netlist import tech_map

tech = TechnologyParams()
c880 = tech_map(load_benchmark("c880"))

# every input held low except one, which rises at 2 ps
waves = {n: PwlWaveform.constant(0.0) for n in c880.primary_inputs}
waves[c880.primary_inputs[0]] = ramp(0.0, tech.v_dd, 2e-12, 2e-12)
stim = Stimulus(waves, 20e-12)

base_cfg = SimConfig(trace=tuple(c880.nets))
full, full_trace = simulate(c880, stim, base_cfg.with_(scheduler=False), tech)
print(f"{len(c880)} cells, scheduler off: {full_trace.total_evaluations} evaluations")
for frac in (0.0, 1e-4, 1e-3, 1e-2):
    ws, tr = simulate(c880, stim, base_cfg.with_(theta=frac * tech.v_dd), tech)
    err = e_sim_multi(full, ws, tech.v_dd)["max"]
    print(f"theta={frac:g}*v_dd  evaluations {tr.total_evaluations:>7}  "
          f"({tr.total_evaluations / full_trace.total_evaluations:.3f} of full)  max E_sim {100 * err:.4f}%")
