"""Train an inverter surrogate and compare its transient against the reference.

Run: python demos/01_single_inverter.py
"""

from csmsim.celllib import TechnologyParams
from csmsim.characterize import sample_dataset, split_dataset
from csmsim.engine import SimConfig, Stimulus, ramp, reference_simulate, simulate, single_cell_circuit
from csmsim.metrics import e_sim_multi
from csmsim.mlp import TrainConfig, train

tech = TechnologyParams()

# 500 labelled points, 90% used for training
data, held_out = split_dataset(sample_dataset("INV", tech, n=500, seed=0), 0.9, seed=0)
model = train(data, hidden=6, cfg=TrainConfig(epochs=4000))
print(f"trained INV H={model.hidden}: MSE {model.meta['first_loss']:.3g} -> {model.meta['final_loss']:.3g}")

# one inverter driving a primary output, input rising from 0 to v_dd
cell = single_cell_circuit("INV")
stim = Stimulus({"in": ramp(0.0, tech.v_dd, 2e-12, 3e-12)}, 20e-12)
cfg = SimConfig(backend="nn")
nn, trace = simulate(cell, stim, cfg, tech, models={"INV": model})
ref = reference_simulate(cell, stim, cfg, tech)

print(f"E_sim vs reference: {100 * e_sim_multi(ref, nn, tech.v_dd)['max']:.3f}%")
print(f"gate evaluations: {trace.total_evaluations} over {len(trace.active)} intervals")
for i in range(0, len(nn.times), 50):
    print(f"  t={nn.times[i] * 1e12:5.1f} ps  ref {ref.traces['out'][i]:.4f} V  nn {nn.traces['out'][i]:.4f} V")
