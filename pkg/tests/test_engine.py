import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csmsim.benchmarks import BUNDLED, load_benchmark
from csmsim.celllib import ALL_KINDS, CellKind
from csmsim.characterize import build_lut
from csmsim.engine import (AnalyticBackend, LutBackend, NNBackend, NoiseSpec, PwlWaveform,
                           ScheduleTrace, SimConfig, SimState, Stimulus, generate_noisy_inputs,
                           make_backend, ramp, reference_simulate, simulate, simulate_suite,
                           single_cell_circuit, step_gate, update_active_set)
from csmsim.errors import ConfigError, ContractViolation, NumericalError
from csmsim.metrics import e_sim_multi
from csmsim.netlist import parse_bench, tech_map

# max |backend - analytic| over 1000 points in [0, v_dd]^D, in units of g_scale (measured at bring-up)
LUT_BOUND = 1.0
NN_BOUND = {CellKind.INV: 10.0, CellKind.NAND2: 30.0, CellKind.NOR2: 20.0}
# c880, one switching input: evaluations at theta=1e-3*v_dd over theta=0 (measured 0.028)
C880_REDUCTION = 0.05


def _const(circuit, levels, horizon):
    return Stimulus({n: PwlWaveform.constant(v) for n, v in zip(circuit.primary_inputs, levels)}, horizon)


def _one_switching(circuit, vdd, horizon=20e-12, which=0):
    waves = {n: PwlWaveform.constant(0.0) for n in circuit.primary_inputs}
    waves[circuit.primary_inputs[which]] = ramp(0.0, vdd, 2e-12, 2e-12)
    return Stimulus(waves, horizon)


def _chain():
    return tech_map(parse_bench("INPUT(a)\nOUTPUT(z)\ny = NOT(a)\nz = NOT(y)\n"))


def _all_nets(c):
    return SimConfig(trace=tuple(c.nets))


# ---------------------------------------------------------------- step_gate


def test_settled_inverter_holds(tech):
    c = single_cell_circuit("INV")
    cfg = SimConfig(horizon=2e-12)
    ws, _ = simulate(c, _const(c, [0.0], 2e-12), cfg, tech)
    out = ws.traces["out"]
    assert np.all(np.abs(np.diff(out)) <= 1e-3 * tech.v_dd)
    assert np.all(np.abs(out - tech.v_dd) < 1e-3 * tech.v_dd)


def test_step_gate_matches_vectorised(tech):
    c = single_cell_circuit("NAND2")
    stim = Stimulus({"a": ramp(0, tech.v_dd, 0, 1e-12), "b": PwlWaveform.constant(tech.v_dd)}, 2e-12)
    cfg = SimConfig(scheduler=False, horizon=2e-12)
    be = AnalyticBackend(tech)
    s1, s2 = SimState(c, tech, cfg, be, stim), SimState(c, tech, cfg, be, stim)
    for _ in range(10):
        s1.step()
        s2.step()
    s1.step()
    expect = s1.voltage
    got = step_gate(c.gates[0], s2, be, s2.h)
    assert got == pytest.approx(expect[c.net_index["out"]], abs=1e-15)


def test_rising_ramp_inverter(tech):
    c = single_cell_circuit("INV")
    vdd = tech.v_dd
    stim = Stimulus({"in": ramp(0.0, vdd, 1e-12, 2e-12)}, 20e-12)
    cfg = SimConfig(scheduler=False)
    ws, _ = simulate(c, stim, cfg, tech)
    ref = reference_simulate(c, stim, cfg, tech)
    out = ws.traces["out"]
    # monotone fall up to tiny Miller kick at the ramp start
    drop = np.diff(out)
    assert np.all(drop[drop > 0] < 1e-2 * vdd)
    assert abs(out[-1]) < 1e-2 * vdd
    assert abs(ref.traces["out"][-1]) < 1e-2 * vdd
    assert e_sim_multi(ref, ws, vdd)["max"] < 0.01


def test_driver_delta_reaches_load_next_step(tech):
    c = _chain()
    stim = Stimulus({"a": ramp(0.0, tech.v_dd, 0.5e-12, 1e-12)}, 3e-12)
    s = SimState(c, tech, SimConfig(scheduler=False), AnalyticBackend(tech), stim)
    y = c.net_index["y"]
    load = c.gates[1]
    for _ in range(40):
        s.step()
        dy = s.delta[y]
        # the load's Miller input at the next step is exactly the driver's last output delta
        assert s.delta[list(load.inputs)].sum() == dy


def test_nonfinite_update_raises(tech):
    class Broken:
        def current(self, kind, v):
            return np.full(len(v), np.nan)

    c = single_cell_circuit("INV")
    s = SimState(c, tech, SimConfig(), AnalyticBackend(tech), _const(c, [0.0], 1e-12))
    s.backend = Broken()
    with pytest.raises(NumericalError) as err:
        s.step()
    assert err.value.gate == 0 and err.value.interval == 0
    with pytest.raises(NumericalError):
        step_gate(c.gates[0], s, Broken(), s.h)


# ---------------------------------------------------------------- active set


def test_quiescent_circuit_goes_idle(tech, fa):
    stim = _const(fa, [0.0, tech.v_dd, 0.0], 1e-12)
    s = SimState(fa, tech, SimConfig(), AnalyticBackend(tech), stim)
    assert s.active.all()
    s.step()
    assert not s.active.any()


def test_theta_zero_activates_on_any_delta(tech):
    c = _chain()
    s = SimState(c, tech, SimConfig(theta=0.0), AnalyticBackend(tech), _const(c, [0.0], 1e-12))
    s.last_current[:] = 0.0
    delta = np.zeros(len(c.nets))
    assert not update_active_set(s, delta, 0.0).any()
    delta[c.net_index["z"]] = 1e-300
    assert update_active_set(s, delta, 0.0).tolist() == [False, True]


def test_chain_activation_timing(tech):
    c = _chain()
    cfg = SimConfig()
    theta = cfg.theta_volts(tech)
    stim = Stimulus({"a": ramp(0.0, tech.v_dd, 1e-12, 1e-12)}, 3e-12)
    s = SimState(c, tech, cfg, AnalyticBackend(tech), stim)
    y = c.net_index["y"]
    first_move, first_active2 = None, None
    for i in range(60):
        if first_active2 is None and i > 0 and s.active[1]:
            first_active2 = i
        s.step()
        if first_move is None and abs(s.delta[y]) > theta:
            first_move = i
    assert first_move is not None
    assert first_active2 == first_move + 1


# ---------------------------------------------------------------- scheduler soundness


@pytest.mark.parametrize("name", ["fa", "c880"])
def test_theta_zero_equals_scheduler_off(tech, name):
    c = tech_map(load_benchmark(name))
    cfg = _all_nets(c)
    stim = _one_switching(c, tech.v_dd)
    off, _ = simulate(c, stim, cfg.with_(scheduler=False), tech)
    zero, _ = simulate(c, stim, cfg.with_(theta=0.0), tech)
    for n in c.nets:
        assert np.max(np.abs(off.traces[n] - zero.traces[n])) <= 1e-12


def test_noisy_theta_zero_equals_scheduler_off(tech, fa, fa_suite):
    cfg = SimConfig()
    off = simulate_suite(fa, fa_suite[:3], cfg.with_(scheduler=False), tech)
    zero = simulate_suite(fa, fa_suite[:3], cfg.with_(theta=0.0), tech)
    for a, b in zip(off, zero):
        for n in fa.primary_outputs:
            assert np.max(np.abs(a.traces[n] - b.traces[n])) <= 1e-12


def test_order_permutation_is_bit_identical(tech, fa):
    stim = _one_switching(fa, tech.v_dd, 5e-12)
    cfg = _all_nets(fa).with_(horizon=5e-12)
    rng = np.random.default_rng(0)
    base, _ = simulate(fa, stim, cfg, tech, order=list(range(len(fa.gates))))
    for _ in range(3):
        perm = rng.permutation(len(fa.gates)).tolist()
        other, _ = simulate(fa, stim, cfg, tech, order=perm)
        for n in fa.nets:
            assert np.array_equal(base.traces[n], other.traces[n])
    vec, _ = simulate(fa, stim, cfg, tech)
    for n in fa.nets:
        assert np.max(np.abs(vec.traces[n] - base.traces[n])) <= 1e-15


def test_evaluations_monotone_in_theta(tech, c880):
    stim = _one_switching(c880, tech.v_dd)
    counts = []
    for frac in [0.0, 1e-5, 1e-4, 1e-3, 1e-2, 5e-2]:
        _, tr = simulate(c880, stim, SimConfig(theta=frac * tech.v_dd), tech)
        counts.append(tr.total_evaluations)
    assert all(a >= b for a, b in zip(counts, counts[1:]))
    assert counts[3] <= C880_REDUCTION * counts[0]


def test_trace_counts_match_active(tech, c880):
    _, tr = simulate(c880, _one_switching(c880, tech.v_dd), SimConfig(), tech)
    assert np.array_equal(tr.active, tr.active_by_kind.sum(axis=1))
    assert np.array_equal(tr.active, tr.evaluations)
    assert tr.active[0] == len(c880.gates)


# ---------------------------------------------------------------- reference


def test_refine_one_reference_equals_theta_zero(tech, fa, fa_suite):
    cfg = SimConfig(theta=0.0)
    ws, _ = simulate(fa, fa_suite[0], cfg, tech)
    ref = reference_simulate(fa, fa_suite[0], cfg, tech, refine=1)
    for n in fa.primary_outputs:
        assert np.max(np.abs(ws.traces[n] - ref.traces[n])) <= 1e-12


def test_reference_converged(tech, fa, fa_suite):
    cfg = SimConfig()
    r100 = simulate_suite(fa, fa_suite, cfg, tech, reference=True, refine=100)
    r200 = simulate_suite(fa, fa_suite, cfg, tech, reference=True, refine=200)
    assert max(e_sim_multi(a, b, tech.v_dd)["max"] for a, b in zip(r100, r200)) <= 0.002


def test_settled_reference_is_flat(tech, fa):
    ref = reference_simulate(fa, _const(fa, [tech.v_dd, 0.0, tech.v_dd], 2e-12), SimConfig(horizon=2e-12), tech)
    for n in fa.primary_outputs:
        assert np.ptp(ref.traces[n]) < 1e-9


@pytest.mark.parametrize("name", BUNDLED)
def test_stability_box(tech, name):
    c = tech_map(load_benchmark(name))
    cfg = _all_nets(c)
    spec = NoiseSpec(inputs=tuple(c.primary_inputs), v_dd=tech.v_dd, dT=cfg.dT, horizon=cfg.horizon)
    ws, _ = simulate(c, generate_noisy_inputs(1, 3, spec)[0], cfg, tech)
    v = np.stack(list(ws.traces.values()))
    # the clamp is a guard only: no internal node may reach it
    gates_out = [c.nets[g.output] for g in c.gates]
    vo = np.stack([ws.traces[n] for n in gates_out])
    assert np.all(np.isfinite(v))
    assert vo.min() > tech.v_lo and vo.max() < tech.v_hi


# ---------------------------------------------------------------- stimuli


def _spec(tech, **kw):
    return NoiseSpec(inputs=("a", "b"), v_dd=tech.v_dd, dT=0.05e-12, horizon=10e-12, **kw)


def test_noise_free_ramps(tech):
    suite = generate_noisy_inputs(5, 2, _spec(tech, amplitude=0.0))
    for stim in suite:
        for w in stim.waveforms.values():
            d = np.diff(w.values)
            assert np.all(d >= 0) or np.all(d <= 0)
            assert {round(w.values[0], 12), round(w.values[-1], 12)} == {0.0, round(tech.v_dd, 12)}


def test_same_seed_same_suite(tech):
    a = generate_noisy_inputs(4, 11, _spec(tech))
    b = generate_noisy_inputs(4, 11, _spec(tech))
    for x, y in zip(a, b):
        for n in x.waveforms:
            assert np.array_equal(x.waveforms[n].values, y.waveforms[n].values)
    c = generate_noisy_inputs(4, 12, _spec(tech))
    assert not np.array_equal(a[0].waveforms["a"].values, c[0].waveforms["a"].values)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(0.0, 1.0))
def test_noisy_inputs_clamped(tech, seed, amp):
    suite = generate_noisy_inputs(3, seed, _spec(tech, amplitude=amp))
    for stim in suite:
        for w in stim.waveforms.values():
            assert w.values.min() >= tech.v_lo and w.values.max() <= tech.v_hi


def test_noisy_inputs_needs_one(tech):
    with pytest.raises(ConfigError):
        generate_noisy_inputs(0, 0, _spec(tech))


# ---------------------------------------------------------------- backends and config


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_backend_consistency(tech, models, kind):
    pts = np.random.default_rng(3).uniform(0.0, tech.v_dd, (1000, kind.dim))
    a = AnalyticBackend(tech).current(kind, pts)
    lut = LutBackend({kind: build_lut(kind, tech)}).current(kind, pts)
    nn = NNBackend(models).current(kind, pts)
    assert np.abs(lut - a).max() <= LUT_BOUND * tech.g_scale
    assert np.abs(nn - a).max() <= NN_BOUND[kind] * tech.g_scale


def test_make_backend_errors(tech):
    with pytest.raises(ConfigError):
        make_backend("nn", tech)
    with pytest.raises(ConfigError):
        make_backend("lut", tech)
    with pytest.raises(ConfigError):
        make_backend("spice", tech)


def test_horizon_overflow(tech):
    with pytest.raises(ConfigError):
        SimConfig(horizon=1.0).intervals()
    c = single_cell_circuit("INV")
    with pytest.raises(ConfigError):
        simulate(c, _const(c, [0.0], 1.0), SimConfig(horizon=1.0), tech)


def test_short_stimulus_rejected(tech):
    c = single_cell_circuit("INV")
    with pytest.raises(ConfigError):
        simulate(c, _const(c, [0.0], 1e-12), SimConfig(horizon=2e-12), tech)


def test_pwl_validation():
    with pytest.raises(ContractViolation):
        PwlWaveform(np.array([0.0, 0.0]), np.array([0.0, 1.0]))
    with pytest.raises(ContractViolation):
        PwlWaveform(np.array([1e-12, 2e-12]), np.array([0.0, 1.0]))


def test_schedule_trace_csv(tech, fa):
    _, tr = simulate(fa, _one_switching(fa, tech.v_dd, 2e-12), SimConfig(horizon=2e-12), tech)
    back = ScheduleTrace.from_csv(tr.to_csv())
    assert np.array_equal(back.active, tr.active)
    assert np.array_equal(back.evaluations, tr.evaluations)
    assert np.array_equal(back.active_by_kind, tr.active_by_kind)
    full = ScheduleTrace.all_active(fa, 3)
    assert full.total_evaluations == 3 * len(fa.gates)
