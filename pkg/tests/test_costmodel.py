import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csmsim.celllib import CellKind
from csmsim.characterize import build_lut
from csmsim.costmodel import (Allocation, CpuSpec, GpuSpec, ModelShape, allocate_models,
                              cpu_interval_time, default_queries, gpu_interval_time, improvement)
from csmsim.engine import ScheduleTrace
from csmsim.errors import CapacityError, ConfigError, ContractViolation, NumericalError

INV, NAND2, NOR2 = CellKind.INV, CellKind.NAND2, CellKind.NOR2
C7552_HIST = {NAND2: 2625, INV: 799, NOR2: 401}
FINFET_HP = {INV: ModelShape(2, 10), NAND2: ModelShape(3, 20), NOR2: ModelShape(3, 20)}


def test_specs_defaults_and_invariants():
    assert GpuSpec().total_cores == 5120
    assert CpuSpec().query_latency == 250
    assert CpuSpec(memory_tier="l1").query_latency == 4
    with pytest.raises(ConfigError):
        CpuSpec(memory_channels=0)
    with pytest.raises(ConfigError):
        GpuSpec(sms=-1)
    with pytest.raises(ConfigError):
        CpuSpec(memory_tier="l3")


def test_cpu_example():
    t = cpu_interval_time({INV: 1}, {INV: 4}, CpuSpec())
    assert t == pytest.approx(250 / 2.4e9, rel=1e-12)
    assert t == pytest.approx(104.2e-9, abs=0.05e-9)


def test_cpu_channels_and_zero():
    active = {INV: 7, NAND2: 3}
    q = default_queries()
    t4 = cpu_interval_time(active, q, CpuSpec(memory_channels=4))
    t8 = cpu_interval_time(active, q, CpuSpec(memory_channels=8))
    assert t8 * 2 == t4
    assert cpu_interval_time({INV: 0}, q) == 0.0
    assert cpu_interval_time({}, q) == 0.0


def test_cpu_linear_in_queries():
    q = default_queries()
    a = cpu_interval_time({INV: 10, NOR2: 5}, q)
    b = cpu_interval_time({INV: 20, NOR2: 10}, q)
    assert b == 2 * a


def test_cpu_queries_from_luts(tech):
    luts = {k: build_lut(k, tech) for k in (INV, NAND2)}
    assert cpu_interval_time({INV: 3, NAND2: 2}, luts) == cpu_interval_time({INV: 3, NAND2: 2}, {INV: 4, NAND2: 8})


def test_single_kind_allocation():
    a = allocate_models({INV: 1000}, {INV: ModelShape(2, 9)})
    assert a.instances == {INV: 284} == {INV: 5120 // 18}
    assert a.cores_used == 284 * 18


def test_reference_concurrency_batches():
    alloc = Allocation({NAND2: 52, INV: 20, NOR2: 8}, 0, 5120)
    shapes = FINFET_HP
    t = gpu_interval_time(C7552_HIST, alloc, shapes)
    assert t * 1.45e9 / max(s.latency for s in shapes.values()) == pytest.approx(51)
    assert math.ceil(2625 / 52) == 51


def test_one_batch_and_zero():
    alloc = allocate_models({INV: 5}, {INV: ModelShape(2, 9)})
    assert gpu_interval_time({INV: 5}, alloc, {INV: ModelShape(2, 9)}) == pytest.approx(8 / 1.45e9)
    assert gpu_interval_time({INV: 0}, alloc, {INV: ModelShape(2, 9)}) == 0.0


def test_allocation_c7552_finfet_hp_cores():
    a = allocate_models(C7552_HIST, FINFET_HP)
    assert a.cores_used <= 5120
    assert all(n >= 1 for n in a.instances.values())
    assert a == allocate_models(C7552_HIST, FINFET_HP)


def test_allocation_sm_granularity():
    a = allocate_models(C7552_HIST, FINFET_HP, granularity="sm")
    assert sum(a.instances.values()) <= 80
    assert a.cores_used <= 5120
    with pytest.raises(ConfigError):
        allocate_models(C7552_HIST, FINFET_HP, granularity="warp")


@settings(max_examples=200)
@given(st.integers(0, 10000), st.integers(0, 10000), st.integers(0, 10000),
       st.integers(1, 40), st.integers(1, 40), st.integers(1, 40), st.sampled_from(["cores", "sm"]))
def test_allocation_properties(n_inv, n_nand, n_nor, h1, h2, h3, gran):
    hist = {INV: n_inv, NAND2: n_nand, NOR2: n_nor}
    if not any(hist.values()):
        with pytest.raises(ContractViolation):
            allocate_models(hist, {INV: ModelShape(2, h1)})
        return
    shapes = {INV: ModelShape(2, h1), NAND2: ModelShape(3, h2), NOR2: ModelShape(3, h3)}
    a = allocate_models(hist, shapes, granularity=gran)
    assert a.cores_used <= 5120
    assert a.cores_used == sum(n * shapes[k].cores for k, n in a.instances.items())
    assert set(a.instances) == {k for k, v in hist.items() if v > 0}
    assert all(n >= 1 for n in a.instances.values())
    # nothing else fits
    free = 5120 - a.cores_used
    if gran == "cores":
        assert all(shapes[k].cores > free for k in a.instances)


def test_capacity_error():
    with pytest.raises(CapacityError):
        allocate_models({INV: 1, NAND2: 1}, {INV: ModelShape(2, 2000), NAND2: ModelShape(3, 2000)})


def test_missing_model():
    with pytest.raises(ContractViolation):
        allocate_models({INV: 3, NOR2: 1}, {INV: ModelShape(2, 5)})


@settings(max_examples=100)
@given(st.integers(0, 3000), st.integers(0, 3000), st.integers(0, 500))
def test_gpu_time_monotone(a, b, extra):
    alloc = allocate_models(C7552_HIST, FINFET_HP)
    t0 = gpu_interval_time({INV: a, NAND2: b}, alloc, FINFET_HP)
    t1 = gpu_interval_time({INV: a + extra, NAND2: b}, alloc, FINFET_HP)
    assert t1 >= t0 >= 0


def test_improvement_frequency_invariance(fa):
    shapes = {INV: ModelShape(2, 5), NAND2: ModelShape(3, 7), NOR2: ModelShape(3, 7)}
    from csmsim.netlist import gate_counts
    alloc = allocate_models(gate_counts(fa), shapes)
    tr = ScheduleTrace.all_active(fa, 10)
    base = improvement(tr, alloc, shapes)
    scaled = improvement(tr, alloc, shapes, cpu=CpuSpec(base_freq=2.4e9 * 3), gpu=GpuSpec(base_freq=1.45e9 * 3))
    assert scaled.improvement == pytest.approx(base.improvement, rel=1e-12)
    assert base.improvement == base.cpu_total / base.gpu_total
    assert all(t >= 0 for t in base.cpu_intervals + base.gpu_intervals)
    assert "improvement" in base.table()
    assert base.to_dict()["intervals"] == 10


def test_improvement_zero_gpu(fa):
    shapes = {INV: ModelShape(2, 5), NAND2: ModelShape(3, 7), NOR2: ModelShape(3, 7)}
    from csmsim.netlist import gate_counts
    alloc = allocate_models(gate_counts(fa), shapes)
    idle = ScheduleTrace(np.zeros(4, int), np.zeros(4, int), np.zeros((4, 3), int))
    with pytest.raises(NumericalError):
        improvement(idle, alloc, shapes)


def test_model_shape_of(models):
    s = ModelShape.of(models[INV])
    assert s.d_in == 2 and s.cores == 2 * models[INV].hidden
    assert ModelShape.of(s) is s
