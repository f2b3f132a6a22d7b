import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from csmsim.errors import ContractViolation, ParseError
from csmsim.metrics import Waveform, WaveformSet, e_sim, e_sim_multi, resample

VDD = 0.7
T = np.linspace(0, 10e-12, 101)
volts = arrays(np.float64, 101, elements=st.floats(-0.14, 0.84, allow_nan=False))


def test_identity_is_zero():
    w = Waveform(T, np.sin(T * 1e12))
    assert e_sim(w, w, VDD) == 0.0


def test_constant_offset():
    a = Waveform(T, np.full_like(T, 0.3))
    b = Waveform(T, np.full_like(T, 0.3 + 0.05 * VDD))
    assert e_sim(a, b, VDD) == pytest.approx(0.05, abs=1e-11)


def test_sawtooth_trapezoid_oracle():
    # |difference| = (t/T) v_dd; the trapezoid rule integrates a linear ramp exactly
    ref = Waveform(T, np.zeros_like(T))
    test = Waveform(T, T / T[-1] * VDD)
    assert e_sim(ref, test, VDD) == pytest.approx(0.5, abs=1e-12)


def test_grid_mismatch_and_zero_horizon():
    a = Waveform(T, np.zeros_like(T))
    b = Waveform(T * 1.01, np.zeros_like(T))
    with pytest.raises(ContractViolation):
        e_sim(a, b, VDD)
    with pytest.raises(ContractViolation):
        e_sim(a, a, 0.0)
    with pytest.raises(ContractViolation):
        Waveform([0.0], [1.0])


@settings(max_examples=60)
@given(volts, volts, volts)
def test_metric_properties(x, y, z):
    a, b, c = (Waveform(T, v) for v in (x, y, z))
    ab, ba = e_sim(a, b, VDD), e_sim(b, a, VDD)
    assert ab == ba
    assert ab >= 0
    assert ab <= e_sim(a, c, VDD) + e_sim(c, b, VDD) + 1e-12
    assert (ab == 0) == np.array_equal(x, y)


@settings(max_examples=30)
@given(volts, volts, st.floats(0.1, 10))
def test_scale_invariance(x, y, c):
    plain = e_sim(Waveform(T, x), Waveform(T, y), VDD)
    scaled = e_sim(Waveform(T, c * x), Waveform(T, c * y), c * VDD)
    assert scaled == pytest.approx(plain, rel=1e-9, abs=1e-15)


def test_resample_identity():
    w = Waveform(T, np.cos(T * 3e11))
    assert np.array_equal(resample(w, T).values, w.values)


def test_resample_midpoint_pair():
    w = Waveform([0.0, 1.0, 2.0], [2.0, 4.0, 0.0])
    r = resample(w, [0.5, 1.5])
    assert list(r.values) == [3.0, 2.0]


def test_resample_matches_linear_oracle():
    rng = np.random.default_rng(3)
    w = Waveform(T, rng.normal(size=T.shape))
    grid = np.sort(rng.uniform(T[0], T[-1], 200))
    grid[0], grid[-1] = T[0], T[-1]
    got = resample(w, grid).values
    want = []
    for g in grid:
        j = min(int(np.searchsorted(T, g, side="right")) - 1, len(T) - 2)
        frac = (g - T[j]) / (T[j + 1] - T[j])
        want.append(w.values[j] + frac * (w.values[j + 1] - w.values[j]))
    assert np.max(np.abs(got - np.array(want))) <= 1e-12


def test_resample_outside_span():
    with pytest.raises(ContractViolation):
        resample(Waveform(T, np.zeros_like(T)), [0.0, 11e-12])


def test_multi_net():
    ref = WaveformSet(T, {"a": np.zeros_like(T), "b": np.zeros_like(T)})
    test = WaveformSet(T, {"a": np.full_like(T, 0.07), "b": np.zeros_like(T)})
    res = e_sim_multi(ref, test, VDD)
    assert res["per_net"]["a"] == pytest.approx(0.1)
    assert res["max"] == pytest.approx(0.1) and res["mean"] == pytest.approx(0.05)
    single = e_sim_multi(WaveformSet(T, {"a": ref.traces["a"]}), WaveformSet(T, {"a": test.traces["a"]}), VDD)
    assert single["max"] == e_sim(ref.waveform("a"), test.waveform("a"), VDD)
    with pytest.raises(ContractViolation):
        e_sim_multi(ref, WaveformSet(T, {"a": ref.traces["a"]}), VDD)


@settings(max_examples=30)
@given(volts, volts)
def test_max_at_least_mean(x, y):
    res = e_sim_multi(WaveformSet(T, {"p": x, "q": y}), WaveformSet(T, {"p": y, "q": x[::-1]}), VDD)
    assert res["max"] >= res["mean"]


def test_csv_round_trip():
    ws = WaveformSet(T, {"sum": np.sin(T * 1e12), "cout": np.cos(T * 1e12)})
    back = WaveformSet.from_csv(ws.to_csv())
    assert back.nets == ["sum", "cout"]
    assert np.array_equal(back.times, ws.times)
    assert all(np.array_equal(back.traces[n], ws.traces[n]) for n in ws.nets)
    assert back.dT == pytest.approx(1e-13) and back.horizon == pytest.approx(10e-12)


def test_csv_errors():
    with pytest.raises(ParseError, match="line 1"):
        WaveformSet.from_csv("t,a\n0,1\n")
    with pytest.raises(ParseError, match="line 3"):
        WaveformSet.from_csv("time,a\n0,1\n1e-12,x\n")
    with pytest.raises(ParseError, match="line 2"):
        WaveformSet.from_csv("time,a\n0,1,2\n")
