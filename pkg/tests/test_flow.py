import numpy as np
import pytest

from motioninpaint import flow, synth
from motioninpaint.energy import EnergyConfig, Phi, energy_value
from motioninpaint.errors import FlowDivergenceError, NumericalError
from motioninpaint.flow import FlowSolverParams
from motioninpaint.grid import reverse_flow, time_reverse

from helpers import all_indices, fd_agreement, random_instance


def test_params_validation():
    for bad in (dict(dtau=0), dict(iterations=0), dict(e3_variant=5), dict(e4_variant=0)):
        with pytest.raises(ValueError):
            FlowSolverParams(**bad)


@pytest.mark.parametrize("variant", [1, 2, 3])
@pytest.mark.parametrize("channels", [1, 3])
def test_grad_v_E3_matches_energy(variant, channels):
    _, u, v = random_instance(40 + variant, channels=channels)
    cfg = EnergyConfig(e3_variant=variant, lambda2=0, lambda4=0)
    mask = np.zeros(u.shape[:3], bool)
    phi = Phi()
    for k in range(v.shape[0]):
        g = np.zeros_like(v)
        g[k] = flow.grad_v_E3(u, v, k, variant, 0.1, phi)
        idx = [(k,) + i for i in all_indices(v.shape[1:])]
        frac, worst = fd_agreement(lambda x: energy_value(u, u, x, mask, cfg), v, g, idx)
        assert frac >= 0.99, worst


@pytest.mark.parametrize("variant", [1, 2, 3])
def test_grad_v_E4_matches_energy(variant):
    _, u, v = random_instance(50)
    cfg = EnergyConfig(e4_variant=variant, lambda2=0, lambda3=0, lambda4=1)
    mask = np.zeros(u.shape[:3], bool)
    g = flow.grad_v_E4(v, variant, Phi())
    frac, worst = fd_agreement(lambda x: energy_value(u, u, x, mask, cfg), v, g, all_indices(v.shape))
    assert frac == 1.0, worst


@pytest.mark.parametrize("variant", [1, 2, 3])
def test_grad_v_E4_constant_and_affine(variant):
    v = np.full((2, 8, 8, 2), 0.7)
    assert np.all(flow.grad_v_E4(v, variant) == 0)
    yy, xx = np.mgrid[0:8, 0:8].astype(float)
    v = np.zeros((2, 8, 8, 2))
    v[..., 0] = 0.1 * xx
    v[..., 1] = -0.05 * yy
    assert np.allclose(flow.grad_v_E4(v, variant)[:, 2:-2, 2:-2], 0, atol=1e-12)


def test_grad_v_E3_time_constant_sequence_is_zero():
    u = np.tile(np.random.default_rng(0).random((1, 8, 8, 1)), (3, 1, 1, 1))
    v = np.zeros((2, 8, 8, 2))
    for variant in (1, 2):
        assert np.all(flow.grad_v_E3(u, v, 0, variant) == 0)


def test_grad_v_E3_ramp_sign():
    W = 16
    yy, xx = np.mgrid[0:8, 0:W].astype(float)
    u = np.stack([(xx - k) / W for k in range(3)])[..., None]
    g = flow.grad_v_E3(u, np.zeros((2, 8, W, 2)), 0)
    # residual -1/W times slope 1/W: descent pushes the flow towards +x
    assert np.all(g[:, :-1, 0] < 0) and np.allclose(g[..., 1], 0)


def test_grad_v_E3_index_error():
    _, u, v = random_instance(0)
    with pytest.raises(IndexError):
        flow.grad_v_E3(u, v, 2)


def test_solve_flow_fixed_point():
    u = np.tile(np.random.default_rng(1).random((1, 8, 8, 1)), (3, 1, 1, 1))
    v = flow.solve_flow(u, np.zeros((2, 8, 8, 2)))
    assert np.all(v == 0)


def test_solve_flow_decreases_energy():
    u, _, _ = synth.translating_sequence(24, 24, 3, shift=(0.5, 0.0))
    p = FlowSolverParams(iterations=50)
    trace = []
    v = flow.solve_flow(u, np.zeros((2, 24, 24, 2)), p, trace=trace)
    assert len(trace) == 51
    assert flow.flow_energy(u, v, p) == pytest.approx(trace[-1])
    assert trace[-1] < trace[0]


def test_solve_flow_aborts_on_rising_energy(monkeypatch):
    calls = iter(range(1000))

    def rising(u, v, params):
        # energy grows every step whatever the update
        return float(next(calls)), np.zeros_like(v)

    monkeypatch.setattr(flow, "flow_energy_and_grad", rising)
    u = np.zeros((3, 8, 8, 1))
    with pytest.raises(FlowDivergenceError, match="11 consecutive"):
        flow.solve_flow(u, np.zeros((2, 8, 8, 2)), FlowSolverParams(iterations=50))


def test_solve_flow_aborts_on_non_finite():
    u = np.random.default_rng(0).random((3, 8, 8, 1))
    v = np.zeros((2, 8, 8, 2))
    v[0, 3, 3, 0] = np.inf
    with pytest.raises(NumericalError, match="non-finite"):
        flow.solve_flow(u, v)


def test_backward_flow_of_static_sequence_is_zero():
    u = np.tile(np.random.default_rng(2).random((1, 8, 8, 1)), (3, 1, 1, 1))
    w = flow.backward_flow(u, np.zeros((2, 8, 8, 2)))
    assert np.all(w == 0)


@pytest.mark.parametrize("shift", [(0, 0), (1, 0), (-1, 2)])
def test_flow_energy_time_reversal_symmetry(shift):
    rng = np.random.default_rng(3)
    u = rng.random((4, 10, 10, 1))
    v = np.zeros((3, 10, 10, 2))
    v[...] = shift
    p = FlowSolverParams()
    assert flow.flow_energy(u, v, p) == pytest.approx(
        flow.flow_energy(time_reverse(u), reverse_flow(v), p), rel=1e-12
    )


def test_double_reversal_gives_comparable_forward_flow():
    u, _, _ = synth.translating_sequence(24, 24, 3, shift=(0.5, 0.0))
    p = FlowSolverParams(iterations=100)
    v = flow.solve_flow(u, np.zeros((2, 24, 24, 2)), p)
    ur = time_reverse(u)
    w_of_reversed = flow.backward_flow(ur, reverse_flow(v), p)
    v_again = reverse_flow(w_of_reversed)
    e1 = flow.flow_energy(u, v, p)
    e2 = flow.flow_energy(u, v_again, p)
    assert abs(e2 - e1) <= 0.05 * e1
