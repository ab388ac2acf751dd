import numpy as np
import pytest

from motioninpaint import energy
from motioninpaint.energy import EnergyConfig, FlowLines, Phi

from helpers import all_indices, fd_agreement, random_instance


def test_phi_values():
    phi = Phi(1e-3)
    assert phi(0.0) == pytest.approx(1e-3)
    assert phi(1.0) == pytest.approx(np.sqrt(1 + 1e-6))
    assert phi.prime(0.0) == pytest.approx(500.0)
    with pytest.raises(ValueError):
        Phi(0.0)


def test_config_validation_and_transport_default():
    assert EnergyConfig().resolved_transport == "b-chooser"
    assert EnergyConfig(e3_variant=2).resolved_transport == "off"
    assert EnergyConfig(transport="naive").resolved_transport == "naive"
    for bad in (dict(e3_variant=4), dict(mode="x"), dict(transport="y"), dict(lambda2=-1),
                dict(e3_scheme="z"), dict(mode="inpaint-denoise", lambda1=0), dict(epsilon=0)):
        with pytest.raises(ValueError):
            EnergyConfig(**bad)


def test_halfpoint_tv_of_constant():
    T, H, W = 2, 5, 6
    u = np.full((T, H, W, 3), 0.3)
    e, g = energy.e2_terms(u, Phi(1e-3))
    edges = (H - 1) * W + H * (W - 1)
    assert e == pytest.approx(T * edges * 1e-3 / 4)
    assert np.all(g == 0)


@pytest.mark.parametrize("channels", [1, 3])
def test_e2_gradient_matches_finite_differences(channels):
    _, u, _ = random_instance(0, channels=channels)
    phi = Phi(1e-3)
    _, g = energy.e2_terms(u, phi)
    frac, worst = fd_agreement(lambda x: energy.e2_terms(x, phi)[0], u, g, all_indices(u.shape))
    assert frac == 1.0, worst


def test_chan_shen_stencil_vanishes_on_affine_interior():
    yy, xx = np.mgrid[0:8, 0:8].astype(float)
    u = (0.02 * xx + 0.01 * yy)[None, ..., None]
    for stencil in ("exact", "chan-shen"):
        g = energy.grad_u_E2(u, np.ones((1, 8, 8), bool), stencil=stencil)
        assert np.allclose(g[:, 2:-2, 2:-2], 0, atol=1e-12)


def test_grad_u_E2_masked_in_pure_inpaint():
    _, u, _ = random_instance(1)
    mask = np.zeros(u.shape[:3], bool)
    mask[1, 2:5, 2:5] = True
    g = energy.grad_u_E2(u, mask)
    assert np.all(g[~mask] == 0) and np.any(g[mask] != 0)
    full = energy.grad_u_E2(u, mask, mode=energy.INPAINT_DENOISE)
    assert np.array_equal(full[mask], g[mask])


def test_grad_u_E1():
    u = np.full((2, 3, 3, 1), 0.5)
    u0 = np.zeros_like(u)
    mask = np.zeros((2, 3, 3), bool)
    mask[0, 1, 1] = True
    g = energy.grad_u_E1(u, u0, mask)
    assert g[0, 1, 1, 0] == 0 and g[1, 1, 1, 0] == 0.5


@pytest.mark.parametrize("variant", [1, 2, 3])
@pytest.mark.parametrize("channels", [1, 3])
def test_e3_adjoint_gradient_matches_energy(variant, channels):
    _, u, v = random_instance(10 + variant, channels=channels)
    cfg = EnergyConfig(e3_variant=variant, lambda2=0, lambda4=0)
    mask = np.ones(u.shape[:3], bool)
    g = energy.grad_u_E3(u, v, None, mask, cfg)
    f = lambda x: energy.energy_value(x, x, v, mask, cfg)
    frac, worst = fd_agreement(f, u, g, all_indices(u.shape))
    assert frac >= 0.99, worst


@pytest.mark.parametrize("variant", [1, 2, 3])
def test_schemes_agree_without_motion(variant):
    _, u, _ = random_instance(20)
    zero = np.zeros((2,) + u.shape[1:3] + (2,))
    mask = np.ones(u.shape[:3], bool)
    a = energy.grad_u_E3(u, zero, zero, mask, EnergyConfig(e3_variant=variant, e3_scheme="adjoint"))
    for transport in ("off", "b-chooser", "naive"):
        cfg = EnergyConfig(e3_variant=variant, e3_scheme="flowline", transport=transport)
        assert np.allclose(energy.grad_u_E3(u, zero, zero, mask, cfg), a, atol=1e-12)


def test_zero_flow_variant1_is_weighted_temporal_laplacian():
    _, u, _ = random_instance(21, frames=4)
    zero = np.zeros((3,) + u.shape[1:3] + (2,))
    phi = Phi(1e-3)
    cfg = EnergyConfig(e3_scheme="flowline", transport="off")
    g = energy.grad_u_E3(u, zero, zero, np.ones(u.shape[:3], bool), cfg)
    d = np.diff(u, axis=0)
    B = phi.prime(d[..., 0] ** 2)[..., None]
    k = 1
    expect = -(B[k - 1] * u[k - 1] - (B[k - 1] + B[k]) * u[k] + B[k] * u[k + 1])
    assert np.allclose(g[k], expect)


def test_flowline_needs_backward_flow():
    _, u, v = random_instance(22)
    with pytest.raises(ValueError):
        energy.grad_u_E3(u, v, None, np.ones(u.shape[:3], bool), EnergyConfig(e3_scheme="flowline"))


def test_e3_value_constant_sequence():
    u = np.full((3, 4, 4, 1), 0.2)
    v = np.random.default_rng(0).uniform(-1, 1, (2, 4, 4, 2))
    lines = FlowLines(u.shape, v)
    # every pixel contributes phi(0) / 2
    assert energy.e3_value(u, lines, 1, 0.1, Phi(1e-3)) == pytest.approx(2 * 16 * 1e-3 / 2)


def test_coeff_B():
    u = np.full((3, 4, 4, 1), 0.2)
    v = np.zeros((2, 4, 4, 2))
    assert np.allclose(energy.coeff_B(u, v, 0, 1, "+"), 500.0)
    assert np.allclose(energy.coeff_B(u, v, 2, 2, "-"), 500.0)
    with pytest.raises(IndexError):
        energy.coeff_B(u, v, 2, 1, "+")
    with pytest.raises(IndexError):
        energy.coeff_B(u, v, 0, 1, "-")
    with pytest.raises(ValueError):
        energy.coeff_B(u, v, 1, 1, "?")


def test_e4_variants():
    v = np.zeros((1, 5, 5, 2))
    assert energy.e4_value(v, 1, Phi()) > 0
    with pytest.raises(ValueError):
        energy.e4_terms(v, 3, Phi())


def test_energy_parts():
    rng, u, v = random_instance(30)
    u0 = rng.random(u.shape)
    mask = np.zeros(u.shape[:3], bool)
    parts = energy.energy_parts(u, u0, v, mask)
    assert set(parts) == {"E1", "E2", "E3", "E4"} and parts["E1"] == 0
    cfg = EnergyConfig(mode=energy.INPAINT_DENOISE)
    parts = energy.energy_parts(u, u0, v, mask, cfg)
    assert parts["E1"] == pytest.approx(20 * 0.5 * np.sum((u - u0) ** 2))
    assert energy.energy_value(u, u0, v, mask, cfg) == pytest.approx(sum(parts.values()))
