"""Energy terms and image-side gradients.

The discrete energy is

    E(u, v) = l1 * E1 + l2 * E2 + l3 * E3 + l4 * E4

with every term carrying a factor 1/2 so that the gradients take the
familiar ``phi'``-weighted diffusion form (``phi'(s) = 1 / (2 sqrt(s + eps^2))``).

* E1 = 1/2 sum over known pixels of (u - u0)^2
* E2 = half-point total variation of each frame (see :func:`halfpoint_tv`)
* E3 = 1/2 sum over frame pairs and pixels of the flow-line integrand
* E4 = half-point total variation of the forward flow
"""
from __future__ import annotations

import dataclasses
from typing import Optional

import numpy as np

from .grid import (
    Interpolation,
    Warp,
    as_sequence,
    check_flow,
    check_mask,
    divergence,
    flow_divergence_correction,
    gradient_adjoint,
)

PURE_INPAINT = "pure-inpaint"
INPAINT_DENOISE = "inpaint-denoise"
MODES = (PURE_INPAINT, INPAINT_DENOISE)
TRANSPORTS = ("off", "naive", "b-chooser")
SCHEMES = ("flowline", "adjoint")


@dataclasses.dataclass(frozen=True)
class Phi:
    """Regularised total-variation function ``phi(s) = sqrt(s + eps^2)``."""

    epsilon: float = 1e-3

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    def __call__(self, s):
        return np.sqrt(s + self.epsilon**2)

    def prime(self, s):
        return 0.5 / np.sqrt(s + self.epsilon**2)


@dataclasses.dataclass(frozen=True)
class EnergyConfig:
    """Weights and term selection for the joint energy.

    ``transport=None`` picks the per-variant default: ``"b-chooser"`` for
    variant 1, ``"off"`` for variants 2 and 3.  ``e3_scheme`` selects how the
    image gradient of the flow-line term is built: ``"flowline"`` uses the
    backward flow to reach the previous frame, ``"adjoint"`` uses the exact
    transpose of the forward warp (the backward flow is then unused).
    """

    lambda1: float = 20.0
    lambda2: float = 0.1
    lambda3: float = 1.0
    lambda4: float = 0.2
    gamma: float = 0.1
    e3_variant: int = 1
    e4_variant: int = 2
    mode: str = PURE_INPAINT
    transport: Optional[str] = None
    e3_scheme: str = "adjoint"
    epsilon: float = 1e-3
    dtau: float = 1e-3
    iterations: int = 500
    interpolation: str = "bilinear"

    def __post_init__(self):
        if self.e3_variant not in (1, 2, 3):
            raise ValueError(f"e3_variant must be 1, 2 or 3, got {self.e3_variant}")
        if self.e4_variant not in (1, 2, 3):
            raise ValueError(f"e4_variant must be 1, 2 or 3, got {self.e4_variant}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == INPAINT_DENOISE and not self.lambda1 > 0:
            raise ValueError("inpaint-denoise mode requires lambda1 > 0")
        if self.transport is not None and self.transport not in TRANSPORTS:
            raise ValueError(f"transport must be one of {TRANSPORTS}, got {self.transport!r}")
        if self.e3_scheme not in SCHEMES:
            raise ValueError(f"e3_scheme must be one of {SCHEMES}, got {self.e3_scheme!r}")
        for name in ("lambda1", "lambda2", "lambda3", "lambda4", "gamma", "dtau"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        Interpolation(self.interpolation)
        Phi(self.epsilon)

    @property
    def phi(self):
        return Phi(self.epsilon)

    @property
    def resolved_transport(self):
        if self.transport is not None:
            return self.transport
        return "b-chooser" if self.e3_variant == 1 else "off"

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


# ---------------------------------------------------------------------------
# half-point total variation


def _diff_t(y, axis, n):
    """Transpose of ``np.diff`` along ``axis`` (result has length ``n`` there)."""
    y = np.moveaxis(y, axis, 0)
    out = np.zeros((n,) + y.shape[1:])
    out[:-1] -= y
    out[1:] += y
    return np.moveaxis(out, 0, axis)


def _pair_sum(x, axis):
    x = np.moveaxis(x, axis, 0)
    return np.moveaxis(x[:-1] + x[1:], 0, axis)


def _pair_sum_t(y, axis, n):
    y = np.moveaxis(y, axis, 0)
    out = np.zeros((n,) + y.shape[1:])
    out[:-1] += y
    out[1:] += y
    return np.moveaxis(out, 0, axis)


def _wide_diff(x, axis):
    """Undivided central difference ``x[i+1] - x[i-1]`` with replicated borders."""
    x = np.moveaxis(x, axis, 0)
    p = np.concatenate([x[:1], x, x[-1:]], axis=0)
    return np.moveaxis(p[2:] - p[:-2], 0, axis)


def _wide_diff_t(z, axis):
    z = np.moveaxis(z, axis, 0)
    out = np.zeros_like(z)
    out[1:] += z[:-1]
    out[-1] += z[-1]
    out[:-1] -= z[1:]
    out[0] -= z[0]
    return np.moveaxis(out, 0, axis)


def halfpoint_tv(f, axes, phi, coupled=True, stencil="exact"):
    """Edge-based TV energy of ``f`` and its gradient.

    For every grid edge along one of ``axes`` the squared gradient at the
    edge midpoint is estimated as the squared difference across the edge
    plus 1/16 of the squared transverse four-point differences (Chan and
    Shen's half-point stencil).  The energy is ``c * sum phi(q_edge)`` with
    ``c = 1 / (2 * len(axes))``, which approximates ``1/2 * int phi(|grad f|^2)``.

    ``f`` has the component axis last.  With ``coupled`` the squared
    magnitudes are summed over components before ``phi``.  Borders are
    reflecting (no edge leaves the grid, transverse differences replicate
    the border value).

    ``stencil="exact"`` returns the exact gradient of the discrete energy.
    ``stencil="chan-shen"`` returns the classical lagged-diffusivity stencil
    ``-sum_r A_(r+s)/2 (f(r) - f(s))``, which drops the derivative of the
    transverse part of ``q``.
    """
    f = np.asarray(f, dtype=float)
    axes = tuple(a % f.ndim for a in axes)
    c = 1.0 / (2 * len(axes))
    energy = 0.0
    grad = np.zeros_like(f)
    wide = {b: _wide_diff(f, b) for b in axes}
    for a in axes:
        n = f.shape[a]
        if n < 2:
            continue
        d = np.diff(f, axis=a)
        q = d**2
        trans = {}
        for b in axes:
            if b == a:
                continue
            t = _pair_sum(wide[b], a)
            trans[b] = t
            q = q + t**2 / 16.0
        if coupled:
            q = q.sum(axis=-1, keepdims=True)
        energy += c * float(np.sum(phi(q)))
        A = phi.prime(q)
        if stencil == "chan-shen":
            grad += _diff_t(A * d, a, n)
            continue
        grad += 2 * c * _diff_t(A * d, a, n)
        for b, t in trans.items():
            grad += (c / 8.0) * _wide_diff_t(_pair_sum_t(A * t, a, n), b)
    return energy, grad


# ---------------------------------------------------------------------------
# flow-line terms


def sequence_gradient(u):
    """Spatial gradient of every frame: ``(T, H, W, C, 2)``."""
    gy, gx = np.gradient(u, axis=(1, 2))
    return np.stack([gx, gy], axis=-1)


def _coefficients(r, G, variant, gamma, phi):
    """Integrand and its partial derivatives for one frame pair.

    Returns ``(density, a, g, b_int, b_grad)`` where ``density`` is the E3
    integrand per pixel, ``a = d(density/2)/dr``, ``g = d(density/2)/dG``
    and ``b_int``/``b_grad`` the diffusivities multiplying the intensity and
    gradient residuals.
    """
    s1 = np.sum(r**2, axis=-1)
    if variant == 1:
        B = phi.prime(s1)
        return phi(s1), B[..., None] * r, None, B, None
    s2 = np.sum(G**2, axis=(-2, -1))
    if variant == 2:
        B = phi.prime(s1 + gamma * s2)
        return phi(s1 + gamma * s2), B[..., None] * r, gamma * B[..., None, None] * G, B, B
    B1 = phi.prime(s1)
    B3 = phi.prime(s2)
    density = phi(s1) + gamma * phi(s2)
    return density, B1[..., None] * r, gamma * B3[..., None, None] * G, B1, B3


class FlowLines:
    """Forward (and optionally backward) warps of a sequence, built once per flow."""

    def __init__(self, shape, vfwd, wbwd=None, interpolation=Interpolation.BILINEAR):
        T = shape[0]
        self.T = T
        self.interpolation = Interpolation(interpolation)
        self.vfwd = np.asarray(vfwd, dtype=float)
        self.forward = [Warp(self.vfwd[k], 1.0, interpolation) for k in range(T - 1)]
        self.wbwd = None if wbwd is None else np.asarray(wbwd, dtype=float)
        if self.wbwd is not None:
            # backward[k] belongs to frame k (k >= 1)
            self.backward = [None] + [
                Warp(self.wbwd[k - 1], -1.0, interpolation) for k in range(1, T)
            ]


@dataclasses.dataclass
class PairTerms:
    r: np.ndarray
    G: Optional[np.ndarray]
    density: np.ndarray
    a: np.ndarray
    g: Optional[np.ndarray]
    b_int: np.ndarray
    b_grad: Optional[np.ndarray]


def forward_pair(u, grads, warp, k, variant, gamma, phi):
    """Flow-line terms between frame ``k`` and ``k + 1`` along a forward warp."""
    m = warp.inside[..., None]
    r = np.where(m, warp.sample(u[k + 1]) - u[k], 0.0)
    G = None
    if variant != 1:
        G = np.where(m[..., None], warp.sample(grads[k + 1]) - grads[k], 0.0)
    return PairTerms(r, G, *_coefficients(r, G, variant, gamma, phi))


def backward_pair(u, grads, warp, k, variant, gamma, phi):
    """Flow-line terms between frame ``k`` and ``k - 1`` along a backward warp."""
    m = warp.inside[..., None]
    r = np.where(m, u[k] - warp.sample(u[k - 1]), 0.0)
    G = None
    if variant != 1:
        G = np.where(m[..., None], grads[k] - warp.sample(grads[k - 1]), 0.0)
    return PairTerms(r, G, *_coefficients(r, G, variant, gamma, phi))


def e3_value(u, lines, variant, gamma, phi):
    u = as_sequence(u)
    grads = sequence_gradient(u) if variant != 1 else None
    total = 0.0
    for k, warp in enumerate(lines.forward):
        total += 0.5 * float(np.sum(forward_pair(u, grads, warp, k, variant, gamma, phi).density))
    return total


def _e3_adjoint(u, grads, lines, variant, gamma, phi):
    energy = 0.0
    grad = np.zeros_like(u)
    for k, warp in enumerate(lines.forward):
        p = forward_pair(u, grads, warp, k, variant, gamma, phi)
        energy += 0.5 * float(np.sum(p.density))
        grad[k] -= p.a
        grad[k + 1] += warp.transpose(p.a)
        if p.g is not None:
            grad[k] -= gradient_adjoint(p.g)
            grad[k + 1] += gradient_adjoint(warp.transpose(p.g))
    return energy, grad


def _e3_flowline(u, grads, lines, variant, gamma, phi, transport):
    if lines.wbwd is None:
        raise ValueError("the flowline scheme needs a backward flow")
    T = u.shape[0]
    energy = 0.0
    fwd = []
    for k, warp in enumerate(lines.forward):
        p = forward_pair(u, grads, warp, k, variant, gamma, phi)
        energy += 0.5 * float(np.sum(p.density))
        fwd.append(p)
    grad = np.zeros_like(u)
    for k in range(T):
        plus = fwd[k] if k < T - 1 else None
        minus = (
            backward_pair(u, grads, lines.backward[k], k, variant, gamma, phi) if k > 0 else None
        )
        # intensity part: -(B+ r+ - B- r-), gradient part: -div^T(g+ - g-)
        acc_a = np.zeros(u.shape[1:])
        acc_g = None if variant == 1 else np.zeros(u.shape[1:] + (2,))
        if plus is not None:
            acc_a -= plus.a
            if acc_g is not None:
                acc_g -= plus.g
        if minus is not None:
            acc_a += minus.a
            if acc_g is not None:
                acc_g += minus.g
        if transport == "naive" and minus is not None:
            F = flow_divergence_correction(lines.wbwd, k)
            # published sign; the exact adjoint of the warp would subtract
            acc_a += F[..., None] * minus.a
            if acc_g is not None:
                acc_g += F[..., None, None] * minus.g
        elif transport == "b-chooser":
            t_a, t_g = _chosen_transport(plus, minus, lines, k)
            acc_a -= t_a
            if acc_g is not None:
                acc_g -= t_g
        grad[k] += acc_a
        if acc_g is not None:
            grad[k] += gradient_adjoint(acc_g)
    return energy, grad


def _chosen_transport(plus, minus, lines, k):
    """Transport term ``B * L u * div v`` using the better-matching flow-line side."""
    zero_a = 0.0
    if plus is None and minus is None:
        return zero_a, 0.0
    div_p = divergence(lines.vfwd[k]) if plus is not None else None
    div_m = divergence(lines.wbwd[k - 1]) if minus is not None else None
    if minus is None:
        use_plus = np.ones(div_p.shape, bool)
        use_plus_g = use_plus
    elif plus is None:
        use_plus = np.zeros(div_m.shape, bool)
        use_plus_g = use_plus
    else:
        use_plus = plus.b_int > minus.b_int
        use_plus_g = plus.b_grad > minus.b_grad if plus.b_grad is not None else None

    def side(p, div):
        if p is None:
            return 0.0, 0.0
        ta = div[..., None] * p.a
        tg = div[..., None, None] * p.g if p.g is not None else 0.0
        return ta, tg

    pa, pg = side(plus, div_p)
    ma, mg = side(minus, div_m)
    t_a = np.where(use_plus[..., None], pa, ma)
    t_g = 0.0
    if (plus is not None and plus.g is not None) or (minus is not None and minus.g is not None):
        t_g = np.where(use_plus_g[..., None, None], pg, mg)
    return t_a, t_g


def e3_image_terms(u, lines, config):
    """Value of E3 (forward flow-line energy) and its image gradient, unmasked."""
    u = as_sequence(u)
    variant = config.e3_variant
    grads = sequence_gradient(u) if variant != 1 else None
    if config.e3_scheme == "adjoint":
        return _e3_adjoint(u, grads, lines, variant, config.gamma, config.phi)
    return _e3_flowline(
        u, grads, lines, variant, config.gamma, config.phi, config.resolved_transport
    )


# ---------------------------------------------------------------------------
# public operations


def coeff_B(u, flow, k, variant, side, gamma=0.1, phi=Phi(), interpolation="bilinear"):
    """Flow-line diffusivity of frame ``k``.

    ``side="+"`` uses the forward flow ``flow[k]``; ``side="-"`` uses the
    backward flow of frame ``k`` (``flow[k - 1]``).  Variant 3 returns the
    gradient diffusivity ``phi'(|L grad u|^2)``.
    """
    u = as_sequence(u)
    flow = check_flow(flow, u)
    grads = sequence_gradient(u) if variant != 1 else None
    if side == "+":
        if not 0 <= k <= u.shape[0] - 2:
            raise IndexError(f"no forward flow slice for frame {k}")
        p = forward_pair(u, grads, Warp(flow[k], 1.0, interpolation), k, variant, gamma, phi)
    elif side == "-":
        if not 1 <= k <= u.shape[0] - 1:
            raise IndexError(f"no backward flow slice for frame {k}")
        p = backward_pair(u, grads, Warp(flow[k - 1], -1.0, interpolation), k, variant, gamma, phi)
    else:
        raise ValueError(f"side must be '+' or '-', got {side!r}")
    return p.b_grad if variant == 3 else p.b_int


def grad_u_E1(u, u0, mask):
    """``(u - u0)`` on known pixels, zero inside the missing-data locus."""
    u = as_sequence(u)
    u0 = as_sequence(u0)
    if u.shape != u0.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {u0.shape}")
    mask = check_mask(mask, u)
    return np.where(mask[..., None], 0.0, u - u0)


def e2_terms(u, phi, stencil="exact"):
    return halfpoint_tv(as_sequence(u), axes=(1, 2), phi=phi, coupled=True, stencil=stencil)


def grad_u_E2(u, mask, mode=PURE_INPAINT, phi=Phi(), stencil="exact"):
    """Gradient of the half-point TV term, restricted to the locus in pure-inpaint mode."""
    u = as_sequence(u)
    _, grad = e2_terms(u, phi, stencil)
    if mode == PURE_INPAINT:
        grad = np.where(check_mask(mask, u)[..., None], grad, 0.0)
    return grad


def grad_u_E3(u, vfwd, wbwd, mask, config=EnergyConfig()):
    """Image gradient of the flow-line term for every frame."""
    u = as_sequence(u)
    vfwd = check_flow(vfwd, u)
    if wbwd is not None:
        wbwd = check_flow(wbwd, u)
    lines = FlowLines(u.shape, vfwd, wbwd, config.interpolation)
    _, grad = e3_image_terms(u, lines, config)
    if config.mode == PURE_INPAINT:
        grad = np.where(check_mask(mask, u)[..., None], grad, 0.0)
    return grad


def e4_value(v, variant, phi):
    return e4_terms(v, variant, phi)[0]


def e4_terms(v, variant, phi, stencil="exact"):
    v = np.asarray(v, dtype=float)
    if variant == 1:
        return halfpoint_tv(v, axes=(1, 2), phi=phi, coupled=False, stencil=stencil)
    if variant == 2:
        return halfpoint_tv(v, axes=(1, 2), phi=phi, coupled=True, stencil=stencil)
    if v.shape[0] < 2:
        raise ValueError("E4 variant 3 needs at least two flow slices")
    return halfpoint_tv(v, axes=(0, 1, 2), phi=phi, coupled=True, stencil=stencil)


def energy_value(u, u0, vfwd, mask, config=EnergyConfig()):
    """Total discrete energy ``l1 E1 + l2 E2 + l3 E3 + l4 E4``.

    E1 only enters in inpaint-denoise mode.  E3 uses the forward flow.
    """
    return sum(energy_parts(u, u0, vfwd, mask, config).values())


def energy_parts(u, u0, vfwd, mask, config=EnergyConfig()):
    """Weighted energy terms as a dict ``{"E1": .., "E2": .., "E3": .., "E4": ..}``."""
    u = as_sequence(u)
    vfwd = check_flow(vfwd, u)
    mask = check_mask(mask, u)
    phi = config.phi
    parts = {"E1": 0.0}
    if config.mode == INPAINT_DENOISE:
        u0 = as_sequence(u0)
        diff = np.where(mask[..., None], 0.0, u - u0)
        parts["E1"] = config.lambda1 * 0.5 * float(np.sum(diff**2))
    parts["E2"] = config.lambda2 * e2_terms(u, phi)[0]
    lines = FlowLines(u.shape, vfwd, None, config.interpolation)
    parts["E3"] = config.lambda3 * e3_value(u, lines, config.e3_variant, config.gamma, phi)
    parts["E4"] = config.lambda4 * e4_value(vfwd, config.e4_variant, phi) if u.shape[0] > 1 else 0.0
    return parts
