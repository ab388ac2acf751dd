"""Dense optical flow by explicit descent on the flow part of the energy."""
from __future__ import annotations

import dataclasses
import logging

import numpy as np

from .errors import FlowDivergenceError, NumericalError
from .energy import Phi, e4_terms, forward_pair, sequence_gradient
from .grid import Interpolation, Warp, as_sequence, check_flow, reverse_flow, time_reverse

log = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class FlowSolverParams:
    lambda3: float = 1.0
    lambda4: float = 0.2
    gamma: float = 0.1
    e3_variant: int = 1
    e4_variant: int = 2
    dtau: float = 0.05
    iterations: int = 500
    epsilon: float = 0.01
    interpolation: str = "bilinear"

    def __post_init__(self):
        if not self.dtau > 0:
            raise ValueError("flow dtau must be positive")
        if self.iterations < 1:
            raise ValueError("flow iterations must be at least 1")
        if self.e3_variant not in (1, 2, 3):
            raise ValueError(f"e3_variant must be 1, 2 or 3, got {self.e3_variant}")
        if self.e4_variant not in (1, 2, 3):
            raise ValueError(f"e4_variant must be 1, 2 or 3, got {self.e4_variant}")
        Interpolation(self.interpolation)

    @property
    def phi(self):
        return Phi(self.epsilon)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _e3_pair_flow_grad(u, grads, warp, k, variant, gamma, phi):
    p = forward_pair(u, grads, warp, k, variant, gamma, phi)
    # d/dpos of the interpolated next frame, summed over channels
    du = warp.sample_grad(u[k + 1])
    grad = np.einsum("hwc,hwcp->hwp", p.a, du)
    if p.g is not None:
        dgrad = warp.sample_grad(grads[k + 1])
        grad += np.einsum("hwcd,hwcdp->hwp", p.g, dgrad)
    grad = np.where(warp.inside[..., None], grad, 0.0)
    return 0.5 * float(np.sum(p.density)), grad


def e3_flow_terms(u, v, variant, gamma, phi, interpolation="bilinear"):
    """E3 value and its gradient with respect to every forward flow slice."""
    u = as_sequence(u)
    v = check_flow(v, u)
    grads = sequence_gradient(u) if variant != 1 else None
    energy = 0.0
    grad = np.zeros_like(v)
    for k in range(u.shape[0] - 1):
        warp = Warp(v[k], 1.0, interpolation)
        e, grad[k] = _e3_pair_flow_grad(u, grads, warp, k, variant, gamma, phi)
        energy += e
    return energy, grad


def grad_v_E3(u, v, k, variant=1, gamma=0.1, phi=Phi(), interpolation="bilinear"):
    """Gradient of E3 with respect to the forward flow slice ``v[k]``.

    Variant 1 is ``B1+ * (L u)_k * grad(u_{k+1})(x + v_k(x))``; variants 2
    and 3 add the gradient-constancy term through the Hessian of
    ``u_{k+1}`` at the warped point.  Spatial derivatives at warped points
    are those of the interpolant.
    """
    u = as_sequence(u)
    v = check_flow(v, u)
    if not 0 <= k <= u.shape[0] - 2:
        raise IndexError(f"forward frame index {k} outside [0, {u.shape[0] - 2}]")
    grads = sequence_gradient(u) if variant != 1 else None
    warp = Warp(v[k], 1.0, interpolation)
    return _e3_pair_flow_grad(u, grads, warp, k, variant, gamma, phi)[1]


def grad_v_E4(v, variant=2, phi=Phi(), stencil="exact"):
    """Gradient of the flow regulariser, one (H, W, 2) field per flow slice."""
    return e4_terms(v, variant, phi, stencil)[1]


def flow_energy(u, v, params):
    """``lambda3 * E3 + lambda4 * E4`` for a forward flow."""
    return flow_energy_and_grad(u, v, params)[0]


def flow_energy_and_grad(u, v, params):
    e3, g3 = e3_flow_terms(
        u, v, params.e3_variant, params.gamma, params.phi, params.interpolation
    )
    e4, g4 = e4_terms(v, params.e4_variant, params.phi)
    return params.lambda3 * e3 + params.lambda4 * e4, params.lambda3 * g3 + params.lambda4 * g4


def solve_flow(u, init, params=FlowSolverParams(), trace=None):
    """Explicit descent ``v <- v - dtau * grad`` on the flow energy.

    ``trace``, if a list, receives the energy before the first step and
    after every step.  Raises :class:`FlowDivergenceError` when the energy
    increases for more than 10 consecutive steps or becomes non-finite.
    """
    u = as_sequence(u)
    v = check_flow(init, u).copy()
    if not np.all(np.isfinite(v)):
        raise NumericalError("initial flow contains non-finite values")
    if u.shape[0] < 2:
        return v
    energy, grad = flow_energy_and_grad(u, v, params)
    if trace is not None:
        trace.append(energy)
    rising = 0
    for it in range(params.iterations):
        v -= params.dtau * grad
        new_energy, grad = flow_energy_and_grad(u, v, params)
        if not np.isfinite(new_energy) or not np.all(np.isfinite(v)):
            raise FlowDivergenceError(f"non-finite flow energy at iteration {it + 1}")
        rising = rising + 1 if new_energy > energy else 0
        if rising > 10:
            raise FlowDivergenceError(
                f"flow energy increased for {rising} consecutive steps "
                f"(iteration {it + 1}, energy {new_energy:.6g}); reduce dtau"
            )
        energy = new_energy
        if trace is not None:
            trace.append(energy)
    return v


def backward_flow(u, vfwd, params=FlowSolverParams(), init=None, trace=None):
    """Backward flow of ``u`` estimated as the forward flow of the reversed sequence.

    The result ``w`` is indexed so that ``w[k - 1]`` belongs to frame ``k``
    and ``x - w[k - 1](x)`` points into frame ``k - 1``.  The solver starts
    from ``init`` (a backward flow) or, by default, from ``-vfwd`` reversed
    in time.
    """
    u = as_sequence(u)
    vfwd = check_flow(vfwd, u)
    start = reverse_flow(vfwd) if init is None else reverse_flow(check_flow(init, u))
    vhat = solve_flow(time_reverse(u), start, params, trace=trace)
    return reverse_flow(vhat)
