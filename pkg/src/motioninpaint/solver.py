"""Explicit gradient-descent image solver for one pyramid level."""
from __future__ import annotations

import dataclasses
import logging
from typing import List, Optional

import numpy as np

from .energy import (
    INPAINT_DENOISE,
    PURE_INPAINT,
    EnergyConfig,
    FlowLines,
    e2_terms,
    e3_image_terms,
    e4_value,
)
from .errors import NumericalError
from .grid import as_sequence, check_flow, check_mask

log = logging.getLogger(__name__)


class LevelProblem:
    """Fixed data of one level: observation, locus, flows and configuration."""

    def __init__(self, u0, vfwd, wbwd, mask, config):
        self.u0 = as_sequence(u0)
        self.mask = check_mask(mask, self.u0)
        self.config = config
        T = self.u0.shape[0]
        self.vfwd = check_flow(vfwd if vfwd is not None else np.zeros((T - 1,) + self.u0.shape[1:3] + (2,)), self.u0)
        if wbwd is None and config.e3_scheme == "flowline":
            raise ValueError("the flowline scheme needs a backward flow")
        self.wbwd = None if wbwd is None else check_flow(wbwd, self.u0)
        self.lines = FlowLines(self.u0.shape, self.vfwd, self.wbwd, config.interpolation)
        phi = config.phi
        self.e4 = config.lambda4 * e4_value(self.vfwd, config.e4_variant, phi) if T > 1 else 0.0

    def energy_and_grad(self, u):
        cfg = self.config
        e2, g2 = e2_terms(u, cfg.phi)
        energy = cfg.lambda2 * e2 + self.e4
        grad = cfg.lambda2 * g2
        if u.shape[0] > 1 and cfg.lambda3 > 0:
            e3, g3 = e3_image_terms(u, self.lines, cfg)
            energy += cfg.lambda3 * e3
            grad += cfg.lambda3 * g3
        if cfg.mode == INPAINT_DENOISE:
            diff = np.where(self.mask[..., None], 0.0, u - self.u0)
            energy += cfg.lambda1 * 0.5 * float(np.sum(diff**2))
            grad += cfg.lambda1 * diff
        else:
            grad = np.where(self.mask[..., None], grad, 0.0)
        return energy, grad


@dataclasses.dataclass
class DescentState:
    """Current iterate, step count and energy after every step (initial energy first)."""

    iterate: np.ndarray
    iteration: int = 0
    energy_trace: List[float] = dataclasses.field(default_factory=list)
    _grad: Optional[np.ndarray] = dataclasses.field(default=None, repr=False)


def _check_finite(u, it):
    bad = ~np.isfinite(u)
    if bad.any():
        t, y, x, c = np.argwhere(bad)[0]
        raise NumericalError(
            f"non-finite value at iteration {it}: frame {t}, row {y}, column {x}, channel {c}"
        )


def start_state(u_init, problem):
    u = as_sequence(u_init).copy()
    if problem.config.mode == PURE_INPAINT:
        u = np.where(problem.mask[..., None], u, problem.u0)
    energy, grad = problem.energy_and_grad(u)
    return DescentState(u, 0, [energy], grad)


def _step(state, problem):
    cfg = problem.config
    u = state.iterate - cfg.dtau * state._grad
    if cfg.mode == PURE_INPAINT:
        u = np.where(problem.mask[..., None], u, state.iterate)
    _check_finite(u, state.iteration + 1)
    energy, grad = problem.energy_and_grad(u)
    trace = state.energy_trace + [energy]
    return DescentState(u, state.iteration + 1, trace, grad)


def descent_step(state, u0, vfwd, wbwd, mask, config=EnergyConfig()):
    """One Euler step ``u <- u - dtau * grad E`` with flows held fixed.

    In pure-inpaint mode only pixels of the locus move.  The energy of the
    new iterate is appended to the trace.
    """
    problem = LevelProblem(u0, vfwd, wbwd, mask, config)
    if not state.energy_trace:
        state = start_state(state.iterate, problem)
    elif state._grad is None:
        state = dataclasses.replace(state, _grad=problem.energy_and_grad(state.iterate)[1])
    return _step(state, problem)


def inpaint_level(u_init, u0, vfwd, wbwd, mask, config=EnergyConfig(), iterations=None, trace=None):
    """Run ``iterations`` (default ``config.iterations``) descent steps and return the iterate.

    ``trace``, if a list, is extended with the energy trace.
    """
    n = config.iterations if iterations is None else iterations
    problem = LevelProblem(u0, vfwd, wbwd, mask, config)
    if n == 0:
        if trace is not None:
            trace.append(problem.energy_and_grad(as_sequence(u_init))[0])
        return as_sequence(u_init).copy()
    if config.mode == PURE_INPAINT and not problem.mask.any():
        if trace is not None:
            trace.append(problem.energy_and_grad(problem.u0)[0])
        return problem.u0.copy()
    state = start_state(u_init, problem)
    for _ in range(n):
        state = _step(state, problem)
    log.debug("level %s: %d steps, energy %.6g -> %.6g", problem.u0.shape, n,
              state.energy_trace[0], state.energy_trace[-1])
    if trace is not None:
        trace.extend(state.energy_trace)
    return state.iterate
