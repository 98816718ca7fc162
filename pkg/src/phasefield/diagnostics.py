"""Discrete energies, phase volume and convergence rates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import Grid2D
from .potential import HChoice, Identity, ModelKind, QDefinition
from .schemes import SchemeConfig, SchemeState


@dataclass(frozen=True)
class DiagnosticsRecord:
    step: int
    t: float
    energy: float
    volume: float
    diss_residual: float = 0.0
    solver_iters: int = 0


def discrete_energy(state: SchemeState, config: SchemeConfig) -> float:
    """Quadratized energy whose decrease the schemes guarantee.

    EQ:  gamma1 |grad phi|^2 + gamma2 |phi|^2 + |q|^2 - C0 |Omega|
    SAV: gamma1 |grad phi|^2 + gamma2 |phi|^2 + r^2 - C0
    The penalty model adds ``zeta^2 / 2``.  With the relinearized ``q`` the
    split and shift are absent and the energy is ``gamma1 |grad phi|^2 + |q|^2``.
    """
    grid, model = state.grid, config.model
    phi = state.phi
    energy = model.gamma1 * grid.gradient_energy(phi)
    if config.is_eq:
        q2 = grid.inner(state.q, state.q) + 2.0 * grid.inner(state.q, state.q_lo * np.ones_like(phi))
        if config.aux.q_definition is QDefinition.RELINEARIZED:
            energy += q2
        else:
            energy += model.gamma2 * grid.inner(phi, phi)
            energy += q2 - model.C0 * grid.area
    else:
        energy += model.gamma2 * grid.inner(phi, phi) + state.r**2 + 2.0 * state.r * state.r_lo - model.C0
    if model.kind is ModelKind.ALLEN_CAHN_PENALTY:
        energy += 0.5 * state.zeta**2
    return float(energy)


def volume(state: SchemeState, hchoice: HChoice = Identity()) -> float:
    """``<h(phi), 1>`` at the newest level."""
    return state.grid.integral(hchoice(state.phi))


def l2_error(grid: Grid2D, u: np.ndarray, v: np.ndarray) -> float:
    d = u - v
    return math.sqrt(grid.inner(d, d))


def dissipation_rate(prev: DiagnosticsRecord, cur: DiagnosticsRecord) -> float:
    gap = cur.t - prev.t
    if gap == 0:
        raise ValueError("records share the same time")
    return (cur.energy - prev.energy) / gap


def convergence_order(errors: Sequence[float], dts: Sequence[float]) -> list[float]:
    """Observed orders ``log(e_{i-1}/e_i) / log(dt_{i-1}/dt_i)``."""
    if len(errors) != len(dts) or len(errors) < 2:
        raise ValueError("need matching error and step lists of length >= 2")
    if any(not e > 0 for e in errors):
        raise ValueError("errors must be positive")
    if any(not b < a for a, b in zip(dts, dts[1:])):
        raise ValueError("time steps must be strictly decreasing")
    return [
        math.log(errors[i - 1] / errors[i]) / math.log(dts[i - 1] / dts[i])
        for i in range(1, len(errors))
    ]
