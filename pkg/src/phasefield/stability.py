"""Growth rates of small Fourier perturbations about a constant state.

The analysis domain is ``[-pi, pi]^2`` with Neumann modes ``cos(kx) cos(ly)``;
``|Omega| = 4 pi^2``.  :func:`growth_rate` is the closed form and
:func:`measure_growth_rate` recovers the same number from a simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .grid import Grid2D
from .potential import (
    AuxiliaryKind,
    Formulation,
    Identity,
    ModelKind,
    ModelSpec,
    f_double_prime,
)
from .schemes import SchemeConfig, initial_state, step

AREA = 4.0 * math.pi**2


class LinearRegimeError(RuntimeError):
    pass


@dataclass(frozen=True)
class StabilityQuery:
    model: ModelSpec
    phiss: float
    k: int = 0
    l: int = 0

    def __post_init__(self):
        if self.k < 0 or self.l < 0:
            raise ValueError("wavenumbers must be nonnegative")


def growth_rate(query: StabilityQuery) -> float:
    """Exponential rate ``sigma`` of the ``(k, l)`` mode."""
    model, p = query.model, query.phiss
    M, g1 = model.mobility, model.gamma1
    kappa = query.k**2 + query.l**2
    zero = query.k == 0 and query.l == 0
    fpp = float(f_double_prime(p, model.gamma2))
    kind = model.kind

    if kind is ModelKind.ALLEN_CAHN:
        return -M * (2 * g1 * kappa + fpp)
    if kind is ModelKind.CAHN_HILLIARD:
        return -M * kappa * (2 * g1 * kappa + fpp)
    if kind is ModelKind.ALLEN_CAHN_PENALTY:
        h = model.h
        v0 = AREA * float(h(p)) if model.V0 is None else model.V0
        rate = 2 * g1 * kappa + fpp + model.eta * float(h.second(p)) * (AREA * float(h(p)) - v0)
        if zero:
            rate += model.eta * float(h.prime(p)) ** 2 * AREA
        return -M * rate
    if not isinstance(model.h, Identity):
        raise NotImplementedError("Lagrange-model growth rates are only available for h(phi) = phi")
    return -M * (2 * g1 * kappa + fpp * (0.0 if zero else 1.0))


def _default_scheme(model: ModelSpec, formulation: Formulation, dt: float) -> SchemeConfig:
    return SchemeConfig(model, AuxiliaryKind(formulation=formulation), dt)


def measure_growth_rate(
    model: ModelSpec,
    phiss: float,
    k: int,
    l: int,
    dt: float = 1e-4,
    steps: int = 500,
    n: int = 128,
    amplitude: float = 1e-6,
    formulation: Formulation = Formulation.EQ,
) -> float:
    """Least-squares slope of ``log max|phi - phiss|`` against time.

    Evolves ``phiss + amplitude cos(kx) cos(ly)`` on an ``n x n`` grid over
    ``[-pi, pi]^2`` and raises :class:`LinearRegimeError` if the perturbation
    exceeds ``1e-3``.
    """
    grid = Grid2D.square(n, -math.pi, math.pi)
    X, Y = grid.meshgrid()
    if model.kind is ModelKind.ALLEN_CAHN_PENALTY and model.V0 is None:
        model = replace(model, V0=grid.integral(model.h(np.full(grid.shape, float(phiss)))))
    config = _default_scheme(model, formulation, dt)
    state = initial_state(phiss + amplitude * np.cos(k * X) * np.cos(l * Y), grid, config)

    amps = [np.max(np.abs(state.phi - phiss))]
    for _ in range(steps):
        state = step(state, config).state
        amp = float(np.max(np.abs(state.phi - phiss)))
        if amp > 1e-3:
            raise LinearRegimeError(f"left linear regime at t={state.t:g} (amplitude {amp:.3g})")
        amps.append(amp)
    t = dt * np.arange(steps + 1)
    slope, _ = np.polyfit(t, np.log(amps), 1)
    return float(slope)
