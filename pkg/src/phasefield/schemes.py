"""Linear second-order Crank-Nicolson steppers in EQ and SAV form.

Each step is written as

    mu(phi) = L phi + sum_k <a_k, phi> e_k + R

for the half-level chemical potential, with ``L = -gamma1 lap + s + w`` a local
operator and the rank-one terms coming from the scalar auxiliary variable or
the volume penalty.  The model then decides how ``mu`` drives ``phi``:

* Allen-Cahn:             phi - phi_n = -dt M mu
* Lagrange multiplier:    phi - phi_n = -dt M P mu,  P the h'-projection
* Cahn-Hilliard:          phi - phi_n =  dt M lap(mu)

Coefficients that the linear system needs (``q'``, ``g``, ``h'``) are
extrapolated to ``t_{n+1/2}`` from levels ``n`` and ``n-1``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .grid import Grid2D
from .potential import (
    AuxiliaryKind,
    Formulation,
    Identity,
    ModelKind,
    ModelSpec,
    QDefinition,
    QPolicy,
    q_of_phi,
    q_prime,
    sav_scalars,
)
from .solvers import (
    LinearOperatorSpec,
    RankCorrection,
    SolveReport,
    SolverError,
    SpectralInverse,
    woodbury_solve,
)


@dataclass(frozen=True)
class SchemeConfig:
    model: ModelSpec
    aux: AuxiliaryKind
    dt: float
    solver_tol: float = 1e-12
    solver_maxit: int | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"time step must be positive, got {self.dt}")
        if self.model.kind is ModelKind.ALLEN_CAHN_PENALTY and not isinstance(self.model.h, Identity):
            raise ValueError("the penalty schemes use h(phi) = phi")

    @property
    def is_eq(self) -> bool:
        return self.aux.formulation is Formulation.EQ

    @property
    def split(self) -> float:
        """Coefficient of the linear stabilizing term ``gamma2 phi``."""
        if self.is_eq and self.aux.q_definition is QDefinition.RELINEARIZED:
            return 0.0
        return self.model.gamma2


@dataclass(frozen=True)
class SchemeState:
    """Two time levels plus the auxiliary variables at the newest level.

    ``q_lo`` and ``r_lo`` hold the rounding residue of the Crank-Nicolson
    auxiliary update, so that ``q + q_lo`` is the auxiliary value carried in
    double-double precision.  With ``C0`` large, ``q ~ sqrt(C0)`` and the
    per-step increments ``q' (phi^{n+1} - phi^n)`` near equilibrium fall below
    half an ulp of ``q``; without the residue they are silently dropped and
    the loss accumulates over many steps.
    """

    grid: Grid2D
    phi_prev: np.ndarray
    phi: np.ndarray
    q: np.ndarray | None = None
    r: float | None = None
    zeta: float | None = None
    t: float = 0.0
    n: int = 0
    q_lo: np.ndarray | float = 0.0
    r_lo: float = 0.0


@dataclass(frozen=True)
class StepResult:
    state: SchemeState
    report: SolveReport
    mu: np.ndarray
    dissipation: float


def extrapolate(ucur, uprev):
    """``(3 u^n - u^{n-1}) / 2``, second-order value at ``t_{n+1/2}``."""
    return 1.5 * ucur - 0.5 * uprev


def midpoint(unew, ucur):
    return 0.5 * (unew + ucur)


def initial_state(phi0: np.ndarray, grid: Grid2D, config: SchemeConfig, t0: float = 0.0) -> SchemeState:
    """Level-0 state; the auxiliaries are computed from ``phi0``."""
    grid.check(phi0)
    model = config.model
    phi0 = np.array(phi0, dtype=float)
    q = r = zeta = None
    if config.is_eq:
        q = q_of_phi(phi0, model, config.aux)
    else:
        _, r, _ = sav_scalars(phi0, model, grid)
    if model.kind is ModelKind.ALLEN_CAHN_PENALTY:
        v0 = grid.integral(phi0) if model.V0 is None else model.V0
        zeta = float(np.sqrt(model.eta) * (grid.integral(phi0) - v0))
    return SchemeState(grid, phi0.copy(), phi0, q, r, zeta, t0, 0)


# -- shared assembly ----------------------------------------------------------


@dataclass
class _Potential:
    """Affine map ``phi -> L phi + sum <a, phi> e + R``."""

    grid: Grid2D
    gamma1: float
    shift: float
    w: np.ndarray | None
    terms: list[tuple[np.ndarray, np.ndarray]]
    R: np.ndarray

    def L(self, u: np.ndarray) -> np.ndarray:
        out = -self.gamma1 * self.grid.laplacian(u) + self.shift * u
        if self.w is not None:
            out += self.w * u
        return out

    def __call__(self, phi: np.ndarray) -> np.ndarray:
        out = self.L(phi) + self.R
        for a, e in self.terms:
            out += self.grid.inner(a, phi) * e
        return out

    @property
    def mean_shift(self) -> float:
        return self.shift + (float(np.mean(self.w)) if self.w is not None else 0.0)


def _advance(state: SchemeState, config: SchemeConfig, pot: _Potential, hbar: np.ndarray | None):
    grid = state.grid
    model = config.model
    dtm = config.dt * model.mobility
    phi = state.phi
    g1 = model.gamma1
    s = pot.mean_shift
    kind = model.kind

    project: Callable[[np.ndarray], np.ndarray] = lambda v: v
    pairs: list[tuple[np.ndarray, np.ndarray]] = []

    if kind is ModelKind.CAHN_HILLIARD:
        A = LinearOperatorSpec(
            lambda u: u - dtm * grid.laplacian(pot.L(u)),
            symmetric=pot.w is None,
            label="I - dt M lap L",
            preconditioner=SpectralInverse(grid, lambda lam: 1.0 - dtm * lam * (-g1 * lam + s)),
        )
        pairs = [(a, -dtm * grid.laplacian(e)) for a, e in pot.terms]
        b = phi + dtm * grid.laplacian(pot.R)
    else:
        A = LinearOperatorSpec(
            lambda u: u + dtm * pot.L(u),
            symmetric=True,
            label="I + dt M L",
            preconditioner=SpectralInverse(grid, lambda lam: 1.0 + dtm * (-g1 * lam + s)),
        )
        if kind is ModelKind.ALLEN_CAHN_LAGRANGE:
            denom = model.mobility * grid.inner(hbar, hbar)
            if denom > 0:
                # L is self-adjoint, so <h', M L phi> = <M L h', phi>
                project = lambda v: v - (model.mobility * grid.inner(hbar, v) / denom) * hbar
                pairs.append((model.mobility * pot.L(hbar), -dtm * hbar / denom))
        pairs = [(a, dtm * project(e)) for a, e in pot.terms] + pairs
        b = phi - dtm * project(pot.R)

    # Solve for the increment rather than for phi itself: the Krylov tolerance
    # is relative to the right-hand side, so it then bounds the error by a
    # fraction of |phi^{n+1} - phi^n| instead of a fraction of |phi^n|.  Near
    # equilibrium the latter would inject O(tol) errors into every step.
    corr = RankCorrection(grid, pairs)
    delta, report = woodbury_solve(
        A, corr, b - A(phi) - corr.apply(phi), config.solver_tol, config.solver_maxit
    )
    phi_new = phi + delta
    if not np.all(np.isfinite(phi_new)):
        raise SolverError("time step produced non-finite values", report)
    mu = project(pot(phi_new))
    if kind is ModelKind.CAHN_HILLIARD:
        dissipation = dtm * grid.gradient_energy(mu)
    else:
        dissipation = dtm * grid.inner(mu, mu)
    return phi_new, mu, report, dissipation


def _penalty_terms(state: SchemeState, model: ModelSpec):
    grid = state.grid
    ones = np.ones(grid.shape)
    e = 0.5 * model.eta * ones
    R = (np.sqrt(model.eta) * state.zeta - 0.5 * model.eta * grid.integral(state.phi)) * ones
    return (ones, e), R


def _hbar(state: SchemeState, model: ModelSpec):
    if model.kind is not ModelKind.ALLEN_CAHN_LAGRANGE:
        return None
    return extrapolate(model.h.prime(state.phi), model.h.prime(state.phi_prev))


def _finish(state: SchemeState, config: SchemeConfig, phi_new, report, mu, dissipation, **aux):
    zeta = state.zeta
    if config.model.kind is ModelKind.ALLEN_CAHN_PENALTY:
        zeta = zeta + np.sqrt(config.model.eta) * state.grid.integral(phi_new - state.phi)
    new = replace(
        state,
        phi_prev=state.phi,
        phi=phi_new,
        zeta=zeta,
        t=state.t + config.dt,
        n=state.n + 1,
        **aux,
    )
    return StepResult(new, report, mu, dissipation)


# -- auxiliary updates ---------------------------------------------------------


def relaxation_factor(alpha: float, dt: float) -> float:
    return (2 - alpha * dt) / (2 + alpha * dt)


def _two_sum(a, b):
    """Error-free sum: ``s + e == a + b`` exactly, ``s = fl(a + b)``."""
    s = a + b
    bv = s - a
    e = (a - (s - bv)) + (b - bv)
    return s, e


def update_auxiliary(state: SchemeState, phi_new: np.ndarray, slope, config: SchemeConfig):
    """Advance ``q`` (EQ) or ``r`` (SAV) once ``phi_new`` is known.

    Returns ``(value, residue)``; the residue is the low-order part kept by
    the compensated Crank-Nicolson update and is zero for algebraic values.

    ``slope`` is the extrapolated ``q'`` field (EQ) or ``g/2`` (SAV).  The
    policies are: the Crank-Nicolson discretization of ``q_t = q' phi_t``;
    an algebraic reset to the defining formula; and a hybrid that keeps the
    Crank-Nicolson value while its integrated drift from the algebraic value
    is within ``threshold`` and otherwise relaxes toward it.
    """
    grid = state.grid
    model, aux = config.model, config.aux
    if config.is_eq:
        value, lo = state.q, state.q_lo
        increment = slope * (phi_new - state.phi)
        exact = lambda p: q_of_phi(p, model, aux)
        drift = lambda u: grid.integral(u)
    else:
        value, lo = state.r, state.r_lo
        increment = grid.inner(slope, phi_new - state.phi)
        exact = lambda p: sav_scalars(p, model, grid)[1]
        drift = float
    cn = _two_sum(value, increment + lo)

    if aux.policy is QPolicy.CRANK_NICOLSON:
        return cn
    target = exact(phi_new)
    if aux.policy is QPolicy.RESET:
        return target, 0.0
    if abs(drift((cn[0] - target) + cn[1])) <= aux.threshold:
        return cn
    return target - relaxation_factor(aux.alpha, config.dt) * ((value - exact(state.phi)) + lo), 0.0


# -- the two families ---------------------------------------------------------


def step_eq(state: SchemeState, config: SchemeConfig) -> StepResult:
    """One EQ step (field auxiliary ``q``)."""
    if not config.is_eq:
        raise ValueError("step_eq needs an EQ configuration")
    model, aux, grid = config.model, config.aux, state.grid
    phi = state.phi
    qp = extrapolate(q_prime(phi, model, aux), q_prime(state.phi_prev, model, aux))
    w = qp * qp
    shift = config.split
    R = -model.gamma1 * grid.laplacian(phi) + shift * phi - w * phi + 2.0 * state.q * qp + 2.0 * state.q_lo * qp
    terms = []
    if model.kind is ModelKind.ALLEN_CAHN_PENALTY:
        term, Rp = _penalty_terms(state, model)
        terms.append(term)
        R = R + Rp
    pot = _Potential(grid, model.gamma1, shift, w, terms, R)
    phi_new, mu, report, diss = _advance(state, config, pot, _hbar(state, model))
    q_new, q_lo = update_auxiliary(state, phi_new, qp, config)
    return _finish(state, config, phi_new, report, mu, diss, q=q_new, q_lo=q_lo)


def step_sav(state: SchemeState, config: SchemeConfig) -> StepResult:
    """One SAV step (scalar auxiliary ``r``)."""
    if config.is_eq:
        raise ValueError("step_sav needs a SAV configuration")
    model, grid = config.model, state.grid
    phi = state.phi
    _, _, g_cur = sav_scalars(phi, model, grid)
    _, _, g_prev = sav_scalars(state.phi_prev, model, grid)
    gb = extrapolate(g_cur, g_prev)
    R = (
        -model.gamma1 * grid.laplacian(phi)
        + model.gamma2 * phi
        + (state.r + state.r_lo) * gb
        - 0.25 * grid.inner(gb, phi) * gb
    )
    terms = [(gb, 0.25 * gb)]
    if model.kind is ModelKind.ALLEN_CAHN_PENALTY:
        term, Rp = _penalty_terms(state, model)
        terms.append(term)
        R = R + Rp
    pot = _Potential(grid, model.gamma1, model.gamma2, None, terms, R)
    phi_new, mu, report, diss = _advance(state, config, pot, _hbar(state, model))
    r_new, r_lo = update_auxiliary(state, phi_new, 0.5 * gb, config)
    return _finish(state, config, phi_new, report, mu, diss, r=float(r_new), r_lo=float(r_lo))


def step(state: SchemeState, config: SchemeConfig) -> StepResult:
    return step_eq(state, config) if config.is_eq else step_sav(state, config)


def bootstrap_step(state0: SchemeState, config: SchemeConfig) -> StepResult:
    """First step: every extrapolated coefficient frozen at level 0.

    Identical to :func:`step` with ``phi_prev = phi``, so the discrete energy
    and volume identities hold exactly as for the later steps.
    """
    if state0.n != 0:
        raise ValueError("bootstrap_step starts from level 0")
    return step(replace(state0, phi_prev=state0.phi), config)
