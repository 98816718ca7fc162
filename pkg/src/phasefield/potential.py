"""Double-well bulk energy, quadratization auxiliaries and volume functions."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np
from numpy.polynomial import Polynomial as _Poly

from .grid import Grid2D


class RadicandError(ValueError):
    """Raised when a square-root auxiliary would become complex."""


class ModelKind(enum.Enum):
    ALLEN_CAHN = "AC"
    ALLEN_CAHN_PENALTY = "AC-P"
    ALLEN_CAHN_LAGRANGE = "AC-L"
    CAHN_HILLIARD = "CH"


class Formulation(enum.Enum):
    EQ = "EQ"
    SAV = "SAV"


class QDefinition(enum.Enum):
    SHIFTED = "shifted"
    RELINEARIZED = "relinearized"


class QPolicy(enum.Enum):
    CRANK_NICOLSON = "cn"
    RESET = "reset"
    HYBRID = "hybrid"


# -- volume functions ---------------------------------------------------------


@dataclass(frozen=True)
class Identity:
    """``h(phi) = phi``."""

    def __call__(self, phi):
        return np.asarray(phi, dtype=float) * 1.0

    def prime(self, phi):
        return np.ones_like(np.asarray(phi, dtype=float))

    def second(self, phi):
        return np.zeros_like(np.asarray(phi, dtype=float))

    @property
    def label(self) -> str:
        return "identity"


@dataclass(frozen=True)
class Polynomial:
    """``h'(phi) = c_m [phi(1-phi)]^m`` with ``h(0) = 0`` and ``h(1) = 1``.

    The constant is ``c_m = (2m+1)!/(m!)^2``, which reduces to 6 for ``m = 1``
    (``h = 3 phi^2 - 2 phi^3``).
    """

    m: int = 1
    _poly: _Poly = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"polynomial volume function needs a positive integer m, got {self.m}")
        c = factorial(2 * self.m + 1) / factorial(self.m) ** 2
        # [phi - phi^2]^m expanded binomially
        coef = np.zeros(2 * self.m + 1)
        for j in range(self.m + 1):
            coef[self.m + j] = comb(self.m, j) * (-1) ** j
        object.__setattr__(self, "_poly", _Poly(c * coef))

    def __call__(self, phi):
        return self._poly.integ(lbnd=0.0)(np.asarray(phi, dtype=float))

    def prime(self, phi):
        return self._poly(np.asarray(phi, dtype=float))

    def second(self, phi):
        return self._poly.deriv()(np.asarray(phi, dtype=float))

    @property
    def label(self) -> str:
        return f"polynomial(m={self.m})"


HChoice = Identity | Polynomial


def h_val(phi, hchoice: HChoice):
    return hchoice(phi)


def h_prime(phi, hchoice: HChoice):
    return hchoice.prime(phi)


# -- model parameters ---------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    """Physical parameters.

    ``gamma1`` multiplies ``|grad phi|^2`` and ``gamma2`` both scales the
    double well ``gamma2 phi^2 (1-phi)^2`` and sets the quadratic split used by
    the linear schemes.  ``V0`` is the target volume of the penalty model;
    ``None`` means "take it from the initial state".
    """

    kind: ModelKind = ModelKind.ALLEN_CAHN
    gamma1: float = 5e-2
    gamma2: float = 10.0
    mobility: float = 1.0
    eta: float = 1e5
    C0: float = 1e5
    h: HChoice = Identity()
    V0: float | None = None

    def __post_init__(self):
        if not (self.gamma1 > 0 and self.gamma2 > 0 and self.mobility > 0 and self.C0 > 0):
            raise ValueError("gamma1, gamma2, mobility and C0 must be positive")
        if self.kind is ModelKind.ALLEN_CAHN_PENALTY and not self.eta > 0:
            raise ValueError("the penalty model needs eta > 0")
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        # sup of gamma2*phi^2 - f on [-0.5, 1.5] is reached at an endpoint
        worst = max(self.gamma2 * p**2 - f_val(p, self.gamma2) for p in (-0.5, 1.5))
        if not self.C0 > worst:
            raise ValueError(f"C0={self.C0} too small; need C0 > {worst}")


@dataclass(frozen=True)
class AuxiliaryKind:
    """How the quadratized energy is represented and how ``q`` is advanced."""

    formulation: Formulation = Formulation.EQ
    q_definition: QDefinition = QDefinition.SHIFTED
    policy: QPolicy = QPolicy.CRANK_NICOLSON
    threshold: float = 1.5e-4
    alpha: float = 1.0

    def __post_init__(self):
        if self.policy is QPolicy.HYBRID and not (self.threshold > 0 and self.alpha > 0):
            raise ValueError("hybrid q update needs threshold > 0 and alpha > 0")
        if self.formulation is Formulation.SAV and self.q_definition is not QDefinition.SHIFTED:
            raise ValueError("the relinearized q is an EQ-only option")


# -- double well --------------------------------------------------------------


def f_val(phi, gamma2: float):
    return gamma2 * phi**2 * (1 - phi) ** 2


def f_prime(phi, gamma2: float):
    return gamma2 * (2 * phi - 6 * phi**2 + 4 * phi**3)


def f_double_prime(phi, gamma2: float):
    return gamma2 * (2 - 12 * phi + 12 * phi**2)


def f_nonquadratic(phi, gamma2: float):
    """``f - gamma2 phi^2``, the part carried by the auxiliary variable."""
    return f_val(phi, gamma2) - gamma2 * phi**2


def _checked_sqrt(radicand: np.ndarray) -> np.ndarray:
    radicand = np.asarray(radicand, dtype=float)
    bad = ~(radicand > 0)
    if bad.any():
        idx = tuple(int(i) for i in np.unravel_index(int(np.argmax(bad)), radicand.shape))
        raise RadicandError(f"nonpositive radicand {float(radicand[idx])!r} at cell {idx}")
    return np.sqrt(radicand)


def q_of_phi(phi, spec: ModelSpec, aux: AuxiliaryKind = AuxiliaryKind()):
    """Pointwise EQ auxiliary variable."""
    if aux.q_definition is QDefinition.RELINEARIZED:
        return np.sqrt(spec.gamma2) * phi * (1 - phi)
    return _checked_sqrt(f_nonquadratic(phi, spec.gamma2) + spec.C0)


def q_prime(phi, spec: ModelSpec, aux: AuxiliaryKind = AuxiliaryKind()):
    """Derivative of :func:`q_of_phi` with respect to ``phi``."""
    if aux.q_definition is QDefinition.RELINEARIZED:
        return np.sqrt(spec.gamma2) * (1 - 2 * phi)
    q = q_of_phi(phi, spec, aux)
    return (f_prime(phi, spec.gamma2) - 2 * spec.gamma2 * phi) / (2 * q)


def sav_scalars(phi: np.ndarray, spec: ModelSpec, grid: Grid2D) -> tuple[float, float, np.ndarray]:
    """Return ``(E1, r, g)`` for the scalar auxiliary variable.

    ``E1 = <f - gamma2 phi^2, 1>``, ``r = sqrt(E1 + C0)`` and
    ``g = (f' - 2 gamma2 phi) / r`` so that ``r*g`` is the variational
    derivative of ``E1``.
    """
    e1 = grid.integral(f_nonquadratic(phi, spec.gamma2))
    if not e1 + spec.C0 > 0:
        raise RadicandError(f"E1 + C0 = {e1 + spec.C0} is not positive")
    r = float(np.sqrt(e1 + spec.C0))
    g = (f_prime(phi, spec.gamma2) - 2 * spec.gamma2 * phi) / r
    return e1, r, g
