"""Matrix-free Krylov solves and rank-k (Sherman-Morrison-Woodbury) corrections.

Every scheme reduces a time step to

    A phi + sum_i <c_i, phi> d_i = b

with ``A`` a local stencil operator and ``<., .>`` the grid inner product.  The
corrected system is solved with ``k + 1`` solves against ``A`` alone plus a
dense ``k x k`` system.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.fft

from .grid import Grid2D

Field = np.ndarray
Action = Callable[[Field], Field]


class SolverError(RuntimeError):
    """A base Krylov solve did not reach its tolerance."""

    def __init__(self, message: str, report: "SolveReport | None" = None):
        super().__init__(message)
        self.report = report


class SingularCorrectionError(SolverError):
    """The small Woodbury system ``I + G`` is numerically singular."""


@dataclass
class SolveReport:
    iterations: int = 0
    residual: float = 0.0
    converged: bool = True
    tolerance: float = 0.0

    def merge(self, other: "SolveReport") -> "SolveReport":
        return SolveReport(
            self.iterations + other.iterations,
            max(self.residual, other.residual),
            self.converged and other.converged,
            max(self.tolerance, other.tolerance),
        )


@dataclass
class LinearOperatorSpec:
    """A matrix-free operator with an optional preconditioner."""

    action: Action
    symmetric: bool = True
    label: str = ""
    preconditioner: Action | None = None

    def __call__(self, u: Field) -> Field:
        return self.action(u)

    def symmetry_defect(self, grid: Grid2D, rng: np.random.Generator, probes: int = 3) -> float:
        """Largest relative ``|<Au,v> - <u,Av>|`` over random probes."""
        worst = 0.0
        for _ in range(probes):
            u = rng.standard_normal(grid.shape)
            v = rng.standard_normal(grid.shape)
            a = grid.inner(self.action(u), v)
            b = grid.inner(u, self.action(v))
            worst = max(worst, abs(a - b) / max(abs(a), abs(b), 1e-300))
        return worst


@dataclass
class RankCorrection:
    """Pairs ``(c_i, d_i)`` adding ``<c_i, phi> d_i`` to ``A phi``."""

    grid: Grid2D
    pairs: list[tuple[Field, Field]] = field(default_factory=list)

    def __post_init__(self):
        if len(self.pairs) > 2:
            raise ValueError("at most two correction pairs are supported")
        for c, d in self.pairs:
            self.grid.check(c, d)

    @property
    def rank(self) -> int:
        return len(self.pairs)

    def apply(self, phi: Field) -> Field:
        out = np.zeros(self.grid.shape)
        for c, d in self.pairs:
            out += self.grid.inner(c, phi) * d
        return out


class SpectralInverse:
    """Exact inverse of a constant-coefficient polynomial in the Neumann Laplacian.

    ``symbol`` is evaluated on the DCT-II eigenvalues of the Laplacian, so the
    operator ``p(lap)`` is inverted by ``idct(dct(r) / p(lambda))``.
    """

    def __init__(self, grid: Grid2D, symbol: Callable[[np.ndarray], np.ndarray]):
        self.grid = grid
        self.denominator = np.asarray(symbol(grid.neumann_eigenvalues()), dtype=float)
        if not np.all(self.denominator != 0):
            raise ValueError("spectral symbol vanishes on the grid")

    def __call__(self, r: Field) -> Field:
        rhat = scipy.fft.dctn(r, type=2, norm="ortho")
        return scipy.fft.idctn(rhat / self.denominator, type=2, norm="ortho")


_REFINE_PASSES = 3


def _norm(u: Field) -> float:
    return float(np.sqrt(np.dot(u.ravel(), u.ravel())))


def _dot(a: Field, b: Field) -> float:
    return float(np.dot(a.ravel(), b.ravel()))


def _identity(u: Field) -> Field:
    return u


def _cg(A: LinearOperatorSpec, b: Field, tol: float, maxit: int) -> tuple[Field, SolveReport]:
    precond = A.preconditioner or _identity
    bnorm = _norm(b)
    x = np.zeros_like(b)
    r = b.copy()
    it = 0
    res = 1.0
    while it < maxit:
        z = precond(r)
        p = z.copy()
        rz = _dot(r, z)
        while it < maxit:
            Ap = A(p)
            pAp = _dot(p, Ap)
            if pAp <= 0:
                raise SolverError(f"operator {A.label!r} is not positive definite (p.Ap = {pAp})")
            alpha = rz / pAp
            x += alpha * p
            r -= alpha * Ap
            it += 1
            res = _norm(r) / bnorm
            if res <= tol:
                break
            z = precond(r)
            rz_new = _dot(r, z)
            p = z + (rz_new / rz) * p
            rz = rz_new
        # guard against drift of the recursive residual
        r = b - A(x)
        res = _norm(r) / bnorm
        if res <= tol:
            return x, SolveReport(it, res, True, tol)
    return x, SolveReport(it, res, False, tol)


def _bicgstab(A: LinearOperatorSpec, b: Field, tol: float, maxit: int) -> tuple[Field, SolveReport]:
    precond = A.preconditioner or _identity
    bnorm = _norm(b)
    x = np.zeros_like(b)
    it = 0
    res = 1.0
    r = b.copy()
    while it < maxit:
        rhat = r.copy()
        rho = alpha = omega = 1.0
        v = np.zeros_like(b)
        p = np.zeros_like(b)
        while it < maxit:
            rho_new = _dot(rhat, r)
            if rho_new == 0.0:
                break
            beta = (rho_new / rho) * (alpha / omega)
            p = r + beta * (p - omega * v)
            phat = precond(p)
            v = A(phat)
            alpha = rho_new / _dot(rhat, v)
            s = r - alpha * v
            it += 1
            if _norm(s) / bnorm <= tol:
                x += alpha * phat
                r = s
                break
            shat = precond(s)
            t = A(shat)
            tt = _dot(t, t)
            omega = _dot(t, s) / tt if tt > 0 else 0.0
            x += alpha * phat + omega * shat
            r = s - omega * t
            rho = rho_new
            if _norm(r) / bnorm <= tol or omega == 0.0:
                break
        r = b - A(x)
        res = _norm(r) / bnorm
        if res <= tol:
            return x, SolveReport(it, res, True, tol)
    return x, SolveReport(it, res, False, tol)


def krylov_solve(
    A: LinearOperatorSpec, b: Field, tol: float = 1e-12, maxit: int | None = None
) -> tuple[Field, SolveReport]:
    """Solve ``A x = b`` from a zero initial guess.

    Preconditioned conjugate gradients when ``A.symmetric`` is set, otherwise
    right-preconditioned BiCGStab.  Convergence means
    ``||A x - b||_2 <= tol * ||b||_2`` for the true (recomputed) residual.
    """
    if not np.all(np.isfinite(b)):
        raise SolverError("right-hand side is not finite")
    if maxit is None:
        maxit = 10 * b.size
    if _norm(b) == 0.0:
        return np.zeros_like(b), SolveReport(0, 0.0, True, tol)
    solve = _cg if A.symmetric else _bicgstab
    return solve(A, b, tol, maxit)


def woodbury_solve(
    A: LinearOperatorSpec,
    corr: RankCorrection,
    b: Field,
    tol: float = 1e-12,
    maxit: int | None = None,
) -> tuple[Field, SolveReport]:
    """Solve ``A phi + sum_i <c_i, phi> d_i = b``.

    Solves ``A y_j = d_j`` and ``A z = b``, then
    ``(I + G) s = (<c_i, z>)_i`` with ``G_ij = <c_i, y_j>``, and returns
    ``phi = z - sum_j s_j y_j``.  Raises :class:`SolverError` when a base solve
    fails and :class:`SingularCorrectionError` when ``I + G`` is singular.
    """
    grid = corr.grid
    grid.check(b)
    bnorm = _norm(b)
    z, report = krylov_solve(A, b, tol, maxit)
    if not report.converged:
        raise SolverError(f"base solve for {A.label!r} did not converge", report)
    if corr.rank == 0:
        return z, report

    ys = []
    for _, d in corr.pairs:
        y, rep = krylov_solve(A, d, tol, maxit)
        if not rep.converged:
            raise SolverError(f"correction solve for {A.label!r} did not converge", rep)
        report = report.merge(rep)
        ys.append(y)

    k = corr.rank
    G = np.array([[grid.inner(c, y) for y in ys] for c, _ in corr.pairs])
    K = np.eye(k) + G
    scale = float(np.prod(np.linalg.norm(K, axis=1)))
    if not abs(np.linalg.det(K)) > 1e-14 * scale:
        raise SingularCorrectionError("rank correction singular", report)

    def combine(z):
        s = np.linalg.solve(K, np.array([grid.inner(c, z) for c, _ in corr.pairs]))
        out = z.copy()
        for sj, y in zip(s, ys):
            out -= sj * y
        return out

    phi = combine(z)
    # cancellation between z and the y_j can leave a large residual; refine
    for _ in range(_REFINE_PASSES):
        res = b - A(phi) - corr.apply(phi)
        report.residual = _norm(res) / bnorm if bnorm > 0 else _norm(res)
        if report.residual <= tol or bnorm == 0:
            break
        dz, rep = krylov_solve(A, res, tol, maxit)
        report = report.merge(rep)
        phi = phi + combine(dz)
    else:
        res = b - A(phi) - corr.apply(phi)
        report.residual = _norm(res) / bnorm
    report.converged = report.converged and report.residual <= 10 * tol
    return phi, report
