"""Independent dense reference implementations used by the test-suite.

Nothing here calls into the package's numerics: the Laplacian is assembled
from 1D Neumann stencils with Kronecker products, the double-well derivatives
are written out by hand, and each time step is assembled as a dense linear
system directly from the Crank-Nicolson discretization of the model.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb

import numpy as np


def neumann_1d(n: int, h: float) -> np.ndarray:
    """Second-difference matrix with mirror ghost cells."""
    D = np.zeros((n, n))
    for i in range(n):
        D[i, i] = -2.0
        if i > 0:
            D[i, i - 1] = 1.0
        else:
            D[i, i] += 1.0
        if i < n - 1:
            D[i, i + 1] = 1.0
        else:
            D[i, i] += 1.0
    return D / h**2


def dense_laplacian(nx: int, ny: int, hx: float, hy: float) -> np.ndarray:
    """Acts on arrays of shape (ny, nx) flattened in C order (x fastest)."""
    return np.kron(np.eye(ny), neumann_1d(nx, hx)) + np.kron(neumann_1d(ny, hy), np.eye(nx))


# -- pointwise model functions, written out independently -----------------------


def f(phi, g2):
    return g2 * phi**2 * (1 - phi) ** 2


def fp(phi, g2):
    return 2 * g2 * phi * (1 - phi) * (1 - 2 * phi)


def polynomial_h_constant(m: int) -> Fraction:
    """``c`` with ``int_0^1 c [p(1-p)]^m dp = 1``, by exact integration."""
    integral = sum(Fraction(comb(m, j) * (-1) ** j, m + j + 1) for j in range(m + 1))
    return 1 / integral


def hprime_poly(phi, m: int):
    return float(polynomial_h_constant(m)) * (phi * (1 - phi)) ** m


# -- dense single step ----------------------------------------------------------


def dense_step(
    kind: str,
    formulation: str,
    *,
    nx: int,
    ny: int,
    hx: float,
    hy: float,
    phi_prev: np.ndarray,
    phi: np.ndarray,
    aux,
    zeta: float | None,
    dt: float,
    M: float,
    g1: float,
    g2: float,
    C0: float,
    eta: float = 0.0,
    m: int | None = None,
    relinearized: bool = False,
):
    """One Crank-Nicolson step by dense direct solve.

    ``kind`` is one of "AC", "AC-P", "AC-L", "CH"; ``aux`` is the field ``q``
    (EQ) or the scalar ``r`` (SAV).  Returns ``(phi_new, aux_new)``.

    The half-level chemical potential is written as an affine function
    ``mu = K phi_new + k`` of the unknown, with
    ``phi_hat = (phi_new + phi)/2`` and the auxiliary update substituted in.
    """
    N = nx * ny
    c = hx * hy
    Lap = dense_laplacian(nx, ny, hx, hy)
    I = np.eye(N)
    one = np.ones(N)
    p, pp = phi.ravel(), phi_prev.ravel()
    ext = lambda a, b: 1.5 * a - 0.5 * b

    # F = g1 |grad phi|^2 + [g2 |phi|^2] + ..., no factor 1/2, so
    # mu = -2 g1 Lap phi_hat + [2 g2 phi_hat] + (bulk auxiliary part)
    split = 0.0 if relinearized else g2
    K = -g1 * Lap + split * I
    k = K @ p

    if formulation == "EQ":
        q = aux.ravel()
        if relinearized:
            qp = lambda v: np.sqrt(g2) * (1 - 2 * v)
        else:
            qp = lambda v: (fp(v, g2) - 2 * g2 * v) / (2 * np.sqrt(f(v, g2) - g2 * v**2 + C0))
        qb = ext(qp(p), qp(pp))
        # q_hat = q + qb (phi_new - phi)/2 ;  mu += 2 q_hat qb
        K = K + np.diag(qb * qb)
        k = k + 2 * q * qb - qb * qb * p
    else:
        r = float(aux)
        rr = lambda v: np.sqrt(c * np.sum(f(v, g2) - g2 * v**2) + C0)
        gfun = lambda v: (fp(v, g2) - 2 * g2 * v) / rr(v)
        gb = ext(gfun(p), gfun(pp))
        # r_hat = r + <gb, phi_new - phi>/4 ;  mu += r_hat gb
        K = K + 0.25 * c * np.outer(gb, gb)
        k = k + r * gb - 0.25 * c * np.dot(gb, p) * gb

    if kind == "AC-P":
        # zeta_hat = zeta + sqrt(eta) <phi_new - phi, 1>/2 ; mu += sqrt(eta) zeta_hat
        K = K + 0.5 * eta * c * np.outer(one, one)
        k = k + np.sqrt(eta) * zeta * one - 0.5 * eta * c * np.sum(p) * one

    if kind in ("AC", "AC-P"):
        A = I / dt + M * K
        rhs = p / dt - M * k
        new = np.linalg.solve(A, rhs)
    elif kind == "CH":
        A = I / dt - M * Lap @ K
        rhs = p / dt + M * Lap @ k
        new = np.linalg.solve(A, rhs)
    elif kind == "AC-L":
        hp = (lambda v: np.ones_like(v)) if m is None else (lambda v: hprime_poly(v, m))
        hb = ext(hp(p), hp(pp))
        # (phi_new - phi)/dt = -M (mu - lambda hb),  <hb, phi_new - phi> = 0
        A = np.zeros((N + 1, N + 1))
        A[:N, :N] = I / dt + M * K
        A[:N, N] = -M * hb
        A[N, :N] = c * hb
        rhs = np.concatenate([p / dt - M * k, [c * np.dot(hb, p)]])
        new = np.linalg.solve(A, rhs)[:N]
    else:
        raise ValueError(kind)

    if formulation == "EQ":
        aux_new = (q + qb * (new - p)).reshape(phi.shape)
    else:
        aux_new = r + 0.5 * c * np.dot(gb, new - p)
    return new.reshape(phi.shape), aux_new
