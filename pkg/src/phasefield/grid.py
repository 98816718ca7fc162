"""Uniform cell-centered 2D mesh with homogeneous-Neumann difference operators.

Fields are plain ``numpy`` arrays of shape ``(Ny, Nx)`` in C order, so the
x-index ``i`` runs fastest.  Boundary conditions are imposed with mirror ghost
cells (``u[0] := u[1]``), which is the same as zeroing the normal flux through
every boundary edge.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Grid2D:
    """Cell-centered rectangular mesh on ``[x0, x0+Lx] x [y0, y0+Ly]``."""

    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0
    x0: float = 0.0
    y0: float = 0.0

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"cell counts must be positive, got {self.nx}x{self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("domain extents must be positive")

    @classmethod
    def square(cls, n: int, lo: float = 0.0, hi: float = 1.0) -> "Grid2D":
        return cls(n, n, hi - lo, hi - lo, lo, lo)

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def area(self) -> float:
        return self.lx * self.ly

    def x_centers(self) -> np.ndarray:
        return self.x0 + (np.arange(1, self.nx + 1) - 0.5) * self.hx

    def y_centers(self) -> np.ndarray:
        return self.y0 + (np.arange(1, self.ny + 1) - 0.5) * self.hy

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(X, Y)`` cell-center coordinates, each of shape ``(Ny, Nx)``."""
        return np.meshgrid(self.x_centers(), self.y_centers(), indexing="xy")

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def full(self, value: float) -> np.ndarray:
        return np.full(self.shape, float(value))

    def check(self, *fields: np.ndarray) -> None:
        for u in fields:
            if np.shape(u) != self.shape:
                raise ValueError(f"field of shape {np.shape(u)} does not live on a {self.shape} grid")

    # -- difference operators -------------------------------------------------

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        """Five-point Laplacian with mirror ghost cells."""
        self.check(u)
        cx, cy = 1.0 / self.hx**2, 1.0 / self.hy**2
        out = (-2.0 * (cx + cy)) * u
        # interior neighbours; a mirrored ghost equals the boundary cell itself
        out[:, 1:] += cx * u[:, :-1]
        out[:, :-1] += cx * u[:, 1:]
        out[:, 0] += cx * u[:, 0]
        out[:, -1] += cx * u[:, -1]
        out[1:] += cy * u[:-1]
        out[:-1] += cy * u[1:]
        out[0] += cy * u[0]
        out[-1] += cy * u[-1]
        return out

    def gradient_energy(self, u: np.ndarray) -> float:
        """Sum of squared edge differences, ``<-lap u, u>`` by summation by parts."""
        self.check(u)
        gx = np.diff(u, axis=1) / self.hx
        gy = np.diff(u, axis=0) / self.hy
        return self.cell_area * (_dot(gx, gx) + _dot(gy, gy))

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        """Discrete inner product ``hx*hy*sum(f*g)``."""
        self.check(f, g)
        return self.cell_area * _dot(f, g)

    def integral(self, f: np.ndarray) -> float:
        self.check(f)
        return self.cell_area * float(np.sum(f))

    def neumann_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of :meth:`laplacian` in the DCT-II basis, shape ``(Ny, Nx)``.

        ``scipy.fft.dctn(u, type=2, norm="ortho")`` diagonalizes the operator.
        """
        return _eigenvalues(self)


@functools.lru_cache(maxsize=16)
def _eigenvalues(grid: Grid2D) -> np.ndarray:
    lx = -4.0 / grid.hx**2 * np.sin(np.pi * np.arange(grid.nx) / (2 * grid.nx)) ** 2
    ly = -4.0 / grid.hy**2 * np.sin(np.pi * np.arange(grid.ny) / (2 * grid.ny)) ** 2
    out = ly[:, None] + lx[None, :]
    out.flags.writeable = False
    return out


def _dot(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a.ravel(), b.ravel()))


def laplacian(u: np.ndarray, grid: Grid2D) -> np.ndarray:
    return grid.laplacian(u)


def inner_product(f: np.ndarray, g: np.ndarray, grid: Grid2D) -> float:
    return grid.inner(f, g)


def gradient_energy(u: np.ndarray, grid: Grid2D) -> float:
    return grid.gradient_energy(u)


def apply_operator(u: np.ndarray, gamma1: float, gamma2: float, w, grid: Grid2D) -> np.ndarray:
    """Return ``-gamma1*lap(u) + gamma2*u + w*u``.

    ``w`` may be a field or a scalar (``0`` for the SAV operators).
    """
    if np.ndim(w):
        grid.check(w)
    return -gamma1 * grid.laplacian(u) + (gamma2 + w) * u
