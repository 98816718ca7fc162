import math

import numpy as np
import pytest

from phasefield.diagnostics import (
    DiagnosticsRecord,
    convergence_order,
    discrete_energy,
    dissipation_rate,
    l2_error,
    volume,
)
from phasefield.grid import Grid2D
from phasefield.potential import AuxiliaryKind, Formulation, ModelKind, ModelSpec, Polynomial, QDefinition
from phasefield.scenarios import init_two_drops
from phasefield.schemes import SchemeConfig, initial_state


def config(kind=ModelKind.ALLEN_CAHN, form=Formulation.EQ, **kw):
    return SchemeConfig(ModelSpec(kind=kind, **kw), AuxiliaryKind(formulation=form), 1e-3)


@pytest.mark.parametrize("form", list(Formulation))
@pytest.mark.parametrize("value", [0.0, 1.0])
def test_energy_of_wells_is_zero(form, value):
    grid = Grid2D.square(8)
    cfg = config(form=form)
    s = initial_state(np.full(grid.shape, value), grid, cfg)
    assert discrete_energy(s, cfg) == pytest.approx(0.0, abs=1e-9)


def test_energy_of_half_state():
    # phi = 1/2 on the unit square: F = |Omega| f(1/2) = gamma2 / 16
    grid = Grid2D.square(8)
    for form in Formulation:
        cfg = config(form=form)
        s = initial_state(np.full(grid.shape, 0.5), grid, cfg)
        assert discrete_energy(s, cfg) == pytest.approx(10 / 16, rel=1e-9)


def test_relinearized_energy_matches_shifted_on_consistent_state():
    grid = Grid2D.square(16)
    phi = init_two_drops(grid, 0.05)
    a = config()
    b = SchemeConfig(a.model, AuxiliaryKind(q_definition=QDefinition.RELINEARIZED), 1e-3)
    ea = discrete_energy(initial_state(phi, grid, a), a)
    eb = discrete_energy(initial_state(phi, grid, b), b)
    assert ea == pytest.approx(eb, rel=1e-8)


def test_penalty_adds_half_zeta_squared():
    grid = Grid2D.square(8)
    cfg = config(kind=ModelKind.ALLEN_CAHN_PENALTY, eta=4.0, V0=0.0)
    s = initial_state(np.full(grid.shape, 1.0), grid, cfg)
    # zeta = 2 * (1 - 0) -> zeta^2/2 = 2
    assert discrete_energy(s, cfg) == pytest.approx(2.0, abs=1e-9)


def test_volume():
    grid = Grid2D.square(8, -1.0, 1.0)
    cfg = config()
    s = initial_state(np.full(grid.shape, 0.5), grid, cfg)
    assert volume(s) == pytest.approx(2.0)
    s1 = initial_state(np.ones(grid.shape), grid, cfg)
    assert volume(s1, Polynomial(3)) == pytest.approx(4.0)


def test_volume_of_two_drops_brute_force():
    grid = Grid2D.square(32)
    phi = init_two_drops(grid, 0.01)
    s = initial_state(phi, grid, config())
    brute = 0.0
    for j in range(32):
        for i in range(32):
            x, y = (i + 0.5) / 32, (j + 0.5) / 32
            r1, r2 = math.hypot(x - 0.3, y - 0.5), math.hypot(x - 0.7, y - 0.5)
            if r1 <= 0.19 or r2 <= 0.19:
                v = 1.0
            elif r1 <= 0.2:
                v = math.tanh((0.2 - r1) / 0.01)
            elif r2 <= 0.2:
                v = math.tanh((0.2 - r2) / 0.01)
            else:
                v = 0.0
            brute += v / 32**2
    assert volume(s) == pytest.approx(brute, rel=1e-12)


def test_dissipation_rate():
    a = DiagnosticsRecord(0, 0.0, 4.0, 1.0)
    b = DiagnosticsRecord(1, 1.0, 2.0, 1.0)
    assert dissipation_rate(a, b) == -2.0
    assert dissipation_rate(a, DiagnosticsRecord(1, 0.5, 4.0, 1.0)) == 0.0
    with pytest.raises(ValueError):
        dissipation_rate(a, a)


def test_convergence_order():
    assert convergence_order([4e-3, 1e-3], [0.2, 0.1]) == pytest.approx([2.0])
    assert convergence_order([9.0, 1.0], [3.0, 1.0]) == pytest.approx([2.0])
    # pair of rows from the published CH-EQ table
    assert convergence_order([4.88e-8, 1.22e-8], [1e-2, 5e-3])[0] == pytest.approx(2.0, abs=5e-3)
    with pytest.raises(ValueError):
        convergence_order([1.0, 0.0], [2.0, 1.0])
    with pytest.raises(ValueError):
        convergence_order([1.0, 0.5], [1.0, 2.0])
    with pytest.raises(ValueError):
        convergence_order([1.0], [1.0])


def test_l2_error():
    grid = Grid2D.square(4, 0.0, 2.0)
    u = np.ones(grid.shape)
    assert l2_error(grid, u, 0 * u) == pytest.approx(2.0)
