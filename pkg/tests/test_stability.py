import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from phasefield.potential import Formulation, ModelKind, ModelSpec, Polynomial
from phasefield.stability import LinearRegimeError, StabilityQuery, growth_rate, measure_growth_rate


def sigma(kind, phiss=0.5, k=0, l=0, **kw):
    return growth_rate(StabilityQuery(ModelSpec(kind=kind, **kw), phiss, k, l))


def test_closed_forms():
    # f''(1/2) = -gamma2, f''(0) = 2 gamma2
    assert sigma(ModelKind.ALLEN_CAHN) == pytest.approx(10.0)
    assert sigma(ModelKind.ALLEN_CAHN, k=2, l=1) == pytest.approx(-(2 * 0.05 * 5 - 10))
    assert sigma(ModelKind.ALLEN_CAHN, phiss=0.0, k=1) == pytest.approx(-(0.1 + 20))
    assert sigma(ModelKind.CAHN_HILLIARD, k=1, l=1, mobility=2.0) == pytest.approx(-2 * 2 * (0.2 - 10))
    assert sigma(ModelKind.ALLEN_CAHN_LAGRANGE, k=1) == pytest.approx(9.9)


@given(phiss=st.floats(-0.5, 1.5))
def test_conserved_zero_modes(phiss):
    assert sigma(ModelKind.CAHN_HILLIARD, phiss) == 0.0
    assert sigma(ModelKind.ALLEN_CAHN_LAGRANGE, phiss) == 0.0


@given(phiss=st.floats(-0.5, 1.5), k=st.integers(0, 6), l=st.integers(0, 6))
def test_instability_windows_agree(phiss, k, l):
    if k == l == 0:
        return
    ac = sigma(ModelKind.ALLEN_CAHN, phiss, k, l)
    ch = sigma(ModelKind.CAHN_HILLIARD, phiss, k, l)
    assert (ac > 0) == (ch > 0) and (ac < 0) == (ch < 0)


def test_penalty_rate():
    # identity h: h'' = 0 so only the zero mode feels the penalty
    area = 4 * math.pi**2
    assert sigma(ModelKind.ALLEN_CAHN_PENALTY, eta=3.0) == pytest.approx(10.0 - 3.0 * area)
    assert sigma(ModelKind.ALLEN_CAHN_PENALTY, k=1, eta=3.0) == pytest.approx(9.9)
    # polynomial h, V0 off target: h''(phi) (4 pi^2 h - V0) contributes to every mode
    h = Polynomial(1)
    p = 0.3
    expected = -(2 * 0.05 + 10 * (2 - 12 * p + 12 * p**2) + 2.0 * float(h.second(p)) * (area * float(h(p)) - 1.0))
    assert sigma(ModelKind.ALLEN_CAHN_PENALTY, p, k=1, eta=2.0, h=h, V0=1.0) == pytest.approx(expected)


def test_polynomial_lagrange_unsupported():
    with pytest.raises(NotImplementedError):
        sigma(ModelKind.ALLEN_CAHN_LAGRANGE, h=Polynomial(2))


def test_negative_wavenumber_rejected():
    with pytest.raises(ValueError):
        StabilityQuery(ModelSpec(), 0.5, -1, 0)


@pytest.mark.parametrize(
    "kind,k,l,form",
    [
        (ModelKind.ALLEN_CAHN, 1, 1, Formulation.EQ),
        (ModelKind.ALLEN_CAHN, 3, 3, Formulation.SAV),
        (ModelKind.CAHN_HILLIARD, 1, 0, Formulation.EQ),
    ],
)
def test_measured_rate_matches(kind, k, l, form):
    model = ModelSpec(kind=kind)
    measured = measure_growth_rate(model, 0.5, k, l, dt=1e-4, steps=200, n=32, formulation=form)
    expected = growth_rate(StabilityQuery(model, 0.5, k, l))
    assert measured == pytest.approx(expected, rel=0.01)


def test_measured_lagrange_zero_mode_is_frozen():
    model = ModelSpec(kind=ModelKind.ALLEN_CAHN_LAGRANGE)
    assert abs(measure_growth_rate(model, 0.5, 0, 0, steps=100, n=16)) <= 1e-8


def test_leaving_linear_regime():
    with pytest.raises(LinearRegimeError, match="left linear regime"):
        measure_growth_rate(ModelSpec(), 0.5, 0, 0, dt=1e-2, steps=200, n=8)
