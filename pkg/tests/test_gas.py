import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from khe.errors import DomainError, NonPhysicalState
from khe.gas import (
    GasParams,
    cons_to_prim,
    entropy,
    entropy_from_pressure,
    max_wave_speeds,
    pressure_from_entropy,
    prim_to_cons,
)

G = GasParams()


def test_gamma_domain():
    with pytest.raises(DomainError):
        GasParams(gamma=1.0)
    with pytest.raises(DomainError):
        GasParams(gamma=1.8)
    assert GasParams(gamma=5.0 / 3.0).gamma == pytest.approx(5.0 / 3.0)


def test_derived_constants():
    assert G.c_v == pytest.approx(2.5, rel=1e-15)
    assert G.d1 == pytest.approx(0.8)
    assert G.d2 == pytest.approx(2.0)
    assert G.ratio_band == (pytest.approx(0.5), pytest.approx(1.25))


@pytest.mark.parametrize(
    "cons,prim",
    [
        ((2.0, -1.0, 0.0, 6.5), (2.0, -0.5, 0.0, 2.5)),
        ((1.0, 0.0, 0.0, 2.5), (1.0, 0.0, 0.0, 1.0)),
        ((1.0, 0.5, 0.0, 6.375), (1.0, 0.5, 0.0, 2.5)),
    ],
)
def test_cons_prim_examples(cons, prim):
    out = cons_to_prim(*cons, G)
    assert out == pytest.approx(prim, rel=1e-14)
    back = prim_to_cons(*prim, G)
    assert back == pytest.approx(cons, rel=1e-14)


def test_round_trip_random():
    rng = np.random.default_rng(0)
    rho = rng.uniform(0.5, 2.0, 1000)
    u = rng.uniform(-1.0, 1.0, 1000)
    v = rng.uniform(-1.0, 1.0, 1000)
    p = rng.uniform(0.5, 2.5, 1000)
    r2, u2, v2, p2 = cons_to_prim(*prim_to_cons(rho, u, v, p, G), G)
    for a, b in ((r2, rho), (u2, u), (v2, v), (p2, p)):
        assert np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)) < 1e-14


@given(
    rho=st.floats(0.1, 5.0),
    u=st.floats(-2.0, 2.0),
    v=st.floats(-2.0, 2.0),
    p=st.floats(0.5, 10.0),
)
@settings(max_examples=200, deadline=None)
def test_round_trip_property(rho, u, v, p):
    got = cons_to_prim(*prim_to_cons(rho, u, v, p, G), G)
    assert got == pytest.approx((rho, u, v, p), rel=1e-13)


def test_entropy_examples():
    assert entropy_from_pressure(1.0, 1.0, G) == 0.0
    assert entropy_from_pressure(2.0, 2.5, G) == pytest.approx(-0.27057660454884182, rel=1e-12)
    assert entropy_from_pressure(1.0, 2.5, G) == pytest.approx(2.2907268296853875, rel=1e-12)
    # conserved-variable route agrees
    cons = prim_to_cons(2.0, 0.3, -0.1, 2.5, G)
    assert entropy(*cons, G) == pytest.approx(-0.27057660454884182, rel=1e-12)


def test_isentrope_normalization():
    for rho in (0.3, 1.0, 2.7):
        cons = prim_to_cons(rho, 0.0, 0.0, rho**G.gamma, G)
        assert abs(entropy(*cons, G)) < 1e-12


def test_pressure_from_entropy():
    assert pressure_from_entropy(1.0, 0.0, G) == pytest.approx(1.0)
    assert pressure_from_entropy(2.0, -0.27057, G) == pytest.approx(2.5, abs=1e-4)
    assert pressure_from_entropy(2.0, 0.0, G) == pytest.approx(2.6390158215457885, rel=1e-12)
    with pytest.raises(DomainError):
        pressure_from_entropy(-1.0, 0.0, G)


def test_entropy_pressure_round_trip():
    rng = np.random.default_rng(1)
    rho = rng.uniform(0.1, 10.0, 500)
    p = rng.uniform(0.1, 10.0, 500)
    back = pressure_from_entropy(rho, entropy_from_pressure(rho, p, G), G)
    assert np.max(np.abs(back - p) / p) < 1e-12


def test_max_wave_speeds():
    ones = np.ones((5, 5))
    cons = prim_to_cons(ones, 0.0 * ones, 0.0 * ones, ones, G)
    lx, ly = max_wave_speeds(*cons, G)
    assert lx == pytest.approx(1.1832159566199232, rel=1e-13)
    assert ly == pytest.approx(1.1832159566199232, rel=1e-13)

    cons = prim_to_cons(ones, 0.5 * ones, 0.0 * ones, 2.5 * ones, G)
    lx, ly = max_wave_speeds(*cons, G)
    assert lx == pytest.approx(0.5 + np.sqrt(3.5), rel=1e-13)
    assert ly == pytest.approx(np.sqrt(3.5), rel=1e-13)

    # uniform fields: independent of grid size
    big = np.ones((17, 17))
    cons_big = prim_to_cons(big, 0.5 * big, 0.0 * big, 2.5 * big, G)
    assert max_wave_speeds(*cons_big, G) == (lx, ly)


def test_nonphysical_raises():
    with pytest.raises(NonPhysicalState):
        cons_to_prim(1.0, 3.0, 0.0, 1.0, G)  # kinetic energy exceeds total
    with pytest.raises(NonPhysicalState):
        cons_to_prim(-1.0, 0.0, 0.0, 1.0, G)
    with pytest.raises(NonPhysicalState):
        prim_to_cons(1.0, 0.0, 0.0, -2.0, G)
