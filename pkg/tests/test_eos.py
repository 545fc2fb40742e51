import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mhdfem.eos import (
    IdealGasEos,
    PolytropicEos,
    delta1,
    delta2,
    delta_quotient,
)


def test_polytropic_values():
    eos = PolytropicEos(K=2.0, gamma=1.5)
    assert eos.epsilon(4.0) == pytest.approx(16.0)
    assert eos.depsilon_drho(4.0) == pytest.approx(6.0)


def test_ideal_gas_partials_match_finite_differences():
    eos = IdealGasEos(K=1.3, C_v=0.7, gamma=5 / 3)
    rho, s = 1.7, 0.4
    h = 1e-6
    d_rho = (eos.epsilon(rho + h, s) - eos.epsilon(rho - h, s)) / (2 * h)
    d_s = (eos.epsilon(rho, s + h) - eos.epsilon(rho, s - h)) / (2 * h)
    assert eos.depsilon_drho(rho, s) == pytest.approx(d_rho, rel=1e-8)
    assert eos.depsilon_ds(rho, s) == pytest.approx(d_s, rel=1e-8)


def test_quotient_matches_definition_when_separated():
    eos = PolytropicEos()
    x, y = 1.0, 1.5
    expected = (eos.epsilon(y) - eos.epsilon(x)) / (y - x)
    assert delta_quotient(x, y, eos) == pytest.approx(expected, rel=1e-14)


def test_quotient_falls_back_to_derivative_at_coincidence():
    eos = PolytropicEos()
    val = delta_quotient(1.3, 1.3, eos)
    assert val == pytest.approx(eos.depsilon_drho(1.3), rel=1e-14)
    near = delta_quotient(1.3, 1.3 + 1e-12, eos)
    assert near == pytest.approx(eos.depsilon_drho(1.3), rel=1e-9)


def test_quotient_summation_identity():
    """(y - x) * delta(x, y) telescopes to the energy difference."""
    eos = PolytropicEos(gamma=5 / 3)
    rng = np.random.default_rng(0)
    x = rng.uniform(0.5, 2.0, 50)
    y = rng.uniform(0.5, 2.0, 50)
    lhs = (y - x) * delta_quotient(x, y, eos)
    assert np.abs(lhs - (eos.epsilon(y) - eos.epsilon(x))).max() < 1e-13


@settings(max_examples=100, deadline=None)
@given(
    x=st.floats(0.2, 5.0), y=st.floats(0.2, 5.0),
)
def test_quotient_mean_value_property(x, y):
    """The quotient lies between the endpoint derivatives (convex eps)."""
    eos = PolytropicEos(gamma=5 / 3)
    q = float(delta_quotient(x, y, eos))
    lo = min(eos.depsilon_drho(x), eos.depsilon_drho(y))
    hi = max(eos.depsilon_drho(x), eos.depsilon_drho(y))
    assert lo - 1e-9 <= q <= hi + 1e-9


def test_partial_quotients_telescope_full_energy_difference():
    eos = IdealGasEos()
    rng = np.random.default_rng(1)
    r0 = rng.uniform(0.5, 2.0, 20)
    r1 = rng.uniform(0.5, 2.0, 20)
    s0 = rng.uniform(-1.0, 1.0, 20)
    s1 = rng.uniform(-1.0, 1.0, 20)
    # split the total difference along the two axes, matching the averaged
    # quotients used by the time scheme
    d1 = 0.5 * (delta1(r0, r1, s0, eos) + delta1(r0, r1, s1, eos))
    d2 = 0.5 * (delta2(s0, s1, r0, eos) + delta2(s0, s1, r1, eos))
    total = (r1 - r0) * d1 + (s1 - s0) * d2
    assert np.abs(total - (eos.epsilon(r1, s1) - eos.epsilon(r0, s0))).max() < 1e-12


def test_nonpositive_density_rejected():
    eos = PolytropicEos()
    with pytest.raises(ValueError):
        eos.epsilon(-1.0)
    with pytest.raises(ValueError):
        delta_quotient(1.0, 0.0, eos)
    with pytest.raises(ValueError):
        IdealGasEos().epsilon(0.0, 0.5)
