import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gv95sim.optics import (
    DETECTOR_FOR_BIT, LinkParams, ModeAmplitudes, fiber_delay, interfere, make_state,
    multiphoton_fraction, sample_photon_count, wavelength_phase_ratio,
)


def test_states_are_orthogonal_and_normalized():
    s0, s1 = make_state(0), make_state(1)
    assert s0.norm2 == pytest.approx(1.0)
    assert s1.norm2 == pytest.approx(1.0)
    assert abs(s0.inner(s1)) < 1e-15


def test_make_state_rejects_non_bits():
    with pytest.raises(ValueError):
        make_state(2)


@pytest.mark.parametrize("bit", [0, 1])
def test_zero_phase_routes_each_state_to_its_detector(bit):
    p = interfere(make_state(bit), 0.0, 1.0)
    assert p[DETECTOR_FOR_BIT[bit]] == pytest.approx(1.0)


def test_half_wave_phase_swaps_the_outputs():
    p = interfere(make_state(0), math.pi, 1.0)
    assert p[DETECTOR_FOR_BIT[1]] == pytest.approx(1.0)


def test_localized_photon_splits_evenly():
    a_only = ModeAmplitudes(1 + 0j, 0j)
    for phi in (0.0, 0.7, math.pi):
        assert interfere(a_only, phi, 1.0) == pytest.approx((0.5, 0.5))


@given(bit=st.integers(0, 1), phi=st.floats(-10, 10), v=st.floats(0, 1))
def test_output_law(bit, phi, v):
    p = interfere(make_state(bit), phi, v)
    assert sum(p) == pytest.approx(1.0)
    assert p[DETECTOR_FOR_BIT[bit]] == pytest.approx(0.5 * (1 + v * math.cos(phi)), abs=1e-12)


def test_interfere_validates_inputs():
    with pytest.raises(ValueError):
        interfere(make_state(0), 0.0, 1.5)
    with pytest.raises(ValueError):
        interfere(make_state(0).scaled(0.5), 0.0, 1.0)


def test_amplitudes_cannot_exceed_unit_norm():
    with pytest.raises(ValueError):
        ModeAmplitudes(1 + 0j, 1 + 0j)


def test_photon_number_statistics(rng):
    n = sample_photon_count(0.1, rng, size=400_000)
    assert n.mean() == pytest.approx(0.1, rel=0.02)
    assert n.var() == pytest.approx(0.1, rel=0.02)
    frac = np.mean(n >= 2) / np.mean(n >= 1)
    assert frac == pytest.approx(multiphoton_fraction(0.1), rel=0.05)


def test_multiphoton_fraction_closed_form():
    assert multiphoton_fraction(0.1) == pytest.approx(0.04917, abs=1e-5)
    assert multiphoton_fraction(0.0) == 0.0


def test_fiber_delays():
    assert fiber_delay(40) == pytest.approx(192e-9, rel=5e-3)
    assert fiber_delay(6.4) == pytest.approx(30.72e-9, rel=5e-3)
    with pytest.raises(ValueError):
        fiber_delay(-1)


def test_link_defaults_and_derived_times():
    p = LinkParams()
    assert p.mu == 0.1
    assert p.tau == pytest.approx(fiber_delay(40))
    assert p.coherence_time == pytest.approx(fiber_delay(6.4))
    assert p.phase_ratio == pytest.approx(1547.72 / 1546.12)


def test_link_rejects_bad_values():
    with pytest.raises(ValueError, match="mu"):
        LinkParams(mu=-0.1)


def test_wavelength_ratio_validates():
    assert wavelength_phase_ratio(2.0, 1.0) == 2.0
    with pytest.raises(ValueError):
        wavelength_phase_ratio(0.0, 1.0)
