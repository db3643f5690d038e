import math

import numpy as np
import pytest

from gv95sim.hardware import PhaseState, classical_pd_power, drift_step, stretcher_apply
from gv95sim.rng import substream
from gv95sim.stabilization import (
    ControllerState, PerturbObserve, PhaseController, controller_step, lock_quality,
    quantum_phase_error, residual_to_visibility, simulate_lock,
)


def test_controller_reverses_when_reading_gets_worse():
    ctrl = ControllerState()
    cmd, ctrl = controller_step(0.5, ctrl)
    assert cmd == pytest.approx(0.01)
    cmd, ctrl = controller_step(0.6, ctrl)
    assert cmd == pytest.approx(-0.01)
    cmd, ctrl = controller_step(0.4, ctrl)
    assert cmd == pytest.approx(-0.01)


def test_tie_counts_as_worse():
    ctrl = ControllerState(last_power=0.3)
    cmd, _ = controller_step(0.3, ctrl)
    assert cmd < 0


def test_maximize_setpoint():
    c = PerturbObserve(setpoint="maximize")
    assert c.lock_phase == 0.0
    c.step(0.5)
    assert c.step(0.4) < 0


class _Wrapped(PhaseController):
    """Same law as PerturbObserve but not eligible for the fast path."""

    def __init__(self):
        self.inner = PerturbObserve()
        self.lock_phase = self.inner.lock_phase

    def step(self, p):
        return self.inner.step(p)

    @property
    def locked(self):
        return self.inner.locked


def _composed(phase, n, dt, ctrl, rng_d, rng_p, noise):
    kicks = phase.ramp * dt + phase.drift_sigma * math.sqrt(dt) * rng_d.standard_normal(n)
    z = rng_p.standard_normal(n)
    out = []
    for j in range(n):
        phase = phase.__class__(**{**phase.__dict__, "phi_ph": phase.phi_ph + kicks[j]})
        p = classical_pd_power(1.0, phase.phi_ph, 0.98)
        p = max(0.0, p + noise * p * z[j])
        cmd, ctrl = controller_step(p, ctrl)
        phase = stretcher_apply(phase, cmd)
        out.append(phase.phi_ph - math.pi)
    return np.angle(np.exp(1j * np.array(out)))


def test_fast_path_matches_step_by_step_composition():
    # a steady ramp forces the loop to chase the fringe into the stretcher clamp
    start = PhaseState(phi_ph=0.5 + math.pi, drift_sigma=0.3, ramp=3.0,
                       stretcher_range=2 * math.pi)
    kw = dict(p_in=1.0, v_classical=0.98, pd_noise=0.01)
    fast = simulate_lock(start, 3000, 1e-3, PerturbObserve(), rng_drift=substream(1, "d"),
                         rng_pd=substream(1, "p"), **kw)
    slow = simulate_lock(start, 3000, 1e-3, _Wrapped(), rng_drift=substream(1, "d"),
                         rng_pd=substream(1, "p"), **kw)
    ref = _composed(start, 3000, 1e-3, ControllerState(), substream(1, "d"),
                    substream(1, "p"), 0.01)
    assert np.array_equal(fast.error_ph, slow.error_ph)
    assert np.array_equal(fast.rewinds, slow.rewinds)
    assert np.allclose(fast.error_ph, ref, atol=1e-9)
    assert fast.rewinds.any()


def test_lock_acquires_and_holds():
    start = PhaseState(phi_ph=math.pi + 1.0, drift_sigma=0.1)
    tr = simulate_lock(start, 20_000, 1e-3, PerturbObserve(v_ref=0.98), v_classical=0.98,
                       pd_noise=0.01, rng_drift=substream(3, "d"), rng_pd=substream(3, "p"))
    tail = tr.error_ph[5000:]
    assert np.mean(np.cos(tail)) > 0.99
    assert tr.locked[-1]


def test_open_loop_drift_washes_out_the_fringe():
    start = PhaseState(drift_sigma=3.0)
    tr = simulate_lock(start, 200_000, 1e-3, None, rng_drift=substream(4, "d"))
    assert abs(residual_to_visibility(tr.error_ph, 1.0)) < 0.1


def test_rewind_does_not_unlock():
    start = PhaseState(phi_ph=math.pi, drift_sigma=0.0, ramp=200.0,
                       stretcher_offset=0.0, stretcher_range=2 * math.pi * 3)
    tr = simulate_lock(start, 5000, 1e-3, PerturbObserve(dither_step=0.5), rng_drift=None)
    idx = np.flatnonzero(tr.rewinds)
    assert idx.size > 0
    for i in idx[idx < len(tr) - 10]:
        assert np.max(np.abs(tr.error_ph[i + 1:i + 11])) < 1.0


def test_phase_error_scaling_and_quality():
    e = quantum_phase_error(np.array([0.1, -0.1]), 1.001, 0.05)
    assert e == pytest.approx([0.1501, -0.0501])
    q = lock_quality(np.array([0.0, 0.0, 2.0, 0.0]))
    assert q.slip_fraction == 0.25
    assert q.rms == pytest.approx(1.0)
    assert residual_to_visibility([0.0], 0.9) == pytest.approx(0.9)
