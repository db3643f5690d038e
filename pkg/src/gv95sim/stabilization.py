"""Active phase lock of the interferometer.

The classical control laser shares both arms with the single photons. Its
fringe at the monitor photodiode is read at ``loop_rate`` and a
perturb-and-observe law steps the fiber stretcher towards the power
extremum. The quantum channel inherits the lock through the wavelength
ratio of the two lasers.
"""

import abc
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .hardware import TWO_PI, PhaseState, wrap_phase

__all__ = [
    "ControllerState",
    "controller_step",
    "PhaseController",
    "PerturbObserve",
    "LockTrace",
    "simulate_lock",
    "quantum_phase_error",
    "residual_to_visibility",
    "lock_quality",
    "LockQuality",
]

MINIMIZE = "minimize"
MAXIMIZE = "maximize"


@dataclass(frozen=True)
class ControllerState:
    dither_step: float = 0.01
    last_power: float = math.inf
    direction: int = 1
    loop_rate: float = 1e3
    locked: bool = False
    setpoint: str = MINIMIZE
    # reference fringe used for the lock-detect estimate
    p_ref: float = 1.0
    v_ref: float = 1.0
    lock_threshold: float = 0.1
    residual_ms: float = math.pi ** 2
    lock_smoothing: float = 0.01

    def __post_init__(self):
        if not self.dither_step > 0:
            raise ValueError("dither_step must be > 0")
        if not self.loop_rate > 0:
            raise ValueError("loop_rate must be > 0")
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")
        if self.setpoint not in (MINIMIZE, MAXIMIZE):
            raise ValueError(f"setpoint must be {MINIMIZE!r} or {MAXIMIZE!r}")

    @property
    def lock_phase(self):
        """Fringe phase the loop steers to."""
        return math.pi if self.setpoint == MINIMIZE else 0.0


def _residual_estimate(power, ctrl):
    c = (2.0 * power / ctrl.p_ref - 1.0) / ctrl.v_ref
    if ctrl.setpoint == MINIMIZE:
        c = -c
    return math.acos(min(1.0, max(-1.0, c)))


def controller_step(pd_power, ctrl):
    """One perturb-and-observe update.

    The direction flips whenever the reading failed to move towards the
    setpoint (a tie counts as a failure, so a flat fringe makes the loop
    dither in place). Returns ``(command, new_state)``.
    """
    if pd_power < 0:
        raise ValueError("pd_power must be >= 0")
    if ctrl.setpoint == MINIMIZE:
        worse = pd_power >= ctrl.last_power
        first = ctrl.last_power == math.inf
    else:
        worse = pd_power <= ctrl.last_power
        first = ctrl.last_power == -math.inf
    direction = -ctrl.direction if (worse and not first) else ctrl.direction
    e = _residual_estimate(pd_power, ctrl)
    ms = ctrl.residual_ms + ctrl.lock_smoothing * (e * e - ctrl.residual_ms)
    new = ControllerState(
        ctrl.dither_step, pd_power, direction, ctrl.loop_rate,
        math.sqrt(ms) < ctrl.lock_threshold, ctrl.setpoint, ctrl.p_ref,
        ctrl.v_ref, ctrl.lock_threshold, ms, ctrl.lock_smoothing,
    )
    return direction * ctrl.dither_step, new


class PhaseController(abc.ABC):
    """A control law driving the stretcher from monitor-power readings."""

    loop_rate = 1e3
    lock_phase = math.pi

    @abc.abstractmethod
    def step(self, pd_power):
        """Return the stretcher command (rad) for this reading."""

    @property
    def locked(self):
        return False


class PerturbObserve(PhaseController):
    """Dither-descent lock built on :func:`controller_step`."""

    def __init__(self, state=None, **kwargs):
        self.state = state if state is not None else ControllerState(**kwargs)
        if self.state.setpoint == MAXIMIZE and self.state.last_power == math.inf:
            self.state = replace(self.state, last_power=-math.inf)

    @property
    def loop_rate(self):
        return self.state.loop_rate

    @property
    def lock_phase(self):
        return self.state.lock_phase

    @property
    def locked(self):
        return self.state.locked

    def step(self, pd_power):
        command, self.state = controller_step(pd_power, self.state)
        return command


@dataclass
class LockTrace:
    """Per-loop-period record of a closed-loop run.

    ``error_ph`` is the wrapped phase error at the control wavelength,
    relative to the lock point, held during each loop period.
    """

    dt: float
    error_ph: np.ndarray
    rewinds: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    locked: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    final_phase: PhaseState | None = None

    @property
    def times(self):
        return np.arange(self.error_ph.size) * self.dt

    def __len__(self):
        return self.error_ph.size


def simulate_lock(phase, n_steps, dt, controller=None, p_in=1.0,
                  v_classical=1.0, pd_noise=0.0, rng_drift=None, rng_pd=None,
                  lock_phase=math.pi):
    """Run drift, monitor photodiode, controller and stretcher for ``n_steps``
    loop periods of length ``dt``.

    Bit-identical to composing :func:`gv95sim.hardware.drift_step`,
    :func:`gv95sim.hardware.classical_pd_power`, the controller and
    :func:`gv95sim.hardware.stretcher_apply` step by step, but without
    allocating state objects in the inner loop. ``controller=None`` runs
    open loop (the stretcher never moves).
    """
    if controller is not None:
        lock_phase = controller.lock_phase
    if phase.drift_sigma > 0:
        kicks = phase.drift_sigma * math.sqrt(dt) * rng_drift.standard_normal(n_steps)
    else:
        kicks = np.zeros(n_steps)
    ramp = phase.ramp * dt
    if ramp:
        kicks = ramp + kicks

    phi = phase.phi_ph
    offset = phase.stretcher_offset
    limit = phase.stretcher_range
    kicks = kicks.tolist()
    err = [0.0] * n_steps
    rewinds = [False] * n_steps
    locked = [False] * n_steps
    cos = math.cos
    noisy = pd_noise > 0 and controller is not None
    noise = rng_pd.standard_normal(n_steps).tolist() if noisy else None
    fast = type(controller) is PerturbObserve
    step = controller.step if controller is not None else None
    if fast:
        st = controller.state
        minimize = st.setpoint == MINIMIZE
        sentinel = math.inf if minimize else -math.inf
        last, direction, dither = st.last_power, st.direction, st.dither_step
        ms, alpha, thr = st.residual_ms, st.lock_smoothing, st.lock_threshold
        p_ref, v_ref = st.p_ref, st.v_ref
        lk = st.locked
        acos, sqrt = math.acos, math.sqrt

    for j in range(n_steps):
        phi += kicks[j]
        if step is not None:
            p = p_in * 0.5 * (1.0 + v_classical * cos(phi))
            if noisy:
                p = max(0.0, p + pd_noise * p * noise[j])
            if fast:
                # inlined controller_step
                worse = p >= last if minimize else p <= last
                if worse and last != sentinel:
                    direction = -direction
                c = (2.0 * p / p_ref - 1.0) / v_ref
                if minimize:
                    c = -c
                e = acos(min(1.0, max(-1.0, c)))
                ms = ms + alpha * (e * e - ms)
                lk = sqrt(ms) < thr
                last = p
                cmd = direction * dither
                locked[j] = lk
            else:
                cmd = step(p)
                locked[j] = controller.locked
            if cmd:
                target = offset + cmd
                if abs(target) > limit:
                    excess = abs(target) - 0.5 * limit
                    m = max(1, math.ceil(excess / TWO_PI))
                    target -= math.copysign(m * TWO_PI, target)
                    rewinds[j] = True
                phi += target - offset
                offset = target
        err[j] = phi - lock_phase

    if fast and n_steps:
        controller.state = replace(st, last_power=last, direction=direction,
                                   locked=lk, residual_ms=ms)
    final = PhaseState(phi_ph=phi, drift_sigma=phase.drift_sigma,
                       stretcher_offset=offset, stretcher_range=limit,
                       ramp=phase.ramp, rewound=bool(rewinds[-1]) if n_steps else False)
    return LockTrace(dt=dt, error_ph=wrap_phase(np.array(err, dtype=float)),
                     rewinds=np.array(rewinds, dtype=bool),
                     locked=np.array(locked, dtype=bool), final_phase=final)


def quantum_phase_error(error_ph, ratio, static_offset=0.0):
    """Phase error seen by the single photons given the control-wavelength error."""
    return ratio * np.asarray(error_ph) + static_offset


def residual_to_visibility(phase_error_trace, v0):
    """Fringe visibility left after averaging over a residual phase trace."""
    if not 0.0 <= v0 <= 1.0:
        raise ValueError("v0 must be in [0, 1]")
    trace = np.asarray(phase_error_trace, dtype=float)
    if trace.size == 0:
        raise ValueError("empty trace")
    return v0 * float(np.mean(np.cos(trace)))


@dataclass(frozen=True)
class LockQuality:
    rms: float
    slip_fraction: float


def lock_quality(phase_error_trace):
    """RMS residual and fraction of samples beyond a quarter fringe (|err| > pi/2)."""
    trace = np.asarray(phase_error_trace, dtype=float)
    if trace.size == 0:
        raise ValueError("empty trace")
    return LockQuality(
        rms=float(np.sqrt(np.mean(trace ** 2))),
        slip_fraction=float(np.mean(np.abs(trace) > 0.5 * math.pi)),
    )
