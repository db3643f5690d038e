"""Device models: interferometer phase drift, piezo fiber stretcher, lossy
components, gated InGaAs detectors and the classical monitor photodiode."""

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "PhaseState",
    "DetectorParams",
    "REFERENCE_DETECTORS",
    "drift_step",
    "stretcher_apply",
    "attenuate",
    "gated_click",
    "click_probability",
    "classical_pd_power",
    "wrap_phase",
]

TWO_PI = 2.0 * math.pi


def wrap_phase(phi):
    """Map a phase (scalar or array) onto (-pi, pi]."""
    w = np.remainder(np.asarray(phi) + math.pi, TWO_PI) - math.pi
    w = np.where(w == -math.pi, math.pi, w)
    return float(w) if np.ndim(w) == 0 else w


@dataclass(frozen=True)
class PhaseState:
    """Interferometer phase seen by the control laser.

    ``phi_ph`` is unwrapped and already includes the stretcher contribution
    ``stretcher_offset``; drift is a Wiener process of strength
    ``drift_sigma`` (rad/sqrt(s)) plus an optional linear ``ramp`` (rad/s).
    ``rewound`` reports whether the last stretcher command saturated.
    """

    phi_ph: float = 0.0
    drift_sigma: float = 0.0
    stretcher_offset: float = 0.0
    stretcher_range: float = 60.0 * math.pi
    ramp: float = 0.0
    rewound: bool = False

    def __post_init__(self):
        if self.stretcher_range <= 0:
            raise ValueError("stretcher_range must be > 0")
        if abs(self.stretcher_offset) > self.stretcher_range:
            raise ValueError("|stretcher_offset| exceeds stretcher_range")

    @property
    def wrapped(self):
        return wrap_phase(self.phi_ph)


@dataclass(frozen=True)
class DetectorParams:
    """Gated single-photon counter. ``efficiency`` defaults to 1 because the
    end-to-end detection efficiency is folded into the link calibration."""

    gate_rate: float = 500e3
    gate_width: float = 2.5e-9
    dark_prob_per_gate: float = 1.4e-5
    efficiency: float = 1.0

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))

    def problems(self):
        out = []
        if not self.gate_rate > 0:
            out.append("gate_rate: must be > 0")
        if not self.gate_width > 0:
            out.append("gate_width: must be > 0")
        elif self.gate_rate > 0 and self.gate_rate * self.gate_width >= 1:
            out.append("gate_width: gates overlap (gate_rate * gate_width >= 1)")
        for name in ("dark_prob_per_gate", "efficiency"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                out.append(f"{name}: must be in [0, 1]")
        return out

    @property
    def gate_period(self):
        return 1.0 / self.gate_rate

    @property
    def dark_rate(self):
        """Dark counts per second when every gate is armed."""
        return self.gate_rate * self.dark_prob_per_gate


REFERENCE_DETECTORS = (
    DetectorParams(dark_prob_per_gate=1.4e-5),
    DetectorParams(dark_prob_per_gate=3.87e-5),
)


def drift_step(phase, dt, rng):
    """Advance the phase by one Wiener increment of std ``drift_sigma*sqrt(dt)``
    plus ``ramp*dt``."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    step = phase.ramp * dt
    if phase.drift_sigma > 0:
        step += phase.drift_sigma * math.sqrt(dt) * rng.standard_normal()
    return replace(phase, phi_ph=phase.phi_ph + step)


def _rewind(offset, limit):
    # smallest multiple of 2*pi that brings |offset| back to half the range
    excess = abs(offset) - 0.5 * limit
    m = max(1, math.ceil(excess / TWO_PI))
    return offset - math.copysign(m * TWO_PI, offset)


def stretcher_apply(phase, command):
    """Move the stretcher by ``command`` radians.

    If the requested offset would leave ``[-range, range]`` the stretcher is
    rewound by the smallest multiple of 2*pi that restores half of its
    travel as headroom, and ``rewound`` is set. The interferometer phase is
    unchanged modulo 2*pi by a rewind.
    """
    if command == 0:
        return replace(phase, rewound=False)
    target = phase.stretcher_offset + command
    rewound = abs(target) > phase.stretcher_range
    if rewound:
        target = _rewind(target, phase.stretcher_range)
    return replace(
        phase,
        phi_ph=phase.phi_ph + (target - phase.stretcher_offset),
        stretcher_offset=target,
        rewound=rewound,
    )


def attenuate(transmission_budget, loss_db):
    """Apply an insertion loss in dB to a power transmission budget."""
    if not 0.0 <= transmission_budget <= 1.0:
        raise ValueError("transmission_budget must be in [0, 1]")
    if loss_db < 0:
        raise ValueError("loss_db must be >= 0")
    return transmission_budget * 10.0 ** (-loss_db / 10.0)


def click_probability(p_signal, dark_prob):
    """Probability that a gate fires given independent signal and dark causes."""
    return 1.0 - (1.0 - dark_prob) * (1.0 - p_signal)


def gated_click(p_signal, det, rng):
    """Sample one detector gate."""
    if not 0.0 <= p_signal <= 1.0:
        raise ValueError("p_signal must be in [0, 1]")
    return bool(rng.random() < click_probability(p_signal, det.dark_prob_per_gate))


def classical_pd_power(p_in, phase_ph, v_classical):
    """Monitor-port power of the control laser fringe."""
    if p_in < 0:
        raise ValueError("p_in must be >= 0")
    if not 0.0 <= v_classical <= 1.0:
        raise ValueError("v_classical must be in [0, 1]")
    return p_in * 0.5 * (1.0 + v_classical * np.cos(phase_ph))
