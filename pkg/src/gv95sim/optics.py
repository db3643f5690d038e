"""Two-mode optics: orthogonal-state encoding, Mach-Zehnder output law,
photon-number statistics and fiber propagation delays.

Conventions used throughout the package:

* mode ``a`` is the arm delayed at Alice (40 m spool), mode ``b`` the arm
  delayed at Bob (the piezo stretcher);
* at zero phase error the bit-0 state exits towards detector D0 and the
  bit-1 state towards D1 (``DETECTOR_FOR_BIT``).
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "C0",
    "DETECTOR_FOR_BIT",
    "ModeAmplitudes",
    "LinkParams",
    "make_state",
    "interfere",
    "sample_photon_count",
    "fiber_delay",
    "wavelength_phase_ratio",
    "multiphoton_fraction",
]

#: speed of light in vacuum, m/s
C0 = 299_792_458.0

#: detector that fires for each bit at zero phase error
DETECTOR_FOR_BIT = (0, 1)

_NORM_TOL = 1e-9


@dataclass(frozen=True)
class ModeAmplitudes:
    """Complex amplitudes of a single photon over spatial modes a and b.

    The squared norm is the photon's survival probability so far; it is 1
    for a freshly prepared state and drops below 1 as losses are booked.
    """

    amp_a: complex
    amp_b: complex

    def __post_init__(self):
        if self.norm2 > 1.0 + _NORM_TOL:
            raise ValueError(f"|amp_a|^2 + |amp_b|^2 = {self.norm2} exceeds 1")

    @property
    def norm2(self):
        return abs(self.amp_a) ** 2 + abs(self.amp_b) ** 2

    def scaled(self, transmission):
        """Book a power transmission common to both modes."""
        s = math.sqrt(transmission)
        return ModeAmplitudes(self.amp_a * s, self.amp_b * s)

    def normalized(self):
        n = math.sqrt(self.norm2)
        if n == 0.0:
            raise ValueError("cannot normalize the vacuum")
        return ModeAmplitudes(self.amp_a / n, self.amp_b / n)

    def inner(self, other):
        """<self|other>."""
        return self.amp_a.conjugate() * other.amp_a + self.amp_b.conjugate() * other.amp_b


@dataclass(frozen=True)
class LinkParams:
    """Physical constants of the link. Lengths in metres, losses in dB.

    ``alignment_visibility`` is the intrinsic fringe visibility per sent
    state (polarisation and mode-overlap imperfections folded into one
    number). ``signal_rate`` is the calibrated photon-click rate at the
    correct detector per state (counts/s, dark counts excluded); ``None``
    means "calibrate from the reference visibilities", see
    :func:`gv95sim.analysis.calibrate_signal_rates`.
    """

    lambda_q: float = 1546.12e-9
    lambda_ph: float = 1547.72e-9
    coh_len_q: float = 6.4
    coh_len_ph_min: float = 50.0
    mu: float = 0.1
    group_index: float = 1.44
    tau_len: float = 40.0
    fiber_len: float = 1000.0
    dwdm_loss_db: float = 1.6
    delay_line_loss_db: float = 3.0
    alignment_visibility: tuple = (0.978, 0.989)
    signal_rate: tuple | None = None
    # quantum-channel phase offset left when the classical channel is locked
    static_phase_offset: float = 0.0
    # residual per-gate background click probability leaking from the control channel
    residual_background: float = 0.0

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))

    def problems(self):
        out = []
        for name in ("lambda_q", "lambda_ph", "coh_len_q", "coh_len_ph_min",
                     "group_index", "tau_len", "fiber_len"):
            if not getattr(self, name) > 0:
                out.append(f"{name}: must be > 0")
        if not self.mu >= 0:
            out.append("mu: must be >= 0")
        for name in ("dwdm_loss_db", "delay_line_loss_db"):
            if not getattr(self, name) >= 0:
                out.append(f"{name}: must be >= 0")
        if len(self.alignment_visibility) != 2 or not all(
                0.0 <= v <= 1.0 for v in self.alignment_visibility):
            out.append("alignment_visibility: need two values in [0, 1]")
        if self.signal_rate is not None:
            if len(self.signal_rate) != 2 or not all(r >= 0 for r in self.signal_rate):
                out.append("signal_rate: need two values >= 0")
        if not 0.0 <= self.residual_background <= 1.0:
            out.append("residual_background: must be in [0, 1]")
        return out

    @property
    def tau(self):
        """Wavepacket separation in seconds."""
        return fiber_delay(self.tau_len, self.group_index)

    @property
    def coherence_time(self):
        return fiber_delay(self.coh_len_q, self.group_index)

    @property
    def phase_ratio(self):
        return wavelength_phase_ratio(self.lambda_ph, self.lambda_q)


def make_state(bit):
    """Encoding of ``bit``: (|a> + |b>)/sqrt2 for 0, (|a> - |b>)/sqrt2 for 1."""
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    h = 1.0 / math.sqrt(2.0)
    return ModeAmplitudes(complex(h), complex(h if bit == 0 else -h))


def interfere(state, phase_err, v_eff):
    """Output probabilities ``(p_d0, p_d1)`` of Bob's recombining coupler.

    ``state`` must be normalized; ``v_eff`` scales the interference term
    (partial coherence / misalignment). For the encoded states this reduces
    to ``p_correct = (1 + v_eff cos(phase_err)) / 2``. A photon localized in
    one mode gives (1/2, 1/2) whatever the phase.
    """
    if not 0.0 <= v_eff <= 1.0:
        raise ValueError(f"v_eff must be in [0, 1], got {v_eff}")
    if abs(state.norm2 - 1.0) > 1e-6:
        raise ValueError(f"state is not normalized (norm^2 = {state.norm2})")
    cross = (state.amp_a.conjugate() * state.amp_b * cmath.exp(1j * phase_err)).real
    p_d0 = 0.5 * state.norm2 + v_eff * cross
    p_d0 = min(1.0, max(0.0, p_d0))
    return p_d0, 1.0 - p_d0


def sample_photon_count(mu, rng, size=None):
    """Photon number of an attenuated coherent pulse (Poisson, mean ``mu``)."""
    if mu < 0:
        raise ValueError("mu must be >= 0")
    return rng.poisson(mu, size=size)


def multiphoton_fraction(mu):
    """P(n >= 2 | n >= 1) for a Poisson source of mean ``mu``."""
    if mu <= 0:
        return 0.0
    return 1.0 - mu * math.exp(-mu) / -math.expm1(-mu)


def fiber_delay(length, group_index=1.44):
    """Propagation time (s) through ``length`` metres of fiber."""
    if np.any(np.asarray(length) < 0):
        raise ValueError("length must be >= 0")
    return group_index * length / C0


def wavelength_phase_ratio(lambda_ph, lambda_q):
    """Phase at ``lambda_q`` per radian of phase at ``lambda_ph`` for a common
    path-length change (phase scales as 1/wavelength)."""
    if lambda_ph <= 0 or lambda_q <= 0:
        raise ValueError("wavelengths must be > 0")
    return lambda_ph / lambda_q
