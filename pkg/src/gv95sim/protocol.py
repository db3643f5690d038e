"""Orthogonal-state key distribution over the delayed Mach-Zehnder link.

Alice sends each photon as two wavepackets: mode b enters the channel at
the emission time, mode a a delay tau later (the spool at Alice). Bob delays
mode b by the same tau (the stretcher) so the packets meet again at his
output coupler. Because the two packets are never in the channel together,
an eavesdropper holding one of them learns nothing about the bit.

Timing model: emissions sit on the detector gate grid, and Bob's gate ``k``
is the one opened for an emission in slot ``k`` (the fixed transit time
is absorbed into the gate numbering).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .hardware import click_probability
from .optics import (
    DETECTOR_FOR_BIT,
    LinkParams,
    ModeAmplitudes,
    interfere,
    make_state,
)

__all__ = [
    "Emission",
    "WavepacketPair",
    "DetectionRecord",
    "EmissionLog",
    "DetectionLog",
    "SiftedKey",
    "schedule_emissions",
    "alice_emit",
    "bob_recombine",
    "check_security_condition",
    "sift",
    "arrival_gate",
]

BOTH = -1


@dataclass(frozen=True)
class Emission:
    bit: int
    t_emit: float
    n_photons: int
    state: ModeAmplitudes


@dataclass(frozen=True)
class WavepacketPair:
    """The two wavepackets of one pulse as they travel the long fiber.

    ``state`` carries the amplitudes (its squared norm is the survival
    probability booked so far); ``t_channel_*`` are the times each packet
    enters the channel.
    """

    t_channel_b: float
    t_channel_a: float
    state: ModeAmplitudes
    n_photons: int = 1
    bit: int = 0
    t_emit: float = 0.0

    @property
    def separation(self):
        return self.t_channel_a - self.t_channel_b


@dataclass(frozen=True)
class DetectionRecord:
    """One detector click. ``detector`` is ``-1`` for a double click."""

    t_click: float
    detector: int
    gate_index: int
    double_click: bool = False
    out_of_window: bool = False


@dataclass
class EmissionLog:
    """Alice's record, one row per emission slot (gate index)."""

    gate: np.ndarray
    bit: np.ndarray
    n_photons: np.ndarray
    gate_period: float = 2e-6

    def __post_init__(self):
        self.gate = np.asarray(self.gate, dtype=np.int64)
        self.bit = np.asarray(self.bit, dtype=np.int8)
        self.n_photons = np.asarray(self.n_photons, dtype=np.int64)
        if self.gate.size > 1 and np.any(np.diff(self.gate) <= 0):
            raise ValueError("emission slots must be strictly increasing")

    @property
    def t_emit(self):
        return self.gate * self.gate_period

    def __len__(self):
        return int(self.gate.size)

    @classmethod
    def from_emissions(cls, emissions, gate_period=2e-6):
        emissions = list(emissions)
        return cls(
            gate=[int(round(e.t_emit / gate_period)) for e in emissions],
            bit=[e.bit for e in emissions],
            n_photons=[e.n_photons for e in emissions],
            gate_period=gate_period,
        )

    def records(self):
        for g, b, n in zip(self.gate, self.bit, self.n_photons):
            yield Emission(int(b), float(g * self.gate_period), int(n), make_state(int(b)))


@dataclass
class DetectionLog:
    """Bob's clicks, one row per (gate, detector, window flag).

    ``source_gate`` is simulation ground truth (the emission slot the click
    came from, or its own gate for a dark count); sifting never reads it.
    """

    gate: np.ndarray
    detector: np.ndarray
    out_of_window: np.ndarray
    source_gate: np.ndarray | None = None
    gate_period: float = 2e-6

    def __post_init__(self):
        self.gate = np.asarray(self.gate, dtype=np.int64)
        self.detector = np.asarray(self.detector, dtype=np.int8)
        self.out_of_window = np.asarray(self.out_of_window, dtype=bool)
        if self.source_gate is None:
            self.source_gate = self.gate.copy()
        self.source_gate = np.asarray(self.source_gate, dtype=np.int64)

    def __len__(self):
        return int(self.gate.size)

    @property
    def t_click(self):
        return self.gate * self.gate_period

    def double_click_mask(self):
        """Rows whose gate also has an in-window click on the other detector."""
        inw = ~self.out_of_window
        g = self.gate[inw]
        uniq, counts = np.unique(g, return_counts=True)
        doubles = uniq[counts > 1]
        return inw & np.isin(self.gate, doubles)

    @classmethod
    def from_records(cls, records, gate_period=2e-6):
        gate, det, oow = [], [], []
        for r in records:
            dets = (0, 1) if r.double_click or r.detector == BOTH else (r.detector,)
            for d in dets:
                gate.append(r.gate_index)
                det.append(d)
                oow.append(r.out_of_window)
        order = np.lexsort((det, gate)) if gate else []
        return cls(gate=np.asarray(gate, dtype=np.int64)[order],
                   detector=np.asarray(det, dtype=np.int8)[order],
                   out_of_window=np.asarray(oow, dtype=bool)[order],
                   gate_period=gate_period)

    def records(self):
        dbl = self.double_click_mask()
        seen = set()
        for i in range(len(self)):
            g = int(self.gate[i])
            if dbl[i]:
                if g in seen:
                    continue
                seen.add(g)
                yield DetectionRecord(g * self.gate_period, BOTH, g, True, False)
            else:
                yield DetectionRecord(g * self.gate_period, int(self.detector[i]), g,
                                      False, bool(self.out_of_window[i]))


@dataclass
class SiftedKey:
    """Bob's decoded bits for the slots matched to Alice's emissions."""

    bits: np.ndarray
    alice_bits: np.ndarray
    gates: np.ndarray
    alarms: dict = field(default_factory=lambda: {"timing": 0, "double_click": 0,
                                                  "unmatched": 0})

    @property
    def error_positions(self):
        return np.flatnonzero(self.bits != self.alice_bits)

    @property
    def qber(self):
        return float(np.mean(self.bits != self.alice_bits)) if self.bits.size else math.nan

    @property
    def total_alarms(self):
        return sum(self.alarms.values())

    def __len__(self):
        return int(self.bits.size)


def schedule_emissions(mean_rate, duration, rng, gate_rate=None):
    """Poisson-process emission times on ``[0, duration)``.

    With ``gate_rate`` the times are snapped to the start of their gate
    slot and repeated slots are dropped (the source is only fired once per
    detection window). Returns a sorted float array.
    """
    if mean_rate <= 0:
        raise ValueError("mean_rate must be > 0")
    if duration <= 0:
        return np.zeros(0)
    n = rng.poisson(mean_rate * duration)
    t = np.sort(rng.uniform(0.0, duration, size=n))
    if gate_rate is None:
        return t
    slots = np.unique(np.floor(t * gate_rate).astype(np.int64))
    return slots / gate_rate


def arrival_gate(offset, det):
    """Gate shift and window flag for a packet arriving ``offset`` seconds
    away from its expected time. Anything later than one gate width misses
    the window."""
    if abs(offset) <= det.gate_width:
        return 0, False
    shift = math.ceil(offset / det.gate_period) if offset > 0 else \
        math.floor(offset / det.gate_period)
    return shift, True


def alice_emit(bit, t_emit, params=LinkParams(), n_photons=1, port_transmission=1.0):
    """Prepare the two wavepackets of one pulse.

    Losses between the interferometer input (where the mean photon number is
    set) and the channel are booked on the amplitudes: the input port's
    transmission and the coarse delay line. The arms are taken as
    loss-balanced, so the delay-line loss scales both modes.
    """
    budget = port_transmission * 10.0 ** (-params.delay_line_loss_db / 10.0)
    return WavepacketPair(
        t_channel_b=t_emit,
        t_channel_a=t_emit + params.tau,
        state=make_state(bit).scaled(budget),
        n_photons=n_photons,
        bit=bit,
        t_emit=t_emit,
    )


def _route(pair, params, phase_q, v_eff):
    """P(photon exits to D0) given the packets as they reach Bob's coupler."""
    st = pair.state
    both = abs(st.amp_a) > 0 and abs(st.amp_b) > 0
    # Bob delays mode b by tau
    aligned = abs(pair.separation - params.tau) <= params.coherence_time
    if both and aligned:
        return interfere(st.normalized(), phase_q, v_eff)[0]
    return 0.5


def bob_recombine(pair, phase_q, v_eff, det, rng, params=LinkParams(), efficiency=1.0):
    """Detect one pulse at Bob.

    ``det`` is the pair of detector models (D0, D1); ``efficiency`` is the
    per-photon transmission from the channel to a click (fiber, filters,
    detector). Photons of an intact, time-aligned pair interfere; a lone or
    misaligned packet splits 1/2 : 1/2. Returns a :class:`DetectionRecord`
    or ``None`` when nothing clicks.
    """
    p_survive = pair.state.norm2 * efficiency
    m = rng.binomial(pair.n_photons, min(p_survive, 1.0)) if pair.n_photons else 0
    k0 = rng.binomial(m, _route(pair, params, phase_q, v_eff)) if m else 0
    k = [k0, m - k0]
    for i, d in enumerate(det):
        if d.efficiency < 1.0 and k[i]:
            k[i] = rng.binomial(k[i], d.efficiency)
    hits = (k[0] > 0, k[1] > 0)

    gate0 = int(round(pair.t_emit / det[0].gate_period))
    expected = pair.t_emit + params.tau
    actual = pair.t_channel_a if abs(pair.state.amp_a) > 0 else pair.t_channel_b + params.tau
    shift, late = arrival_gate(actual - expected, det[0])
    if late and any(hits):
        fired = hits
    else:
        late, shift = False, 0
        fired = tuple(
            bool(rng.random() < click_probability(float(h), d.dark_prob_per_gate))
            for h, d in zip(hits, det)
        )
    if not any(fired):
        return None
    gate = gate0 + shift
    t = gate * det[0].gate_period
    if all(fired):
        return DetectionRecord(t, BOTH, gate, double_click=True, out_of_window=late)
    return DetectionRecord(t, 0 if fired[0] else 1, gate, out_of_window=late)


def check_security_condition(tau, coherence_time, gate_width, emission_jitter):
    """True when the packet delay exceeds every timing uncertainty."""
    for name, v in (("tau", tau), ("coherence_time", coherence_time),
                    ("gate_width", gate_width), ("emission_jitter", emission_jitter)):
        if v < 0:
            raise ValueError(f"{name} must be >= 0")
    return tau > max(coherence_time, gate_width, emission_jitter)


def sift(alice_log, bob_log):
    """Match Bob's clicks to Alice's emissions by gate slot.

    Single in-window clicks become key bits (D0 -> 0, D1 -> 1). Each
    out-of-window click is a timing alarm, each double-click gate a
    double-click alarm, and an in-window click with no emission in its slot
    an unmatched alarm.
    """
    if not isinstance(alice_log, EmissionLog):
        alice_log = EmissionLog.from_emissions(alice_log)
    if not isinstance(bob_log, DetectionLog):
        bob_log = DetectionLog.from_records(bob_log, gate_period=alice_log.gate_period)

    dbl = bob_log.double_click_mask()
    oow = bob_log.out_of_window
    single = ~oow & ~dbl
    alarms = {
        "timing": int(oow.sum()),
        "double_click": int(np.unique(bob_log.gate[dbl]).size),
        "unmatched": 0,
    }
    gates = bob_log.gate[single]
    dets = bob_log.detector[single]
    pos = np.searchsorted(alice_log.gate, gates)
    pos_c = np.minimum(pos, max(len(alice_log) - 1, 0))
    matched = (pos < len(alice_log)) & (alice_log.gate[pos_c] == gates) if len(alice_log) \
        else np.zeros(gates.size, dtype=bool)
    alarms["unmatched"] = int((~matched).sum())
    decode = np.asarray(DETECTOR_FOR_BIT).argsort()  # detector -> bit
    return SiftedKey(
        bits=decode[dets[matched]].astype(np.int8),
        alice_bits=alice_log.bit[pos_c[matched]],
        gates=gates[matched],
        alarms=alarms,
    )
