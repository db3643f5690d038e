"""Eavesdropper models against the time-separated wavepacket scheme.

``intercept_first``
    Eve measures whether the photon is in the mode-b packet, the only one in
    the channel at that moment. Both encoded states put half the probability
    there, so she learns nothing, but the superposition is gone and Bob's
    coupler splits the photon 1/2 : 1/2.

``store_both``
    Eve holds the b packet until the a packet arrives, interferes them
    (learning the bit exactly), and re-sends the right state. Nothing is
    flipped, but everything she forwards is late by her storage time, which
    Bob sees as clicks outside the detection window.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .optics import DETECTOR_FOR_BIT, ModeAmplitudes, make_state
from .protocol import arrival_gate

__all__ = [
    "AttackConfig",
    "AttackReport",
    "apply_intercept_first",
    "apply_store_both",
    "attack_vectors",
    "attack_report",
]

KINDS = ("none", "intercept_first", "store_both")
RESEND = ("collapsed", "localized_b", "localized_a", "random_guess_state")


@dataclass(frozen=True)
class AttackConfig:
    """``storage_delay=None`` means "exactly the packet separation tau".

    ``resend_strategy`` picks what Eve forwards after an intercept:
    the collapsed packet as found, a packet always in b or always in a, or
    a freshly prepared state for a random bit. ``destructive`` makes the
    presence measurement absorb the pulse and regenerate a single photon.
    """

    kind: str = "none"
    attack_fraction: float = 0.0
    storage_delay: float | None = None
    resend_strategy: str = "collapsed"
    destructive: bool = False

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))

    def problems(self, tau=None):
        out = []
        if self.kind not in KINDS:
            out.append(f"kind: must be one of {', '.join(KINDS)}")
        if not 0.0 <= self.attack_fraction <= 1.0:
            out.append("attack_fraction: must be in [0, 1]")
        if self.resend_strategy not in RESEND:
            out.append(f"resend_strategy: must be one of {', '.join(RESEND)}")
        if self.storage_delay is not None:
            if self.storage_delay < 0:
                out.append("storage_delay: must be >= 0")
            elif tau is not None and self.kind == "store_both" and self.storage_delay < tau:
                out.append("storage_delay: must be >= tau for store_both")
        return out

    def delay(self, tau):
        return tau if self.storage_delay is None else self.storage_delay


def _localized(norm2, mode):
    amp = complex(math.sqrt(norm2))
    return ModeAmplitudes(amp, 0j) if mode == "a" else ModeAmplitudes(0j, amp)


def apply_intercept_first(pair, cfg, rng):
    """Presence measurement on the mode-b packet. Returns ``(pair, "none")``;
    Eve never gains bit information."""
    if cfg.kind != "intercept_first":
        raise ValueError("config is not an intercept_first attack")
    if rng.random() >= cfg.attack_fraction:
        return pair, "none"
    st = pair.state
    norm2 = st.norm2
    if norm2 == 0:
        return pair, "none"
    found_b = rng.random() < abs(st.amp_b) ** 2 / norm2
    strategy = cfg.resend_strategy
    if strategy == "collapsed":
        new_state = _localized(norm2, "b" if found_b else "a")
    elif strategy == "localized_b":
        new_state = _localized(norm2, "b")
    elif strategy == "localized_a":
        new_state = _localized(norm2, "a")
    else:
        new_state = make_state(int(rng.integers(2))).scaled(norm2)
    n = min(pair.n_photons, 1) if cfg.destructive else pair.n_photons
    return replace(pair, state=new_state, n_photons=n), "none"


def apply_store_both(pair, cfg, rng, tau=None):
    """Hold both packets, read the bit, forward a fresh copy late.

    Returns ``(pair, knowledge, delay_added)`` with knowledge ``"full"`` for
    an attacked pulse and ``"none"`` otherwise.
    """
    if cfg.kind != "store_both":
        raise ValueError("config is not a store_both attack")
    tau = pair.separation if tau is None else tau
    delay = cfg.delay(tau)
    if delay < tau:
        raise ValueError("storage_delay must be >= tau")
    if rng.random() >= cfg.attack_fraction:
        return pair, "none", 0.0
    fresh = make_state(pair.bit).scaled(pair.state.norm2)
    return replace(pair, state=fresh, t_channel_b=pair.t_channel_b + delay,
                   t_channel_a=pair.t_channel_a + delay), "full", delay


@dataclass
class AttackVectors:
    attacked: np.ndarray
    p_d0: np.ndarray
    n_photons: np.ndarray
    gate_shift: int
    out_of_window: bool
    eve_knows: np.ndarray


def attack_vectors(cfg, bits, n_photons, p_d0_by_bit, rng, det, tau):
    """Array form of the attacks for the per-gate engine.

    ``p_d0_by_bit`` holds the undisturbed D0 probability each emission would
    have if it carried bit 0 and bit 1 (shape ``(2, k)``).
    """
    k = bits.size
    intact = np.where(bits == 0, p_d0_by_bit[0], p_d0_by_bit[1])
    if cfg.kind == "none" or cfg.attack_fraction == 0.0 or k == 0:
        return AttackVectors(np.zeros(k, bool), intact, n_photons, 0, False,
                             np.zeros(k, bool))
    attacked = rng.random(k) < cfg.attack_fraction
    p = intact.copy()
    n = n_photons.copy()
    if cfg.kind == "intercept_first":
        if cfg.resend_strategy == "random_guess_state":
            guess = rng.integers(0, 2, k)
            p[attacked] = np.where(guess == 0, p_d0_by_bit[0], p_d0_by_bit[1])[attacked]
        else:
            # every branch forwards a localized packet
            p[attacked] = 0.5
        if cfg.destructive:
            n[attacked] = np.minimum(n[attacked], 1)
        return AttackVectors(attacked, p, n, 0, False, np.zeros(k, bool))
    shift, late = arrival_gate(cfg.delay(tau), det)
    return AttackVectors(attacked, p, n, shift, late, attacked.copy())


@dataclass(frozen=True)
class AttackReport:
    """Figures of merit of an attacked session.

    ``induced_qber`` and ``eve_info_bits_per_sifted_bit`` are computed over
    every single click Bob could decode if he ignored arrival times, so a
    delay attack's effect on the error rate is visible even though the
    late clicks themselves get rejected by sifting. ``alarm_rate`` counts
    timing alarms per second.
    """

    kind: str
    eve_info_bits_per_sifted_bit: float
    eve_info_sigma: float
    induced_qber: float
    induced_qber_sigma: float
    alarm_rate: float
    alarm_rate_sigma: float
    click_rate: float
    attacked_click_rate: float
    sifted_qber: float
    n_decoded: int


def attack_report(result):
    """Summarise a session run (``session.SessionResult``) with its attack."""
    if result.bob_log is None:
        raise ValueError("attack_report needs a per-gate session")
    alice, bob, duration = result.alice_log, result.bob_log, result.config.duration
    single = ~bob.double_click_mask()
    src = bob.source_gate[single]
    dets = bob.detector[single]
    pos = np.searchsorted(alice.gate, src)
    pos_c = np.minimum(pos, max(len(alice) - 1, 0))
    has = (pos < len(alice)) & (alice.gate[pos_c] == src) if len(alice) else \
        np.zeros(src.size, bool)
    decode = np.asarray(DETECTOR_FOR_BIT).argsort()
    decoded_bits = decode[dets[has]]
    true_bits = alice.bit[pos_c[has]]
    n = int(has.sum())

    eve = result.eve_log
    known = np.isin(src[has], eve["gate"][eve["knows"]]) if eve is not None else \
        np.zeros(n, bool)
    attacked = np.isin(src[has], eve["gate"]) if eve is not None else np.zeros(n, bool)

    errors = int(np.sum(decoded_bits != true_bits))
    qb = errors / n if n else math.nan
    info = float(known.mean()) if n else math.nan

    def binom_sigma(p, n):
        return math.sqrt(p * (1 - p) / n) if n and not math.isnan(p) else math.nan

    alarms = int((bob.out_of_window).sum())
    kind = result.config.attack.kind
    return AttackReport(
        kind=kind,
        eve_info_bits_per_sifted_bit=info,
        eve_info_sigma=binom_sigma(info, n),
        induced_qber=qb,
        induced_qber_sigma=binom_sigma(qb, n),
        alarm_rate=alarms / duration,
        alarm_rate_sigma=math.sqrt(max(alarms, 1)) / duration,
        click_rate=n / duration,
        attacked_click_rate=float(attacked.sum()) / duration,
        sifted_qber=result.key.qber if result.key is not None else math.nan,
        n_decoded=n,
    )
