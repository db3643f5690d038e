"""One protocol session on a single simulation clock.

The phase lock runs first (drift, monitor photodiode, controller and
stretcher at the loop rate), producing the quantum-channel phase error for
every loop period. Photon transport and detection then run on the gate grid
with one of two engines:

``per_gate``
    Event mode. Every gate is sampled: photon numbers, losses, routing at
    Bob's coupler, dark counts, attacks and arrival times. Produces Alice's
    and Bob's logs and the sifted key.
``binned_rate``
    Closed-form click probability per gate for each loop period, then
    binomial counts per period summed into bins. Same count distribution
    as the event engine, no per-event records.

Random streams are split per subsystem (see :mod:`gv95sim.rng`), so both
engines see the very same phase trace for a given seed.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import REFERENCE_VISIBILITY, bins_from_counts, calibrate_signal_rates, run_stats
from .attacks import attack_vectors
from .hardware import PhaseState, attenuate
from .optics import DETECTOR_FOR_BIT, multiphoton_fraction
from .protocol import DetectionLog, EmissionLog, schedule_emissions, sift
from .rng import substream
from .stabilization import (
    PerturbObserve,
    lock_quality,
    quantum_phase_error,
    simulate_lock,
)

__all__ = ["LinkBudget", "link_budget", "SessionResult", "run_session", "phase_trace"]


@dataclass(frozen=True)
class LinkBudget:
    """Per-photon transmission from the interferometer input to a click.

    ``eta[b]`` is the end-to-end value for a pulse sent in state ``b``; it
    factors as ``port_transmission[b] * delay_line * bob_efficiency``.
    """

    eta: tuple
    signal_rate: tuple
    port_transmission: tuple
    delay_line: float
    bob_efficiency: float


def link_budget(cfg):
    """Resolve the end-to-end transmission from the calibrated signal rates."""
    link, det = cfg.link, cfg.detectors
    gate_rate = det[0].gate_rate
    if link.signal_rate is None:
        dark = [d.dark_rate for d in det]
        rates = []
        for b in (0, 1):
            right = DETECTOR_FOR_BIT[b]
            v_raw, v_net = REFERENCE_VISIBILITY[b]
            rates.append(calibrate_signal_rates(v_raw, v_net, dark[right], dark[1 - right])[0])
        rates = tuple(rates)
    else:
        rates = tuple(link.signal_rate)
    eta = []
    for b in (0, 1):
        p_right = 0.5 * (1.0 + link.alignment_visibility[b])
        eff = det[DETECTOR_FOR_BIT[b]].efficiency
        if link.mu == 0 or rates[b] == 0:
            eta.append(0.0)
            continue
        e = -math.log1p(-rates[b] / gate_rate) / (link.mu * p_right * eff)
        if e > 1.0:
            raise ValueError(f"signal rate {rates[b]:.1f}/s is out of reach at mu={link.mu}")
        eta.append(e)
    top = max(eta) if max(eta) > 0 else 1.0
    delay_line = attenuate(1.0, link.delay_line_loss_db)
    return LinkBudget(
        eta=tuple(eta),
        signal_rate=rates,
        port_transmission=tuple(e / top for e in eta),
        delay_line=delay_line,
        bob_efficiency=min(1.0, top / delay_line),
    )


def phase_trace(cfg, seed=None):
    """Closed-loop lock simulation; returns ``(LockTrace, quantum phase error)``."""
    seed = cfg.seed if seed is None else seed
    lk = cfg.lock
    dt = 1.0 / lk.loop_rate
    n_steps = int(round(cfg.duration * lk.loop_rate))
    # control laser passes the multiplexer at Alice and the demultiplexer at Bob
    p_pd = lk.control_power * attenuate(1.0, 2 * cfg.link.dwdm_loss_db)
    ctrl = None
    lock_phase = math.pi if lk.setpoint == "minimize" else 0.0
    if lk.enabled:
        ctrl = PerturbObserve(dither_step=lk.dither_step, loop_rate=lk.loop_rate,
                              setpoint=lk.setpoint, p_ref=p_pd, v_ref=lk.v_classical,
                              lock_threshold=lk.lock_threshold)
    start = PhaseState(phi_ph=lock_phase + cfg.drift.initial_error,
                       drift_sigma=cfg.drift.sigma, stretcher_range=lk.stretcher_range,
                       ramp=cfg.drift.ramp)
    trace = simulate_lock(start, n_steps, dt, ctrl, p_in=p_pd, v_classical=lk.v_classical,
                          pd_noise=lk.pd_noise, rng_drift=substream(seed, "drift"),
                          rng_pd=substream(seed, "pd-noise"), lock_phase=lock_phase)
    e_q = quantum_phase_error(trace.error_ph, cfg.link.phase_ratio,
                              cfg.link.static_phase_offset)
    return trace, e_q


@dataclass
class SessionResult:
    config: object
    bins: list
    stats: object
    budget: LinkBudget
    lock_rms: float
    lock_slip_fraction: float
    mean_cos: float
    rewinds: int
    key: object = None
    alice_log: EmissionLog | None = None
    bob_log: DetectionLog | None = None
    eve_log: dict | None = None
    phase_error: np.ndarray | None = field(default=None, repr=False)
    n_emissions: int = 0

    def summary(self):
        """Flat ``key -> value`` view used for stats files and sweeps."""
        out = {
            "scenario": self.config.name,
            "engine": self.config.engine,
            "seed": self.config.seed,
            "duration_s": self.config.duration,
            "total_bins": self.stats.total_bins,
            "dark_rate_d0_per_s": self.stats.dark_rates[0],
            "dark_rate_d1_per_s": self.stats.dark_rates[1],
            "signal_rate_state0_per_s": self.budget.signal_rate[0],
            "signal_rate_state1_per_s": self.budget.signal_rate[1],
            "eta_state0": self.budget.eta[0],
            "eta_state1": self.budget.eta[1],
            "multiphoton_fraction": multiphoton_fraction(self.config.link.mu),
        }
        for b, s in sorted(self.stats.per_state.items()):
            out[f"state{b}_bins"] = s.n_bins
            out[f"state{b}_counts_right"] = s.counts_right
            out[f"state{b}_counts_wrong"] = s.counts_wrong
            for name in ("v_raw", "v_net", "qber_raw"):
                m = getattr(s, name)
                out[f"state{b}_{name}"] = m.value
                out[f"state{b}_{name}_sigma"] = m.sigma
                out[f"state{b}_{name}_bin_std"] = m.bin_std
        out["qber_dark_equalized"] = self.stats.qber_dark_equalized.value
        out["qber_dark_equalized_sigma"] = self.stats.qber_dark_equalized.sigma
        out["lock_rms_rad"] = self.lock_rms
        out["lock_slip_fraction"] = self.lock_slip_fraction
        out["lock_mean_cos"] = self.mean_cos
        out["stretcher_rewinds"] = self.rewinds
        if self.key is not None:
            out["emissions"] = self.n_emissions
            out["sifted_bits"] = len(self.key)
            out["sifted_errors"] = int(self.key.error_positions.size)
            out["sifted_qber"] = self.key.qber
            for k, v in self.key.alarms.items():
                out[f"alarms_{k}"] = v
        return out


def _gate_states(cfg, gates):
    """Sent state per gate index from the switch schedule."""
    gate_rate = cfg.detectors[0].gate_rate
    toggle_gates = np.round(np.asarray(cfg.toggles) * gate_rate).astype(np.int64)
    flips = np.searchsorted(toggle_gates, gates, side="right")
    return (cfg.initial_state + flips) % 2


def _bin_annotations(cfg, e_q):
    n_bins = cfg.n_bins
    per_bin = e_q.reshape(n_bins, -1)
    rms = np.sqrt(np.mean(per_bin ** 2, axis=1))
    if cfg.bits == "random":
        return np.full(n_bins, -1), rms
    starts = np.arange(n_bins) * cfg.bin_width
    states = (cfg.initial_state + np.searchsorted(cfg.toggles, starts, side="right")) % 2
    for t in cfg.toggles:
        k = int(math.floor(t / cfg.bin_width))
        if not math.isclose(t, k * cfg.bin_width, abs_tol=1e-9) and k < n_bins:
            states[k] = -1
    return states, rms


def _p_d0(e, v_b, bit):
    p_right = 0.5 * (1.0 + v_b * np.cos(e))
    return p_right if DETECTOR_FOR_BIT[bit] == 0 else 1.0 - p_right


def _run_per_gate(cfg, seed, e_q, budget):
    link, det = cfg.link, cfg.detectors
    gate_rate = det[0].gate_rate
    gpb = int(round(cfg.bin_width * gate_rate))
    spb = int(round(cfg.bin_width * cfg.lock.loop_rate))
    n_bins = cfg.n_bins
    tau = link.tau
    rng_src = substream(seed, "source")
    rng_bits = substream(seed, "bits")
    rng_ch = substream(seed, "channel")
    rng_dark = substream(seed, "dark")
    rng_eve = substream(seed, "eve")
    dark_p = [1.0 - (1.0 - d.dark_prob_per_gate) * (1.0 - link.residual_background)
              for d in det]
    eff = np.array([d.efficiency for d in det])
    eta = np.asarray(budget.eta)
    v = np.asarray(link.alignment_visibility)

    rec_gate, rec_det, rec_oow, rec_src = [], [], [], []
    al_gate, al_bit, al_n = [], [], []
    eve_gate, eve_knows = [], []
    counts = np.zeros((2, n_bins + 1), dtype=np.int64)
    n_emissions = 0

    for k in range(n_bins):
        g0 = k * gpb
        if cfg.emission == "per_gate":
            n_tot = rng_src.poisson(link.mu * gpb)
            slots, n_ph = np.unique(rng_src.integers(0, gpb, n_tot), return_counts=True)
            em_gates = None
            n_emissions += gpb
        else:
            t = schedule_emissions(cfg.emission_rate, cfg.bin_width, rng_src, gate_rate)
            em_gates = np.round(t * gate_rate).astype(np.int64)
            n_all = rng_src.poisson(link.mu, em_gates.size)
            keep = n_all > 0
            slots, n_ph = em_gates[keep], n_all[keep]
            n_emissions += em_gates.size
        if cfg.bits == "random":
            bits_bin = rng_bits.integers(0, 2, gpb, dtype=np.int8)
            bit_of = lambda g: bits_bin[g]  # noqa: E731
        else:
            bit_of = lambda g: _gate_states(cfg, g + g0).astype(np.int8)  # noqa: E731

        bits = bit_of(slots)
        steps = k * spb + (slots * spb) // gpb
        e = e_q[steps]
        p_by_bit = np.stack([_p_d0(e, v[0], 0), _p_d0(e, v[1], 1)])
        av = attack_vectors(cfg.attack, bits, n_ph, p_by_bit, rng_eve, det[0], tau)
        m = rng_ch.binomial(av.n_photons, eta[bits])
        k0 = rng_ch.binomial(m, av.p_d0)
        hits = [k0, m - k0]
        sig_g, sig_d, sig_o, sig_s = [], [], [], []
        for i in (0, 1):
            ki = hits[i] if eff[i] >= 1.0 else rng_ch.binomial(hits[i], eff[i])
            fired = ki > 0
            late = fired & av.attacked & av.out_of_window
            sig_g.append(slots[fired] + np.where(late[fired], av.gate_shift, 0))
            sig_d.append(np.full(int(fired.sum()), i, dtype=np.int8))
            sig_o.append(late[fired])
            sig_s.append(slots[fired])
        for i in (0, 1):
            n_dark = rng_dark.binomial(gpb, dark_p[i])
            dg = np.sort(rng_dark.choice(gpb, n_dark, replace=False)) if n_dark else \
                np.zeros(0, np.int64)
            sig_g.append(dg)
            sig_d.append(np.full(n_dark, i, dtype=np.int8))
            sig_o.append(np.zeros(n_dark, bool))
            sig_s.append(dg)
        g_all = np.concatenate(sig_g) + g0
        d_all = np.concatenate(sig_d)
        o_all = np.concatenate(sig_o)
        s_all = np.concatenate(sig_s) + g0
        # one record per (gate, detector, window flag); signal rows come first
        key = (g_all * 2 + d_all) * 2 + o_all
        _, first = np.unique(key, return_index=True)
        g_all, d_all, o_all, s_all = g_all[first], d_all[first], o_all[first], s_all[first]
        rec_gate.append(g_all)
        rec_det.append(d_all)
        rec_oow.append(o_all)
        rec_src.append(s_all)
        b_idx = np.minimum(g_all // gpb, n_bins)
        for i in (0, 1):
            counts[i] += np.bincount(b_idx[d_all == i], minlength=n_bins + 1)[: n_bins + 1]

        # Alice's entries for every slot a click points at
        need = np.unique(np.concatenate([g_all, s_all]))
        need = need[(need >= g0) & (need < g0 + gpb)] - g0
        if em_gates is not None:
            need = need[np.isin(need, em_gates)]
        pos = np.searchsorted(slots, need)
        pos_c = np.minimum(pos, max(slots.size - 1, 0))
        has_ph = (pos < slots.size) & (slots[pos_c] == need) if slots.size else \
            np.zeros(need.size, bool)
        al_gate.append(need + g0)
        al_bit.append(bit_of(need))
        al_n.append(np.where(has_ph, n_ph[pos_c], 0) if slots.size else np.zeros(need.size))
        if av.attacked.any():
            eve_gate.append(slots[av.attacked] + g0)
            eve_knows.append(av.eve_knows[av.attacked])

    def cat(parts, dtype):
        return np.concatenate(parts).astype(dtype) if parts else np.zeros(0, dtype)

    bob = DetectionLog(gate=cat(rec_gate, np.int64), detector=cat(rec_det, np.int8),
                       out_of_window=cat(rec_oow, bool), source_gate=cat(rec_src, np.int64),
                       gate_period=1.0 / gate_rate)
    order = np.lexsort((bob.detector, bob.gate))
    bob = DetectionLog(bob.gate[order], bob.detector[order], bob.out_of_window[order],
                       bob.source_gate[order], 1.0 / gate_rate)
    a_gate = cat(al_gate, np.int64)
    a_order = np.argsort(a_gate, kind="stable")
    a_gate, first = np.unique(a_gate[a_order], return_index=True)
    alice = EmissionLog(gate=a_gate, bit=cat(al_bit, np.int8)[a_order][first],
                        n_photons=cat(al_n, np.int64)[a_order][first],
                        gate_period=1.0 / gate_rate)
    eve = None
    if cfg.attack.kind != "none":
        eve = {"gate": cat(eve_gate, np.int64), "knows": cat(eve_knows, bool)}
    return counts[:, :n_bins], alice, bob, eve, n_emissions


def _run_binned(cfg, seed, e_q, budget):
    link, det = cfg.link, cfg.detectors
    gate_rate = det[0].gate_rate
    loop_rate = cfg.lock.loop_rate
    n_steps = e_q.size
    rng = substream(seed, "binned")
    # gates per loop period
    edges = np.ceil(np.arange(n_steps + 1) * (gate_rate / loop_rate) - 1e-9).astype(np.int64)
    n_gates = np.diff(edges)
    dark_p = [1.0 - (1.0 - d.dark_prob_per_gate) * (1.0 - link.residual_background)
              for d in det]
    mu = link.mu
    if cfg.bits == "random":
        weights = {0: 0.5, 1: 0.5}
        step_bits = None
    else:
        step_bits = _gate_states(cfg, edges[:-1])
    if cfg.emission == "random":
        p_emit = -math.expm1(-cfg.emission_rate / gate_rate)
    else:
        p_emit = 1.0
    counts = []
    spb = int(round(cfg.bin_width * loop_rate))
    for i in (0, 1):
        # P(no signal photon at detector i) per gate
        none = np.zeros(n_steps)
        for b in (0, 1):
            p_i = _p_d0(e_q, link.alignment_visibility[b], b)
            if i == 1:
                p_i = 1.0 - p_i
            q_none = np.exp(-mu * budget.eta[b] * p_i * det[i].efficiency)
            w = weights[b] if step_bits is None else (step_bits == b).astype(float)
            none += w * q_none
        none = 1.0 - p_emit + p_emit * none
        q = 1.0 - (1.0 - dark_p[i]) * none
        c = rng.binomial(n_gates, q)
        counts.append(c.reshape(cfg.n_bins, spb).sum(axis=1))
    return np.array(counts)


def run_session(cfg, seed=None):
    """Run a full session. ``seed`` overrides ``cfg.seed``."""
    seed = cfg.seed if seed is None else seed
    budget = link_budget(cfg)
    trace, e_q = phase_trace(cfg, seed)
    states, rms = _bin_annotations(cfg, e_q)
    if cfg.engine == "per_gate":
        counts, alice, bob, eve, n_em = _run_per_gate(cfg, seed, e_q, budget)
        key = sift(alice, bob)
    else:
        counts = _run_binned(cfg, seed, e_q, budget)
        alice = bob = eve = key = None
        n_em = 0
    bins = bins_from_counts(counts[0], counts[1], cfg.bin_width, states, rms)
    stats = run_stats(bins, [d.dark_rate for d in cfg.detectors], cfg.bin_width)
    lq = lock_quality(e_q)
    return SessionResult(
        config=cfg, bins=bins, stats=stats, budget=budget, lock_rms=lq.rms,
        lock_slip_fraction=lq.slip_fraction, mean_cos=float(np.mean(np.cos(e_q))),
        rewinds=int(trace.rewinds.sum()), key=key, alice_log=alice, bob_log=bob,
        eve_log=eve, phase_error=e_q, n_emissions=n_em,
    )
