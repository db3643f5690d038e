"""Estimators for the count record: fringe visibility (raw and dark-subtracted),
QBER (raw and dark-equalized), Poisson error propagation and time binning.

Counts are oriented per sent state: the "correct" detector is the one the
state exits towards at zero phase error (``optics.DETECTOR_FOR_BIT``).
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .optics import DETECTOR_FOR_BIT

__all__ = [
    "UndefinedResultError",
    "BinRecord",
    "Measurement",
    "StateStats",
    "RunStats",
    "visibility",
    "net_visibility",
    "qber",
    "qber_dark_equalized",
    "poisson_sigma",
    "bootstrap_sigma",
    "visibility_sigma",
    "qber_sigma",
    "bin_series",
    "calibrate_signal_rates",
    "run_stats",
    "REFERENCE_VISIBILITY",
]

#: fringe visibilities measured per state on the 1 km link: raw, net
REFERENCE_VISIBILITY = {0: (0.902, 0.978), 1: (0.962, 0.989)}


class UndefinedResultError(ValueError):
    """An estimator was asked for a ratio with zero total counts."""


@dataclass(frozen=True)
class BinRecord:
    """Counts of one integration bin. ``sent_state`` is -1 when the bin mixes
    both states (random bits, or a switch toggle inside the bin)."""

    t_start: float
    counts_d0: int
    counts_d1: int
    sent_state: int
    lock_residual_rms: float = 0.0

    def counts(self, detector):
        return self.counts_d0 if detector == 0 else self.counts_d1


@dataclass(frozen=True)
class Measurement:
    """Value with its propagated Poisson sigma and, when available, the
    standard deviation of the per-bin estimates."""

    value: float
    sigma: float
    bin_std: float = math.nan

    def __iter__(self):
        return iter((self.value, self.sigma))


def _total(c_a, c_b):
    n = c_a + c_b
    if np.any(np.asarray(n) <= 0):
        raise UndefinedResultError("zero total counts")
    return n


def visibility(c_correct, c_wrong):
    """(C_correct - C_wrong) / (C_correct + C_wrong)."""
    return (c_correct - c_wrong) / _total(c_correct, c_wrong)


def net_visibility(c_correct, c_wrong, dark_rate_correct, dark_rate_wrong, duration):
    """Visibility after subtracting the expected dark counts of both detectors."""
    a = c_correct - dark_rate_correct * duration
    b = c_wrong - dark_rate_wrong * duration
    if a < 0 or b < 0:
        warnings.warn("dark subtraction went negative; clamped to 0", RuntimeWarning,
                      stacklevel=2)
        a, b = max(a, 0.0), max(b, 0.0)
    return visibility(a, b)


def qber(n_wrong, n_right):
    """Fraction of wrong bits, n_wrong / (n_wrong + n_right)."""
    return n_wrong / _total(n_wrong, n_right)


def poisson_sigma(func, *counts, rel_step=1e-6):
    """First-order error of ``func(*counts)`` treating each count as an
    independent Poisson variable (variance = count).

    Partial derivatives are taken by central differences, so any estimator
    built from the counts can be passed in.
    """
    counts = [float(c) for c in counts]
    if any(c < 0 for c in counts):
        raise ValueError("counts must be >= 0")
    if any(c == 0 for c in counts):
        warnings.warn("zero count in Poisson propagation; sigma is unreliable",
                      RuntimeWarning, stacklevel=2)
    var = 0.0
    for i, c in enumerate(counts):
        if c == 0:
            continue
        h = rel_step * max(c, 1.0)
        up = list(counts)
        dn = list(counts)
        up[i] += h
        dn[i] -= h
        d = (func(*up) - func(*dn)) / (2 * h)
        var += d * d * c
    return math.sqrt(var)


def bootstrap_sigma(func, counts, n_resamples=10_000, rng=None):
    """Parametric bootstrap: redraw every count from Poisson(count)."""
    rng = np.random.default_rng() if rng is None else rng
    counts = np.asarray(counts, dtype=float)
    draws = rng.poisson(counts, size=(n_resamples, counts.size)).astype(float)
    values = np.array([func(*row) for row in draws])
    return float(np.std(values, ddof=1))


def visibility_sigma(c_correct, c_wrong):
    n = _total(c_correct, c_wrong)
    return math.sqrt(4.0 * c_correct * c_wrong / n ** 3)


def qber_sigma(n_wrong, n_right):
    n = _total(n_wrong, n_right)
    return math.sqrt(n_wrong * n_right / n ** 3)


def calibrate_signal_rates(v_raw, v_net, dark_correct, dark_wrong):
    """Signal-only click rates (correct, wrong) reproducing a raw/net visibility pair.

    With S, s the dark-free rates, ``(S - s)/(S + s) = v_net`` and
    ``(S + dc - s - dw)/(S + s + dc + dw) = v_raw``; both are linear in S.
    """
    k = (1.0 - v_net) / (1.0 + v_net)
    denom = (1.0 - k) - v_raw * (1.0 + k)
    if denom <= 0:
        raise ValueError("raw visibility must be below net visibility")
    s_correct = (v_raw * (dark_correct + dark_wrong) - (dark_correct - dark_wrong)) / denom
    if s_correct <= 0:
        raise ValueError("visibility pair inconsistent with the dark rates")
    return s_correct, s_correct * k


def _oriented(bins, state):
    sel = [b for b in bins if b.sent_state == state]
    right_det = DETECTOR_FOR_BIT[state]
    right = np.array([b.counts(right_det) for b in sel], dtype=float)
    wrong = np.array([b.counts(1 - right_det) for b in sel], dtype=float)
    return right, wrong


def qber_dark_equalized(bins, dark_d0, dark_d1, bin_width=1.0):
    """Average QBER after lowering D1's counts as if it had D0's dark rate.

    ``(dark_d1 - dark_d0) * duration`` is removed from D1's total for each
    sent state; the two per-state QBERs are averaged with weights equal to
    their corrected total counts.
    """
    if dark_d1 < dark_d0:
        raise ValueError("expected dark_d1 >= dark_d0")
    return _equalized(bins, dark_d0, dark_d1, bin_width)[0]


def _equalized(bins, dark_d0, dark_d1, bin_width):
    excess = dark_d1 - dark_d0
    totals = []
    for state in (0, 1):
        right, wrong = _oriented(bins, state)
        totals += [right.sum(), wrong.sum(), right.size * bin_width]
    r0, w0, t0, r1, w1, t1 = totals

    # D1 is the wrong detector for state 0 and the right one for state 1
    def avg(r0, w0, r1, w1):
        w0c = max(w0 - excess * t0, 0.0)
        r1c = max(r1 - excess * t1, 0.0)
        n0, n1 = r0 + w0c, r1c + w1
        if n0 + n1 <= 0:
            raise UndefinedResultError("zero total counts")
        return (w0c + w1) / (n0 + n1)

    value = avg(r0, w0, r1, w1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        sigma = poisson_sigma(avg, r0, w0, r1, w1)
    return value, sigma


def bin_series(times, detectors, bin_width, duration, sent_state=None,
               residual_rms=None):
    """Aggregate click times per detector into consecutive bins.

    ``sent_state`` and ``residual_rms`` are optional per-bin annotations
    (arrays of length ``n_bins``).
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be > 0")
    n_bins = int(round(duration / bin_width))
    times = np.asarray(times, dtype=float)
    detectors = np.asarray(detectors)
    idx = np.floor(times / bin_width).astype(np.int64)
    keep = (idx >= 0) & (idx < n_bins)
    c0 = np.bincount(idx[keep & (detectors == 0)], minlength=n_bins)
    c1 = np.bincount(idx[keep & (detectors == 1)], minlength=n_bins)
    return bins_from_counts(c0, c1, bin_width, sent_state, residual_rms)


def bins_from_counts(c0, c1, bin_width, sent_state=None, residual_rms=None):
    n_bins = len(c0)
    states = np.full(n_bins, -1) if sent_state is None else np.asarray(sent_state)
    rms = np.zeros(n_bins) if residual_rms is None else np.asarray(residual_rms)
    return [
        BinRecord(t_start=k * bin_width, counts_d0=int(c0[k]), counts_d1=int(c1[k]),
                  sent_state=int(states[k]), lock_residual_rms=float(rms[k]))
        for k in range(n_bins)
    ]


@dataclass(frozen=True)
class StateStats:
    state: int
    n_bins: int
    counts_right: int
    counts_wrong: int
    v_raw: Measurement
    v_net: Measurement
    qber_raw: Measurement


@dataclass(frozen=True)
class RunStats:
    per_state: dict
    qber_dark_equalized: Measurement
    dark_rates: tuple
    total_bins: int
    extra: dict = field(default_factory=dict)


def _state_stats(bins, state, dark_rates, bin_width):
    right, wrong = _oriented(bins, state)
    if right.size == 0:
        return None
    r, w = right.sum(), wrong.sum()
    duration = right.size * bin_width
    d_right = dark_rates[DETECTOR_FOR_BIT[state]]
    d_wrong = dark_rates[1 - DETECTOR_FOR_BIT[state]]

    def vnet(r, w):
        a = max(r - d_right * duration, 0.0)
        b = max(w - d_wrong * duration, 0.0)
        return visibility(a, b)

    ok = (right + wrong) > 0
    rb, wb = right[ok], wrong[ok]
    rn, wn = rb - d_right * bin_width, wb - d_wrong * bin_width
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        v_net = net_visibility(r, w, d_right, d_wrong, duration)
        v_net_sigma = poisson_sigma(vnet, r, w)
        bins_vnet = (rn - wn) / np.where(rn + wn > 0, rn + wn, np.nan)

    def spread(x):
        return float(np.nanstd(x, ddof=1)) if np.sum(np.isfinite(x)) > 1 else math.nan

    return StateStats(
        state=state,
        n_bins=int(right.size),
        counts_right=int(r),
        counts_wrong=int(w),
        v_raw=Measurement(visibility(r, w), visibility_sigma(r, w),
                          spread(visibility(rb, wb)) if rb.size else math.nan),
        v_net=Measurement(v_net, v_net_sigma, spread(bins_vnet)),
        qber_raw=Measurement(qber(w, r), qber_sigma(w, r),
                             spread(qber(wb, rb)) if rb.size else math.nan),
    )


def run_stats(bins, dark_rates, bin_width=1.0):
    """Per-state visibilities/QBERs and the dark-equalized average QBER."""
    per_state = {}
    for state in (0, 1):
        s = _state_stats(bins, state, dark_rates, bin_width)
        if s is not None:
            per_state[state] = s
    try:
        eq = Measurement(*_equalized(bins, dark_rates[0], dark_rates[1], bin_width))
    except (UndefinedResultError, ValueError):
        eq = Measurement(math.nan, math.nan)
    return RunStats(per_state=per_state, qber_dark_equalized=eq,
                    dark_rates=tuple(dark_rates), total_bins=len(bins))
