import dataclasses

import numpy as np
import pytest

from gv95sim.attacks import AttackConfig, apply_intercept_first, apply_store_both, attack_report
from gv95sim.config import preset
from gv95sim.optics import LinkParams
from gv95sim.protocol import alice_emit
from gv95sim.session import run_session


def test_config_validation():
    with pytest.raises(ValueError):
        AttackConfig(kind="bogus")
    with pytest.raises(ValueError):
        AttackConfig(attack_fraction=1.5)
    assert AttackConfig(kind="store_both", storage_delay=1e-9).problems(tau=2e-7)


def test_intercept_leaves_a_localized_packet(rng):
    pair = alice_emit(0, 0.0, LinkParams())
    cfg = AttackConfig(kind="intercept_first", attack_fraction=1.0)
    for _ in range(20):
        out, know = apply_intercept_first(pair, cfg, rng)
        assert know == "none"
        assert (abs(out.state.amp_a) == 0) != (abs(out.state.amp_b) == 0)
        assert out.state.norm2 == pytest.approx(pair.state.norm2)


def test_store_both_delays_and_keeps_the_state(rng):
    p = LinkParams()
    pair = alice_emit(1, 0.0, p)
    cfg = AttackConfig(kind="store_both", attack_fraction=1.0)
    out, know, delay = apply_store_both(pair, cfg, rng, tau=p.tau)
    assert know == "full"
    assert delay == pytest.approx(p.tau)
    assert out.t_channel_a == pytest.approx(pair.t_channel_a + p.tau)
    assert out.state.inner(pair.state) == pytest.approx(pair.state.norm2)


def test_report_on_an_unattacked_run():
    cfg = preset("attack-store-both").replace(duration=5, attack=AttackConfig())
    rep = attack_report(run_session(cfg))
    assert rep.eve_info_bits_per_sifted_bit == 0.0
    assert rep.alarm_rate == 0.0
    assert rep.induced_qber < 0.06


def test_report_needs_per_gate_logs():
    cfg = preset("paper-fig2").replace(duration=10, toggles=(), engine="binned_rate")
    with pytest.raises(ValueError):
        attack_report(run_session(cfg))
