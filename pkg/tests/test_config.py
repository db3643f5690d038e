import pytest

from gv95sim.config import ConfigError, PRESETS, list_scenarios, parse_config, preset, to_text


def test_empty_file_gives_defaults():
    cfg = parse_config("")
    assert cfg.link.mu == 0.1
    assert cfg.detectors[0].gate_rate == 500e3
    assert cfg.detectors[0].dark_prob_per_gate == 1.4e-5
    assert cfg.detectors[1].dark_prob_per_gate == 3.87e-5
    assert cfg.link.tau_len == 40


def test_bad_duration_names_the_key():
    with pytest.raises(ConfigError, match="scenario.duration"):
        parse_config("[scenario]\nduration = -1\n")


def test_unknown_key_is_rejected():
    with pytest.raises(ConfigError, match="fooo"):
        parse_config("[scenario]\nfooo = 1\n")


def test_errors_are_batched():
    with pytest.raises(ConfigError) as exc:
        parse_config("[scenario]\nduration = -1\nfooo = 2\n[link]\nmu = -3\n")
    text = "\n".join(exc.value.errors)
    assert "fooo" in text and "scenario.duration" in text and "link.mu" in text


def test_syntax_error_has_line_number():
    with pytest.raises(ConfigError, match="line"):
        parse_config("[scenario]\nthis line is not a pair\n")


def test_toggles_must_increase_and_fit():
    with pytest.raises(ConfigError, match="toggles"):
        parse_config("[scenario]\nduration = 10\ntoggles = 5, 3\n")
    with pytest.raises(ConfigError, match="toggles"):
        parse_config("[scenario]\nduration = 10\ntoggles = 12\n")


def test_registry():
    names = [n for n, _ in list_scenarios()]
    assert "paper-fig2" in names
    assert len(names) == len(set(names))
    assert set(names) == {"paper-fig2", "unlocked-drift", "attack-intercept",
                          "attack-store-both", "security-sweep", "drift-envelope"}


@pytest.mark.parametrize("name", list(PRESETS))
def test_presets_round_trip(name):
    cfg = preset(name)
    again = parse_config(to_text(cfg))
    assert again.replace(description=cfg.description) == cfg


def test_with_value_and_overrides():
    cfg = preset("paper-fig2").with_value("drift.sigma", 0.3)
    assert cfg.drift.sigma == 0.3
    cfg = parse_config("", overrides={"scenario.seed": "9"})
    assert cfg.seed == 9


def test_unknown_scenario():
    with pytest.raises(ConfigError):
        preset("nope")
