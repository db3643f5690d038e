"""Scenario configuration: dataclasses, the sectioned ``key = value`` text
format, and the preset registry.

All values are SI (metres, seconds, radians, watts) unless the key says
otherwise. Lists are comma separated. An empty file gives the defaults,
which reproduce the 1 km experiment. Grammar::

    [scenario]   name, description, duration, bin_width, initial_state,
                 toggles, emission (per_gate | random), emission_rate,
                 bits (switch | random), engine (per_gate | binned_rate), seed
    [link]       any LinkParams field; alignment_visibility and signal_rate
                 take two values (state 0, state 1), signal_rate may be auto
    [detectors]  gate_rate, gate_width, dark_prob_d0, dark_prob_d1,
                 efficiency_d0, efficiency_d1
    [drift]      sigma (rad/sqrt(s)), ramp (rad/s), initial_error (rad)
    [lock]       enabled, dither_step, loop_rate, setpoint, pd_noise,
                 lock_threshold, v_classical, control_power, stretcher_range
    [attack]     kind, fraction, storage_delay (or auto), resend_strategy,
                 destructive
    [sweep]      parameter (section.key), values
"""

import configparser
import dataclasses
import math
from dataclasses import dataclass, field

from .attacks import AttackConfig
from .hardware import DetectorParams
from .optics import LinkParams

__all__ = [
    "ConfigError",
    "DriftSettings",
    "LockSettings",
    "ScenarioConfig",
    "parse_config",
    "to_text",
    "list_scenarios",
    "preset",
    "PRESETS",
    "DRIFT_ENVELOPE",
]

#: largest drift strength (rad/sqrt(s)) for which the default lock keeps
#: mean(cos(phase error)) >= 0.99 over a 14 minute run
DRIFT_ENVELOPE = 0.5


class ConfigError(ValueError):
    """Invalid configuration. ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass(frozen=True)
class DriftSettings:
    sigma: float = 0.1
    ramp: float = 0.0
    initial_error: float = 0.5


@dataclass(frozen=True)
class LockSettings:
    enabled: bool = True
    dither_step: float = 0.01
    loop_rate: float = 1e3
    setpoint: str = "minimize"
    pd_noise: float = 0.01
    lock_threshold: float = 0.1
    v_classical: float = 0.98
    control_power: float = 1e-3
    stretcher_range: float = 60 * math.pi


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "custom"
    description: str = ""
    duration: float = 840.0
    bin_width: float = 1.0
    initial_state: int = 1
    toggles: tuple = ()
    emission: str = "per_gate"
    emission_rate: float = 50e3
    bits: str = "switch"
    engine: str = "per_gate"
    seed: int = 2012
    link: LinkParams = field(default_factory=LinkParams)
    detectors: tuple = (DetectorParams(dark_prob_per_gate=1.4e-5),
                        DetectorParams(dark_prob_per_gate=3.87e-5))
    drift: DriftSettings = field(default_factory=DriftSettings)
    lock: LockSettings = field(default_factory=LockSettings)
    attack: AttackConfig = field(default_factory=AttackConfig)
    sweep_parameter: str | None = None
    sweep_values: tuple = ()

    @property
    def n_bins(self):
        return int(round(self.duration / self.bin_width))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def with_value(self, key, value):
        """Copy with one ``section.key`` setting changed (used by sweeps)."""
        text = to_text(self)
        return parse_config(text, overrides={key: value})


# ---------------------------------------------------------------- text format

_SCENARIO_KEYS = {
    "name": str, "description": str, "duration": float, "bin_width": float,
    "initial_state": int, "toggles": "floats", "emission": str,
    "emission_rate": float, "bits": str, "engine": str, "seed": int,
}
_LINK_KEYS = {f.name: ("pair" if f.name in ("alignment_visibility", "signal_rate") else float)
              for f in dataclasses.fields(LinkParams)}
_DETECTOR_KEYS = {"gate_rate": float, "gate_width": float, "dark_prob_d0": float,
                  "dark_prob_d1": float, "efficiency_d0": float, "efficiency_d1": float}
_DRIFT_KEYS = {f.name: float for f in dataclasses.fields(DriftSettings)}
_LOCK_KEYS = {"enabled": bool, "dither_step": float, "loop_rate": float, "setpoint": str,
              "pd_noise": float, "lock_threshold": float, "v_classical": float,
              "control_power": float, "stretcher_range": float}
_ATTACK_KEYS = {"kind": str, "fraction": float, "storage_delay": "auto_float",
                "resend_strategy": str, "destructive": bool}
_SWEEP_KEYS = {"parameter": str, "values": "floats"}

SECTIONS = {
    "scenario": _SCENARIO_KEYS, "link": _LINK_KEYS, "detectors": _DETECTOR_KEYS,
    "drift": _DRIFT_KEYS, "lock": _LOCK_KEYS, "attack": _ATTACK_KEYS,
    "sweep": _SWEEP_KEYS,
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(kind, raw):
    raw = raw.strip()
    if kind is str:
        return raw
    if kind is float:
        return float(raw)
    if kind is int:
        return int(raw, 0)
    if kind is bool:
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind == "floats":
        return tuple(float(x) for x in raw.split(",") if x.strip())
    if kind == "pair":
        if raw.lower() == "auto":
            return None
        vals = tuple(float(x) for x in raw.split(","))
        if len(vals) != 2:
            raise ValueError("expected two comma-separated values")
        return vals
    if kind == "auto_float":
        return None if raw.lower() == "auto" else float(raw)
    raise AssertionError(kind)


def _read(text):
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__",
                                   inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source="<config>")
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError([f"line {exc.lineno}: key outside of any [section]: "
                           f"{exc.line.strip()!r}"]) from None
    except configparser.ParsingError as exc:
        raise ConfigError([f"line {lineno}: cannot parse {line.strip()!r}"
                           for lineno, line in exc.errors]) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError([f"line {exc.lineno}: {exc}"]) from None
    return cp


def parse_config(text, overrides=None):
    """Parse and validate a scenario. Raises :class:`ConfigError` listing every
    problem with its ``section.key`` path."""
    cp = _read(text)
    errors = []
    values = {}
    for section in cp.sections():
        if section not in SECTIONS:
            errors.append(f"[{section}]: unknown section")
            continue
        for key, raw in cp.items(section):
            path = f"{section}.{key}"
            if key not in SECTIONS[section]:
                errors.append(f"{path}: unknown key")
                continue
            try:
                values[path] = _convert(SECTIONS[section][key], raw)
            except ValueError as exc:
                errors.append(f"{path}: {exc}")
    for path, raw in (overrides or {}).items():
        section, _, key = path.partition(".")
        if key not in SECTIONS.get(section, {}):
            errors.append(f"{path}: unknown key")
            continue
        kind = SECTIONS[section][key]
        values[path] = _convert(kind, raw) if isinstance(raw, str) else \
            (float(raw) if kind is float else raw)
    try:
        cfg = _build(values)
    except ConfigError as exc:
        raise ConfigError(errors + exc.errors) from None
    if errors:
        raise ConfigError(errors)
    return cfg


def _sub(values, section):
    prefix = section + "."
    return {k[len(prefix):]: v for k, v in values.items() if k.startswith(prefix)}


def _construct(cls, kwargs, section, errors):
    try:
        return cls(**kwargs)
    except ValueError as exc:
        for msg in str(exc).split("; "):
            errors.append(f"{section}.{msg}")
    return None


def _build(values):
    errors = []
    link = _construct(LinkParams, _sub(values, "link"), "link", errors)

    det = _sub(values, "detectors")
    shared = {k: det[k] for k in ("gate_rate", "gate_width") if k in det}
    detectors = []
    for i, dark in enumerate((1.4e-5, 3.87e-5)):
        kw = dict(shared, dark_prob_per_gate=det.get(f"dark_prob_d{i}", dark))
        if f"efficiency_d{i}" in det:
            kw["efficiency"] = det[f"efficiency_d{i}"]
        before = len(errors)
        d = _construct(DetectorParams, kw, "detectors", errors)
        for j in range(before, len(errors)):
            errors[j] = errors[j].replace("dark_prob_per_gate", f"dark_prob_d{i}") \
                .replace("efficiency:", f"efficiency_d{i}:")
        detectors.append(d)
    if detectors[0] is not None and detectors[1] is not None:
        detectors = tuple(detectors)
    else:
        detectors = None
    errors = list(dict.fromkeys(errors))

    drift = DriftSettings(**_sub(values, "drift"))
    lock = LockSettings(**_sub(values, "lock"))
    att = _sub(values, "attack")
    if "fraction" in att:
        att["attack_fraction"] = att.pop("fraction")
    attack = _construct(AttackConfig, att, "attack", errors)

    sc = _sub(values, "scenario")
    sw = _sub(values, "sweep")
    cfg_kwargs = dict(sc)
    cfg_kwargs["toggles"] = tuple(sc.get("toggles", ()))
    if sw:
        cfg_kwargs["sweep_parameter"] = sw.get("parameter")
        cfg_kwargs["sweep_values"] = tuple(sw.get("values", ()))
    if errors:
        _check(ScenarioConfig(**cfg_kwargs, drift=drift, lock=lock), errors, partial=True)
        raise ConfigError(errors)
    cfg = ScenarioConfig(**cfg_kwargs, link=link, detectors=detectors, drift=drift,
                         lock=lock, attack=attack)
    _check(cfg, errors)
    if errors:
        raise ConfigError(errors)
    return cfg


def _is_multiple(x, step, tol=1e-9):
    q = x / step
    return abs(q - round(q)) <= tol * max(1.0, abs(q))


def _check(cfg, errors, partial=False):
    if not cfg.duration > 0:
        errors.append("scenario.duration: must be > 0")
    if not cfg.bin_width > 0:
        errors.append("scenario.bin_width: must be > 0")
    elif cfg.duration > 0 and not _is_multiple(cfg.duration, cfg.bin_width):
        errors.append("scenario.duration: must be a whole number of bins")
    if cfg.initial_state not in (0, 1):
        errors.append("scenario.initial_state: must be 0 or 1")
    t = cfg.toggles
    if any(b <= a for a, b in zip(t, t[1:])):
        errors.append("scenario.toggles: must be strictly increasing")
    if any(x <= 0 or x >= cfg.duration for x in t):
        errors.append("scenario.toggles: must lie inside (0, duration)")
    if cfg.emission not in ("per_gate", "random"):
        errors.append("scenario.emission: must be per_gate or random")
    if not cfg.emission_rate > 0:
        errors.append("scenario.emission_rate: must be > 0")
    if cfg.bits not in ("switch", "random"):
        errors.append("scenario.bits: must be switch or random")
    if cfg.engine not in ("per_gate", "binned_rate"):
        errors.append("scenario.engine: must be per_gate or binned_rate")
    if not 0 <= cfg.seed < 2 ** 64:
        errors.append("scenario.seed: must be an unsigned 64-bit integer")

    lk = cfg.lock
    if not lk.dither_step > 0:
        errors.append("lock.dither_step: must be > 0")
    if not lk.loop_rate > 0:
        errors.append("lock.loop_rate: must be > 0")
    if lk.setpoint not in ("minimize", "maximize"):
        errors.append("lock.setpoint: must be minimize or maximize")
    if not lk.pd_noise >= 0:
        errors.append("lock.pd_noise: must be >= 0")
    if not 0 <= lk.v_classical <= 1:
        errors.append("lock.v_classical: must be in [0, 1]")
    if not lk.control_power > 0:
        errors.append("lock.control_power: must be > 0")
    if not lk.stretcher_range > 0:
        errors.append("lock.stretcher_range: must be > 0")
    if not lk.lock_threshold > 0:
        errors.append("lock.lock_threshold: must be > 0")
    if not cfg.drift.sigma >= 0:
        errors.append("drift.sigma: must be >= 0")

    if lk.loop_rate > 0 and cfg.bin_width > 0:
        if not _is_multiple(cfg.bin_width * lk.loop_rate, 1.0):
            errors.append("scenario.bin_width: must hold a whole number of loop periods")
        if any(not _is_multiple(x * lk.loop_rate, 1.0) for x in t):
            errors.append("scenario.toggles: must fall on the control-loop grid")
    if cfg.sweep_parameter is not None:
        sec, _, key = cfg.sweep_parameter.partition(".")
        if key not in SECTIONS.get(sec, {}) or sec == "sweep":
            errors.append(f"sweep.parameter: unknown setting {cfg.sweep_parameter!r}")
        if not cfg.sweep_values:
            errors.append("sweep.values: need at least one value")
    if partial:
        return

    gr = cfg.detectors[0].gate_rate
    if cfg.bin_width > 0 and not _is_multiple(cfg.bin_width * gr, 1.0):
        errors.append("scenario.bin_width: must hold a whole number of gates")
    if lk.loop_rate > gr:
        errors.append("lock.loop_rate: must not exceed the gate rate")
    if cfg.emission == "random" and cfg.emission_rate > gr:
        errors.append("scenario.emission_rate: must not exceed the gate rate")
    if cfg.link.signal_rate is not None and any(r >= gr for r in cfg.link.signal_rate):
        errors.append("link.signal_rate: must be below the gate rate")
    for msg in cfg.attack.problems(tau=cfg.link.tau):
        errors.append(f"attack.{msg.replace('attack_fraction', 'fraction')}")
    if cfg.attack.kind != "none" and cfg.engine == "binned_rate":
        errors.append("scenario.engine: attacks need the per_gate engine")


def _fmt(v):
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def to_text(cfg):
    """Serialize a config back to the text format (round-trips exactly)."""
    lines = ["[scenario]"]
    for key in _SCENARIO_KEYS:
        v = getattr(cfg, key)
        if key == "description" and not v:
            continue
        if key == "toggles" and not v:
            continue
        lines.append(f"{key} = {_fmt(v)}")
    lines.append("\n[link]")
    for f in dataclasses.fields(LinkParams):
        lines.append(f"{f.name} = {_fmt(getattr(cfg.link, f.name))}")
    d0, d1 = cfg.detectors
    lines += ["\n[detectors]", f"gate_rate = {_fmt(d0.gate_rate)}",
              f"gate_width = {_fmt(d0.gate_width)}",
              f"dark_prob_d0 = {_fmt(d0.dark_prob_per_gate)}",
              f"dark_prob_d1 = {_fmt(d1.dark_prob_per_gate)}",
              f"efficiency_d0 = {_fmt(d0.efficiency)}",
              f"efficiency_d1 = {_fmt(d1.efficiency)}"]
    lines.append("\n[drift]")
    for f in dataclasses.fields(DriftSettings):
        lines.append(f"{f.name} = {_fmt(getattr(cfg.drift, f.name))}")
    lines.append("\n[lock]")
    for f in dataclasses.fields(LockSettings):
        lines.append(f"{f.name} = {_fmt(getattr(cfg.lock, f.name))}")
    a = cfg.attack
    lines += ["\n[attack]", f"kind = {a.kind}", f"fraction = {_fmt(a.attack_fraction)}",
              f"storage_delay = {_fmt(a.storage_delay)}",
              f"resend_strategy = {a.resend_strategy}",
              f"destructive = {_fmt(a.destructive)}"]
    if cfg.sweep_parameter is not None:
        lines += ["\n[sweep]", f"parameter = {cfg.sweep_parameter}",
                  f"values = {_fmt(cfg.sweep_values)}"]
    return "\n".join(lines) + "\n"


# -------------------------------------------------------------------- presets

PRESETS = {
    "paper-fig2": (
        "14 minute run on the 1 km link, switch toggled between the two states",
        """
[scenario]
name = paper-fig2
duration = 840
initial_state = 1
toggles = 120, 240, 420, 540, 720
""",
    ),
    "unlocked-drift": (
        "controller off, strong drift: the fringe washes out",
        """
[scenario]
name = unlocked-drift
duration = 840
initial_state = 1
toggles = 120, 240, 420, 540, 720
engine = binned_rate
[drift]
sigma = 3.0
[lock]
enabled = false
""",
    ),
    "attack-intercept": (
        "Eve measures packet presence on every pulse",
        """
[scenario]
name = attack-intercept
duration = 60
bits = random
[attack]
kind = intercept_first
fraction = 1.0
""",
    ),
    "attack-store-both": (
        "Eve stores both packets and resends the right state tau late",
        """
[scenario]
name = attack-store-both
duration = 60
bits = random
[attack]
kind = store_both
fraction = 1.0
""",
    ),
    "security-sweep": (
        "store-both attack while the packet delay tau is swept through the gate width",
        """
[scenario]
name = security-sweep
duration = 20
bits = random
[attack]
kind = store_both
fraction = 1.0
[sweep]
parameter = link.tau_len
values = 0.1, 0.3, 0.5, 1, 5, 40
""",
    ),
    "drift-envelope": (
        "locked-loop headroom against drift strength",
        f"""
[scenario]
name = drift-envelope
duration = 840
initial_state = 1
toggles = 120, 240, 420, 540, 720
engine = binned_rate
[sweep]
parameter = drift.sigma
values = 0, 0.1, 0.2, 0.3, {DRIFT_ENVELOPE}, 0.7, 1.0, 1.5
""",
    ),
}


def list_scenarios():
    """``[(name, description), ...]`` of the built-in presets."""
    return [(name, desc) for name, (desc, _) in PRESETS.items()]


def preset(name):
    try:
        desc, text = PRESETS[name]
    except KeyError:
        raise ConfigError([f"unknown scenario {name!r}; known: {', '.join(PRESETS)}"]) from None
    cfg = parse_config(text)
    return cfg.replace(description=desc) if not cfg.description else cfg
