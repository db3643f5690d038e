"""Command-line runner: one scenario in, bins/stats/plot files out.

    gv95sim --scenario paper-fig2 --out run1
    gv95sim --config my.ini --seed 7 --engine binned_rate --out run2
    gv95sim --list

Exit status is 0 only when the session ran and its self-checks passed.
"""

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .attacks import attack_report
from .config import ConfigError, list_scenarios, parse_config, preset
from .session import run_session

__all__ = ["main", "run_scenario", "write_outputs", "self_check", "BINS_HEADER"]

BINS_HEADER = "t_start_s,counts_d0,counts_d1,sent_state,lock_residual_rms_rad"

_GNUPLOT = """\
# counts per {bw:g} s bin for both detectors
set terminal pngcairo size 1000,500
set output 'fig2.png'
set xlabel 'time (s)'
set ylabel 'counts per bin'
set key top right
plot 'fig2.dat' using 1:2 with steps title 'D0', \\
     'fig2.dat' using 1:3 with steps title 'D1'
"""


def _fmt(v):
    if isinstance(v, bool) or v is None:
        return str(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def full_summary(result):
    out = result.summary()
    cfg = result.config
    if result.bob_log is not None and cfg.attack.kind != "none":
        rep = attack_report(result)
        for k, v in vars(rep).items():
            out[f"attack_{k}"] = v
    return out


def self_check(result):
    """Problems found in a finished session (empty list when consistent)."""
    cfg = result.config
    bad = []
    if len(result.bins) != cfg.n_bins:
        bad.append(f"expected {cfg.n_bins} bins, got {len(result.bins)}")
    if any(b.counts_d0 < 0 or b.counts_d1 < 0 for b in result.bins):
        bad.append("negative bin count")
    for b in result.bins:
        if b.sent_state not in (-1, 0, 1):
            bad.append(f"bin at {b.t_start}: sent_state {b.sent_state}")
            break
    for state, s in result.stats.per_state.items():
        if s.counts_right + s.counts_wrong > 0 and not -1.0 <= s.v_raw.value <= 1.0:
            bad.append(f"state {state}: raw visibility out of range")
    if result.key is not None:
        if len(result.key) > result.n_emissions:
            bad.append("more sifted bits than emissions")
        n_clicks = sum(b.counts_d0 + b.counts_d1 for b in result.bins)
        if len(result.key) > n_clicks:
            bad.append("more sifted bits than clicks")
    if not math.isfinite(result.mean_cos):
        bad.append("phase trace is not finite")
    return bad


def write_outputs(result, out_dir):
    """Write bins.csv, stats.txt, fig2.dat and fig2.gnuplot into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    rows = [BINS_HEADER]
    for b in result.bins:
        rows.append(f"{_fmt(float(b.t_start))},{b.counts_d0},{b.counts_d1},"
                    f"{b.sent_state},{_fmt(float(b.lock_residual_rms))}")
    with open(os.path.join(out_dir, "bins.csv"), "w", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")
    with open(os.path.join(out_dir, "stats.txt"), "w", newline="\n") as fh:
        for k, v in full_summary(result).items():
            fh.write(f"{k}: {_fmt(v)}\n")
    with open(os.path.join(out_dir, "fig2.dat"), "w", newline="\n") as fh:
        fh.write("# t_mid_s counts_d0 counts_d1 sent_state\n")
        for b in result.bins:
            t = b.t_start + 0.5 * result.config.bin_width
            fh.write(f"{t:g} {b.counts_d0} {b.counts_d1} {b.sent_state}\n")
    with open(os.path.join(out_dir, "fig2.gnuplot"), "w", newline="\n") as fh:
        fh.write(_GNUPLOT.format(bw=result.config.bin_width))


def _screen(result):
    s = full_summary(result)
    lines = [f"scenario {s['scenario']} ({s['engine']}, seed {s['seed']}, "
             f"{s['duration_s']:g} s)"]
    for b in (0, 1):
        if f"state{b}_v_raw" in s:
            lines.append(
                f"  psi{b}: V_raw {s[f'state{b}_v_raw']:.4f} +- {s[f'state{b}_v_raw_sigma']:.4f}"
                f"  V_net {s[f'state{b}_v_net']:.4f}"
                f"  QBER {100 * s[f'state{b}_qber_raw']:.2f}%")
    lines.append(f"  dark-equalized QBER {100 * s['qber_dark_equalized']:.2f}%"
                 f" +- {100 * s['qber_dark_equalized_sigma']:.2f}%")
    lines.append(f"  lock: rms {s['lock_rms_rad']:.4f} rad, mean cos {s['lock_mean_cos']:.5f},"
                 f" rewinds {s['stretcher_rewinds']}")
    if "sifted_bits" in s:
        alarms = ", ".join(f"{k[7:]} {v}" for k, v in s.items() if k.startswith("alarms_"))
        lines.append(f"  key: {s['sifted_bits']} bits, QBER {100 * s['sifted_qber']:.2f}%;"
                     f" alarms: {alarms}")
    if "attack_kind" in s:
        lines.append(f"  attack {s['attack_kind']}: eve info {s['attack_eve_info_bits_per_sifted_bit']:.3f},"
                     f" induced QBER {100 * s['attack_induced_qber']:.2f}%,"
                     f" alarm rate {s['attack_alarm_rate']:.1f}/s")
    return "\n".join(lines)


def _run_point(cfg):
    result = run_session(cfg)
    return full_summary(result), self_check(result)


def run_scenario(cfg, out_dir, quiet=False, workers=1, stream=sys.stdout):
    """Run ``cfg``, write its files and return the exit status."""
    result = run_session(cfg)
    try:
        write_outputs(result, out_dir)
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return 2
    problems = self_check(result)
    if not quiet:
        print(_screen(result), file=stream)

    if cfg.sweep_parameter:
        points = [cfg.with_value(cfg.sweep_parameter, v).replace(sweep_parameter=None,
                                                                  sweep_values=())
                  for v in cfg.sweep_values]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(_run_point, points))
        else:
            outcomes = [_run_point(p) for p in points]
        keys = []
        for summary, _ in outcomes:
            keys += [k for k in summary if k not in keys]
        try:
            with open(os.path.join(out_dir, "sweep.csv"), "w", newline="\n") as fh:
                fh.write(",".join([cfg.sweep_parameter] + keys) + "\n")
                for v, (summary, _) in zip(cfg.sweep_values, outcomes):
                    cells = [_fmt(float(v))] + [_fmt(summary.get(k, "")) for k in keys]
                    fh.write(",".join(cells) + "\n")
        except OSError as exc:
            print(f"error: cannot write sweep.csv: {exc}", file=sys.stderr)
            return 2
        for v, (summary, bad) in zip(cfg.sweep_values, outcomes):
            problems += [f"{cfg.sweep_parameter}={v:g}: {p}" for p in bad]
            if not quiet:
                print(f"  {cfg.sweep_parameter} = {v:g}: mean cos {summary['lock_mean_cos']:.4f},"
                      f" dark-eq QBER {100 * summary['qber_dark_equalized']:.2f}%"
                      + (f", alarm rate {summary['attack_alarm_rate']:.1f}/s"
                         if "attack_alarm_rate" in summary else ""), file=stream)

    for p in problems:
        print(f"self-check failed: {p}", file=sys.stderr)
    return 1 if problems else 0


def _parser():
    p = argparse.ArgumentParser(prog="gv95sim",
                                description="Orthogonal-state QKD link simulator.")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", metavar="PATH", help="scenario file (INI format)")
    src.add_argument("--scenario", metavar="NAME", help="built-in preset")
    src.add_argument("--list", action="store_true", help="list the built-in presets")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--out", metavar="DIR", default="out", help="output directory")
    p.add_argument("--engine", choices=("per_gate", "binned_rate"))
    p.add_argument("--workers", type=int, default=1, help="processes for sweep points")
    p.add_argument("--quiet", action="store_true")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.list:
        for name, desc in list_scenarios():
            print(f"{name:18s} {desc}")
        return 0
    overrides = {}
    if args.seed is not None:
        overrides["scenario.seed"] = str(args.seed)
    if args.engine is not None:
        overrides["scenario.engine"] = args.engine
    try:
        if args.config:
            with open(args.config) as fh:
                text = fh.read()
            cfg = parse_config(text, overrides=overrides)
        else:
            cfg = preset(args.scenario or "paper-fig2")
            if overrides:
                for key, value in overrides.items():
                    cfg = cfg.with_value(key, value)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run_scenario(cfg, args.out, quiet=args.quiet, workers=max(args.workers, 1))


if __name__ == "__main__":
    sys.exit(main())
