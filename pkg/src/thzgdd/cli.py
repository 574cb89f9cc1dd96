"""Command-line front end.

Every run is described by a flat ``section.key -> value`` map.  Values come
from the built-in defaults, then an optional preset, then ``--config FILE``
(``key = value`` lines), then individual flags.  ``--dump-config`` prints the
resolved map in the same file format instead of running.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analysis import integrated_gdd_metric, papr, phase_profile
from .atmosphere import (ChannelResponse, CoverageError, GridError, attenuation_db_per_m,
                         complex_refractivity, frequency_grid, identity_channel, los_transfer)
from .catalog import AtmosphereState, CatalogError, load_default_catalog, parse_catalog
from .equalize import (EqualizerError, EqualizerSpec, MaskedPhaseError, MlseComplexityError,
                       NonInvertibleChannelError, estimate_fir, scramble_profile)
from .link import SweepPointError, constellation_csv, run_ber_sweep, sweep_csv
from .multipath import (PathSet, cascade, multipath_transfer, parse_path, parse_surface,
                        quadratic_phase_channel, rough_surface_paths)
from .phy import LinkConfig, apply_channel, gaussian_pulse

__all__ = ["main", "ScenarioConfig", "ConfigError", "DEFAULTS", "PRESETS", "parse_config_text",
           "resolve_config"]

SUBCOMMANDS = ("atmosphere", "gdd", "metric", "pulse-demo", "link", "sweep", "scramble-demo")

DEFAULTS: dict[str, object] = {
    "seed": 0,
    "atmosphere.t_c": 29.0,
    "atmosphere.rh": 0.45,
    "atmosphere.pressure_atm": 1.0,
    "atmosphere.fmin": 100.0,
    "atmosphere.fmax": 600.0,
    "atmosphere.step": 0.01,
    "atmosphere.catalog": "",
    "channel.components": "atmosphere",
    "channel.distance_m": 30.0,
    "channel.paths": "",
    "channel.surface": "",
    "channel.gdd_ps2": 0.0,
    "link.scheme": "QPSK",
    "link.symbol_rate": 10.0,
    "link.carrier": 380.0,
    "link.rolloff": 0.35,
    "link.span_symbols": 0,
    "link.frame_bits": 4096,
    "link.samples_per_symbol": 4,
    "link.ebn0_db": 21.4,
    "equalizer.eq": "none",
    "equalizer.training": "genie",
    "equalizer.step_size": 0.01,
    "equalizer.n_train": 2048,
    "equalizer.pdc": False,
    "equalizer.pdc_placement": "rx",
    "equalizer.state_budget": 2 ** 20,
    "scramble.enabled": False,
    "scramble.key": 1,
    "scramble.metric_ps": 30000.0,
    "scramble.segments": 32,
    "sweep.ebn0_min": 0.0,
    "sweep.ebn0_max": 10.0,
    "sweep.ebn0_step": 2.0,
    "sweep.min_errors": 100,
    "sweep.max_bits": 1_000_000,
    "sweep.snapshot_ebn0": "",
    "sweep.constellation_out": "",
    "pulse.fwhm_ps": 100.0,
    "pulse.carrier": 130.0,
    "pulse.sample_rate": 400.0,
    "pulse.n_samples": 4096,
    "metric.band_hz": 0.0,
    "metric.gdd_ps2": 0.0,
}

PRESETS: dict[str, dict[str, object]] = {
    "fig2_pulse": {
        "channel.components": "quadratic",
        "channel.gdd_ps2": 10000.0,
        "channel.paths": "0:1:0;50.5:1:0",
        "pulse.fwhm_ps": 100.0,
        "pulse.carrier": 130.0,
        "atmosphere.fmin": 100.0,
        "atmosphere.fmax": 160.0,
        "link.carrier": 130.0,
    },
    "fig3_atmosphere": {
        "atmosphere.t_c": 29.0,
        "atmosphere.rh": 0.45,
        "atmosphere.fmin": 100.0,
        "atmosphere.fmax": 1000.0,
        "channel.distance_m": 1.0,
    },
    "fig4_qpsk380": {
        "atmosphere.t_c": 29.0,
        "atmosphere.rh": 0.45,
        "atmosphere.fmin": 370.0,
        "atmosphere.fmax": 390.0,
        "channel.distance_m": 30.0,
        "link.scheme": "QPSK",
        "link.symbol_rate": 10.0,
        "link.carrier": 380.0,
        "link.rolloff": 0.35,
        "link.frame_bits": 4096,
        "link.ebn0_db": 21.4,
        "sweep.ebn0_min": 5.4,
        "sweep.ebn0_max": 21.4,
        "sweep.ebn0_step": 2.0,
        "sweep.max_bits": 200_000,
        "sweep.snapshot_ebn0": "21.4",
    },
    "fig5_pdc": {
        "atmosphere.t_c": 29.0,
        "atmosphere.rh": 0.45,
        "atmosphere.fmin": 220.0,
        "atmosphere.fmax": 540.0,
        "channel.distance_m": 100.0,
        "link.scheme": "BPSK",
        "link.symbol_rate": 200.0,
        "link.carrier": 380.0,
        "link.rolloff": 0.6,
        "link.samples_per_symbol": 2,
        "link.frame_bits": 16384,
        "link.ebn0_db": 12.0,
        "equalizer.eq": "dfe:7",
        "equalizer.training": "lms",
        "equalizer.pdc": True,
        "sweep.ebn0_min": 10.0,
        "sweep.ebn0_max": 16.0,
        "sweep.ebn0_step": 2.0,
        "sweep.max_bits": 1_000_000,
    },
}

# flag -> config key
FLAG_KEYS = {
    "--t-c": "atmosphere.t_c", "--rh": "atmosphere.rh", "--pressure": "atmosphere.pressure_atm",
    "--fmin": "atmosphere.fmin", "--fmax": "atmosphere.fmax", "--step": "atmosphere.step",
    "--catalog": "atmosphere.catalog",
    "--components": "channel.components", "--distance": "channel.distance_m",
    "--surface": "channel.surface", "--channel-gdd-ps2": "channel.gdd_ps2",
    "--scheme": "link.scheme", "--symbol-rate": "link.symbol_rate", "--carrier": "link.carrier",
    "--rolloff": "link.rolloff", "--span": "link.span_symbols", "--frame-bits": "link.frame_bits",
    "--sps": "link.samples_per_symbol", "--ebn0": "link.ebn0_db",
    "--eq": "equalizer.eq", "--training": "equalizer.training", "--step-size": "equalizer.step_size",
    "--n-train": "equalizer.n_train", "--pdc": "equalizer.pdc", "--pdc-placement": "equalizer.pdc_placement",
    "--state-budget": "equalizer.state_budget",
    "--ebn0-min": "sweep.ebn0_min", "--ebn0-max": "sweep.ebn0_max", "--ebn0-step": "sweep.ebn0_step",
    "--min-errors": "sweep.min_errors", "--max-bits": "sweep.max_bits",
    "--snapshot-ebn0": "sweep.snapshot_ebn0", "--constellation-out": "sweep.constellation_out",
    "--fwhm-ps": "pulse.fwhm_ps", "--pulse-carrier": "pulse.carrier", "--sample-rate": "pulse.sample_rate",
    "--n-samples": "pulse.n_samples",
    "--band": "metric.band_hz", "--gdd-ps2": "metric.gdd_ps2",
}


class ConfigError(ValueError):
    """Unknown key or unparseable value (a usage error)."""


class UsageError(Exception):
    pass


def _convert(key: str, value):
    if key not in DEFAULTS:
        raise ConfigError(f"unknown config key {key!r}")
    kind = type(DEFAULTS[key])
    if isinstance(value, kind) and not (kind is int and isinstance(value, bool)):
        return value
    text = str(value).strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "on", "yes"):
                return True
            if low in ("0", "false", "off", "no"):
                return False
            raise ValueError(text)
        if kind is int:
            number = float(text)
            if not number.is_integer():
                raise ValueError(text)
            return int(number)
        if kind is float:
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {text!r} as {kind.__name__}") from None
    return text


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class ScenarioConfig:
    values: dict = field(default_factory=lambda: dict(DEFAULTS))
    preset: str | None = None

    def __getitem__(self, key: str):
        return self.values[key]

    def dump(self) -> str:
        lines = [] if self.preset is None else [f"preset = {self.preset}"]
        lines += [f"{k} = {_format(v)}" for k, v in self.values.items()]
        return "\n".join(lines) + "\n"


def parse_config_text(text: str) -> tuple[dict, str | None]:
    """``key = value`` lines (``#`` comments) -> (overrides, preset)."""
    values: dict = {}
    preset = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip() if not raw.strip().startswith("#") else ""
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {number}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "preset":
            if value not in PRESETS:
                raise ConfigError(f"unknown preset {value!r}")
            preset = value
            continue
        values[key] = _convert(key, value)
    return values, preset


def resolve_config(preset: str | None = None, file_text: str | None = None,
                   overrides: dict | None = None) -> ScenarioConfig:
    file_values, file_preset = parse_config_text(file_text) if file_text else ({}, None)
    preset = preset or file_preset
    if preset is not None and preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    values = dict(DEFAULTS)
    if preset:
        values.update(PRESETS[preset])
    values.update(file_values)
    for key, value in (overrides or {}).items():
        values[key] = _convert(key, value)
    return ScenarioConfig(values, preset)


def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(cfg_out: str | None, text: str) -> str:
    if cfg_out:
        _write_atomic(cfg_out, text)
        return cfg_out
    return "-"


def _csv(header, rows) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return out.getvalue()


def _atmosphere_state(cfg: ScenarioConfig) -> AtmosphereState:
    return AtmosphereState.from_celsius(cfg["atmosphere.t_c"], cfg["atmosphere.rh"],
                                        cfg["atmosphere.pressure_atm"])


def _catalog(cfg: ScenarioConfig):
    path = cfg["atmosphere.catalog"]
    if not path:
        return load_default_catalog()
    with open(path, encoding="utf-8") as fh:
        return parse_catalog(fh.read())


def build_channel(cfg: ScenarioConfig, freq: np.ndarray) -> ChannelResponse:
    parts = [p.strip() for p in cfg["channel.components"].split(",") if p.strip()]
    channels = []
    for part in parts:
        if part == "identity":
            continue
        if part == "atmosphere":
            spec = complex_refractivity(_catalog(cfg), _atmosphere_state(cfg), freq)
            channels.append(los_transfer(spec, cfg["channel.distance_m"]))
        elif part == "multipath":
            pairs = [parse_path(p) for p in cfg["channel.paths"].split(";") if p.strip()]
            channels.append(multipath_transfer(PathSet.from_pairs(pairs), freq))
        elif part == "surface":
            stats, seed = parse_surface(cfg["channel.surface"])
            channels.append(multipath_transfer(rough_surface_paths(stats, seed), freq))
        elif part == "quadratic":
            channels.append(quadratic_phase_channel(freq, cfg["channel.gdd_ps2"]))
        else:
            raise ConfigError(f"unknown channel component {part!r}")
    if not channels:
        return identity_channel(freq)
    return channels[0] if len(channels) == 1 else cascade(channels)


def _channel_grid(cfg: ScenarioConfig) -> np.ndarray:
    return frequency_grid(cfg["atmosphere.fmin"], cfg["atmosphere.fmax"], cfg["atmosphere.step"])


def _link_config(cfg: ScenarioConfig) -> LinkConfig:
    return LinkConfig(cfg["link.scheme"], cfg["link.symbol_rate"], cfg["link.carrier"], cfg["link.rolloff"],
                      cfg["link.span_symbols"], cfg["link.frame_bits"], cfg["link.samples_per_symbol"])


def _equalizer(cfg: ScenarioConfig) -> EqualizerSpec | None:
    text = cfg["equalizer.eq"].strip().lower()
    if text in ("", "none", "off"):
        return None
    base = EqualizerSpec.parse(text)
    return EqualizerSpec(base.kind, base.n_taps, 0.0, cfg["equalizer.state_budget"], cfg["equalizer.training"],
                         cfg["equalizer.step_size"], cfg["equalizer.n_train"])


def _scramble(cfg: ScenarioConfig, link: LinkConfig) -> ChannelResponse | None:
    if not cfg["scramble.enabled"]:
        return None
    return scramble_profile(cfg["scramble.key"], link.band, cfg["scramble.metric_ps"], cfg["scramble.segments"])


# -- subcommands -------------------------------------------------------------

def cmd_atmosphere(cfg: ScenarioConfig, out: str | None) -> str:
    freq = _channel_grid(cfg)
    spec = complex_refractivity(_catalog(cfg), _atmosphere_state(cfg), freq)
    profile = phase_profile(los_transfer(spec, 1.0))
    atten = attenuation_db_per_m(spec)
    rows = [(f"{f:.6f}", f"{a:.9g}", f"{t:.9g}", f"{g:.9g}")
            for f, a, t, g in zip(freq, atten, profile.group_delay, profile.gdd)]
    where = _emit(out, _csv(["freq_GHz", "atten_dB_per_m", "group_delay_ps_per_m", "gdd_ps2_per_m"], rows))
    i, j = int(np.argmax(atten)), int(np.nanargmax(np.abs(profile.gdd)))
    return (f"atmosphere: {freq.size} points {freq[0]:g}-{freq[-1]:g} GHz, peak attenuation "
            f"{atten[i]:.4g} dB/m at {freq[i]:.3f} GHz, peak |GDD| {abs(profile.gdd[j]):.4g} ps^2/m at "
            f"{freq[j]:.3f} GHz -> {where}")


def cmd_gdd(cfg: ScenarioConfig, out: str | None) -> str:
    freq = _channel_grid(cfg)
    channel = build_channel(cfg, freq)
    profile = phase_profile(channel)
    with np.errstate(divide="ignore"):
        amp_db = 20 * np.log10(np.abs(channel.h))
    rows = [(f"{f:.6f}", f"{a:.9g}", f"{p:.9g}", f"{t:.9g}", f"{g:.9g}")
            for f, a, p, t, g in zip(freq, amp_db, profile.phase_unwrapped, profile.group_delay, profile.gdd)]
    where = _emit(out, _csv(["freq_GHz", "amp_dB", "phase_rad", "group_delay_ps", "gdd_ps2"], rows))
    metric = integrated_gdd_metric(profile, (freq[0], freq[-1]))
    return f"gdd: {channel.label}, {freq.size} points, integrated metric {metric:.4g} ps -> {where}"


def cmd_metric(cfg: ScenarioConfig, out: str | None) -> str:
    band_hz = cfg["metric.band_hz"]
    if band_hz < 0:
        raise ValueError("band must be positive")
    if cfg["metric.gdd_ps2"] != 0.0:
        if band_hz <= 0:
            raise ValueError("--band (Hz) is required with --gdd-ps2")
        value = 2 * np.pi * band_hz * 1e-12 * abs(cfg["metric.gdd_ps2"])
    else:
        link = _link_config(cfg)
        width = link.occupied_bandwidth if band_hz <= 0 else band_hz / 1e9
        band_hz = width * 1e9
        band = (link.carrier - width / 2, link.carrier + width / 2)
        channel = build_channel(cfg, _channel_grid(cfg))
        value = integrated_gdd_metric(phase_profile(channel), band)
    symbol_ps = 1e12 / band_hz
    if out:
        _write_atomic(out, _csv(["band_hz", "metric_ps", "symbol_duration_ps"],
                                [(repr(band_hz), f"{value:.6g}", f"{symbol_ps:.6g}")]))
    return f"{value:.1f} ps (symbol duration 1/B = {symbol_ps:.1f} ps, ratio {value / symbol_ps:.3g})"


def cmd_pulse_demo(cfg: ScenarioConfig, out: str | None) -> str:
    fs = cfg["pulse.sample_rate"]
    fc = cfg["pulse.carrier"]
    n = cfg["pulse.n_samples"]
    pulse = gaussian_pulse(cfg["pulse.fwhm_ps"], fc, fs, n)
    step = min(cfg["atmosphere.step"], fs / n)
    freq = frequency_grid(fc - fs / 2, fc + fs / 2, step)
    channel = build_channel(cfg, freq)
    shaped = apply_channel(pulse, channel)
    t = (np.arange(n) - n // 2) / fs * 1e3
    rows = [(f"{ti:.6g}", f"{abs(a):.9g}", f"{abs(b):.9g}", f"{a.real:.9g}", f"{a.imag:.9g}", f"{b.real:.9g}",
             f"{b.imag:.9g}") for ti, a, b in zip(t, pulse.samples, shaped.samples)]
    where = _emit(out, _csv(["t_ps", "in_abs", "out_abs", "in_re", "in_im", "out_re", "out_im"], rows))

    def rms_width(x):
        p = np.abs(x) ** 2
        p = p / p.sum()
        mean = np.sum(t * p)
        return float(np.sqrt(np.sum((t - mean) ** 2 * p)))

    return (f"pulse-demo: {channel.label}, rms width {rms_width(pulse.samples):.4g} -> "
            f"{rms_width(shaped.samples):.4g} ps, PAPR {papr(pulse):.3f} -> {papr(shaped):.3f} dB -> {where}")


def _snr_grid(cfg: ScenarioConfig) -> list[float]:
    lo, hi, step = cfg["sweep.ebn0_min"], cfg["sweep.ebn0_max"], cfg["sweep.ebn0_step"]
    if step <= 0 or hi < lo:
        raise ValueError("SNR grid needs ebn0_step > 0 and ebn0_max >= ebn0_min")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 10) for i in range(count)]


def _run_sweep(cfg: ScenarioConfig, grid: list[float], snapshot: float | None):
    link = _link_config(cfg)
    channel = build_channel(cfg, _channel_grid(cfg))
    return run_ber_sweep(link, channel, _equalizer(cfg), cfg["equalizer.pdc"], grid,
                         (cfg["sweep.min_errors"], cfg["sweep.max_bits"]), cfg["seed"],
                         cfg["equalizer.pdc_placement"], snapshot, scramble=_scramble(cfg, link))


def cmd_link(cfg: ScenarioConfig, out: str | None) -> str:
    ebn0 = cfg["link.ebn0_db"]
    sweep = _run_sweep(cfg, [ebn0], ebn0)
    r = sweep.results[0]
    where = _emit(out, constellation_csv(sweep.constellation_snapshot, sweep.snapshot_tx_index))
    return (f"link: Eb/N0 {r.ebn0_db:g} dB (Es/N0 {r.esn0_db:.3g} dB), BER {r.ber:.3e} "
            f"({r.bit_errors}/{r.bits_simulated}), eq {sweep.labels['eq']}, pdc {sweep.labels['pdc']} -> {where}")


def cmd_sweep(cfg: ScenarioConfig, out: str | None) -> str:
    grid = _snr_grid(cfg)
    snap = cfg["sweep.snapshot_ebn0"].strip()
    sweep = _run_sweep(cfg, grid, float(snap) if snap else None)
    where = _emit(out, sweep_csv(sweep))
    if cfg["sweep.constellation_out"]:
        _write_atomic(cfg["sweep.constellation_out"],
                      constellation_csv(sweep.constellation_snapshot, sweep.snapshot_tx_index))
    bers = ", ".join(f"{r.ebn0_db:g}:{r.ber:.2e}" for r in sweep.results)
    return (f"sweep: {len(grid)} points, eq {sweep.labels['eq']}, pdc {sweep.labels['pdc']}, "
            f"BER [{bers}] -> {where}")


def cmd_scramble_demo(cfg: ScenarioConfig, out: str | None) -> str:
    link = _link_config(cfg)
    profile_ch = scramble_profile(cfg["scramble.key"], link.band, cfg["scramble.metric_ps"],
                                  cfg["scramble.segments"])
    profile = phase_profile(profile_ch)
    metric = integrated_gdd_metric(profile, link.band)
    inverse_error = float(np.max(np.abs(profile_ch.h * profile_ch.conjugate().h - 1)))
    est = estimate_fir(profile_ch, link)
    m = 2 if link.scheme == "BPSK" else 4
    feasible = float(m) ** est.cml <= cfg["equalizer.state_budget"]
    rows = [(f"{f:.6f}", f"{p:.9g}", f"{t:.9g}", f"{g:.9g}")
            for f, p, t, g in zip(profile_ch.freq_grid, profile.phase_unwrapped, profile.group_delay, profile.gdd)]
    where = _emit(out, _csv(["freq_GHz", "phase_rad", "group_delay_ps", "gdd_ps2"], rows))
    return (f"scramble-demo: key {cfg['scramble.key']}, metric {metric:.1f} ps "
            f"({metric * link.symbol_rate * 1e-3:.1f} symbols), CML {est.cml} symbols, MLSE "
            f"{'feasible' if feasible else 'infeasible'}, inverse error {inverse_error:.1e} -> {where}")


COMMANDS = {
    "atmosphere": cmd_atmosphere, "gdd": cmd_gdd, "metric": cmd_metric, "pulse-demo": cmd_pulse_demo,
    "link": cmd_link, "sweep": cmd_sweep, "scramble-demo": cmd_scramble_demo,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="thzgdd", description="Terahertz GDD channel and link simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} pipeline")
        p.add_argument("--seed", type=int, help="master random seed")
        p.add_argument("--out", help="output CSV path (summary only when omitted)")
        p.add_argument("--preset", choices=sorted(PRESETS))
        p.add_argument("--config", help="flat 'key = value' config file")
        p.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="set any config key (repeatable)")
        p.add_argument("--path", action="append", default=None, metavar="DELAY_PS:RE:IM",
                       help="discrete path (repeatable); adds multipath to the channel")
        p.add_argument("--scramble", metavar="KEY:METRIC_PS:SEGMENTS", help="GDD scrambling profile")
        for flag, key in FLAG_KEYS.items():
            p.add_argument(flag, dest=key, default=None, metavar=key.split(".")[-1].upper())
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    values = {}
    for key in FLAG_KEYS.values():
        value = getattr(args, key, None)
        if value is not None:
            values[key] = value
    if args.path:
        for text in args.path:
            parse_path(text)
        values["channel.paths"] = ";".join(args.path)
    if args.scramble:
        parts = args.scramble.split(":")
        if len(parts) != 3:
            raise ConfigError("--scramble expects key:metric_ps:segments")
        values.update({"scramble.enabled": True, "scramble.key": parts[0], "scramble.metric_ps": parts[1],
                       "scramble.segments": parts[2]})
    if args.seed is not None:
        values["seed"] = args.seed
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _category(exc: BaseException) -> str:
    if isinstance(exc, SweepPointError):
        return _category(exc.cause)
    for kind, name in ((CatalogError, "catalog"), (CoverageError, "coverage"), (GridError, "grid"),
                       (MlseComplexityError, "complexity"), (NonInvertibleChannelError, "non_invertible"),
                       (MaskedPhaseError, "masked_phase"), (EqualizerError, "equalizer"), (OSError, "io")):
        if isinstance(exc, kind):
            return name
    return "value"


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            raise UsageError("a command is required")
        text = None
        if args.config:
            try:
                with open(args.config, encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                raise UsageError(f"cannot read config file: {exc}") from None
        cfg = resolve_config(args.preset, text, _overrides(args))
    except (UsageError, ConfigError) as exc:
        print(f"thzgdd: error: usage: {exc}", file=sys.stderr)
        return 2

    if args.dump_config:
        if args.out:
            _write_atomic(args.out, cfg.dump())
        else:
            sys.stdout.write(cfg.dump())
        return 0
    try:
        summary = COMMANDS[args.command](cfg, args.out)
    except ConfigError as exc:
        print(f"thzgdd: error: usage: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"thzgdd: error: {_category(exc)}: {exc}", file=sys.stderr)
        return 1
    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
