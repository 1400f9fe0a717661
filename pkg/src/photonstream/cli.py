"""Command-line front end: simulate -> analyze -> fit, plus budget and brightness.

Exit codes: 0 ok, 2 configuration/usage/parse error, 3 I/O error,
4 statistically empty peak windows, 5 fit did not converge.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

from . import histogram as H
from .emitter import EmitterParams, sample_stream_sharded
from .fitting import ConvergenceError, DegenerateDataError, fit_saturation, fit_visibility_power, fit_wandering
from .interference import DetectorModel, InterferometerConfig, simulate_hbt, simulate_mz
from .rng import spawn
from .timetag_io import (
    FormatError,
    file_checksum,
    fit_report_fields,
    read_budget_csv,
    read_series_csv,
    read_timetags,
    write_csv,
    write_histogram,
    write_report,
    write_timetags,
)

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_EMPTY = 4
EXIT_NOCONVERGE = 5


class ConfigError(ValueError):
    pass


@dataclass
class RunSettings:
    n_pulses: int = 100_000
    seed: int = 0
    output: str = "timetags.csv"
    binary: bool = False
    setup: str = "mz"  # mz | hbt


@dataclass
class RunConfig:
    emitter: EmitterParams
    interferometer: InterferometerConfig
    detector: DetectorModel
    run: RunSettings


_SECTIONS = {
    "emitter": EmitterParams,
    "interferometer": InterferometerConfig,
    "detector": DetectorModel,
    "run": RunSettings,
}


def _convert(raw: str, typ):
    if typ is bool or typ == "bool":
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if typ is int or typ == "int":
        return int(raw)
    if typ is float or typ == "float":
        return float(raw)
    return raw.strip()


def load_config(path: str | None, overrides: list[str] = ()) -> RunConfig:
    """Parse an INI run configuration and ``section.key=value`` overrides."""
    values: dict[str, dict[str, str]] = {s: {} for s in _SECTIONS}
    if path is not None:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        for section in cp.sections():
            if section not in _SECTIONS:
                raise ConfigError(f"unknown section [{section}]")
            values[section].update(cp[section])
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        key, val = item.split("=", 1)
        section, name = key.split(".", 1)
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section {section!r}")
        values[section][name] = val
    built = {}
    for section, cls in _SECTIONS.items():
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for name, raw in values[section].items():
            if name not in types:
                raise ConfigError(f"unknown key {section}.{name}")
            try:
                kwargs[name] = _convert(raw, types[name])
            except ValueError as exc:
                raise ConfigError(f"{section}.{name}: {exc}") from None
        try:
            built[section] = cls(**kwargs)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {exc}") from None
    cfg = RunConfig(**built)
    if cfg.run.setup not in ("mz", "hbt"):
        raise ConfigError("run.setup must be 'mz' or 'hbt'")
    if cfg.run.n_pulses < 0 or cfg.run.seed < 0:
        raise ConfigError("run.n_pulses and run.seed must be >= 0")
    if cfg.run.setup == "mz":
        try:
            cfg.interferometer.delay_in_periods(cfg.emitter.pulse_period)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return cfg


def run_simulation(cfg: RunConfig, threads: int = 1):
    """Source and detection for a run config; returns (stream, events)."""
    source_seed, detect_seed = spawn(cfg.run.seed, 2)
    if threads > 1:
        with ProcessPoolExecutor(threads) as pool:
            stream = sample_stream_sharded(cfg.emitter, cfg.run.n_pulses, source_seed, threads, pool)
    else:
        stream = sample_stream_sharded(cfg.emitter, cfg.run.n_pulses, source_seed, 1)
    if cfg.run.setup == "hbt":
        events = simulate_hbt(stream, cfg.detector, detect_seed)
    else:
        events = simulate_mz(stream, cfg.interferometer, cfg.detector, cfg.emitter, detect_seed)
    return stream, events


def _metadata(cfg: RunConfig) -> dict:
    meta = {"seed": cfg.run.seed, "n_pulses": cfg.run.n_pulses, "setup": cfg.run.setup,
            "period_ns": cfg.emitter.pulse_period}
    for section in ("emitter", "interferometer", "detector"):
        obj = getattr(cfg, section)
        for f in fields(obj):
            meta[f"{section}.{f.name}"] = getattr(obj, f.name)
    return meta


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, args.set or [])
    if args.seed is not None:
        cfg.run.seed = args.seed
    if args.n_pulses is not None:
        cfg.run.n_pulses = args.n_pulses
    out = args.output or cfg.run.output
    stream, events = run_simulation(cfg, args.threads)
    write_timetags(events, out, binary=args.binary or cfg.run.binary, metadata=_metadata(cfg))
    n0, n1 = events.counts()
    print(f"emitted_photons = {len(stream)}")
    print(f"detected_events = {len(events)}")
    print(f"detector0_events = {n0}")
    print(f"detector1_events = {n1}")
    print(f"output = {out}")
    return 0


def _period_from(header: dict, given: float | None) -> float:
    if given is not None:
        return given
    if "period_ns" in header:
        return float(header["period_ns"])
    raise ConfigError("--period is required (tag file carries no period)")


def cmd_analyze(args) -> int:
    try:
        return _analyze(args)
    except H.EmptyPeaksError:
        raise
    except ValueError as exc:
        if isinstance(exc, (ConfigError, FormatError)):
            raise
        raise ConfigError(str(exc)) from None


def _analyze(args) -> int:
    events, header = read_timetags(args.tagfile, with_header=True)
    period = _period_from(header, args.period)
    delay = args.delay
    if delay is None and args.mode == "visibility":
        if "interferometer.delay" not in header:
            raise ConfigError("--delay is required")
        delay = float(header["interferometer.delay"])
    n_ref = args.reference_peaks if args.reference_peaks is not None else (10 if args.mode == "g2" else 14)
    try:
        cfg = H.PeakIntegrationConfig(period=period, window=args.window, n_reference_peaks=n_ref,
                                      delay=delay if args.mode == "visibility" else None,
                                      n_background_windows=args.background_windows)
        refs = cfg.reference_indices()
        reach = max(max(abs(k) for k in refs), abs(cfg.delay_index or 0)) + 1
        if args.correct_background:
            reach = max(reach, cfg.n_background_windows + 1)
        max_delay = args.max_delay or (reach + 1) * period
        max_delay = round(max_delay / args.bin_width) * args.bin_width
        hist = H.build_histogram(events, args.bin_width, max_delay)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_histogram(hist, out / "histogram.txt", file_checksum(args.tagfile))
    write_csv(out / "histogram.csv", ["delay_ns", "counts"],
              ((round(float(c), 6), int(n)) for c, n in zip(hist.centers, hist.counts)))

    fields_: dict = {"mode": args.mode, "source": str(args.tagfile), "period_ns": period,
                     "window_ns": args.window, "reference_peaks": n_ref}
    if args.mode == "g2":
        est = H.estimate_g2(hist, cfg)
        areas = est.areas
        fields_.update({"g2": est.value, "g2_uncertainty": est.uncertainty})
    else:
        R = args.reflectivity
        if R is None:
            R = float(header.get("interferometer.reflectivity", 0.5))
        fields_["reflectivity"] = R
        fields_["delay_ns"] = delay
        if args.correct_background:
            est = H.background_correct(hist, cfg, R)
        else:
            est = H.estimate_visibility(H.integrate_peaks(hist, cfg), R)
        areas = est.areas
        fields_.update({"visibility_raw": est.raw, "visibility_raw_uncertainty": est.uncertainty})
        if est.corrected is not None:
            fields_.update({"visibility_corrected": est.corrected,
                            "visibility_corrected_uncertainty": est.corrected_uncertainty,
                            "background_mean": est.background, "flag.clamped": est.clamped})
            write_csv(out / "background.csv", ["window_index", "delay_ns", "counts"],
                      ((m, round(c, 6), int(n)) for m, (c, n) in enumerate(est.background_windows, start=1)))
        fields_.update({"area.minus_delay": areas.a_minus, "area.plus_delay": areas.a_plus})
    fields_.update({"area.zero": areas.a0, "area.reference_mean": areas.mean})

    rows = [(0, 0.0, areas.a0, "zero")]
    if areas.a_minus is not None:
        d = cfg.delay_index
        rows += [(-d, -d * period, areas.a_minus, "minus_delay"), (d, d * period, areas.a_plus, "plus_delay")]
    rows += [(k, k * period, a, "reference") for k, a in areas.reference.items()]
    rows.sort(key=lambda r: r[0])
    write_csv(out / "peaks.csv", ["peak_index", "delay_ns", "area", "role"],
              ((k, round(t, 6), int(a), role) for k, t, a, role in rows))
    text = write_report(fields_, out / "report.txt")
    sys.stdout.write(text)
    return 0


_FITTERS = {"saturation": fit_saturation, "power-linear": fit_visibility_power, "wandering": fit_wandering}


def cmd_fit(args) -> int:
    series = read_series_csv(args.series)
    if args.fix_tau_c is not None and args.model != "wandering":
        raise ConfigError("--fix-tau-c only applies to the wandering model")
    try:
        if args.model == "wandering":
            fit = fit_wandering(series, fixed_tau_c=args.fix_tau_c)
        else:
            fit = _FITTERS[args.model](series)
    except (DegenerateDataError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    report = fit_report_fields(fit)
    report["source"] = str(args.series)
    path = Path(args.report) if args.report else None
    text = write_report(report, path)
    if args.residuals:
        write_csv(args.residuals, ["x", "y", "sigma", "model", "residual"],
                  zip(series.x, series.y, series.sigma, fit.predict(series.x), fit.residuals))
    sys.stdout.write(text)
    return 0


def cmd_budget(args) -> int:
    elements = read_budget_csv(args.elements)
    try:
        eta, sigma = H.efficiency_budget([(v, s) for _, v, s in elements])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    fields_ = {f"element.{name}": v for name, v, _ in elements}
    fields_.update({"eta": eta, "eta_uncertainty": sigma})
    sys.stdout.write(write_report(fields_, args.report))
    return 0


def cmd_brightness(args) -> int:
    try:
        b = H.absolute_brightness(args.detected_rate, args.pump_rate, args.detector_efficiency)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    fields_ = {"detected_rate_mhz": args.detected_rate, "pump_rate_mhz": args.pump_rate,
               "detector_efficiency": args.detector_efficiency, "brightness": b}
    sys.stdout.write(write_report(fields_, args.report))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="photonstream", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a detection time-tag file")
    s.add_argument("config", nargs="?", help="INI run configuration")
    s.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config key")
    s.add_argument("--seed", type=int)
    s.add_argument("--n-pulses", type=int)
    s.add_argument("-o", "--output")
    s.add_argument("--binary", action="store_true", help="write the binary time-tag variant")
    s.add_argument("--threads", type=int, default=1, help="source shards/worker processes (default 1)")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="histogram a tag file and extract g2 or visibility")
    a.add_argument("tagfile")
    a.add_argument("--mode", choices=("g2", "visibility"), default="visibility")
    a.add_argument("--period", type=float, help="pulse period in ns (default: from tag header)")
    a.add_argument("--window", type=float, default=2.0)
    a.add_argument("--reference-peaks", type=int, help="default 10 (g2) or 14 (visibility)")
    a.add_argument("--delay", type=float, help="interferometer delay in ns (default: from tag header)")
    a.add_argument("--reflectivity", type=float, help="output splitter reflectivity (default: from tag header)")
    a.add_argument("--correct-background", action="store_true")
    a.add_argument("--background-windows", type=int, default=14)
    a.add_argument("--bin-width", type=float, default=0.1)
    a.add_argument("--max-delay", type=float)
    a.add_argument("--out-dir", default="analysis")
    a.set_defaults(func=cmd_analyze)

    f = sub.add_parser("fit", help="fit a model to an x,y,sigma series")
    f.add_argument("series")
    f.add_argument("--model", choices=tuple(_FITTERS), required=True)
    f.add_argument("--fix-tau-c", type=float)
    f.add_argument("--report")
    f.add_argument("--residuals")
    f.set_defaults(func=cmd_fit)

    b = sub.add_parser("budget", help="overall transmission of optical elements")
    b.add_argument("elements", help="CSV with name,value,sigma rows")
    b.add_argument("--report")
    b.set_defaults(func=cmd_budget)

    br = sub.add_parser("brightness", help="absolute brightness per pulse")
    br.add_argument("--detected-rate", type=float, required=True, help="MHz")
    br.add_argument("--pump-rate", type=float, required=True, help="MHz")
    br.add_argument("--detector-efficiency", type=float, required=True)
    br.add_argument("--report")
    br.set_defaults(func=cmd_brightness)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: {exc} (iterations: {exc.iterations})", file=sys.stderr)
        return EXIT_NOCONVERGE
    except H.EmptyPeaksError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except (ConfigError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
