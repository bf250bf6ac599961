"""
Command-line front end.

    qfclink <subcommand> --scenario FILE --out DIR [--seed N]
            [--noise-rate-convention cw|in-gate] [--no-figures]

Exit codes: 0 success, 1 usage or scenario error, 2 table reproduction
mismatch, 3 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import coincidence as co
from . import montecarlo as mc
from .fitting import fit_conversion_curve, fit_noise_linear, predict_with_band, read_curve_csv
from .model import (
    ConverterParams,
    DomainError,
    DetectorModel,
    FiberLink,
    NoiseModel,
    SourceModel,
    TargetBand,
    cascade_insertion_loss_db,
    cascade_isolation_db,
    fidelity_from_snr,
    link_budget,
    scan_fidelity_vs_length,
    scan_snr_vs_pump,
)
from .output import atomic_write_text, write_csv
from .reproduce import ATTENUATION_DB_PER_KM, OURS, REF, reproduce_table1
from .scenario import Scenario, ScenarioError, load_scenario

log = logging.getLogger("qfclink")

EXIT_OK, EXIT_USAGE, EXIT_MISMATCH, EXIT_IO = 0, 1, 2, 3

DEFAULT_PUMP_GRID = np.linspace(0.0, 3.0, 61)
DEFAULT_LENGTH_GRID = np.linspace(0.0, 150.0, 151)

BUDGET_COLUMNS = ("pump_w", "eta_c", "eta_l", "detected_signal_rate_hz", "detected_noise_rate_hz",
                  "dark_rate_hz", "snr", "fidelity")
FILTER_COLUMNS = ("stage", "target_band", "insertion_loss_db", "isolation_db")
SCAN_PUMP_COLUMNS = ("pump_w", "eta_c", "noise_rate_hz", "snr", "fidelity")
SCAN_LENGTH_COLUMNS = ("length_km", "eta_l", "snr", "fidelity")
TABLE_COLUMNS = ("basis", "n_pp", "n_pm", "n_mp", "n_mm")
COINCIDENCE_FIDELITY_COLUMNS = ("tables", "fidelity", "std_error", "closed_form_fidelity")
HISTOGRAM_COLUMNS = ("bin_start_ns", "counts")
GATED_COLUMNS = ("convention", "k_s", "k_n", "snr", "std_error", "expected_snr", "infinite")
BAND_COLUMNS = ("pump_w", "y_hat", "y_err")
TABLE1_COLUMNS = ("parameter_set", "length_km", "snr", "fidelity_pct", "expected_snr",
                  "expected_fidelity_pct", "snr_model", "fidelity_model_pct", "ok")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _background_scale(scn, convention: str) -> float:
    return 1.0 if convention == "in-gate" else scn.gating.gate_fraction


def _need_link(scn, cmd):
    if not scn.has_link:
        raise UsageError(f"{cmd} needs the link sections (source, converter, noise, fiber, detector)")


def _operating_pump(scn, cmd):
    needs_pump = isinstance(scn.converter, ConverterParams) or scn.noise.mode == "linear"
    if needs_pump and scn.pump_w is None:
        raise UsageError(f"{cmd}: set [converter] pump_w for converter parameters or linear noise")
    return scn.pump_w


def _sweep_grid(scn, axis, default):
    if scn.sweep is None:
        return default
    if scn.sweep.axis != axis:
        raise UsageError(f"[sweep] axis is {scn.sweep.axis}, this subcommand sweeps {axis}")
    return scn.sweep.grid


def _budget(scn, args):
    return link_budget(scn.source, scn.converter, scn.noise, scn.fiber, scn.detector,
                       pump_power=_operating_pump(scn, args.command),
                       background_scale=_background_scale(scn, args.noise_rate_convention))


def cmd_budget(scn, out: Path, args) -> int:
    _need_link(scn, "budget")
    r = _budget(scn, args)
    pump = scn.pump_w if scn.pump_w is not None else float("nan")
    write_csv(out / "budget.csv", BUDGET_COLUMNS,
              [(pump, r.eta_c, r.eta_l, r.detected_signal_rate_hz, r.detected_noise_rate_hz,
                r.dark_rate_hz, r.snr, r.fidelity)])
    if scn.filters:
        rows = [(s.name, s.target_band.value, s.insertion_loss_db, s.isolation_db) for s in scn.filters]
        rows.append(("total_insertion_loss", "", cascade_insertion_loss_db(scn.filters), ""))
        for band in TargetBand:
            rows.append((f"total_isolation_{band.value}", band.value, "",
                         cascade_isolation_db(scn.filters, band)))
        write_csv(out / "filters.csv", FILTER_COLUMNS, rows)
    snr = "inf" if r.snr_is_infinite else f"{r.snr:.4f}"
    print(f"SNR = {snr}  fidelity = {100 * r.fidelity:.2f} %")
    return EXIT_OK


def cmd_scan_pump(scn, out: Path, args) -> int:
    _need_link(scn, "scan-pump")
    if scn.noise.mode != "linear":
        raise UsageError("scan-pump needs a linear noise model ([noise] slope_hz_per_w)")
    grid = _sweep_grid(scn, "pump_w", DEFAULT_PUMP_GRID)
    scan = scan_snr_vs_pump(scn.source, scn.converter, scn.noise, scn.fiber, scn.detector, grid,
                            background_scale=_background_scale(scn, args.noise_rate_convention))
    fid = fidelity_from_snr(scan.snr)
    write_csv(out / "scan_pump.csv", SCAN_PUMP_COLUMNS,
              zip(scan.pump_w, scan.eta_c, scan.noise_rate_hz, scan.snr, np.atleast_1d(fid)))
    write_csv(out / "scan_pump_best.csv", ("best_pump_w", "best_snr"),
              [(scan.best_pump_w, scan.best_snr)])
    if args.figures:
        from .plotting import plot_pump_scan
        plot_pump_scan(scan, out / "scan_pump.png")
    print(f"best SNR {scan.best_snr:.4g} at {scan.best_pump_w:.4g} W")
    return EXIT_OK


def cmd_scan_length(scn, out: Path, args) -> int:
    _need_link(scn, "scan-length")
    grid = _sweep_grid(scn, "length_km", DEFAULT_LENGTH_GRID)
    scan = scan_fidelity_vs_length(scn.source, scn.converter, scn.noise, scn.fiber, scn.detector,
                                   grid, pump_power=_operating_pump(scn, "scan-length"),
                                   background_scale=_background_scale(scn, args.noise_rate_convention))
    write_csv(out / "scan_length.csv", SCAN_LENGTH_COLUMNS,
              zip(scan.length_km, scan.eta_l, scan.snr, scan.fidelity))
    if args.figures:
        from .plotting import plot_length_scan
        plot_length_scan(scan, out / "scan_length.png",
                         label=f"R_S = {scn.source.signal_rate_hz / 1e3:g} kHz")
    print(f"fidelity {100 * scan.fidelity[-1]:.2f} % at {scan.length_km[-1]:g} km")
    return EXIT_OK


def cmd_coincidence(scn, out: Path, args) -> int:
    _need_link(scn, "coincidence")
    r = _budget(scn, args)
    rates = co.ChannelRates.from_link(r, scn.window_s)
    rng = np.random.default_rng(args.seed)
    expected = {b: co.expected_table(b, rates) for b in co.Basis}
    sampled = {b: co.sample_table(t, rng) for b, t in expected.items()}
    closed = co.fidelity_closed_form(rates)
    rows = []
    for label, tables in (("expected", expected), ("sampled", sampled)):
        write_csv(out / f"coincidence_{label}.csv", TABLE_COLUMNS,
                  [(b.value, *t.counts) for b, t in tables.items()])
        try:
            f, se = co.estimate_fidelity(tables, scn.sign)
        except DomainError as exc:
            raise UsageError(f"{label} tables: {exc}") from None
        rows.append((label, f, se, closed))
    write_csv(out / "coincidence_fidelity.csv", COINCIDENCE_FIDELITY_COLUMNS, rows)
    f, se = rows[1][1], rows[1][2]
    print(f"sampled fidelity {100 * f:.2f} +/- {100 * se:.2f} %  (closed form {100 * closed:.2f} %)")
    return EXIT_OK


def cmd_timetags(scn, out: Path, args) -> int:
    _need_link(scn, "timetags")
    gate = scn.gating
    r = link_budget(scn.source, scn.converter, scn.noise, scn.fiber, scn.detector,
                    pump_power=_operating_pump(scn, "timetags"))
    if args.noise_rate_convention == "in-gate":
        noise_cw = mc.in_gate_to_cw(r.detected_noise_rate_hz, gate)
        dark_cw = mc.in_gate_to_cw(r.dark_rate_hz, gate)
    else:
        noise_cw, dark_cw = r.detected_noise_rate_hz, r.dark_rate_hz
    stream = mc.generate_stream(scn.source, r.detected_signal_rate_hz, noise_cw, dark_cw,
                                scn.duration_s, args.seed, pulse_offset_ns=gate.signal_offset_ns)
    hist = mc.fold_histogram(stream, gate)
    res = mc.gated_snr(stream, gate)
    expected = mc.expected_gated_snr(r.detected_signal_rate_hz, noise_cw + dark_cw, gate)
    mc.write_timetags(out / "timetags.tt", stream)
    write_csv(out / "histogram.csv", HISTOGRAM_COLUMNS, zip(hist.bin_starts_ns, hist.counts))
    write_csv(out / "gated_snr.csv", GATED_COLUMNS,
              [(args.noise_rate_convention, res.k_s, res.k_n, res.snr, res.std_error, expected,
                res.infinite)])
    if args.figures:
        from .plotting import plot_histogram
        plot_histogram(hist, gate, out / "histogram.png")
    print(f"{len(stream)} tags, gated SNR {res.snr:.4g} +/- {res.std_error:.2g} (expected {expected:.4g})")
    return EXIT_OK


def _fit_points(scn, args, attr):
    path = args.data or getattr(scn.fit, attr)
    if path is None:
        raise UsageError(f"no data file: pass --data or set [fit] {attr}")
    try:
        return read_curve_csv(path)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _write_fit(fit, points, out: Path, stem: str, args, ylabel: str, yscale: float):
    atomic_write_text(out / f"{stem}.txt", fit.report())
    if not fit.converged:
        log.warning("fit did not converge; no prediction band written")
        return
    xs = np.array([p.x for p in points])
    grid = _sweep_grid_or(args, xs)
    x, y_hat, y_err = predict_with_band(fit, grid)
    write_csv(out / f"{stem}_band.csv", BAND_COLUMNS, zip(x, y_hat, y_err))
    if args.figures:
        from .plotting import plot_fit
        plot_fit(xs, [p.y for p in points], x, y_hat, y_err, out / f"{stem}.png", ylabel, yscale)


def _sweep_grid_or(args, xs):
    scn = args.scenario_obj
    if scn.sweep is not None and scn.sweep.axis == "pump_w":
        return scn.sweep.grid
    return np.linspace(0.0, 1.1 * float(np.max(xs)), 101)


def cmd_fit_efficiency(scn, out: Path, args) -> int:
    points = _fit_points(scn, args, "efficiency_data")
    length = scn.fit.waveguide_length_m
    if length is None and isinstance(scn.converter, ConverterParams):
        length = scn.converter.waveguide_length
    if length is None:
        raise UsageError("fit-efficiency needs [fit] waveguide_length_m")
    fit = fit_conversion_curve(points, length)
    _write_fit(fit, points, out, "fit_efficiency", args, "Conversion efficiency (%)", 100.0)
    p = fit.parameters
    print(f"eta_max = {p['eta_max']:.6g}  alpha_qfc = {p['alpha_qfc']:.6g} W^-1 m^-2  "
          f"converged = {fit.converged}")
    return EXIT_OK


def cmd_fit_noise(scn, out: Path, args) -> int:
    points = _fit_points(scn, args, "noise_data")
    fit = fit_noise_linear(points)
    _write_fit(fit, points, out, "fit_noise", args, "Noise rate (Hz)", 1.0)
    print(f"slope = {fit.parameters['slope_hz_per_w']:.6g} Hz/W")
    return EXIT_OK


def cmd_repro_table1(scn, out: Path, args) -> int:
    rows = reproduce_table1()
    write_csv(out / "table1.csv", TABLE1_COLUMNS,
              [(r.parameter_set, r.length_km, r.snr, r.fidelity_pct, r.expected_snr,
                r.expected_fidelity_pct, r.snr_model, r.fidelity_model_pct,
                r.snr_ok and r.fidelity_ok) for r in rows])
    bad = [r for r in rows if not (r.snr_ok and r.fidelity_ok)]
    for r in rows:
        status = "ok" if r.snr_ok and r.fidelity_ok else "MISMATCH"
        print(f"{r.parameter_set:4s} {r.length_km:5.0f} km  SNR {r.snr} (table {r.expected_snr})  "
              f"F {r.fidelity_pct} % (table {r.expected_fidelity_pct} %)  {status}")
    if args.figures:
        from .plotting import COLORS, plot_fidelity_curves
        lengths = np.linspace(0, 150, 151)
        curves = []
        for pset, ls in ((OURS, "-"), (REF, "--")):
            for rs, color in ((pset.signal_rate_hz, COLORS["red"]), (118.0e3, COLORS["blue"]),
                              (327.7e3, COLORS["green"])):
                scan = scan_fidelity_vs_length(
                    SourceModel(rs), pset.eta_c, NoiseModel.fixed(pset.noise_rate_hz),
                    FiberLink(0.0, ATTENUATION_DB_PER_KM),
                    DetectorModel(pset.detector_efficiency, pset.dark_rate_hz), lengths)
                curves.append((f"{pset.name} {rs / 1e3:g} kHz", lengths, scan.fidelity, ls, color))
        points = [(r.length_km, r.fidelity_model_pct / 100, "o" if r.parameter_set == "ours" else "D",
                   "k") for r in rows]
        plot_fidelity_curves(curves, out / "table1_fidelity.png", points)
    if bad:
        print(f"{len(bad)} value(s) outside tolerance", file=sys.stderr)
        return EXIT_MISMATCH
    return EXIT_OK


COMMANDS = {
    "budget": cmd_budget,
    "scan-pump": cmd_scan_pump,
    "scan-length": cmd_scan_length,
    "coincidence": cmd_coincidence,
    "timetags": cmd_timetags,
    "fit-efficiency": cmd_fit_efficiency,
    "fit-noise": cmd_fit_noise,
    "repro-table1": cmd_repro_table1,
}
# subcommands that run without a scenario file
SCENARIO_OPTIONAL = {"repro-table1"}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qfclink", description="Frequency-conversion link budget and simulation.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--scenario", type=Path, required=name not in SCENARIO_OPTIONAL)
        s.add_argument("--out", type=Path, required=True)
        s.add_argument("--seed", type=int, default=None,
                       help="overrides [random] seed in the scenario")
        s.add_argument("--noise-rate-convention", choices=("cw", "in-gate"), default="in-gate",
                       help="whether quoted noise/dark rates are in-gate (default) or continuous-wave")
        s.add_argument("--no-figures", dest="figures", action="store_false",
                       help="write CSV/text output only")
        if name.startswith("fit-"):
            s.add_argument("--data", type=Path, default=None,
                           help="CSV with header pump_w,value[,weight]")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        if args.scenario is not None:
            scn = load_scenario(args.scenario)
        else:
            scn = Scenario()
        if args.seed is None:
            args.seed = scn.seed
        args.scenario_obj = scn
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](scn, args.out, args)
    except (ScenarioError, UsageError, DomainError) as exc:
        print(f"qfclink: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"qfclink: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
