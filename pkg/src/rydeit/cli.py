"""Command-line entry point: predict-peaks, simulate, analyze, sweep-n.

Every run resolves one configuration, writes a canonical copy of it next to
the outputs, and stamps each output with the configuration digest, so any
result file can be traced back to the exact parameters that produced it.
Exit codes: 0 success, 2 validation failure, 3 computation failure, 4 I/O or
file-format failure.
"""

from __future__ import annotations

import argparse
import sys as _sys
from pathlib import Path

import numpy as np

from . import analysis, spectrum, velocitymap
from .config import RunConfig
from .errors import (
    EXIT_OK,
    CalibrationError,
    FitError,
    GeometryError,
    RydeitError,
    ValidationError,
    exit_code_for,
)

_GRID_MARGIN_MHZ = 50.0


def _say(quiet: bool, message: str) -> None:
    if not quiet:
        print(message)


def _resolve_config(args) -> RunConfig:
    config_path = getattr(args, "config", None)
    cfg = RunConfig.from_file(config_path) if config_path else RunConfig()
    overrides = {}
    out_dir = getattr(args, "output_dir", None)
    if out_dir is not None:
        overrides["output_dir"] = out_dir
    seed = getattr(args, "seed", None)
    if seed is not None:
        overrides["seed"] = seed
    return cfg.replace(**overrides) if overrides else cfg


def _prepare_output_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    resolved = out / "resolved_config.txt"
    resolved.write_text(
        f"# digest={cfg.digest()}\n{cfg.to_text()}", encoding="utf-8"
    )
    return out


def _series_tag(series) -> str:
    return "".join(label.replace("/", "") for label in series)


def build_grid(cfg: RunConfig, pathways) -> np.ndarray:
    """Scan grid covering the configured window and every predicted peak.

    The base window comes from the config (or the series-dependent default);
    it is extended, at the same sample step, whenever a predicted pathway
    would fall within one margin of its edge. High-n D runs need this: the
    fine-structure satellites walk far past the default window.
    """
    start, stop = cfg.base_grid_bounds()
    step = (stop - start) / (cfg.grid_points - 1)
    positions = [p.peak_position for p in pathways]
    start = min(start, min(positions) - _GRID_MARGIN_MHZ)
    stop = max(stop, max(positions) + _GRID_MARGIN_MHZ)
    points = int(round((stop - start) / step)) + 1
    return np.linspace(start, stop, points)


def _build_pathways(cfg: RunConfig, n: int, atom, sys, ens, series_labels=None):
    return velocitymap.build_pathway_set(
        n=n,
        series_labels=series_labels or cfg.series,
        atom=atom,
        sys=sys,
        ens=ens,
        f_levels=cfg.f_levels,
        strength_factors=cfg.strength_factors(),
    )


def _scan_groups(cfg: RunConfig, n: int, atom, sys, ens):
    """Pathway sets for one n, one entry per single-scan series group."""
    groups = velocitymap.group_series_for_scan(
        n, cfg.series, atom, sys, ens, cfg.max_scan_span_mhz, cfg.f_levels
    )
    return [
        (labels, _build_pathways(cfg, n, atom, sys, ens, labels))
        for labels in groups
    ]


def cmd_predict_peaks(cfg: RunConfig, quiet: bool) -> int:
    atom = cfg.atom()
    sys = cfg.ladder_system()
    ens = cfg.ensemble(atom)
    out = _prepare_output_dir(cfg)
    for labels, pathways in _scan_groups(cfg, cfg.n, atom, sys, ens):
        path = out / f"pathways_n{cfg.n}{_series_tag(labels)}.txt"
        table = velocitymap.format_pathway_table(pathways)
        path.write_text(
            f"# config_digest={cfg.digest()}\n{table}", encoding="utf-8"
        )
        _say(quiet, f"wrote {len(pathways)} pathways to {path}")
        for p in pathways:
            _say(
                quiet,
                f"  F'={p.f_intermediate} {p.series:>5} n={p.n}: "
                f"position {p.peak_position:+9.2f} MHz, v {p.v_class:+8.2f} m/s, "
                f"weight {p.weight:.3f}",
            )
    return EXIT_OK


def _simulate_trace(cfg: RunConfig, n: int, atom, sys, ens, pathways):
    grid = build_grid(cfg, pathways)
    trace = spectrum.synthesize_trace(
        grid,
        pathways,
        sys,
        ens,
        cfg.quadrature(),
        cfg.cell_length_mm,
        extra_metadata={"config_digest": cfg.digest(), "n": n},
    )
    if cfg.sideband_enabled:
        trace = spectrum.apply_sidebands(trace, cfg.sideband())
    if cfg.distortion_enabled:
        trace = spectrum.distort_axis(trace, cfg.distortion())
    if cfg.noise_rms > 0:
        trace = spectrum.add_measurement_noise(trace, cfg.noise_rms, cfg.seed)
    return trace


def cmd_simulate(cfg: RunConfig, quiet: bool) -> int:
    atom = cfg.atom()
    sys = cfg.ladder_system()
    ens = cfg.ensemble(atom)
    out = _prepare_output_dir(cfg)
    for labels, pathways in _scan_groups(cfg, cfg.n, atom, sys, ens):
        trace = _simulate_trace(cfg, cfg.n, atom, sys, ens, pathways)
        path = out / f"trace_n{cfg.n}{_series_tag(labels)}.txt"
        spectrum.save_trace(path, trace)
        _say(
            quiet,
            f"wrote trace ({len(trace.scan_coordinate)} samples, "
            f"{len(pathways)} pathways) to {path}",
        )
    return EXIT_OK


def calibrate_raw_trace(trace, cfg: RunConfig, rf: float):
    """Map a raw-scan-units trace onto a frequency axis.

    The strongest modulation replicas are fitted on the raw axis and their
    spacing (the known RF frequency) anchors the polynomial axis model.
    Candidates whose line fit degenerates (shoulder bumps between adjacent
    replicas) are quietly dropped; the pairing step never needed them.
    """
    candidates = analysis.detect_peaks(
        trace, cfg.calibrate_prominence, cfg.detect_min_separation_mhz
    )
    half = cfg.calibrate_half_window_mhz
    centers = []
    for c in candidates:
        try:
            centers.append(analysis.fit_peak(trace, (c - half, c + half)).center)
        except (FitError, GeometryError):
            continue
    model = analysis.calibrate_axis(
        np.asarray(centers), rf, degree=cfg.calibration_degree
    )
    return analysis.apply_calibration(trace, model), model


def analyze_trace(trace, cfg: RunConfig, atom, sys):
    """Full inverse pipeline on one trace; returns (report, fits).

    Raw-axis traces are calibrated from their fitted sideband replica
    spacings first; calibrated traces go straight to detection. Sideband
    satellites are removed and the surviving candidates are gated against
    the predicted peak positions before fitting, so modulation artifacts
    never reach the assignment step.
    """
    rf = float(trace.metadata.get("sideband_rf_mhz", 0.0) or 0.0)
    modulated = (
        rf > 0 and float(trace.metadata.get("sideband_modulation_index", 0.0)) > 0
    )

    if trace.axis_kind == spectrum.AXIS_RAW_SCAN_UNITS:
        if not modulated:
            raise CalibrationError(
                "raw-axis trace carries no sideband ruler; cannot calibrate"
            )
        trace, _ = calibrate_raw_trace(trace, cfg, rf)

    n = int(trace.metadata.get("n", cfg.n))
    series_meta = trace.metadata.get("pathway_series", "")
    labels = tuple(s for s in series_meta.split(",") if s) or None
    ens = cfg.ensemble(atom)
    pathways = _build_pathways(cfg, n, atom, sys, ens, labels)
    linewidth = 2.0 * sys.gamma_21
    gate = analysis.ASSIGNMENT_GATE_LINEWIDTHS * linewidth
    predicted = np.array([p.peak_position for p in pathways])

    candidates = analysis.detect_peaks(
        trace, cfg.detect_prominence, cfg.detect_min_separation_mhz
    )
    if modulated:
        heights = analysis.peak_heights(trace, candidates)
        candidates = analysis.filter_sideband_satellites(candidates, heights, rf)
    near_prediction = [
        c for c in candidates if np.min(np.abs(predicted - c)) <= gate
    ]
    ignored = len(candidates) - len(near_prediction)

    fits = [
        analysis.fit_peak(
            trace,
            (c - cfg.fit_half_window_mhz, c + cfg.fit_half_window_mhz),
        )
        for c in near_prediction
    ]
    centers = [f.center for f in fits]

    assignments, merged = analysis.assign_to_pathways(
        centers, pathways, linewidth
    )
    report = analysis.extract_splittings(assignments, atom, sys, merged=merged)
    if ignored:
        report = analysis.SplittingReport(
            records=report.records,
            notes=tuple(report.notes)
            + (f"ignored {ignored} feature(s) far from any predicted peak",),
        )
    return report, fits


def _write_report_files(out: Path, stem: str, report, cfg: RunConfig) -> None:
    stamped = analysis.SplittingReport(
        records=report.records,
        notes=tuple(report.notes) + (f"config_digest={cfg.digest()}",),
    )
    analysis.save_report(out / f"{stem}.txt", stamped)
    analysis.save_report_json(out / f"{stem}.json", stamped)
    plot_lines = ["# columns: n kind label measured_mhz theory_mhz"]
    for r in stamped.records:
        plot_lines.append(
            f"{r.n} {r.kind} {r.label} {r.measured_mhz:.6f} {r.theory_mhz:.6f}"
        )
    (out / f"{stem}_plotdata.txt").write_text(
        "\n".join(plot_lines) + "\n", encoding="utf-8"
    )


def cmd_analyze(cfg: RunConfig, trace_paths, quiet: bool) -> int:
    if not trace_paths:
        raise ValidationError("analyze requires at least one trace file")
    atom = cfg.atom()
    sys = cfg.ladder_system()
    out = _prepare_output_dir(cfg)
    reports = []
    for path in trace_paths:
        trace = spectrum.load_trace(path)
        report, fits = analyze_trace(trace, cfg, atom, sys)
        reports.append(report)
        _say(quiet, f"{path}: {len(fits)} peaks fitted")
        for record in report.records:
            flag = f"  [{record.flag}]" if record.flag else ""
            _say(
                quiet,
                f"  {record.kind} {record.label}: measured "
                f"{record.measured_mhz:.2f} MHz, theory {record.theory_mhz:.2f} "
                f"MHz, bias {record.percent_bias:+.3f}%{flag}",
            )
    merged_report = analysis.merge_reports(reports)
    _write_report_files(out, "splittings", merged_report, cfg)
    _say(quiet, f"wrote report files to {out}")
    return EXIT_OK


def cmd_sweep_n(cfg: RunConfig, quiet: bool) -> int:
    if cfg.n_stop == 0:
        n_values = [cfg.n]
    else:
        if cfg.n_stop < cfg.n:
            raise ValidationError(
                f"reversed n range: n={cfg.n} > n_stop={cfg.n_stop}"
            )
        n_values = list(range(cfg.n, cfg.n_stop + 1))

    atom = cfg.atom()
    sys = cfg.ladder_system()
    ens = cfg.ensemble(atom)
    out = _prepare_output_dir(cfg)

    hfs_span = abs(atom.hyperfine.interval(5, 3))
    overlap_n = velocitymap.overlap_principal_quantum_number(atom, hfs_span, sys)
    if overlap_n is not None:
        _say(quiet, f"predicted unresolved-overlap n: {overlap_n}")

    reports = []
    failures = []
    for n in n_values:
        try:
            n_reports = []
            for labels, pathways in _scan_groups(cfg, n, atom, sys, ens):
                trace = _simulate_trace(cfg, n, atom, sys, ens, pathways)
                trace_path = out / f"trace_n{n}{_series_tag(labels)}.txt"
                spectrum.save_trace(trace_path, trace)
                report, _ = analyze_trace(trace, cfg, atom, sys)
                n_reports.append(report)
            report = analysis.merge_reports(n_reports)
            reports.append(report)
            flags = sorted({r.flag for r in report.records if r.flag})
            suffix = f" [{','.join(flags)}]" if flags else ""
            _say(quiet, f"n={n}: {len(report.records)} intervals{suffix}")
        except RydeitError as exc:
            failures.append((n, exc))
            _say(quiet, f"n={n}: FAILED ({exc})")

    if reports:
        merged_report = analysis.merge_reports(reports)
        if overlap_n is not None:
            merged_report = analysis.SplittingReport(
                records=merged_report.records,
                notes=tuple(merged_report.notes)
                + (f"predicted_overlap_n={overlap_n}",),
            )
        _write_report_files(out, "sweep_splittings", merged_report, cfg)
        _say(quiet, f"wrote aggregate report to {out}")
    if failures:
        return exit_code_for(failures[0][1])
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    # SUPPRESS keeps a subparser from clobbering values already parsed by the
    # top-level parser, so the options work on either side of the subcommand.
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="key=value run configuration file")
    common.add_argument("--output-dir", help="override the output directory")
    common.add_argument("--seed", type=int, help="override the random seed")
    common.add_argument(
        "--quiet", action="store_true", help="suppress progress output"
    )

    parser = argparse.ArgumentParser(
        prog="rydeit",
        description=(
            "Simulate and analyze velocity-selective Rydberg EIT "
            "coupling-scan spectra in thermal Cs vapor."
        ),
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser(
        "predict-peaks",
        help="write the predicted pathway table for one n",
        parents=[common],
    )
    sub.add_parser(
        "simulate",
        help="synthesize one coupling-scan trace",
        parents=[common],
    )
    analyze_p = sub.add_parser(
        "analyze",
        help="run the inverse pipeline on trace files",
        parents=[common],
    )
    analyze_p.add_argument("traces", nargs="+", help="trace files to analyze")
    sub.add_parser(
        "sweep-n",
        help="simulate and analyze a range of principal quantum numbers",
        parents=[common],
    )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        quiet = getattr(args, "quiet", False)
        if args.command == "predict-peaks":
            return cmd_predict_peaks(cfg, quiet)
        if args.command == "simulate":
            return cmd_simulate(cfg, quiet)
        if args.command == "analyze":
            return cmd_analyze(cfg, args.traces, quiet)
        if args.command == "sweep-n":
            return cmd_sweep_n(cfg, quiet)
        raise ValidationError(f"unknown command {args.command!r}")
    except (RydeitError, OSError) as exc:
        line = getattr(exc, "line_number", None)
        where = f" (line {line})" if line else ""
        print(f"error: {exc}{where}", file=_sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    _sys.exit(main())
