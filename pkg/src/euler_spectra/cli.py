"""Command-line entry point: run, diagnose, classify.

Exit codes: 0 success, 1 usage or configuration problem, 2 numeric
abort (NaN detected mid-run), 3 I/O failure (unreadable input,
unwritable output, corrupt snapshot).
"""

import argparse
import json
import logging
import math
import sys
import time as _time
from pathlib import Path

import numpy as np

from euler_spectra.config import parse_config
from euler_spectra.deformation import (
    SpectraField,
    classify_admissible,
)
from euler_spectra.diagnostics import (
    DiagnosticsCollector,
    DiagnosticsRecord,
    compute_record,
    identity_residuals,
)
from euler_spectra.envelopes import (
    containment_check,
    epsilon_decay_bound,
    growth_envelopes,
    lambda2_plus_exponential_bound,
    moment_balance_residual,
    quadrature_slack,
    uniform_spacing,
    vorticity_transport_residual,
)
from euler_spectra.errors import (
    ConfigurationError,
    ContractViolationError,
    NumericsError,
    SnapshotFormatError,
)
from euler_spectra.fields import fft_forward
from euler_spectra.grid import Grid
from euler_spectra.initial import classify_initial
from euler_spectra.snapshot import load_snapshot, write_snapshot
from euler_spectra.solver import run as solver_run

logger = logging.getLogger("euler_spectra.cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_IO = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage problems via exit code 1."""

    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="euler-spectra",
        description="Pseudospectral Euler solver with deformation-eigenvalue "
                    "diagnostics")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p_run = sub.add_parser("run", help="integrate a configured run")
    p_run.add_argument("--config", required=True,
                       help="path to a JSON run configuration")
    p_run.add_argument("--output-dir", default=None,
                       help="override the configured output directory")
    p_run.add_argument("--quiet", action="store_true",
                       help="suppress progress output")
    p_run.set_defaults(func=cmd_run)

    p_diag = sub.add_parser(
        "diagnose", help="recompute diagnostics from stored snapshots")
    p_diag.add_argument("snapshots", nargs="+",
                        help="snapshot files, in ascending time order")
    p_diag.set_defaults(func=cmd_diagnose)

    p_cls = sub.add_parser(
        "classify", help="classify initial data or a snapshot")
    p_cls.add_argument("snapshot", nargs="?", default=None,
                       help="snapshot file to classify")
    p_cls.add_argument("--config", default=None,
                       help="classify the initial data of a run config")
    p_cls.add_argument("--spectra", action="store_true",
                       help="treat the snapshot payload as eigenvalue "
                            "fields (l1, l2, l3) instead of a velocity")
    p_cls.set_defaults(func=cmd_classify)
    return parser


def _sanitize(obj):
    """Make a summary tree strictly JSON-serializable (NaN/Inf -> null)."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _bound_summaries(collector, grid) -> dict:
    records = collector.records
    classification = collector.classification
    env = growth_envelopes(records, classification)
    violations = containment_check(records, env)
    slack = quadrature_slack(records)
    max_slack = float(np.max(slack)) if slack.size else 0.0
    tolerance = 1e-6 + max_slack
    containment = {
        "satisfied": bool(
            violations["max_lower_violation"] <= tolerance
            and violations["max_upper_violation"] <= tolerance),
        "tolerance": tolerance,
        "quadrature_slack": max_slack,
        **violations,
    }

    exp_bound = lambda2_plus_exponential_bound(records)

    eps = epsilon_decay_bound(records, classification, grid.volume)
    if not eps.applicable:
        eps_summary = {"verdict": "inapplicable", "reason": eps.reason}
    else:
        finite = eps.lhs[np.isfinite(eps.lhs)]
        eps_summary = {
            "verdict": "satisfied" if eps.satisfied else "violated",
            "rhs": eps.rhs,
            "max_lhs": float(np.max(finite)) if finite.size else 0.0,
        }

    out = {
        "envelope_containment": containment,
        "stretching_exponential_bound": exp_bound,
        "epsilon_decay_bound": eps_summary,
    }
    if len(records) >= 5:
        try:
            _, normalized = moment_balance_residual(records)
            out["moment_balance_max_normalized_residual"] = float(
                np.max(np.abs(normalized)))
        except ContractViolationError:
            pass
    return out


def cmd_run(args) -> int:
    config_path = Path(args.config)
    try:
        text = config_path.read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    cfg = parse_config(text)

    out_dir = Path(args.output_dir) if args.output_dir else Path(cfg.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_probe"
        probe.touch()
        probe.unlink()
    except OSError as exc:
        print(f"error: output directory is not writable: {exc}",
              file=sys.stderr)
        return EXIT_IO

    grid = Grid(cfg.n)
    initial = cfg.initial.build(grid)

    collector = DiagnosticsCollector(
        every=cfg.output_every,
        csv_path=out_dir / "timeseries.csv",
        class_tolerance=cfg.class_tolerance,
        eps_floor=cfg.eps_floor)

    observers = [collector]
    if cfg.snapshot_every > 0:
        def snapshot_observer(state):
            if state.step_index % cfg.snapshot_every == 0:
                write_snapshot(
                    out_dir / f"snapshot_{state.step_index:08d}.bin",
                    state.v, state.t)
        observers.append(snapshot_observer)

    total_steps = cfg.solver.step_count()
    progress_stride = max(1, total_steps // 10)

    def progress_observer(state):
        if state.step_index % progress_stride == 0 or \
                state.step_index == total_steps:
            logger.info("step %d/%d  t=%.6g", state.step_index, total_steps,
                        state.t)
    observers.append(progress_observer)

    logger.info("run: n=%d dt=%g t_final=%g nu=%g (%d steps)",
                cfg.n, cfg.solver.dt, cfg.solver.t_final, cfg.solver.nu,
                total_steps)

    started = _time.perf_counter()
    summary = {
        "run": {
            "n": cfg.n,
            "dt": cfg.solver.dt,
            "t_final": cfg.solver.t_final,
            "nu": cfg.solver.nu,
            "dealias": cfg.solver.dealias,
            "output_every": cfg.output_every,
            "initial_kind": cfg.initial.kind,
            "aborted": False,
        },
    }
    exit_code = EXIT_OK
    try:
        final_state = solver_run(initial, cfg.solver, observers)
        write_snapshot(out_dir / "final.bin", final_state.v, final_state.t)
        summary["run"]["steps_completed"] = final_state.step_index
    except NumericsError as exc:
        summary["run"]["aborted"] = True
        summary["run"]["abort"] = {
            "step_index": exc.step_index,
            "time": exc.time,
            "message": str(exc),
        }
        print(f"error: numeric abort: {exc}", file=sys.stderr)
        exit_code = EXIT_NUMERIC
    finally:
        collector.close()

    summary["run"]["wall_time_s"] = _time.perf_counter() - started
    if collector.records:
        summary.update(collector.summary())
        summary.update(_bound_summaries(collector, grid))
    try:
        with open(out_dir / "summary.json", "w") as fh:
            json.dump(_sanitize(summary), fh, indent=2, allow_nan=False)
            fh.write("\n")
    except OSError as exc:
        print(f"error: cannot write summary: {exc}", file=sys.stderr)
        return EXIT_IO

    if exit_code == EXIT_OK:
        logger.info("done in %.1fs; outputs in %s",
                    summary["run"]["wall_time_s"], out_dir)
    return exit_code


def cmd_diagnose(args) -> int:
    loaded = []
    for path in args.snapshots:
        v, t = load_snapshot(path)
        loaded.append((t, v))
    grid = loaded[0][1].grid
    for t, v in loaded[1:]:
        if v.grid != grid:
            raise ContractViolationError(
                "snapshots mix different grids; diagnose needs one resolution")
    times = [t for t, _ in loaded]
    if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
        raise ContractViolationError(
            "snapshots must be supplied in strictly increasing time order")

    spectral = [fft_forward(v) for _, v in loaded]
    classification = classify_initial(spectral[0])

    print(",".join(DiagnosticsRecord.field_names()))
    records = []
    for t, vh in zip(times, spectral):
        record = compute_record(t, vh, classification=classification)
        records.append(record)
        print(",".join(repr(float(x)) for x in record.as_tuple()))

    worst = {"enstrophy_moment": 0.0, "stretching_cubic": 0.0,
             "cubic_product": 0.0}
    for record in records:
        for key, value in identity_residuals(record).items():
            worst[key] = max(worst[key], value)
    names = {"enstrophy_moment": "Z = 2Q",
             "stretching_cubic": "W = -(4/3) C3",
             "cubic_product": "C3 = 3P"}
    tolerances = {"enstrophy_moment": 1e-8, "stretching_cubic": 1e-7,
                  "cubic_product": 1e-8}
    for key, label in names.items():
        verdict = "pass" if worst[key] <= tolerances[key] else "FAIL"
        print(f"identity {label}: {verdict} (max residual {worst[key]:.3e})",
              file=sys.stderr)

    if len(loaded) >= 5:
        try:
            uniform_spacing(times)
        except ContractViolationError:
            print("series residuals skipped: non-uniform snapshot times",
                  file=sys.stderr)
        else:
            series_records = records
            _, normalized = moment_balance_residual(series_records)
            print(f"moment balance dQ/dt + 4P: max normalized residual "
                  f"{float(np.max(np.abs(normalized))):.3e}", file=sys.stderr)
            raw, _ = vorticity_transport_residual(times, spectral)
            print(f"vorticity transport: max residual "
                  f"{float(np.max(raw)):.3e}", file=sys.stderr)
    return EXIT_OK


def cmd_classify(args) -> int:
    if (args.config is None) == (args.snapshot is None):
        raise _UsageError(
            "classify needs exactly one of --config or a snapshot path")
    if args.spectra and args.snapshot is None:
        raise _UsageError("--spectra only applies to snapshot input")

    if args.config is not None:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_IO
        cfg = parse_config(text)
        grid = Grid(cfg.n)
        classification = classify_initial(cfg.initial.build(grid))
    else:
        v, _ = load_snapshot(args.snapshot)
        if args.spectra:
            l1, l2, l3 = v.components
            spectra = SpectraField(v.grid, l1, l2, l3)
            classification = classify_admissible(spectra)
        else:
            classification = classify_initial(fft_forward(v))

    print(f"class: {classification.label.value}")
    print(f"min_lambda2: {classification.min_lambda2!r}")
    print(f"max_lambda2: {classification.max_lambda2!r}")
    print(f"tolerance: {classification.tolerance!r}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(
        level=logging.WARNING if getattr(args, "quiet", False)
        else logging.INFO,
        format="%(message)s")

    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigurationError, ContractViolationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericsError as exc:
        print(f"error: numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SnapshotFormatError as exc:
        print(f"error: bad snapshot: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
