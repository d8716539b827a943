"""Command line interface: ``tailsig analyze|simulate|profile|report``.

Every option can also be set through an environment variable named
``TAILSIG_`` plus the option's destination in upper case, for example
``TAILSIG_SIGNIFICANCE=0.06``.  Command-line flags win over the environment.

Exit codes: 0 success, 1 error, 2 anomalies found with ``--gate``.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import detect, ingest, pipeline, profile, simulate
from .charts import ReportError, render_report

ENV_PREFIX = "TAILSIG_"
EXIT_OK, EXIT_ERROR, EXIT_GATED = 0, 1, 2

logger = logging.getLogger("tailsig")


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1 so that 2 stays reserved for gated anomalies
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _truthy(text: str) -> bool:
    return text.strip().lower() in ("1", "true", "yes", "on")


def _apply_env(parser: argparse.ArgumentParser) -> None:
    for action in parser._actions:
        if not action.option_strings or action.dest in ("help",):
            continue
        raw = os.environ.get(ENV_PREFIX + action.dest.upper())
        if raw is None:
            continue
        if isinstance(action, argparse._StoreTrueAction):
            action.default = _truthy(raw)
        elif action.type is not None:
            try:
                action.default = action.type(raw)
            except (TypeError, ValueError) as exc:
                raise CliError(f"bad value in {ENV_PREFIX + action.dest.upper()}: {raw!r}") from exc
        else:
            action.default = raw
        if action.choices is not None and action.default not in action.choices:
            raise CliError(f"{ENV_PREFIX + action.dest.upper()}={raw!r} not in {list(action.choices)}")


def _norm_mode(text: str) -> str:
    if text not in detect.NORM_MODES:
        raise argparse.ArgumentTypeError(f"expected one of {detect.NORM_MODES}")
    return text


def _tx_mix(text: str):
    """``login:0.3,pay:0.7`` -> ((label, p), ...)."""
    out = []
    for part in text.split(","):
        label, _, p = part.rpartition(":")
        if not label:
            raise argparse.ArgumentTypeError(f"bad mix entry {part!r}; expected label:probability")
        out.append((label, float(p)))
    return tuple(out)


def build_parser() -> argparse.ArgumentParser:
    d = pipeline.AnalysisConfig()
    p = _Parser(prog="tailsig", description="Latency signatures and slow-down detection from transaction logs.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="fit per-window signatures and detect slow-downs")
    a.add_argument("input", help="transaction log (CSV or NDJSON)")
    a.add_argument("--format", choices=ingest.FORMATS, default="csv")
    a.add_argument("--window-length", type=float, default=d.window_length_ms / 1000,
                   help="window length in seconds (default %(default)s)")
    a.add_argument("--min-samples", type=int, default=d.min_samples)
    a.add_argument("--significance", type=float, default=d.significance)
    a.add_argument("--bin-width", type=float, default=d.bin_width)
    a.add_argument("--stable-band", type=float, default=d.stable_band)
    a.add_argument("--norm-mode", type=_norm_mode, default=d.norm_mode, help="full_period or rolling")
    a.add_argument("--rolling-n", type=int, default=d.rolling_n,
                   help="transitions in the trailing scope for --norm-mode rolling")
    a.add_argument("--tail-alerts", action="store_true", help="let tail slow-downs raise alerts")
    a.add_argument("--max-points", type=int, default=d.max_points)
    a.add_argument("--max-iterations", type=int, default=d.max_iterations)
    a.add_argument("-o", "--output", help="report path (default stdout)")
    a.add_argument("--rejects", help="write rejected input lines as NDJSON here")
    a.add_argument("--gate", action="store_true", help="exit 2 when slow-down alerts are found")

    s = sub.add_parser("simulate", help="generate an M/M/1 transaction log")
    s.add_argument("--arrival-rate", "--lambda", dest="arrival_rate", type=float, required=True,
                   help="jobs per ms")
    s.add_argument("--service-rate", "--mu", dest="service_rate", type=float, required=True, help="jobs per ms")
    s.add_argument("--duration", type=float, required=True, help="simulated time in ms")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--schedule", help="anomaly schedule: JSON file path or inline JSON list")
    s.add_argument("--tx-mix", type=_tx_mix, help="label:probability,... (default one type)")
    s.add_argument("--window-length", type=float, default=d.window_length_ms / 1000,
                   help="window length in seconds used for labels")
    s.add_argument("--format", choices=ingest.FORMATS, default="csv")
    s.add_argument("--epoch-timestamps", action="store_true", help="write epoch ms instead of RFC 3339")
    s.add_argument("--allow-overload", action="store_true", help="permit traffic intensity >= 1")
    s.add_argument("-o", "--out", required=True, help="record file to write")
    s.add_argument("--labels", help="labels CSV path (default <out>.labels.csv)")

    pr = sub.add_parser("profile", help="transaction-mix workload profile")
    pr.add_argument("input")
    pr.add_argument("--format", choices=ingest.FORMATS, default="csv")
    pr.add_argument("-o", "--output", help="profile JSON path (default stdout)")

    r = sub.add_parser("report", help="render charts and CSV tables from an analysis report")
    r.add_argument("report", help="analysis report JSON")
    r.add_argument("--out-dir", default="report", help="output directory (default %(default)s)")

    for parser in (p, a, s, pr, r):
        _apply_env(parser)
    return p


def _emit(text: str, path) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _window_ms(seconds: float) -> int:
    ms = int(round(seconds * 1000))
    if ms <= 0:
        raise CliError("--window-length must be positive")
    return ms


def cmd_analyze(args) -> int:
    config = pipeline.AnalysisConfig(
        window_length_ms=_window_ms(args.window_length), min_samples=args.min_samples,
        significance=args.significance, bin_width=args.bin_width, stable_band=args.stable_band,
        norm_mode=args.norm_mode, rolling_n=args.rolling_n, tail_alerts=args.tail_alerts,
        max_points=args.max_points, max_iterations=args.max_iterations,
    )
    if not 0 < config.significance < 0.5:
        raise CliError("--significance must lie in (0, 0.5)")
    if not 0 < config.bin_width <= 1:
        raise CliError("--bin-width must lie in (0, 1]")
    parsed = ingest.read_records(args.input, args.format)
    if args.rejects:
        with open(args.rejects, "w") as fh:
            parsed.write_rejects(fh)
    analysis = pipeline.analyze_records(parsed.records, config)
    source = {"path": os.path.basename(args.input), "format": args.format,
              "records": len(parsed.records), "rejects": parsed.reject_count}
    report = pipeline.build_report(analysis, parsed.records, config, source)
    _emit(pipeline.dumps_report(report), args.output)
    alerts = pipeline.alert_count(report)
    logger.info("%d windows, %d events, %d alerts", len(report["windows"]), len(report["events"]), alerts)
    return EXIT_GATED if args.gate and alerts else EXIT_OK


def _load_schedule(source) -> simulate.AnomalySchedule:
    if not source:
        return simulate.AnomalySchedule()
    text = source
    if not source.lstrip().startswith(("[", "{")):
        text = Path(source).read_text()
    try:
        return simulate.AnomalySchedule.from_json(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"schedule is not valid JSON: {exc}") from exc


def cmd_simulate(args) -> int:
    config = simulate.SimConfig(args.arrival_rate, args.service_rate, args.duration, args.seed, args.tx_mix)
    schedule = _load_schedule(args.schedule)
    result, labels = simulate.inject_and_label(config, schedule, _window_ms(args.window_length),
                                               allow_overload=args.allow_overload)
    with open(args.out, "w", newline="") as fh:
        ingest.write_records(result.records, fh, args.format, args.epoch_timestamps)
    labels_path = args.labels or f"{args.out}.labels.csv"
    with open(labels_path, "w", newline="") as fh:
        fh.write("window_start,label\n")
        for start, label in labels:
            fh.write(f"{start},{label}\n")
    logger.info("wrote %d records (%d in flight dropped) to %s", len(result.records), result.in_flight, args.out)
    return EXIT_OK


def cmd_profile(args) -> int:
    parsed = ingest.read_records(args.input, args.format)
    prof = profile.workload_profile(parsed.records)
    _emit(json.dumps(pipeline._round_floats(prof.as_dict()), indent=2) + "\n", args.output)
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        report = json.loads(Path(args.report).read_text())
    except json.JSONDecodeError as exc:
        raise ReportError(f"{args.report} is not valid JSON: {exc}") from exc
    try:
        written = render_report(report, args.out_dir)
    except (KeyError, TypeError) as exc:
        raise ReportError(f"malformed report: {exc!r}") from exc
    for name in sorted(written):
        logger.info("wrote %s", written[name])
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "profile": cmd_profile, "report": cmd_report}


def main(argv=None) -> int:
    try:
        parser = build_parser()
    except CliError as exc:
        print(f"tailsig: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError, CliError) as exc:
        # SchemaError, ConfigError and ReportError are ValueErrors
        print(f"tailsig {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
