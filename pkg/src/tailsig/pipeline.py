"""End-to-end analysis: records -> windows -> signatures -> changes -> events.

The JSON report built here is the single artifact the ``report`` command
renders charts from.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

from . import detect
from .ingest import DEFAULT_MIN_SAMPLES, DEFAULT_WINDOW_MS, SampleWindow, TransactionRecord, window_records
from .profile import workload_profile
from .signature import (DEFAULT_MAX_ITERATIONS, DEFAULT_MAX_POINTS, DEFAULT_TOL, Signature, fit_window,
                        gos_summary)

logger = logging.getLogger(__name__)

REPORT_VERSION = 1


@dataclass(frozen=True)
class AnalysisConfig:
    window_length_ms: int = DEFAULT_WINDOW_MS
    min_samples: int = DEFAULT_MIN_SAMPLES
    significance: float = detect.DEFAULT_SIGNIFICANCE
    bin_width: float = detect.DEFAULT_BIN_WIDTH
    stable_band: float = detect.DEFAULT_STABLE_BAND
    norm_mode: str = "full_period"
    rolling_n: int = 48
    tail_alerts: bool = False
    max_points: int = DEFAULT_MAX_POINTS
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    tol: float = DEFAULT_TOL


@dataclass
class Analysis:
    windows: list[SampleWindow]
    signatures: list[Optional[Signature]]
    profile: Optional[detect.ChangeProfile]
    dist_k: Optional[detect.ChangeDistribution]
    dist_j: Optional[detect.ChangeDistribution]
    events: list[detect.AnomalyEvent]


def fit_windows(windows: Sequence[SampleWindow], config: AnalysisConfig = AnalysisConfig()) -> list[Optional[Signature]]:
    return [fit_window(w, config.max_points, config.max_iterations, config.tol) if w.fittable else None
            for w in windows]


def analyze_windows(windows: list[SampleWindow], config: AnalysisConfig = AnalysisConfig()) -> Analysis:
    sigs = fit_windows(windows, config)
    n_ok = sum(1 for s in sigs if s is not None and s.converged)
    if n_ok < 2:
        logger.warning("only %d converged windows; change detection skipped", n_ok)
        return Analysis(windows, sigs, None, None, None, [])
    profile = detect.compute_changes(sigs, config.norm_mode,
                                     config.rolling_n if config.norm_mode == "rolling" else None)
    if not profile.transitions:
        logger.warning("no adjacent converged windows; change detection skipped")
        return Analysis(windows, sigs, profile, None, None, [])
    dist_k = detect.quantize_distribution(profile, "k", config.bin_width)
    dist_j = detect.quantize_distribution(profile, "j", config.bin_width)
    events = detect.detect_anomalies(profile, dist_k, config.significance, config.stable_band,
                                     dist_j=dist_j, tail_alerts=config.tail_alerts)
    return Analysis(windows, sigs, profile, dist_k, dist_j, events)


def analyze_records(records: Sequence[TransactionRecord], config: AnalysisConfig = AnalysisConfig()) -> Analysis:
    return analyze_windows(window_records(records, config.window_length_ms, config.min_samples), config)


# -- report -------------------------------------------------------------------

def _round_floats(obj):
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None
        return float(f"{obj:.10g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def signature_record(window: SampleWindow, sig: Optional[Signature]) -> dict:
    rec = {
        "window_start": window.window_start,
        "fittable": window.fittable,
        "k": sig.k if sig else None,
        "j": sig.j if sig else None,
        "sse": sig.sse if sig else None,
        "iterations": sig.iterations if sig else 0,
        "converged": sig.converged if sig else False,
        "n_points": sig.n_points if sig else window.arrival_count,
        "gos": gos_summary(window).as_dict() if window.arrival_count else None,
    }
    if sig and sig.flags:
        rec["flags"] = list(sig.flags)
    return rec


def event_record(event: detect.AnomalyEvent, windows: Sequence[SampleWindow], significance: float) -> dict:
    return {
        "window_start": windows[event.window_index].window_start,
        "kind": event.kind.value,
        "delta_k_norm": event.delta_k_norm,
        "delta_j_norm": event.delta_j_norm,
        "bin_probability": event.bin_probability,
        "significance": significance,
        "alert": event.alert,
    }


def distribution_record(dist: Optional[detect.ChangeDistribution]) -> Optional[list]:
    if dist is None:
        return None
    return [{"bin_low": lo, "bin_high": hi, "count": c, "probability": p} for lo, hi, c, p in dist.rows()]


def build_report(analysis: Analysis, records: Sequence[TransactionRecord], config: AnalysisConfig,
                 source: Optional[dict] = None) -> dict:
    windows = analysis.windows
    transitions = []
    if analysis.profile is not None:
        transitions = [{"window_start": windows[t.window_index].window_start,
                        "delta_k_raw": t.delta_k_raw, "delta_j_raw": t.delta_j_raw,
                        "delta_k_norm": t.delta_k_norm, "delta_j_norm": t.delta_j_norm}
                       for t in analysis.profile.transitions]
    report = {
        "version": REPORT_VERSION,
        "config": asdict(config),
        "input": source or {},
        "windows": [signature_record(w, s) for w, s in zip(windows, analysis.signatures)],
        "transitions": transitions,
        "distributions": {"k": distribution_record(analysis.dist_k), "j": distribution_record(analysis.dist_j)},
        "events": [event_record(e, windows, config.significance) for e in analysis.events],
        "profile": workload_profile(records).as_dict() if records else None,
    }
    return _round_floats(report)


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=False) + "\n"


def alert_count(report: dict) -> int:
    return sum(1 for e in report.get("events", []) if e.get("alert"))
