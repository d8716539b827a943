"""Whole-of-service latency signatures and slow-down detection."""
from .detect import (AnomalyEvent, ChangeDistribution, ChangeProfile, EventKind, classify_event,
                     compute_changes, detect_anomalies, quantize_distribution)
from .ingest import SampleWindow, SchemaError, TransactionRecord, parse_records, window_records
from .profile import WorkloadProfile, workload_profile
from .signature import (EmpiricalCDF, GoSSummary, Signature, build_ecdf, compare_signatures, fit_signature,
                        gos_summary, initial_estimate, predict_cdf)
from .simulate import AnomalySchedule, Injection, SimConfig, inject_and_label, simulate_mm1, theoretical_k

__version__ = "0.1.0"

__all__ = [
    "AnomalyEvent", "AnomalySchedule", "ChangeDistribution", "ChangeProfile", "EmpiricalCDF", "EventKind",
    "GoSSummary", "Injection", "SampleWindow", "SchemaError", "Signature", "SimConfig", "TransactionRecord",
    "WorkloadProfile", "build_ecdf", "classify_event", "compare_signatures", "compute_changes",
    "detect_anomalies", "fit_signature", "gos_summary", "initial_estimate", "inject_and_label",
    "parse_records", "predict_cdf", "quantize_distribution", "simulate_mm1", "theoretical_k",
    "window_records", "workload_profile",
]
