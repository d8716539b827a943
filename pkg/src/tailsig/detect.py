"""Change profiles over consecutive signatures and slow-down detection.

Raw parameter deltas between consecutive fitted windows are normalised
sign-wise: negative deltas are divided by the largest negative magnitude,
positive deltas by the largest positive delta, so every change lies in
``[-1, 1]``.  The normalised changes are bucketed into fixed-width bins; a
transition is anomalous when it lands in a rare bin (probability at or below
the significance level).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .signature import Signature

DEFAULT_SIGNIFICANCE = 0.05
DEFAULT_BIN_WIDTH = 0.1
DEFAULT_STABLE_BAND = 0.1
NORM_MODES = ("full_period", "rolling")

# normalised values are rounded so that positive rescaling of the raw series
# cannot move a value across a bin edge through floating point noise
_NORM_DIGITS = 12


class EventKind(str, enum.Enum):
    SLOW_DOWN = "SlowDown"
    SPEED_UP = "SpeedUp"
    TAIL_SLOW_DOWN = "TailSlowDown"
    TAIL_SPEED_UP = "TailSpeedUp"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Transition:
    window_index: int  # index of the newer window
    delta_k_raw: float
    delta_j_raw: float
    delta_k_norm: float
    delta_j_norm: float


@dataclass(frozen=True)
class ChangeProfile:
    transitions: tuple[Transition, ...]
    mode: str = "full_period"

    def __len__(self):
        return len(self.transitions)

    def norm(self, parameter: str) -> np.ndarray:
        attr = _param_attr(parameter)
        return np.array([getattr(t, attr) for t in self.transitions], dtype=float)


@dataclass(frozen=True)
class ChangeDistribution:
    parameter: str
    bin_width: float
    edges: np.ndarray
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def probabilities(self) -> np.ndarray:
        if self.total == 0:
            return np.zeros(len(self.counts))
        return self.counts / self.total

    @property
    def n_bins(self) -> int:
        return len(self.counts)

    def bin_index(self, value: float) -> int:
        return bin_index(value, self.bin_width, self.n_bins)

    def probability_of(self, value: float) -> float:
        return float(self.probabilities[self.bin_index(value)])

    def rows(self):
        """``(bin_low, bin_high, count, probability)`` per bin."""
        probs = self.probabilities
        return [(float(self.edges[i]), float(self.edges[i + 1]), int(self.counts[i]), float(probs[i]))
                for i in range(self.n_bins)]


@dataclass(frozen=True)
class AnomalyEvent:
    window_index: int
    kind: EventKind
    delta_k_norm: float
    delta_j_norm: float
    bin_probability: float
    alert: bool = True


def _param_attr(parameter: str) -> str:
    if parameter not in ("k", "j"):
        raise ValueError(f"parameter must be 'k' or 'j', got {parameter!r}")
    return f"delta_{parameter}_norm"


# -- normalisation ------------------------------------------------------------

def _normalize_one(d: float, scope: np.ndarray) -> float:
    if d == 0:
        return 0.0
    if d < 0:
        denom = -scope[scope < 0].min()
    else:
        denom = scope[scope > 0].max()
    return round(d / denom, _NORM_DIGITS)


def normalize_changes(deltas, mode: str = "full_period", window_n: Optional[int] = None) -> np.ndarray:
    """Sign-wise normalisation of a raw delta series into ``[-1, 1]``.

    In ``rolling`` mode each delta is scaled by the extremes of the trailing
    ``window_n`` deltas (itself included) instead of the whole series.
    """
    d = np.asarray(deltas, dtype=float)
    if mode == "full_period":
        return np.array([_normalize_one(v, d) for v in d])
    if mode == "rolling":
        if not window_n or window_n < 1:
            raise ValueError("rolling mode needs window_n >= 1")
        return np.array([_normalize_one(v, d[max(0, i - window_n + 1):i + 1]) for i, v in enumerate(d)])
    raise ValueError(f"unknown normalisation mode {mode!r}")


def compute_changes(signatures: Sequence[Optional[Signature]], mode: str = "full_period",
                    window_n: Optional[int] = None) -> ChangeProfile:
    """Change profile over a window-ordered signature series.

    ``None`` marks an unfittable window.  A transition is formed only between
    two adjacent windows that both hold a converged fit.
    """
    ok = [s is not None and s.converged for s in signatures]
    if sum(ok) < 2:
        raise ValueError("need at least two converged signatures")
    idx, dk, dj = [], [], []
    for i in range(1, len(signatures)):
        if ok[i] and ok[i - 1]:
            idx.append(i)
            dk.append(signatures[i].k - signatures[i - 1].k)
            dj.append(signatures[i].j - signatures[i - 1].j)
    nk = normalize_changes(dk, mode, window_n)
    nj = normalize_changes(dj, mode, window_n)
    return ChangeProfile(
        tuple(Transition(i, float(a), float(b), float(c), float(e)) for i, a, b, c, e in zip(idx, dk, dj, nk, nj)),
        mode,
    )


# -- quantisation -------------------------------------------------------------

def n_bins_for(bin_width: float) -> int:
    return math.ceil(round(2.0 / bin_width, 9))


def bin_index(value: float, bin_width: float, n_bins: Optional[int] = None) -> int:
    """Bin of ``value`` on ``[-1, 1]``: ``[-1, -1+w), ..., [1-w, 1]``."""
    if n_bins is None:
        n_bins = n_bins_for(bin_width)
    i = math.floor(round((value + 1.0) / bin_width, 9))
    return min(max(i, 0), n_bins - 1)


def quantize_distribution(profile: ChangeProfile, parameter: str = "k",
                          bin_width: float = DEFAULT_BIN_WIDTH) -> ChangeDistribution:
    if not 0 < bin_width <= 1:
        raise ValueError("bin_width must lie in (0, 1]")
    if len(profile) == 0:
        raise ValueError("change profile is empty")
    n = n_bins_for(bin_width)
    edges = np.minimum(-1.0 + bin_width * np.arange(n + 1), 1.0)
    edges = np.round(edges, 12)
    counts = np.zeros(n, dtype=int)
    for v in profile.norm(parameter):
        counts[bin_index(v, bin_width, n)] += 1
    return ChangeDistribution(parameter, bin_width, edges, counts)


# -- classification and flagging ----------------------------------------------

def classify_event(delta_k_norm: float, delta_j_norm: float,
                   stable_band: float = DEFAULT_STABLE_BAND) -> Optional[EventKind]:
    """Map a normalised ``(dk, dj)`` pair to an event kind, or ``None``.

    A change in ``k`` beyond the stable band decides the kind regardless of
    ``j``; only when ``k`` is stable does the sign of ``dj`` pick a tail event.
    """
    if abs(delta_k_norm) > stable_band:
        return EventKind.SLOW_DOWN if delta_k_norm < 0 else EventKind.SPEED_UP
    if abs(delta_j_norm) > stable_band:
        return EventKind.TAIL_SLOW_DOWN if delta_j_norm < 0 else EventKind.TAIL_SPEED_UP
    return None


def detect_anomalies(profile: ChangeProfile, dist_k: ChangeDistribution,
                     significance: float = DEFAULT_SIGNIFICANCE,
                     stable_band: float = DEFAULT_STABLE_BAND,
                     dist_j: Optional[ChangeDistribution] = None,
                     tail_alerts: bool = False) -> list[AnomalyEvent]:
    """Flag transitions whose change falls in a rare bin.

    Alerts are raised for negative ``k`` changes beyond the stable band in a
    bin of probability ``<= significance``.  Rare positive ``k`` changes are
    reported as non-alerting ``SpeedUp`` events.  When ``dist_j`` is given,
    rare ``j`` changes under a stable ``k`` are reported as tail events; a
    ``TailSlowDown`` alerts only with ``tail_alerts``.
    """
    if not 0 < significance < 0.5:
        raise ValueError("significance must lie in (0, 0.5)")
    if stable_band < 0:
        raise ValueError("stable_band must be >= 0")
    events = []
    for t in profile.transitions:
        dk, dj = t.delta_k_norm, t.delta_j_norm
        if abs(dk) > stable_band:
            p = dist_k.probability_of(dk)
            if p <= significance:
                kind = classify_event(dk, dj, stable_band)
                events.append(AnomalyEvent(t.window_index, kind, dk, dj, p, alert=kind is EventKind.SLOW_DOWN))
        elif dist_j is not None and abs(dj) > stable_band:
            p = dist_j.probability_of(dj)
            if p <= significance:
                kind = classify_event(dk, dj, stable_band)
                events.append(AnomalyEvent(t.window_index, kind, dk, dj, p,
                                           alert=tail_alerts and kind is EventKind.TAIL_SLOW_DOWN))
    return events
