"""Seeded single-server FIFO (M/M/1) transaction generator.

Used as ground truth: in steady state the sojourn time of an M/M/1 queue is
exponential with rate ``mu - lambda``, so a fitted signature on simulated
output should recover ``k = mu - lambda`` and ``j ~ 0``.  An anomaly schedule
scales the service rate over chosen intervals to inject slow-downs
(``mu_factor < 1``) or speed-ups (``mu_factor > 1``).

Rates are per millisecond and times are milliseconds.
"""
from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .ingest import DEFAULT_WINDOW_MS, TransactionRecord

# 2013-02-04T08:00:00Z; a multiple of the default window length
DEFAULT_EPOCH_MS = 1_359_964_800_000
DEFAULT_TX_TYPE = "request"
_CHUNK = 65_536


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    arrival_rate: float  # lambda, jobs per ms
    service_rate: float  # mu, jobs per ms
    duration: float  # ms
    seed: int = 0
    tx_type_mix: Optional[tuple[tuple[str, float], ...]] = None
    epoch_ms: int = DEFAULT_EPOCH_MS

    def __post_init__(self):
        if not self.arrival_rate >= 0:
            raise ConfigError("arrival_rate must be >= 0")
        if not self.service_rate > 0:
            raise ConfigError("service_rate must be > 0")
        if not self.duration > 0:
            raise ConfigError("duration must be > 0")
        if self.tx_type_mix is not None:
            mix = tuple((str(l), float(p)) for l, p in self.tx_type_mix)
            if not mix or any(p < 0 or not l for l, p in mix):
                raise ConfigError("tx_type_mix needs non-empty labels with non-negative probabilities")
            if abs(sum(p for _, p in mix) - 1.0) > 1e-9:
                raise ConfigError("tx_type_mix probabilities must sum to 1")
            object.__setattr__(self, "tx_type_mix", mix)

    @property
    def rho(self) -> float:
        return self.arrival_rate / self.service_rate


@dataclass(frozen=True)
class Injection:
    start: float
    end: float
    mu_factor: float


@dataclass(frozen=True)
class AnomalySchedule:
    injections: tuple[Injection, ...] = ()

    def __post_init__(self):
        items = tuple(sorted((i if isinstance(i, Injection) else Injection(*i) for i in self.injections),
                             key=lambda i: i.start))
        for inj in items:
            if not inj.start < inj.end:
                raise ConfigError(f"injection [{inj.start}, {inj.end}) is empty")
            if not inj.mu_factor > 0 or inj.mu_factor == 1:
                raise ConfigError(f"mu_factor must be positive and != 1, got {inj.mu_factor}")
        for a, b in zip(items, items[1:]):
            if b.start < a.end:
                raise ConfigError(f"injections [{a.start}, {a.end}) and [{b.start}, {b.end}) overlap")
        object.__setattr__(self, "injections", items)
        object.__setattr__(self, "_starts", [i.start for i in items])

    def __len__(self):
        return len(self.injections)

    def factor_at(self, t: float) -> float:
        pos = bisect.bisect_right(self._starts, t) - 1
        if pos >= 0:
            inj = self.injections[pos]
            if t < inj.end:
                return inj.mu_factor
        return 1.0

    def validate(self, config: SimConfig, allow_overload: bool = False) -> None:
        for inj in self.injections:
            if inj.start < 0 or inj.end > config.duration:
                raise ConfigError(f"injection [{inj.start}, {inj.end}) outside [0, {config.duration})")
            if not allow_overload and config.arrival_rate >= config.service_rate * inj.mu_factor:
                raise ConfigError(f"injection [{inj.start}, {inj.end}) overloads the server "
                                  f"(lambda >= mu * {inj.mu_factor}); pass allow_overload to permit it")

    @classmethod
    def from_json(cls, text: str) -> "AnomalySchedule":
        """Parse ``[{"start": ms, "end": ms, "mu_factor": x}, ...]``."""
        data = json.loads(text)
        if isinstance(data, dict):
            data = data.get("injections", [])
        try:
            return cls(tuple(Injection(float(d["start"]), float(d["end"]), float(d["mu_factor"])) for d in data))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed schedule: {exc}") from exc


@dataclass
class SimulationResult:
    records: list[TransactionRecord]
    arrival_times: np.ndarray  # ms since simulation start, completed jobs only
    sojourn_times: np.ndarray
    in_flight: int  # arrivals still in the system at the horizon, dropped
    config: SimConfig = field(repr=False)

    @property
    def arrivals(self) -> int:
        return len(self.records) + self.in_flight


def theoretical_k(config: SimConfig) -> float:
    """Rate of the exponential M/M/1 sojourn-time distribution, ``mu - lambda``."""
    if config.rho >= 1:
        raise ConfigError(f"traffic intensity {config.rho:.4g} >= 1 has no steady state")
    return config.service_rate - config.arrival_rate


def warmup_cutoff(config: SimConfig) -> tuple[int, float]:
    """Jobs and milliseconds discarded as transient before steady-state checks."""
    return 1000, 10.0 / theoretical_k(config)


def steady_state(result: SimulationResult) -> np.ndarray:
    jobs, ms = warmup_cutoff(result.config)
    first = max(jobs, int(np.searchsorted(result.arrival_times, ms)))
    return result.sojourn_times[first:]


def _arrival_times(rng: np.random.Generator, rate: float, horizon: float) -> np.ndarray:
    parts, t = [], 0.0
    while t < horizon:
        gaps = rng.exponential(1.0 / rate, _CHUNK)
        times = t + np.cumsum(gaps)
        parts.append(times)
        t = float(times[-1])
    times = np.concatenate(parts)
    return times[times < horizon]


def simulate_mm1(config: SimConfig, schedule: AnomalySchedule = AnomalySchedule(),
                 allow_overload: bool = False) -> SimulationResult:
    """Run one FIFO single-server simulation.

    Inter-arrival times are exponential with rate lambda; each job's service
    demand is exponential with the service rate in force when its service
    starts.  Jobs that have not departed by ``config.duration`` are dropped
    and counted in ``in_flight``.  Output is a pure function of the config,
    schedule and seed.
    """
    if not config.arrival_rate > 0:
        raise ConfigError("arrival_rate must be > 0 to simulate")
    if config.rho >= 1 and not allow_overload:
        raise ConfigError(f"traffic intensity {config.rho:.4g} >= 1; pass allow_overload to permit it")
    schedule.validate(config, allow_overload)

    arr_seq, svc_seq, mix_seq = np.random.SeedSequence(config.seed).spawn(3)
    arrivals = _arrival_times(np.random.default_rng(arr_seq), config.arrival_rate, config.duration)
    n = len(arrivals)
    # unit-mean demands, scaled by the effective rate at service start
    demand = np.random.default_rng(svc_seq).standard_exponential(n)

    departures = np.empty(n)
    mu = config.service_rate
    free_at = 0.0
    if len(schedule):
        # FIFO service starts are nondecreasing, so one cursor walks the schedule
        bounds = [(inj.start, inj.end, mu * inj.mu_factor) for inj in schedule.injections]
        bounds.append((math.inf, math.inf, mu))
        pos = 0
        lo, hi, rate_in = bounds[0]
        out = []
        for a, dem in zip(arrivals.tolist(), demand.tolist()):
            start = a if a > free_at else free_at
            while start >= hi:
                pos += 1
                lo, hi, rate_in = bounds[pos]
            free_at = start + dem / (rate_in if start >= lo else mu)
            out.append(free_at)
        departures = np.array(out, dtype=float)
    elif n:
        # Lindley recursion: with U_i the running sum of (service_{i-1} - gap_i),
        # the wait of job i is U_i - min(U_0..U_i)
        service = demand / mu
        u = np.cumsum(np.r_[0.0, service[:-1] - np.diff(arrivals)])
        wait = u - np.minimum.accumulate(u)
        departures = arrivals + wait + service

    done = departures <= config.duration
    # FIFO: once a job is still in the system at the horizon, so is every later one
    n_done = int(np.argmin(done)) if not done.all() else n
    arrivals, departures = arrivals[:n_done], departures[:n_done]
    sojourn = departures - arrivals

    if config.tx_type_mix:
        labels = [l for l, _ in config.tx_type_mix]
        probs = np.array([p for _, p in config.tx_type_mix])
        picks = np.random.default_rng(mix_seq).choice(len(labels), size=n_done, p=probs / probs.sum())
        types = [labels[i] for i in picks]
    else:
        types = [DEFAULT_TX_TYPE] * n_done

    base = config.epoch_ms
    records = [TransactionRecord(base + int(math.floor(a)), t, float(s))
               for a, t, s in zip(arrivals.tolist(), types, sojourn.tolist())]
    return SimulationResult(records, arrivals, sojourn, n - n_done, config)


def window_labels(config: SimConfig, schedule: AnomalySchedule,
                  window_length: int = DEFAULT_WINDOW_MS) -> list[tuple[int, str]]:
    """``(window_start_epoch_ms, label)`` per window of the run.

    Labels are ``normal``, ``degraded`` (``mu_factor < 1``) or ``improved``.
    Injections must start and end on window boundaries.
    """
    if window_length <= 0:
        raise ConfigError("window_length must be positive")
    if config.epoch_ms % window_length:
        raise ConfigError("epoch_ms must be a multiple of window_length")
    n_windows = math.ceil(config.duration / window_length)
    labels = ["normal"] * n_windows
    for inj in schedule.injections:
        for edge in (inj.start, inj.end):
            if edge % window_length and edge != config.duration:
                raise ConfigError(f"injection edge {edge} is not on a {window_length} ms window boundary")
        first = int(inj.start // window_length)
        last = math.ceil(inj.end / window_length)
        for w in range(first, min(last, n_windows)):
            labels[w] = "degraded" if inj.mu_factor < 1 else "improved"
    return [(config.epoch_ms + w * window_length, lab) for w, lab in enumerate(labels)]


def inject_and_label(config: SimConfig, schedule: AnomalySchedule,
                     window_length: int = DEFAULT_WINDOW_MS,
                     allow_overload: bool = False) -> tuple[SimulationResult, list[tuple[int, str]]]:
    labels = window_labels(config, schedule, window_length)
    return simulate_mm1(config, schedule, allow_overload), labels


def schedule_for_windows(windows: Sequence[int], mu_factor: float,
                         window_length: int = DEFAULT_WINDOW_MS) -> AnomalySchedule:
    """One injection per listed window index (adjacent indices are merged)."""
    spans: list[list[int]] = []
    for w in sorted(set(windows)):
        if spans and spans[-1][1] == w:
            spans[-1][1] = w + 1
        else:
            spans.append([w, w + 1])
    return AnomalySchedule(tuple(Injection(a * window_length, b * window_length, mu_factor) for a, b in spans))
