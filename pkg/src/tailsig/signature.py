"""Per-window performance signatures.

A window's service-time distribution is summarised by the pair ``(k, j)`` of
the exponential CDF form ``Y = 1 - exp(-(k*X + j))``.  ``k`` (per ms) tracks
the main body of the distribution, ``j`` (dimensionless) the tail offset.
The fit is an unweighted least-squares fit to the empirical CDF using a small
two-parameter Levenberg-Marquardt loop with an analytic Jacobian.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .ingest import SampleWindow

GOS_PERCENTILES = (50, 80, 90, 95, 98, 100)
DEFAULT_MAX_POINTS = 512
DEFAULT_MAX_ITERATIONS = 50
DEFAULT_TOL = 1e-10
LINEARIZE_EPS = 1e-9

_LAMBDA0 = 1e-3
_LAMBDA_UP = 10.0
_LAMBDA_DOWN = 0.1
_LAMBDA_CEILING = 1e16


class UnfittableWindowError(ValueError):
    pass


@dataclass(frozen=True)
class EmpiricalCDF:
    """Distinct response times ``x`` with Hazen plotting positions ``y``."""

    x: np.ndarray
    y: np.ndarray
    n_obs: int = 0
    degenerate: bool = False

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError("x and y must be 1-d arrays of equal length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if not self.n_obs:
            object.__setattr__(self, "n_obs", len(x))

    def __len__(self):
        return len(self.x)

    @classmethod
    def from_points(cls, x, y) -> "EmpiricalCDF":
        x = np.asarray(x, dtype=float)
        return cls(x, y, len(x), len(np.unique(x)) < 2)


@dataclass(frozen=True)
class GoSSummary:
    arrival_rate: int  # transactions per window
    p50: float
    p80: float
    p90: float
    p95: float
    p98: float
    p100: float

    def as_dict(self) -> dict:
        return {"arrival_rate": self.arrival_rate, "p50": self.p50, "p80": self.p80, "p90": self.p90,
                "p95": self.p95, "p98": self.p98, "p100": self.p100}


class InitialEstimate(NamedTuple):
    k0: float
    j0: float
    fallback: bool


@dataclass(frozen=True)
class Signature:
    k: float
    j: float
    sse: float
    iterations: int
    converged: bool
    n_points: int
    flags: tuple[str, ...] = field(default=())

    @property
    def nonpositive_k(self) -> bool:
        return "nonpositive_k" in self.flags


# -- empirical CDF and GoS ----------------------------------------------------

def ecdf_from_samples(samples, max_points: int = DEFAULT_MAX_POINTS) -> EmpiricalCDF:
    """Hazen ECDF of raw response times, ties collapsed to their top position."""
    xs = np.sort(np.asarray(samples, dtype=float))
    n = len(xs)
    if n == 0:
        raise UnfittableWindowError("no observations")
    y = (np.arange(1, n + 1) - 0.5) / n
    # keep the last occurrence of each distinct value
    last = np.r_[xs[1:] != xs[:-1], True]
    x, y = xs[last], y[last]
    degenerate = len(x) < 2
    if max_points and len(x) > max_points:
        keep = np.unique(np.rint(np.linspace(0, len(x) - 1, max_points)).astype(int))
        x, y = x[keep], y[keep]
    return EmpiricalCDF(x, y, n, degenerate)


def build_ecdf(window: SampleWindow, max_points: int = DEFAULT_MAX_POINTS) -> EmpiricalCDF:
    if not window.fittable:
        raise UnfittableWindowError(
            f"window starting {window.window_start} has {window.arrival_count} records; flagged unfittable")
    return ecdf_from_samples(window.response_times(), max_points)


def nearest_rank(sorted_values: Sequence[float], pct: int) -> float:
    """``ceil(pct/100 * n)``-th order statistic (1-based), integer arithmetic."""
    n = len(sorted_values)
    rank = max(1, -(-pct * n // 100))
    return float(sorted_values[rank - 1])


def gos_summary(window: SampleWindow) -> GoSSummary:
    if window.arrival_count == 0:
        raise ValueError("cannot summarise an empty window")
    xs = np.sort(window.response_times())
    return GoSSummary(window.arrival_count, *(nearest_rank(xs, p) for p in GOS_PERCENTILES))


# -- model --------------------------------------------------------------------

def predict_cdf(sig, x, clamp: bool = True):
    """Evaluate ``1 - exp(-(k*x + j))``; ``sig`` is a Signature or a ``(k, j)`` pair."""
    k, j = (sig.k, sig.j) if isinstance(sig, Signature) else sig
    with np.errstate(over="ignore"):
        y = 1.0 - np.exp(-(k * np.asarray(x, dtype=float) + j))
    if clamp:
        y = np.clip(y, 0.0, 1.0)
    return float(y) if np.ndim(y) == 0 else y


def jacobian(k: float, j: float, x) -> np.ndarray:
    """Partials of the model CDF with respect to ``(k, j)``; shape ``(n, 2)``."""
    x = np.asarray(x, dtype=float)
    e = np.exp(-(k * x + j))
    return np.column_stack([x * e, e])


def _sse(k: float, j: float, x: np.ndarray, y: np.ndarray) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        r = y - 1.0 + np.exp(-(k * x + j))
        s = float(r @ r)
    return s if math.isfinite(s) else math.inf


def initial_estimate(ecdf: EmpiricalCDF) -> InitialEstimate:
    """OLS on the linearised form ``-ln(1 - y) = k*x + j``."""
    x, y = ecdf.x, ecdf.y
    usable = y < 1.0 - LINEARIZE_EPS
    xu, yu = x[usable], y[usable]
    if len(np.unique(xu)) >= 2:
        z = -np.log1p(-yu)
        xm, zm = xu.mean(), z.mean()
        dx = xu - xm
        k0 = float(dx @ (z - zm) / (dx @ dx))
        j0 = float(zm - k0 * xm)
        if math.isfinite(k0) and math.isfinite(j0):
            return InitialEstimate(k0, j0, False)
    med = float(np.median(x)) if len(x) else 0.0
    k0 = math.log(2.0) / med if med > 0 else math.log(2.0)
    return InitialEstimate(k0, 0.0, True)


def fit_signature(ecdf: EmpiricalCDF, init=None, max_iterations: int = DEFAULT_MAX_ITERATIONS,
                  tol: float = DEFAULT_TOL) -> Signature:
    """Least-squares fit of the exponential CDF form to ``ecdf``.

    Damped Gauss-Newton with Marquardt's diagonal scaling.  Stops when an
    accepted step lowers the SSE by a relative amount below ``tol`` or when
    the relative step length drops below ``tol``.  If the damping factor
    exceeds its ceiling, or the iteration budget runs out, the best point
    seen so far is returned with ``converged=False``.
    """
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    flags: list[str] = []
    if init is None:
        init = initial_estimate(ecdf)
    if isinstance(init, InitialEstimate) and init.fallback:
        flags.append("init_fallback")
    if ecdf.degenerate:
        flags.append("degenerate_cdf")

    x, y = ecdf.x, ecdf.y
    p = np.array([float(init[0]), float(init[1])])
    sse = _sse(p[0], p[1], x, y)
    lam = _LAMBDA0
    converged = False
    it = 0

    if sse == 0.0:
        converged = True
    while not converged and it < max_iterations:
        it += 1
        if not math.isfinite(sse):
            # starting point overflows; nothing to linearise around
            break
        J = jacobian(p[0], p[1], x)
        r = y - 1.0 + np.exp(-(p[0] * x + p[1]))
        JtJ = J.T @ J
        g = J.T @ r  # residual is y - model, so this is the descent direction
        diag = np.diag(JtJ).copy()
        diag[diag == 0.0] = 1.0

        accepted = False
        while lam <= _LAMBDA_CEILING:
            A = JtJ + lam * np.diag(diag)
            try:
                step = np.linalg.solve(A, g)
            except np.linalg.LinAlgError:
                lam *= _LAMBDA_UP
                continue
            trial = p + step
            trial_sse = _sse(trial[0], trial[1], x, y)
            if trial_sse <= sse:
                accepted = True
                break
            lam *= _LAMBDA_UP
        if not accepted:
            break

        rel_drop = (sse - trial_sse) / sse if sse > 0 else 0.0
        step_norm = float(np.linalg.norm(step))
        p_norm = float(np.linalg.norm(trial))
        p, sse = trial, trial_sse
        lam = max(lam * _LAMBDA_DOWN, 1e-12)
        if sse == 0.0 or rel_drop < tol or step_norm < tol * (p_norm + tol):
            converged = True

    k, j = float(p[0]), float(p[1])
    if converged and k <= 0:
        flags.append("nonpositive_k")
    return Signature(k, j, float(sse), it, converged, int(ecdf.n_obs), tuple(flags))


def fit_window(window: SampleWindow, max_points: int = DEFAULT_MAX_POINTS,
               max_iterations: int = DEFAULT_MAX_ITERATIONS, tol: float = DEFAULT_TOL) -> Signature:
    ecdf = build_ecdf(window, max_points)
    return fit_signature(ecdf, initial_estimate(ecdf), max_iterations, tol)


# -- comparison across systems -------------------------------------------------

@dataclass(frozen=True)
class SignatureComparison:
    avg_k_a: float
    avg_j_a: float
    avg_k_b: float
    avg_j_b: float
    n_a: int
    n_b: int

    @property
    def k_ratio(self) -> float:
        return self.avg_k_a / self.avg_k_b

    @property
    def higher_k(self) -> str:
        if self.avg_k_a > self.avg_k_b:
            return "a"
        if self.avg_k_b > self.avg_k_a:
            return "b"
        return "equal"

    def as_dict(self) -> dict:
        return {"a": {"avg_k": self.avg_k_a, "avg_j": self.avg_j_a, "n": self.n_a},
                "b": {"avg_k": self.avg_k_b, "avg_j": self.avg_j_b, "n": self.n_b},
                "k_ratio": self.k_ratio, "higher_k": self.higher_k}


def compare_signatures(a: Sequence[Signature], b: Sequence[Signature]) -> SignatureComparison:
    """Mean ``k`` and ``j`` of two signature sets; only converged fits count."""
    ca = [s for s in a if s.converged]
    cb = [s for s in b if s.converged]
    if not ca or not cb:
        raise ValueError("both sides need at least one converged signature")
    return SignatureComparison(
        float(np.mean([s.k for s in ca])), float(np.mean([s.j for s in ca])),
        float(np.mean([s.k for s in cb])), float(np.mean([s.j for s in cb])),
        len(ca), len(cb),
    )
