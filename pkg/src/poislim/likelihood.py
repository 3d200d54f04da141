"""Log-likelihood, normalized likelihood ratio, and curve materialization.

log L(theta) = sum_j sum_{t_i in W} ln lambda(theta, t_i)
             - n * integral_W (lambda(theta, t) - 1) dt

The "-1" reference intensity inside the integral is kept verbatim; it shifts
the log-likelihood by a theta-free constant and cancels in every ratio.
Everything is computed in log space; ratios are exponentiated only at the API
boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import analysis
from .analysis import DEFAULT_RULE, QuadratureRule, integrate
from .errors import DomainError
from .intensity import IntensityModel
from .simulate import Sample

__all__ = [
    "LogLikelihoodCurve",
    "LikelihoodEvaluator",
    "log_likelihood",
    "normalized_lr",
    "likelihood_curve",
]


def _window_intervals(window, horizon):
    return analysis._window_intervals(window, horizon)


def _window_measure(intervals):
    return sum(hi - lo for lo, hi in intervals)


def _events_in(events, intervals):
    if not intervals:
        return events[:0]
    mask = np.zeros(events.shape, dtype=bool)
    for lo, hi in intervals:
        mask |= (events >= lo) & (events <= hi)
    return events[mask]


class LikelihoodEvaluator:
    """Shared evaluation context for one (model, window, quadrature rule).

    Caches the theta-grid intensity integral, which is sample independent,
    so replicated estimation pays the event-sum cost only.
    """

    def __init__(self, model: IntensityModel, window=None, rule: QuadratureRule = DEFAULT_RULE):
        self.model = model
        self.intervals = _window_intervals(window, model.horizon)
        self.measure = _window_measure(self.intervals)
        self.rule = rule
        self._integral_cache: dict = {}

    # -- integral term ------------------------------------------------------

    def intensity_integral(self, thetas) -> np.ndarray:
        """integral_W lambda(theta, t) dt for each theta (vectorized)."""
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
        key = (thetas.tobytes(),)
        hit = self._integral_cache.get(key)
        if hit is not None:
            return hit
        total = np.zeros(thetas.shape)
        for lo, hi in self.intervals:
            hinted = self.model.integral_hint(thetas, lo, hi)
            if hinted is not None:
                total += hinted
                continue
            for i, th in enumerate(thetas):
                breaks = [b for b in self.model.t_breakpoints(th) if lo < b < hi]
                total[i] += integrate(lambda t, th=th: self.model.value(th, t),
                                      lo, hi, breakpoints=breaks, rule=self.rule)
        if len(self._integral_cache) < 8:
            self._integral_cache[key] = total
        return total

    # -- event term ---------------------------------------------------------

    def prepare_events(self, sample: Sample) -> np.ndarray:
        return _events_in(sample.pooled_events(), self.intervals)

    def event_sums(self, thetas, events, theta_side=0) -> np.ndarray:
        return self.model.event_log_sums(thetas, events, theta_side=theta_side)

    # -- full log-likelihood --------------------------------------------------

    def values(self, thetas, sample: Sample, events=None, theta_side=0) -> np.ndarray:
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
        if events is None:
            events = self.prepare_events(sample)
        term = self.event_sums(thetas, events, theta_side=theta_side)
        integ = self.intensity_integral(thetas)
        vals = term - sample.n * (integ - self.measure)
        return np.where(np.isnan(vals), -np.inf, vals)

    def value(self, theta, sample: Sample, events=None, theta_side=0) -> float:
        return float(self.values(np.array([float(theta)]), sample, events, theta_side)[0])


def log_likelihood(model: IntensityModel, theta: float, sample: Sample,
                   window=None, theta_side=0, rule: QuadratureRule = DEFAULT_RULE) -> float:
    """Windowed log-likelihood; -inf (not an exception) if an event has zero rate."""
    theta = float(theta)
    iv = model.theta_interval
    if not iv.contains(theta):
        raise DomainError(f"theta={theta} outside [{iv.alpha}, {iv.beta}]")
    return LikelihoodEvaluator(model, window, rule).value(theta, sample, theta_side=theta_side)


def normalized_lr(model: IntensityModel, theta0: float, u: float, rate_exponent: float,
                  sample: Sample, window=None, log: bool = False) -> float:
    """Z_n(u): likelihood ratio at theta0 + n^{-rate_exponent} * u versus theta0."""
    n = sample.n
    phi = float(n) ** (-float(rate_exponent))
    shifted = float(theta0) + phi * float(u)
    iv = model.theta_interval
    if not iv.contains(shifted):
        lo = (iv.alpha - theta0) / phi
        hi = (iv.beta - theta0) / phi
        raise DomainError(
            f"u={u} leaves the local parameter set U_n = [{lo:.6g}, {hi:.6g}]"
        )
    ev = LikelihoodEvaluator(model, window)
    events = ev.prepare_events(sample)
    diff = ev.value(shifted, sample, events) - ev.value(float(theta0), sample, events)
    return diff if log else float(np.exp(diff))


@dataclass(frozen=True)
class LogLikelihoodCurve:
    """Materialized log L(., X^n) on a grid, with one-sided values at jumps."""

    thetas: np.ndarray
    values: np.ndarray
    break_thetas: np.ndarray
    break_left: np.ndarray
    break_right: np.ndarray

    def candidates(self):
        """(theta, side, value) triples sorted by (theta, side); first max wins."""
        parts = [
            (self.thetas, np.zeros(self.thetas.size, dtype=int), self.values),
        ]
        if self.break_thetas.size:
            parts.append((self.break_thetas, -np.ones(self.break_thetas.size, dtype=int), self.break_left))
            parts.append((self.break_thetas, np.ones(self.break_thetas.size, dtype=int), self.break_right))
        th = np.concatenate([p[0] for p in parts])
        sd = np.concatenate([p[1] for p in parts])
        vv = np.concatenate([p[2] for p in parts])
        order = np.lexsort((sd, th))
        return th[order], sd[order], vv[order]


def curve_grid(model: IntensityModel, grid_size: int, events=None,
               theta_range=None) -> tuple[np.ndarray, np.ndarray]:
    """Uniform theta grid plus declared kinks; returns (grid, breakpoints)."""
    iv = model.theta_interval
    lo, hi = theta_range if theta_range is not None else (iv.alpha, iv.beta)
    grid = np.linspace(lo, hi, grid_size)
    kinks = [k for k in model.theta_kinks() if lo < k < hi]
    if kinks:
        grid = np.unique(np.concatenate([grid, np.array(kinks)]))
    breaks = np.empty(0)
    if events is not None and model.has_event_breakpoints:
        breaks = np.unique(model.event_theta_breakpoints(events))
        breaks = breaks[(breaks > lo) & (breaks < hi)]
    return grid, breaks


def likelihood_curve(model: IntensityModel, sample: Sample, grid_size: int,
                     window=None, rule: QuadratureRule = DEFAULT_RULE) -> LogLikelihoodCurve:
    """log L over a uniform grid with kinks inserted and one-sided jump values."""
    if grid_size < 3:
        raise DomainError(f"grid_size must be >= 3, got {grid_size}")
    ev = LikelihoodEvaluator(model, window, rule)
    events = ev.prepare_events(sample)
    grid, breaks = curve_grid(model, grid_size, events=events)
    full = np.unique(np.concatenate([grid, breaks])) if breaks.size else grid
    values = ev.values(full, sample, events)
    if breaks.size:
        left = ev.values(breaks, sample, events, theta_side=-1)
        right = ev.values(breaks, sample, events, theta_side=+1)
    else:
        left = right = np.empty(0)
    return LogLikelihoodCurve(thetas=full, values=values,
                              break_thetas=breaks, break_left=left, break_right=right)
