"""Deterministic functionals of intensity families.

Quadrature is composite Simpson split at declared breakpoints so a panel
never straddles a discontinuity; everything here is pure and reentrant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateCurvatureError,
    DomainError,
    PreconditionError,
    SingularityError,
)
from .intensity import IntensityModel, TrueIntensity

__all__ = [
    "QuadratureRule",
    "DEFAULT_RULE",
    "MisspecAsymptotics",
    "NonIdentCovariance",
    "integrate",
    "golden_section_min",
    "golden_section_max",
    "fisher_information",
    "higher_order_information",
    "hellinger_sq",
    "kl_objective",
    "kl_objective_grid",
    "theta_star",
    "misspec_asymptotics",
    "consistency_region",
    "nonident_covariance",
]

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class QuadratureRule:
    """Composite quadrature description: total panel budget plus scheme."""

    panels: int = 4096
    scheme: str = "composite-simpson"

    def __post_init__(self):
        if self.panels < 16 or self.panels % 2:
            raise ConfigurationError(f"panels must be even and >= 16, got {self.panels}")
        if self.scheme not in ("composite-simpson", "midpoint-on-breakpoints"):
            raise ConfigurationError(f"unknown quadrature scheme {self.scheme!r}")


DEFAULT_RULE = QuadratureRule()


def _segment_panels(lengths, total_panels):
    """Spread a panel budget over segments, even count >= 16 each."""
    lengths = np.asarray(lengths, dtype=float)
    total = lengths.sum()
    if total <= 0:
        return [16] * len(lengths)
    out = []
    for ln in lengths:
        p = int(round(total_panels * ln / total))
        p = max(16, p + (p % 2))
        out.append(p)
    return out


_EDGE_NUDGE = 1e-12


def _simpson_segment(fn, a, b, panels):
    x = np.linspace(a, b, panels + 1)
    # segments are split exactly at declared discontinuities; evaluating the
    # endpoints a hair inside keeps every node on this segment's branch
    nudge = _EDGE_NUDGE * (b - a)
    x[0] += nudge
    x[-1] -= nudge
    y = np.asarray(fn(x), dtype=float)
    h = (b - a) / panels
    return (h / 3.0) * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum())


def _midpoint_segment(fn, a, b, panels):
    h = (b - a) / panels
    x = a + h * (np.arange(panels) + 0.5)
    return h * float(np.sum(np.asarray(fn(x), dtype=float)))


def integrate(fn, a: float, b: float, breakpoints=(), rule: QuadratureRule = DEFAULT_RULE) -> float:
    """Integral of ``fn`` over [a, b], split at interior breakpoints."""
    a, b = float(a), float(b)
    if b < a:
        raise DomainError(f"integration bounds reversed: [{a}, {b}]")
    if b == a:
        return 0.0
    cuts = sorted({float(c) for c in breakpoints if a < c < b})
    edges = [a, *cuts, b]
    lengths = np.diff(edges)
    seg = _simpson_segment if rule.scheme == "composite-simpson" else _midpoint_segment
    total = 0.0
    for (lo, hi), p in zip(zip(edges[:-1], edges[1:]), _segment_panels(lengths, rule.panels)):
        total += seg(fn, lo, hi, p)
    return total


def _window_intervals(window, horizon: float):
    """Normalize a window argument to a list of (lo, hi) within [0, horizon]."""
    if window is None:
        return [(0.0, horizon)]
    intervals = getattr(window, "intervals", window)
    out = []
    for lo, hi in intervals:
        lo, hi = float(lo), float(hi)
        if hi < lo or lo < -1e-12 or hi > horizon + 1e-12:
            raise DomainError(f"window interval [{lo}, {hi}] outside [0, {horizon}]")
        if hi > lo:
            out.append((max(lo, 0.0), min(hi, horizon)))
    return out


def integrate_window(fn, window, horizon, breakpoints=(), rule: QuadratureRule = DEFAULT_RULE) -> float:
    return sum(
        integrate(fn, lo, hi, breakpoints=breakpoints, rule=rule)
        for lo, hi in _window_intervals(window, horizon)
    )


def golden_section_min(fn, a: float, b: float, tol: float = 1e-11, max_iter: int = 200):
    """Golden-section minimum of a unimodal scalar function on [a, b].

    Returns (x, fn(x)); deterministic, ties resolve toward the left by the
    final midpoint-of-bracket convention.
    """
    a, b = float(a), float(b)
    if b <= a:
        return a, float(fn(a))
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = float(fn(c)), float(fn(d))
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = float(fn(c))
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = float(fn(d))
    x = 0.5 * (a + b)
    return x, float(fn(x))


def golden_section_max(fn, a: float, b: float, tol: float = 1e-11, max_iter: int = 200):
    x, v = golden_section_min(lambda s: -fn(s), a, b, tol=tol, max_iter=max_iter)
    return x, -v


# ---------------------------------------------------------------------------
# information-type integrals
# ---------------------------------------------------------------------------


def _guard_positive(vals, what: str):
    vals = np.asarray(vals, dtype=float)
    if np.any(vals <= 0.0):
        raise SingularityError(f"{what} vanishes on the integration window")
    return vals


def fisher_information(model: IntensityModel, theta: float, window=None, side=None,
                       rule: QuadratureRule = DEFAULT_RULE) -> float:
    """integral of (d_theta lambda)^2 / lambda over the window (default [0, tau])."""
    theta = float(theta)

    def integrand(t):
        lam = _guard_positive(model.value(theta, t), "intensity")
        dot = model.dtheta(theta, t, 1, side=side)
        return dot * dot / lam

    breaks = model.t_breakpoints(theta)
    return integrate_window(integrand, window, model.horizon, breakpoints=breaks, rule=rule)


def higher_order_information(model: IntensityModel, theta: float, order: int = 3,
                             rule: QuadratureRule = DEFAULT_RULE) -> float:
    """integral of (third theta-derivative)^2 / ((3!)^2 lambda) over [0, tau]."""
    if order != 3:
        raise DomainError(f"only order=3 is defined, got {order}")
    theta = float(theta)

    def integrand(t):
        lam = _guard_positive(model.value(theta, t), "intensity")
        d3 = model.dtheta(theta, t, 3)
        return d3 * d3 / (36.0 * lam)

    return integrate_window(integrand, None, model.horizon,
                            breakpoints=model.t_breakpoints(theta), rule=rule)


def hellinger_sq(model: IntensityModel, theta1: float, theta2: float,
                 rule: QuadratureRule = DEFAULT_RULE) -> float:
    """integral of (sqrt(lambda(theta2,.)) - sqrt(lambda(theta1,.)))^2 over [0, tau]."""
    theta1, theta2 = float(theta1), float(theta2)
    iv = model.theta_interval
    for th in (theta1, theta2):
        if not iv.contains(th):
            raise DomainError(f"theta={th} outside [{iv.alpha}, {iv.beta}]")

    def integrand(t):
        d = np.sqrt(model.value(theta2, t)) - np.sqrt(model.value(theta1, t))
        return d * d

    breaks = set(model.t_breakpoints(theta1)) | set(model.t_breakpoints(theta2))
    return integrate(integrand, 0.0, model.horizon, breakpoints=breaks, rule=rule)


def _kl_integrand(lam_model, lam_true):
    """lambda_theta - lambda* - lambda* ln(lambda_theta/lambda*), elementwise.

    Continuous extension at lambda*=0 is lambda_theta; lambda_theta=0 with
    lambda*>0 is a genuine singularity (callers decide raise vs +inf).
    """
    lam_model = np.asarray(lam_model, dtype=float)
    lam_true = np.asarray(lam_true, dtype=float)
    out = np.where(lam_true > 0.0, lam_model - lam_true, lam_model)
    pos = (lam_true > 0.0)
    bad = pos & (lam_model <= 0.0)
    safe_model = np.where(pos & ~bad, lam_model, 1.0)
    safe_true = np.where(pos, lam_true, 1.0)
    out = out - np.where(pos & ~bad, lam_true * np.log(safe_model / safe_true), 0.0)
    return np.where(bad, np.inf, out)


def kl_objective(true_intensity: TrueIntensity, model: IntensityModel, theta: float,
                 rule: QuadratureRule = DEFAULT_RULE) -> float:
    """Kullback-Leibler-type objective whose argmin is the pseudo-true value."""
    theta = float(theta)
    iv = model.theta_interval
    if not iv.contains(theta):
        raise DomainError(f"theta={theta} outside [{iv.alpha}, {iv.beta}]")

    def integrand(t):
        vals = _kl_integrand(model.value(theta, t), true_intensity.value(t))
        if np.any(np.isinf(vals)):
            raise SingularityError("model intensity vanishes where the true intensity is positive")
        return vals

    breaks = set(model.t_breakpoints(theta)) | set(true_intensity.breakpoints)
    return integrate(integrand, 0.0, model.horizon, breakpoints=breaks, rule=rule)


_KL_GRID_PANELS = 16
_SIMPSON_W = None


def _simpson_weights(panels):
    w = np.ones(panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def kl_objective_grid(true_intensity: TrueIntensity, model: IntensityModel,
                      thetas: np.ndarray) -> np.ndarray:
    """Vectorized KL objective over a theta grid (+inf where singular).

    Builds per-theta piecewise-Simpson nodes so the integration always splits
    at both the model's theta-dependent t-breakpoint structure and the true
    intensity's fixed breakpoints.  Falls back to the scalar path when the
    breakpoint count varies across the grid.
    """
    thetas = np.asarray(thetas, dtype=float)
    tau = model.horizon
    fixed = sorted(b for b in true_intensity.breakpoints if 0.0 < b < tau)
    per_theta = [model.t_breakpoints(th) for th in thetas]
    counts = {len(b) for b in per_theta}
    if len(counts) > 1:
        out = np.empty(thetas.shape)
        for i, th in enumerate(thetas):
            try:
                out[i] = kl_objective(true_intensity, model, th)
            except SingularityError:
                out[i] = np.inf
        return out

    k = counts.pop() if counts else 0
    moving = np.array(per_theta, dtype=float).reshape(len(thetas), k)
    edges = np.concatenate(
        [np.zeros((len(thetas), 1)),
         np.broadcast_to(np.array(fixed), (len(thetas), len(fixed))),
         moving,
         np.full((len(thetas), 1), tau)], axis=1)
    edges = np.sort(np.clip(edges, 0.0, tau), axis=1)

    p = _KL_GRID_PANELS
    w = _simpson_weights(p)
    frac = np.linspace(0.0, 1.0, p + 1)
    frac[0] += _EDGE_NUDGE
    frac[-1] -= _EDGE_NUDGE
    lo = edges[:, :-1][:, :, None]
    ln = (edges[:, 1:] - edges[:, :-1])[:, :, None]
    nodes = lo + ln * frac[None, None, :]          # (G, S, p+1)
    th3 = thetas[:, None, None]
    vals = _kl_integrand(model.value(th3, nodes), true_intensity.value(nodes))
    h = ln[:, :, 0] / p
    seg = (vals * w[None, None, :]).sum(axis=2) * h
    with np.errstate(invalid="ignore"):
        out = seg.sum(axis=1)
    out[np.isnan(out)] = np.inf
    return out


def theta_star(true_intensity: TrueIntensity, model: IntensityModel,
               grid_size: int | None = None, refine: bool | None = None) -> float:
    """Pseudo-true value: grid argmin of the KL objective, refined when smooth.

    Smooth families use a 2001-point grid plus golden-section on the
    bracketing cell; theta-discontinuous families use a pure 20001-point grid.
    Ties break toward the smaller theta.
    """
    smooth = model.is_theta_smooth and not model.has_event_breakpoints
    if grid_size is None:
        grid_size = 2001 if smooth else 20001
    if refine is None:
        refine = smooth
    iv = model.theta_interval
    grid = iv.grid(grid_size)
    vals = kl_objective_grid(true_intensity, model, grid)
    if not np.any(np.isfinite(vals)):
        raise SingularityError("KL objective is infinite over the whole parameter grid")
    i = int(np.nanargmin(np.where(np.isfinite(vals), vals, np.inf)))
    if not refine or not smooth:
        return float(grid[i])
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid_size - 1)]
    x, _ = golden_section_min(lambda th: kl_objective(true_intensity, model, th), lo, hi)
    return float(x)


# ---------------------------------------------------------------------------
# misspecification asymptotics and non-identifiability covariance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MisspecAsymptotics:
    """Pseudo-true value and sandwich variance for a misspecified family."""

    theta_star: float
    d_star_sq: float
    i_star: float
    d_big_sq: float

    def __post_init__(self):
        if self.d_star_sq < 0 or self.d_big_sq < 0:
            raise ConfigurationError("variance components must be nonnegative")


def misspec_asymptotics(true_intensity: TrueIntensity, model: IntensityModel,
                        rule: QuadratureRule = DEFAULT_RULE) -> MisspecAsymptotics:
    """Sandwich asymptotics at the pseudo-true value.

    d*^2 integrates score^2 * lambda*/lambda^2; I* adds the curvature
    correction; the limiting variance of sqrt(n)(estimate - theta*) is
    d*^2 / I*^2.
    """
    if model.smoothness_order < 2:
        raise PreconditionError(f"{model.catalog_id} lacks second theta-derivatives")
    ts = theta_star(true_intensity, model)
    iv = model.theta_interval
    margin = 2.0 * iv.width / 20001
    if not (iv.alpha + margin < ts < iv.beta - margin):
        raise PreconditionError(f"theta_star={ts:.6g} is not interior to Theta")

    breaks = set(model.t_breakpoints(ts)) | set(true_intensity.breakpoints)

    def d_integrand(t):
        lam = _guard_positive(model.value(ts, t), "intensity at theta_star")
        dot = model.dtheta(ts, t, 1)
        return dot * dot * true_intensity.value(t) / lam ** 2

    def curv_integrand(t):
        lam = _guard_positive(model.value(ts, t), "intensity at theta_star")
        ddot = model.dtheta(ts, t, 2)
        return ddot * (1.0 - true_intensity.value(t) / lam)

    d_sq = integrate(d_integrand, 0.0, model.horizon, breakpoints=breaks, rule=rule)
    i_star = d_sq + integrate(curv_integrand, 0.0, model.horizon, breakpoints=breaks, rule=rule)
    if i_star <= 1e-9:
        # zero up to the numerical resolution of theta_star; a null-information
        # point would otherwise masquerade as an astronomically large variance
        raise DegenerateCurvatureError(f"I* = {i_star:.6g} <= 0 at theta_star={ts:.6g}")
    return MisspecAsymptotics(theta_star=ts, d_star_sq=d_sq, i_star=i_star,
                              d_big_sq=d_sq / i_star ** 2)


def consistency_region(x: float) -> tuple[float, float]:
    """Closed-form contamination bounds (h1_max, h2_min) at intensity ratio x."""
    x = float(x)
    if x <= 1.0:
        raise DomainError(f"consistency region needs x > 1, got {x}")
    ratio = (x - 1.0) / math.log(x)
    return ratio - 1.0, ratio - x


@dataclass(frozen=True)
class NonIdentCovariance:
    """Roots sharing one intensity, their informations, and the score correlation."""

    roots: tuple
    informations: tuple
    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        if rho.shape != (len(self.roots), len(self.roots)):
            raise ConfigurationError("correlation matrix shape mismatch")
        if not np.allclose(rho, rho.T, atol=1e-12):
            raise ConfigurationError("correlation matrix must be symmetric")
        if np.any(np.abs(np.diag(rho) - 1.0) > 0):
            raise ConfigurationError("correlation matrix diagonal must be exactly 1")
        if np.min(np.linalg.eigvalsh(rho)) < -1e-10:
            raise ConfigurationError("correlation matrix is not positive semidefinite")


def nonident_covariance(model: IntensityModel, roots,
                        rule: QuadratureRule = DEFAULT_RULE) -> NonIdentCovariance:
    """Score-correlation matrix across coinciding-intensity roots."""
    roots = [float(r) for r in roots]
    if not roots:
        raise DomainError("need at least one root")
    tt = np.linspace(0.0, model.horizon, 2001)
    ref = model.value(roots[0], tt)
    scale = max(1.0, float(np.max(np.abs(ref))))
    for r in roots[1:]:
        if np.max(np.abs(model.value(r, tt) - ref)) > 1e-9 * scale:
            raise PreconditionError(
                f"intensities at roots {roots[0]} and {r} do not coincide"
            )
    infos = [fisher_information(model, r, rule=rule) for r in roots]
    for r, info in zip(roots, infos):
        if info <= 0.0:
            raise SingularityError(f"zero Fisher information at root {r}")

    k = len(roots)
    rho = np.eye(k)
    for l in range(k):
        for i in range(l + 1, k):
            def integrand(t, a=roots[l], b=roots[i]):
                lam = _guard_positive(model.value(b, t), "intensity")
                return model.dtheta(a, t, 1) * model.dtheta(b, t, 1) / lam

            breaks = set(model.t_breakpoints(roots[l])) | set(model.t_breakpoints(roots[i]))
            cross = integrate(integrand, 0.0, model.horizon, breakpoints=breaks, rule=rule)
            rho[l, i] = rho[i, l] = cross / math.sqrt(infos[l] * infos[i])
    return NonIdentCovariance(roots=tuple(roots), informations=tuple(infos), rho=rho)
