"""Limit-law parameters and samplers for each estimation regime.

Each regime's sampler draws from the weak limit of the normalized estimation
error; the experiments harness compares them against Monte Carlo errors.
Samplers are pure functions of an RngStream and vectorize over the draw
count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import analysis
from .errors import (
    CapabilityError,
    ConfigurationError,
    DomainError,
    NumericalError,
    PreconditionError,
)
from .intensity import CuspModel, IntensityModel, JumpShiftModel
from .simulate import RngStream

__all__ = [
    "REGIMES",
    "RegimeLimit",
    "CuspParams",
    "limit_params",
    "sample_limit",
    "sample_limit_batch",
    "simulate_fbm",
]

REGIMES = (
    "regular", "misspecified", "nonidentifiable", "null-fisher",
    "disc-fisher", "boundary", "cusp", "jump",
)

_FIXED_RATES = {
    "regular": 0.5,
    "misspecified": 0.5,
    "nonidentifiable": 0.5,
    "null-fisher": 1.0 / 6.0,
    "disc-fisher": 0.5,
    "boundary": 0.5,
    "jump": 1.0,
}


@dataclass(frozen=True)
class CuspParams:
    kappa: float
    hurst: float
    gamma_sq: float
    grid_halfwidth: float = 20.0
    grid_points: int = 2001

    def __post_init__(self):
        if not (0.0 < self.kappa < 0.5):
            raise ConfigurationError(f"kappa must lie in (0, 1/2), got {self.kappa}")
        if abs(self.hurst - (self.kappa + 0.5)) > 1e-12:
            raise ConfigurationError("hurst must equal kappa + 1/2")
        if self.gamma_sq <= 0:
            raise ConfigurationError("gamma_sq must be positive")
        if self.grid_points > 4001 or self.grid_points < 3 or self.grid_points % 2 == 0:
            raise ConfigurationError("grid_points must be odd and in [3, 4001]")


@dataclass(frozen=True)
class RegimeLimit:
    """Regime tag, error-normalization exponent, and sampler parameters."""

    regime: str
    rate_exponent: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise DomainError(f"unknown regime {self.regime!r}; known: {REGIMES}")
        if not (0.0 < self.rate_exponent <= 1.0):
            raise ConfigurationError(
                f"rate_exponent must lie in (0, 1], got {self.rate_exponent}"
            )


def cusp_gamma_sq(a: float, lam0: float, kappa: float) -> float:
    """4 a^2 sin^2(2 pi kappa) B(1+kappa, 1+kappa) / (lam0 cos(pi kappa))."""
    return (4.0 * a ** 2 * math.sin(2.0 * math.pi * kappa) ** 2
            * special.beta(1.0 + kappa, 1.0 + kappa)
            / (lam0 * math.cos(math.pi * kappa)))


def limit_params(regime: str, model: IntensityModel, theta0: float,
                 true_intensity=None, prior_weights=None) -> RegimeLimit:
    """Compute the limit-law parameters of the given regime at theta0."""
    if regime not in REGIMES:
        raise DomainError(f"unknown regime {regime!r}; known: {REGIMES}")
    theta0 = float(theta0)

    if regime == "regular":
        info = analysis.fisher_information(model, theta0)
        if info <= 0:
            raise PreconditionError("regular regime needs positive Fisher information")
        return RegimeLimit(regime, 0.5, {"fisher_information": info})

    if regime == "misspecified":
        if true_intensity is None:
            raise PreconditionError("misspecified regime needs the true intensity")
        ma = analysis.misspec_asymptotics(true_intensity, model)
        return RegimeLimit(regime, 0.5, {
            "theta_star": ma.theta_star, "d_star_sq": ma.d_star_sq,
            "i_star": ma.i_star, "d_big_sq": ma.d_big_sq,
        })

    if regime == "nonidentifiable":
        roots_fn = getattr(model, "nonident_roots", None)
        if roots_fn is None:
            raise CapabilityError(f"{model.catalog_id} does not declare coinciding roots")
        cov = analysis.nonident_covariance(model, roots_fn())
        k = len(cov.roots)
        weights = np.ones(k) if prior_weights is None else np.asarray(prior_weights, dtype=float)
        if weights.shape != (k,) or np.any(weights <= 0):
            raise ConfigurationError("prior_weights must be positive, one per root")
        return RegimeLimit(regime, 0.5, {
            "roots": list(cov.roots),
            "informations": list(cov.informations),
            "rho": cov.rho.tolist(),
            "prior_weights": weights.tolist(),
        })

    if regime == "null-fisher":
        i3 = analysis.higher_order_information(model, theta0)
        if i3 <= 0:
            raise PreconditionError("null-Fisher regime needs positive third-order information")
        return RegimeLimit(regime, 1.0 / 6.0, {"i3": i3})

    if regime == "disc-fisher":
        info_l = analysis.fisher_information(model, theta0, side="left")
        info_r = analysis.fisher_information(model, theta0, side="right")

        def integrand(t):
            lam = model.value(theta0, t)
            return (model.dtheta(theta0, t, 1, side="left")
                    * model.dtheta(theta0, t, 1, side="right") / lam)

        cross = analysis.integrate(integrand, 0.0, model.horizon,
                                   breakpoints=model.t_breakpoints(theta0))
        corr = cross / math.sqrt(info_l * info_r)
        return RegimeLimit(regime, 0.5, {
            "info_left": info_l, "info_right": info_r, "corr": corr,
        })

    if regime == "boundary":
        iv = model.theta_interval
        tol = 1e-9 * max(1.0, iv.width)
        if abs(theta0 - iv.alpha) <= tol:
            orientation = 1.0
        elif abs(theta0 - iv.beta) <= tol:
            orientation = -1.0
        else:
            raise PreconditionError(
                f"boundary regime needs theta0 at an endpoint of ({iv.alpha}, {iv.beta})"
            )
        info = analysis.fisher_information(model, theta0)
        if info <= 0:
            raise PreconditionError("boundary regime needs positive Fisher information")
        return RegimeLimit(regime, 0.5, {
            "fisher_information": info, "orientation": orientation,
        })

    if regime == "cusp":
        if not isinstance(model, CuspModel):
            raise CapabilityError("cusp regime is defined for the CUSP family")
        gamma_sq = cusp_gamma_sq(model.a, model.lam0, model.kappa)
        cp = CuspParams(kappa=model.kappa, hurst=model.hurst, gamma_sq=gamma_sq)
        return RegimeLimit(regime, 1.0 / (2.0 * cp.hurst), {
            "kappa": cp.kappa, "hurst": cp.hurst, "gamma_sq": cp.gamma_sq,
            "grid_halfwidth": cp.grid_halfwidth, "grid_points": cp.grid_points,
        })

    # jump
    if not isinstance(model, JumpShiftModel):
        raise CapabilityError("jump regime is defined for the JUMP_SHIFT family")
    lam_left, lam_right = model.jump_values()
    return RegimeLimit(regime, 1.0, {
        "lam_left": lam_left, "lam_right": lam_right, "u_halfwidth": 60.0,
    })


# ---------------------------------------------------------------------------
# fractional Brownian motion
# ---------------------------------------------------------------------------

_FBM_CACHE: dict = {}


def _fbm_cholesky(hurst: float, grid: np.ndarray) -> np.ndarray:
    key = (float(hurst), grid.tobytes())
    hit = _FBM_CACHE.get(key)
    if hit is not None:
        return hit
    u = grid[grid != 0.0]
    h2 = 2.0 * hurst
    au = np.abs(u)
    cov = 0.5 * (au[:, None] ** h2 + au[None, :] ** h2 - np.abs(u[:, None] - u[None, :]) ** h2)
    jitter = 0.0
    scale = float(np.max(np.diag(cov)))
    for _ in range(6):
        try:
            chol = np.linalg.cholesky(cov + jitter * np.eye(cov.shape[0]))
            break
        except np.linalg.LinAlgError:
            jitter = max(jitter * 10.0, 1e-12 * scale)
    else:
        raise NumericalError("fBm covariance failed Cholesky even after jitter")
    if len(_FBM_CACHE) > 8:
        _FBM_CACHE.clear()
    _FBM_CACHE[key] = chol
    return chol


def _fbm_batch(hurst: float, grid: np.ndarray, g: np.random.Generator, size: int) -> np.ndarray:
    """size paths of two-sided fBm on the grid; W(0)=0 exactly."""
    chol = _fbm_cholesky(hurst, grid)
    z = g.standard_normal((chol.shape[0], size))
    w = (chol @ z).T  # (size, nonzero nodes)
    out = np.empty((size, grid.size))
    nz = grid != 0.0
    out[:, nz] = w
    out[:, ~nz] = 0.0
    return out


def simulate_fbm(hurst: float, grid, rng: RngStream) -> np.ndarray:
    """One exact (covariance-factorized) fBm path on the given grid."""
    if not (0.0 < hurst < 1.0):
        raise DomainError(f"hurst must lie in (0, 1), got {hurst}")
    grid = np.asarray(grid, dtype=float)
    if grid.size > 4001:
        raise DomainError("grid_points must be <= 4001 for exact factorization")
    return _fbm_batch(hurst, grid, rng.generator(), 1)[0]


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------


def _bivariate_normal(g, corr, size):
    z1 = g.standard_normal(size)
    z2 = corr * z1 + math.sqrt(max(0.0, 1.0 - corr ** 2)) * g.standard_normal(size)
    return z1, z2


def _grid_posterior_mean(u, log_z):
    """Numeric integral u Z / integral Z on a uniform grid (batched rows)."""
    m = np.max(log_z, axis=-1, keepdims=True)
    w = np.exp(log_z - m)
    coeff = np.ones(u.size)
    coeff[1:-1:2] = 4.0
    coeff[2:-1:2] = 2.0
    coeff *= (u[1] - u[0]) / 3.0
    den = w @ coeff
    num = w @ (coeff * u)
    return num / den


def _jump_mle_one(tp, tm, log_ratio, drift, u_max):
    """Exact argmax of the two-branch jump limit over realized event points."""
    best_u, best_v = 0.0, 0.0
    ks = np.arange(1, tp.size + 1)
    for times, counts in ((tp, ks), (tp, ks - 1)):
        if times.size:
            vals = log_ratio * counts - drift * times
            i = int(np.argmax(vals))
            if vals[i] > best_v:
                best_u, best_v = float(times[i]), float(vals[i])
    tail = log_ratio * tp.size - drift * u_max
    if tail > best_v:
        best_u, best_v = u_max, tail
    ms = np.arange(1, tm.size + 1)
    for times, counts in ((tm, ms), (tm, ms - 1)):
        if times.size:
            vals = -log_ratio * counts + drift * times
            i = int(np.argmax(vals))
            if vals[i] > best_v:
                best_u, best_v = -float(times[i]), float(vals[i])
    tail = -log_ratio * tm.size + drift * u_max
    if tail > best_v:
        best_u, best_v = -u_max, tail
    return best_u


def _jump_seg_sums(edges, levels, r, m):
    """Per-segment exact integrals of exp(level - m - r*s) and s * same."""
    a, b = edges[:-1], edges[1:]
    amp = np.exp(levels - m)
    if abs(r) < 1e-14:
        i0 = amp * (b - a)
        i1 = amp * 0.5 * (b * b - a * a)
    else:
        ea, eb = np.exp(-r * a), np.exp(-r * b)
        i0 = amp * (ea - eb) / r
        i1 = amp * ((a / r + 1.0 / r ** 2) * ea - (b / r + 1.0 / r ** 2) * eb)
    return float(i0.sum()), float(i1.sum())


def _jump_bayes_one(tp, tm, log_ratio, drift, u_max):
    """integral u Z / integral Z with piecewise-exact segments between jumps."""
    edges_p = np.concatenate([[0.0], tp, [u_max]])
    levels_p = log_ratio * np.arange(tp.size + 1)
    edges_m = np.concatenate([[0.0], tm, [u_max]])
    levels_m = -log_ratio * np.arange(tm.size + 1)
    m = max(float(np.max(levels_p - drift * np.minimum(edges_p[:-1], edges_p[1:]))),
            float(np.max(levels_m + drift * np.maximum(edges_m[:-1], edges_m[1:]))))
    # positive side: Z(u) = exp(level - drift*u); negative side with s = -u:
    # Z = exp(level + drift*s), and u-weight flips sign
    den_p, num_p = _jump_seg_sums(edges_p, levels_p, drift, m)
    den_m, num_m = _jump_seg_sums(edges_m, levels_m, -drift, m)
    den = den_p + den_m
    num = num_p - num_m
    if den <= 0.0 or not math.isfinite(den):
        raise NumericalError("jump-limit posterior mass degenerate")
    return num / den


def _boundary_inner_integral(zs: np.ndarray) -> np.ndarray:
    """integral_{-z}^{inf} exp(-(u^2 - z^2)/2) du, by quadrature, chunked."""
    width = 40.0
    panels = 2048
    frac = np.linspace(0.0, 1.0, panels + 1)
    coeff = np.ones(panels + 1)
    coeff[1:-1:2] = 4.0
    coeff[2:-1:2] = 2.0
    coeff *= (width / panels) / 3.0
    out = np.empty(zs.shape)
    chunk = 2048
    for lo in range(0, zs.size, chunk):
        z = zs[lo:lo + chunk]
        nodes = (-z)[:, None] + width * frac[None, :]
        vals = np.exp(0.5 * (z[:, None] ** 2 - nodes ** 2))
        out[lo:lo + chunk] = vals @ coeff
    return out


def sample_limit_batch(limit: RegimeLimit, rng: RngStream, which: str, size: int) -> np.ndarray:
    """size i.i.d. draws from the limit law of the chosen estimator."""
    if which not in ("mle", "bayes"):
        raise CapabilityError(f"which must be 'mle' or 'bayes', got {which!r}")
    if size < 1:
        raise DomainError("size must be >= 1")
    g = rng.generator()
    p = limit.params
    regime = limit.regime

    if regime in ("regular", "misspecified"):
        var = 1.0 / p["fisher_information"] if regime == "regular" else p["d_big_sq"]
        return g.normal(0.0, math.sqrt(var), size)

    if regime == "null-fisher":
        i3 = p["i3"]
        zeta = g.normal(0.0, math.sqrt(i3), size)
        if which == "mle":
            return np.cbrt(zeta / i3)
        # numeric posterior mean of Z(u) = exp(u^3 zeta - u^6 i3 / 2),
        # standardized via v = u * i3^(1/6)
        v = np.linspace(-8.0, 8.0, 1601)
        zeta_std = zeta / math.sqrt(i3)
        out = np.empty(size)
        chunk = 4096
        for lo in range(0, size, chunk):
            zs = zeta_std[lo:lo + chunk, None]
            log_z = v[None, :] ** 3 * zs - v[None, :] ** 6 / 2.0
            out[lo:lo + chunk] = _grid_posterior_mean(v, log_z)
        return out / i3 ** (1.0 / 6.0)

    if regime == "disc-fisher":
        il, ir, corr = p["info_left"], p["info_right"], p["corr"]
        zl, zr = _bivariate_normal(g, corr, size)
        if which == "mle":
            left = zl / math.sqrt(il)
            right = zr / math.sqrt(ir)
            out = np.where(
                (zl < 0) & (zr < 0), left,
                np.where(
                    (zl > 0) & (zr > 0), right,
                    np.where(
                        (zl > 0) & (zr < 0), 0.0,
                        np.where(np.abs(zl) > np.abs(zr), left, right),
                    ),
                ),
            )
            return out
        hw = 20.0 / math.sqrt(min(il, ir))
        u = np.linspace(-hw, hw, 2001)
        neg = u <= 0
        out = np.empty(size)
        chunk = 2048
        for lo in range(0, size, chunk):
            a = zl[lo:lo + chunk, None]
            b = zr[lo:lo + chunk, None]
            log_z = np.where(
                neg[None, :],
                u[None, :] * a * math.sqrt(il) - u[None, :] ** 2 * il / 2.0,
                u[None, :] * b * math.sqrt(ir) - u[None, :] ** 2 * ir / 2.0,
            )
            out[lo:lo + chunk] = _grid_posterior_mean(u, log_z)
        return out

    if regime == "boundary":
        info = p["fisher_information"]
        orient = p.get("orientation", 1.0)
        if which == "mle":
            zeta = g.normal(0.0, math.sqrt(info), size)
            return orient * np.where(zeta >= 0.0, zeta / info, 0.0)
        zs = g.standard_normal(size)
        inner = _boundary_inner_integral(zs)
        return orient * (zs + 1.0 / inner) / math.sqrt(info)

    if regime == "jump":
        lam_left, lam_right = p["lam_left"], p["lam_right"]
        u_max = p.get("u_halfwidth", 60.0)
        log_ratio = math.log(lam_right / lam_left)
        drift = lam_right - lam_left
        n_plus = g.poisson(lam_left * u_max, size)
        n_minus = g.poisson(lam_right * u_max, size)
        out = np.empty(size)
        fn = _jump_mle_one if which == "mle" else _jump_bayes_one
        for i in range(size):
            tp = np.sort(g.uniform(0.0, u_max, n_plus[i]))
            tm = np.sort(g.uniform(0.0, u_max, n_minus[i]))
            out[i] = fn(tp, tm, log_ratio, drift, u_max)
        return out

    if regime == "cusp":
        hurst, gamma_sq = p["hurst"], p["gamma_sq"]
        gamma = math.sqrt(gamma_sq)
        u = np.linspace(-p["grid_halfwidth"], p["grid_halfwidth"], p["grid_points"])
        pen = np.abs(u) ** (2.0 * hurst) * gamma_sq / 2.0
        out = np.empty(size)
        chunk = 2048
        for lo in range(0, size, chunk):
            m = min(chunk, size - lo)
            w = _fbm_batch(hurst, u, g, m)
            log_z = gamma * w - pen[None, :]
            if which == "mle":
                out[lo:lo + m] = u[np.argmax(log_z, axis=1)]
            else:
                out[lo:lo + m] = _grid_posterior_mean(u, log_z)
        return out

    # nonidentifiable
    roots = np.asarray(p["roots"], dtype=float)
    infos = np.asarray(p["informations"], dtype=float)
    rho = np.asarray(p["rho"], dtype=float)
    weights = np.asarray(p.get("prior_weights", np.ones(roots.size)), dtype=float)
    jitter = 1e-12 * np.eye(roots.size)
    try:
        chol = np.linalg.cholesky(rho + jitter)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("root-correlation matrix failed Cholesky") from exc
    zeta = g.standard_normal((size, roots.size)) @ chol.T
    if which == "mle":
        pick = np.argmax(np.abs(zeta), axis=1)
        return roots[pick]
    q = weights * infos ** -0.5 * np.exp(zeta ** 2 / 2.0)
    q /= q.sum(axis=1, keepdims=True)
    return q @ roots


def sample_limit(limit: RegimeLimit, rng: RngStream, which: str) -> float:
    """One draw of the limit variable."""
    return float(sample_limit_batch(limit, rng, which, 1)[0])
