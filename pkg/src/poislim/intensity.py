"""Parametric intensity families for inhomogeneous Poisson processes.

Every family is a subclass of :class:`IntensityModel` addressable through the
string catalog (see :func:`make_model`).  A model is an immutable description:
all evaluation methods are pure, broadcast over numpy arrays, and safe to call
from any number of workers.

Side conventions: several families are discontinuous in theta at
sample-dependent points (the log-likelihood jumps when theta crosses an event
image).  ``theta_side`` selects the one-sided limit there: ``-1`` is
``lim_{theta' -> theta-}``, ``+1`` the limit from the right, ``0`` the plain
value.  Smooth families ignore the flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CapabilityError, ConfigurationError, DomainError

__all__ = [
    "ParameterInterval",
    "IntensityModel",
    "TrueIntensity",
    "CATALOG",
    "make_model",
    "evaluate",
    "cumulative",
    "theta_derivative",
]

_POSITIVITY_GRID = 50


@dataclass(frozen=True)
class ParameterInterval:
    """Open interval of admissible parameter values."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha < self.beta):
            raise ConfigurationError(
                f"parameter interval requires alpha < beta, got ({self.alpha}, {self.beta})"
            )

    @property
    def width(self) -> float:
        return self.beta - self.alpha

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.alpha + self.beta)

    def contains(self, theta, closed: bool = True) -> bool:
        if closed:
            return self.alpha <= theta <= self.beta
        return self.alpha < theta < self.beta

    def grid(self, size: int) -> np.ndarray:
        return np.linspace(self.alpha, self.beta, size)


@dataclass(frozen=True)
class IntensityModel:
    """Base class: a parametric intensity family on [0, horizon].

    ``lambda_max`` is an analytic certified bound (never a runtime scan), and
    ``smoothness_order`` the highest theta-derivative order a family exposes.
    Construction runs a positivity/bound grid scan unless
    ``positivity_checked`` is False (used only by the catalog entry shipped
    verbatim despite being negative on part of its parameter set).
    """

    catalog_id: str = field(init=False, default="")
    theta_interval: ParameterInterval = ParameterInterval(0.0, 1.0)
    horizon: float = 1.0
    lambda_max: float = field(init=False, default=0.0)
    smoothness_order: int = field(init=False, default=0)
    positivity_checked: bool = field(init=False, default=True)
    lambda_max_override: float | None = None

    def __post_init__(self):
        if self.horizon <= 0:
            raise ConfigurationError(f"horizon must be positive, got {self.horizon}")
        object.__setattr__(self, "catalog_id", self._catalog_id())
        object.__setattr__(self, "smoothness_order", self._smoothness_order())
        bound = self._lambda_bound()
        if self.lambda_max_override is not None:
            if self.lambda_max_override < bound:
                raise ConfigurationError(
                    f"lambda_max override {self.lambda_max_override} below analytic bound {bound}"
                )
            bound = float(self.lambda_max_override)
        object.__setattr__(self, "lambda_max", float(bound))
        object.__setattr__(self, "positivity_checked", self._positivity_scan())

    # ---- hooks each family implements -------------------------------------

    def _catalog_id(self) -> str:
        raise NotImplementedError

    def _smoothness_order(self) -> int:
        raise NotImplementedError

    def _lambda_bound(self) -> float:
        raise NotImplementedError

    def _value(self, theta, t, theta_side=0):
        raise NotImplementedError

    def _dtheta(self, theta, t, order, side):
        raise CapabilityError(f"{self.catalog_id} exposes no theta-derivatives")

    # ---- shared surface ----------------------------------------------------

    @property
    def params(self) -> dict:
        skip = {
            "catalog_id", "theta_interval", "horizon", "lambda_max",
            "smoothness_order", "positivity_checked", "lambda_max_override",
        }
        return {k: v for k, v in self.__dict__.items() if k not in skip}

    def value(self, theta, t, theta_side=0):
        """Intensity at (theta, t); broadcasts over array arguments."""
        return self._value(np.asarray(theta, dtype=float), np.asarray(t, dtype=float), theta_side)

    def log_value(self, theta, t, theta_side=0):
        """log intensity; -inf where the intensity vanishes."""
        v = self.value(theta, t, theta_side)
        with np.errstate(divide="ignore"):
            return np.log(v)

    def event_log_sums(self, thetas, events, theta_side=0):
        """sum_i log lambda(theta, t_i) for each theta in ``thetas``.

        Chunked broadcast; families with a closed-form sufficient statistic
        override this for speed (identical values up to rounding).
        """
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
        events = np.asarray(events, dtype=float)
        if events.size == 0:
            return np.zeros(thetas.shape)
        out = np.empty(thetas.shape)
        chunk = max(1, int(4_000_000 // max(events.size, 1)))
        for lo in range(0, thetas.size, chunk):
            block = thetas[lo:lo + chunk, None]
            out[lo:lo + chunk] = self.log_value(block, events[None, :], theta_side).sum(axis=1)
        return out

    def dtheta(self, theta, t, order, side=None):
        """Theta-derivative of the given order, broadcasting over t."""
        if not (1 <= order <= 3):
            raise DomainError(f"derivative order must be 1..3, got {order}")
        if order > self.smoothness_order:
            raise CapabilityError(
                f"{self.catalog_id} has smoothness_order {self.smoothness_order}, "
                f"order-{order} derivative unavailable"
            )
        return self._dtheta(float(theta), np.asarray(t, dtype=float), order, side)

    def integral_hint(self, thetas, lo: float, hi: float):
        """Closed-form integral of lambda(theta, .) over [lo, hi], or None.

        Vectorized over ``thetas``.  Families without a closed form return
        None and callers fall back to quadrature; where a form exists it is
        cross-checked against quadrature in the test suite.
        """
        return None

    def t_breakpoints(self, theta) -> tuple:
        """Interior t-points where lambda(theta, .) is discontinuous or kinked."""
        return ()

    def theta_kinks(self) -> tuple:
        """Theta values where the family loses theta-smoothness."""
        return ()

    def event_theta_breakpoints(self, events) -> np.ndarray:
        """Theta values where sum_i log lambda(theta, t_i) jumps or kinks."""
        return np.empty(0)

    @property
    def is_theta_smooth(self) -> bool:
        return self.smoothness_order >= 1 and not self.theta_kinks()

    @property
    def has_event_breakpoints(self) -> bool:
        return False

    @property
    def event_breakpoints_are_jumps(self) -> bool:
        """Whether the log-likelihood jumps (vs only kinks) at event breakpoints."""
        return True

    def with_interval(self, alpha: float, beta: float) -> "IntensityModel":
        return replace(self, theta_interval=ParameterInterval(float(alpha), float(beta)))

    # ---- construction-time validation ---------------------------------

    def _positivity_scan(self) -> bool:
        if not self._check_positivity():
            return False
        iv = self.theta_interval
        th = np.linspace(iv.alpha, iv.beta, _POSITIVITY_GRID)
        tt = np.linspace(0.0, self.horizon, _POSITIVITY_GRID)
        vals = self.value(th[:, None], tt[None, :])
        if np.min(vals) < -1e-12:
            bad = np.unravel_index(np.argmin(vals), vals.shape)
            raise ConfigurationError(
                f"{self._catalog_id()} is negative at theta={th[bad[0]]:.6g}, t={tt[bad[1]]:.6g}"
            )
        if np.max(vals) > self.lambda_max * (1 + 1e-9) + 1e-12:
            raise ConfigurationError(
                f"{self._catalog_id()} exceeds its certified bound {self.lambda_max}"
            )
        return True

    def _check_positivity(self) -> bool:
        return True


# ---------------------------------------------------------------------------
# catalog families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantModel(IntensityModel):
    """lambda(theta, t) = theta.  Closed-form MLE N/(n*tau); the estimator oracle."""

    theta_interval: ParameterInterval = ParameterInterval(0.1, 10.0)

    def _catalog_id(self):
        return "CONSTANT"

    def _smoothness_order(self):
        return 3

    def _lambda_bound(self):
        return self.theta_interval.beta

    def _value(self, theta, t, theta_side=0):
        return np.broadcast_to(theta, np.broadcast_shapes(theta.shape, t.shape)).copy()

    def log_value(self, theta, t, theta_side=0):
        theta = np.asarray(theta, dtype=float)
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            ln = np.log(theta)
        return np.broadcast_to(ln, np.broadcast_shapes(theta.shape, t.shape)).copy()

    def event_log_sums(self, thetas, events, theta_side=0):
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
        n_events = np.asarray(events).size
        with np.errstate(divide="ignore"):
            return n_events * np.log(thetas)

    def _dtheta(self, theta, t, order, side):
        out = np.ones_like(t) if order == 1 else np.zeros_like(t)
        return out

    def integral_hint(self, thetas, lo, hi):
        return np.asarray(thetas, dtype=float) * (hi - lo)


@dataclass(frozen=True)
class RegularExpModel(IntensityModel):
    """lambda(theta, t) = exp(theta*t): the smooth baseline family."""

    theta_interval: ParameterInterval = ParameterInterval(-1.0, 1.0)

    def _catalog_id(self):
        return "REGULAR_EXP"

    def _smoothness_order(self):
        return 3

    def _lambda_bound(self):
        return math.exp(max(self.theta_interval.beta, 0.0) * self.horizon)

    def _value(self, theta, t, theta_side=0):
        return np.exp(theta * t)

    def log_value(self, theta, t, theta_side=0):
        return np.asarray(theta, dtype=float) * np.asarray(t, dtype=float)

    def event_log_sums(self, thetas, events, theta_side=0):
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
        return thetas * float(np.sum(events))

    def _dtheta(self, theta, t, order, side):
        return t ** order * np.exp(theta * t)

    def integral_hint(self, thetas, lo, hi):
        th = np.asarray(thetas, dtype=float)
        small = np.abs(th) < 1e-8
        safe = np.where(small, 1.0, th)
        exact = np.exp(th * lo) * np.expm1(th * (hi - lo)) / safe
        series = (hi - lo) * np.exp(th * lo) * (1.0 + th * (hi - lo) / 2.0)
        return np.where(small, series, exact)


@dataclass(frozen=True)
class NullFisherSineModel(IntensityModel):
    """lambda(theta, t) = theta*sin^2(theta*t) + 2.

    At theta=0 the first two theta-derivatives vanish identically; the first
    informative term is third order (6*t^2 at zero).
    """

    theta_interval: ParameterInterval = ParameterInterval(-1.0, 1.0)

    def _catalog_id(self):
        return "NULLFI_SINE"

    def _smoothness_order(self):
        return 3

    def _lambda_bound(self):
        return 2.0 + max(self.theta_interval.beta, 0.0)

    def _value(self, theta, t, theta_side=0):
        return theta * np.sin(theta * t) ** 2 + 2.0

    def _dtheta(self, theta, t, order, side):
        tt = theta * t
        if order == 1:
            return np.sin(tt) ** 2 + theta * t * np.sin(2.0 * tt)
        if order == 2:
            return 2.0 * t * np.sin(2.0 * tt) + 2.0 * theta * t ** 2 * np.cos(2.0 * tt)
        return 6.0 * t ** 2 * np.cos(2.0 * tt) - 4.0 * theta * t ** 3 * np.sin(2.0 * tt)

    def integral_hint(self, thetas, lo, hi):
        # integral of theta*sin^2(theta*t) + 2; series branch keeps full
        # precision through theta = 0
        th = np.asarray(thetas, dtype=float)
        length = hi - lo
        small = np.abs(th) < 1e-4
        safe = np.where(small, 1.0, th)
        sin_part = length / 2.0 - (np.sin(2.0 * safe * hi) - np.sin(2.0 * safe * lo)) / (4.0 * safe)
        series = th ** 2 * (hi ** 3 - lo ** 3) / 3.0 - th ** 4 * (hi ** 5 - lo ** 5) / 15.0
        return 2.0 * length + np.where(small, th * series, th * sin_part)


@dataclass(frozen=True)
class DiscFisherKinkModel(IntensityModel):
    """lambda(theta, t) = (theta-1)*[3t if theta<1 else 5t^2] + 15.

    Continuous in theta, but the score switches branches at theta=1, so the
    one-sided informations differ (1/5 from the left, 1/3 from the right).
    """

    theta_interval: ParameterInterval = ParameterInterval(0.0, 2.0)

    def _catalog_id(self):
        return "DISCFI_KINK"

    def _smoothness_order(self):
        return 3

    def _lambda_bound(self):
        iv = self.theta_interval
        return 15.0 + 5.0 * max(iv.beta - 1.0, 0.0)

    def _value(self, theta, t, theta_side=0):
        s = np.where(theta < 1.0, 3.0 * t, 5.0 * t ** 2)
        return (theta - 1.0) * s + 15.0

    def theta_kinks(self):
        return (1.0,)

    def _dtheta(self, theta, t, order, side):
        if theta == 1.0:
            if side not in ("left", "right"):
                raise DomainError(
                    "DISCFI_KINK needs side='left' or 'right' for derivatives at theta=1"
                )
            left = side == "left"
        else:
            left = theta < 1.0
        if order >= 2:
            return np.zeros_like(t)
        return 3.0 * t if left else 5.0 * t ** 2

    def integral_hint(self, thetas, lo, hi):
        th = np.asarray(thetas, dtype=float)
        low_branch = 1.5 * (hi ** 2 - lo ** 2)
        high_branch = 5.0 * (hi ** 3 - lo ** 3) / 3.0
        return (th - 1.0) * np.where(th < 1.0, low_branch, high_branch) + 15.0 * (hi - lo)


def _abs_pow(x, kappa):
    # |x|**kappa with fast paths for the common exponents
    ax = np.abs(x)
    if kappa == 0.5:
        return np.sqrt(ax)
    if kappa == 0.25:
        return np.sqrt(np.sqrt(ax))
    return ax ** kappa


@dataclass(frozen=True)
class CuspModel(IntensityModel):
    """lambda(theta, t) = a*|t-theta|^kappa + lam0 with kappa in (0, 1/2).

    Not theta-differentiable at t=theta; classic infinite-information family.
    """

    a: float = 1.0
    lam0: float = 2.0
    kappa: float = 0.25
    theta_interval: ParameterInterval = ParameterInterval(0.2, 0.8)

    def __post_init__(self):
        if not (0.0 < self.kappa < 0.5):
            raise ConfigurationError(f"kappa must lie in (0, 1/2), got {self.kappa}")
        if self.a <= 0 or self.lam0 <= 0:
            raise ConfigurationError("cusp family needs a > 0 and lam0 > 0")
        super().__post_init__()

    def _catalog_id(self):
        return "CUSP"

    def _smoothness_order(self):
        return 0

    def _lambda_bound(self):
        iv = self.theta_interval
        reach = max(iv.beta, self.horizon - iv.alpha)
        return self.a * reach ** self.kappa + self.lam0

    def _value(self, theta, t, theta_side=0):
        return self.a * _abs_pow(t - theta, self.kappa) + self.lam0

    def t_breakpoints(self, theta):
        th = float(theta)
        return (th,) if 0.0 < th < self.horizon else ()

    def event_theta_breakpoints(self, events):
        iv = self.theta_interval
        ev = np.asarray(events, dtype=float)
        return ev[(ev > iv.alpha) & (ev < iv.beta)]

    @property
    def has_event_breakpoints(self):
        return True

    @property
    def event_breakpoints_are_jumps(self):
        return False  # |t-theta|^kappa is continuous in theta; events only kink the curve

    @property
    def hurst(self) -> float:
        return self.kappa + 0.5

    def integral_hint(self, thetas, lo, hi):
        th = np.asarray(thetas, dtype=float)
        k1 = self.kappa + 1.0

        def anti(t):
            d = t - th
            return np.sign(d) * _abs_pow(d, self.kappa) * np.abs(d) / k1

        return self.lam0 * (hi - lo) + self.a * (anti(hi) - anti(lo))


@dataclass(frozen=True)
class JumpShiftModel(IntensityModel):
    """lambda(theta, t) = base(t + theta), base(y) = c0 + c1*y + r*1{y >= s_star}.

    The base profile is smooth except for one jump of size r at y = s_star;
    in observation time the jump sits at t = s_star - theta.
    """

    c0: float = 2.0
    c1: float = 0.5
    r: float = 2.0
    s_star: float = 1.0
    theta_interval: ParameterInterval = ParameterInterval(0.25, 0.75)

    def __post_init__(self):
        iv = self.theta_interval
        if not (self.s_star - self.horizon <= iv.alpha and iv.beta <= self.s_star):
            raise ConfigurationError(
                "JUMP_SHIFT needs the jump inside the window: "
                f"Theta=({iv.alpha},{iv.beta}) not within ({self.s_star - self.horizon},{self.s_star})"
            )
        if self.r == 0:
            raise ConfigurationError("JUMP_SHIFT requires a nonzero jump size r")
        super().__post_init__()

    def _catalog_id(self):
        return "JUMP_SHIFT"

    def _smoothness_order(self):
        return 0

    def _lambda_bound(self):
        ymax = self.horizon + self.theta_interval.beta
        base = self.c0 + max(self.c1 * ymax, self.c1 * self.theta_interval.alpha, 0.0)
        return base + max(self.r, 0.0)

    def _value(self, theta, t, theta_side=0):
        y = t + theta
        if theta_side < 0:
            above = y > self.s_star
        elif theta_side > 0:
            above = y >= self.s_star
        else:
            above = y >= self.s_star
        return self.c0 + self.c1 * y + self.r * above

    def t_breakpoints(self, theta):
        tj = self.s_star - float(theta)
        return (tj,) if 0.0 < tj < self.horizon else ()

    def event_theta_breakpoints(self, events):
        iv = self.theta_interval
        br = self.s_star - np.asarray(events, dtype=float)
        return br[(br > iv.alpha) & (br < iv.beta)]

    @property
    def has_event_breakpoints(self):
        return True

    def jump_values(self) -> tuple[float, float]:
        """Base-profile limits (lambda(s*-), lambda(s*+))."""
        smooth = self.c0 + self.c1 * self.s_star
        return smooth, smooth + self.r

    def integral_hint(self, thetas, lo, hi):
        th = np.asarray(thetas, dtype=float)
        smooth = self.c0 * (hi - lo) + self.c1 * (0.5 * (hi ** 2 - lo ** 2) + th * (hi - lo))
        cross = np.clip(self.s_star - th, lo, hi)
        return smooth + self.r * (hi - cross)


@dataclass(frozen=True)
class ChangePointModel(IntensityModel):
    """lambda(theta, t) = g1*1{t < theta} + g2*1{t >= theta}, constants g1 < g2 > 0."""

    g1: float = 1.0
    g2: float = 2.0
    theta_interval: ParameterInterval = ParameterInterval(0.1, 0.9)

    def __post_init__(self):
        if not (0 < self.g1 < self.g2):
            raise ConfigurationError(f"need 0 < g1 < g2, got g1={self.g1}, g2={self.g2}")
        super().__post_init__()

    def _catalog_id(self):
        return "CHANGEPOINT"

    def _smoothness_order(self):
        return 0

    def _lambda_bound(self):
        return self.g2

    def _value(self, theta, t, theta_side=0):
        if theta_side > 0:
            before = t <= theta
        else:
            before = t < theta
        return np.where(before, self.g1, self.g2)

    def t_breakpoints(self, theta):
        th = float(theta)
        return (th,) if 0.0 < th < self.horizon else ()

    def event_theta_breakpoints(self, events):
        iv = self.theta_interval
        ev = np.asarray(events, dtype=float)
        return ev[(ev > iv.alpha) & (ev < iv.beta)]

    @property
    def has_event_breakpoints(self):
        return True

    def integral_hint(self, thetas, lo, hi):
        th = np.asarray(thetas, dtype=float)
        cut = np.clip(th, lo, hi)
        return self.g1 * (cut - lo) + self.g2 * (hi - cut)


@dataclass(frozen=True)
class WindowSineModel(IntensityModel):
    """lambda(theta, t) = (b + theta*sin(omega*t))^2 on one period [0, 2*pi/omega].

    Fisher integrand reduces to 4*sin^2(omega*t) regardless of theta, which
    makes the optimal observation window available in closed form.
    """

    b: float = 2.0
    omega: float = 2.0 * math.pi
    theta_interval: ParameterInterval = ParameterInterval(-1.0, 1.0)
    horizon: float = 1.0

    def __post_init__(self):
        period = 2.0 * math.pi / self.omega
        if abs(self.horizon - period) > 1e-12:
            object.__setattr__(self, "horizon", period)
        iv = self.theta_interval
        if max(abs(iv.alpha), abs(iv.beta)) >= self.b:
            raise ConfigurationError("WINDOW_SINE needs |theta| < b to stay away from zero intensity")
        super().__post_init__()

    def _catalog_id(self):
        return "WINDOW_SINE"

    def _smoothness_order(self):
        return 3

    def _lambda_bound(self):
        iv = self.theta_interval
        return (self.b + max(abs(iv.alpha), abs(iv.beta))) ** 2

    def _value(self, theta, t, theta_side=0):
        return (self.b + theta * np.sin(self.omega * t)) ** 2

    def _dtheta(self, theta, t, order, side):
        s = np.sin(self.omega * t)
        if order == 1:
            return 2.0 * (self.b + theta * s) * s
        if order == 2:
            return 2.0 * s ** 2
        return np.zeros_like(t)

    def integral_hint(self, thetas, lo, hi):
        th = np.asarray(thetas, dtype=float)
        w = self.omega
        int_sin = (np.cos(w * lo) - np.cos(w * hi)) / w
        int_sin2 = 0.5 * (hi - lo) - (np.sin(2.0 * w * hi) - np.sin(2.0 * w * lo)) / (4.0 * w)
        return self.b ** 2 * (hi - lo) + 2.0 * self.b * th * int_sin + th ** 2 * int_sin2


@dataclass(frozen=True)
class SuffWinLinearModel(IntensityModel):
    """lambda(theta, t) = 2*a*t + b*1{t > theta}.

    Linear ramp plus one jump at t=theta; the mean terminal count
    a*tau^2 + b*(tau - theta) inverts into a method-of-moments estimator.
    """

    a: float = 1.0
    b: float = 2.0
    theta_interval: ParameterInterval = ParameterInterval(0.1, 0.9)

    def __post_init__(self):
        if self.a < 0 or self.b <= 0:
            raise ConfigurationError("SUFFWIN_LINEAR needs a >= 0 and b > 0")
        super().__post_init__()

    def _catalog_id(self):
        return "SUFFWIN_LINEAR"

    def _smoothness_order(self):
        return 0

    def _lambda_bound(self):
        return 2.0 * self.a * self.horizon + self.b

    def _value(self, theta, t, theta_side=0):
        if theta_side < 0:
            after = t >= theta
        else:
            after = t > theta
        return 2.0 * self.a * t + self.b * after

    def t_breakpoints(self, theta):
        th = float(theta)
        return (th,) if 0.0 < th < self.horizon else ()

    def event_theta_breakpoints(self, events):
        iv = self.theta_interval
        ev = np.asarray(events, dtype=float)
        return ev[(ev > iv.alpha) & (ev < iv.beta)]

    @property
    def has_event_breakpoints(self):
        return True

    def mean_terminal_count(self, theta) -> float:
        tau = self.horizon
        return self.a * tau ** 2 + self.b * (tau - float(theta))

    def integral_hint(self, thetas, lo, hi):
        th = np.asarray(thetas, dtype=float)
        cut = np.clip(th, lo, hi)
        return self.a * (hi ** 2 - lo ** 2) + self.b * (hi - cut)


@dataclass(frozen=True)
class NonIdentCubicModel(IntensityModel):
    """lambda = (theta^3-3theta^2+2theta)*t + (2theta-3)*t^2 + 1, theta in (0,3).

    Shipped verbatim from its source despite two defects: the advertised
    coincidence lambda(1,.)=lambda(2,.) fails (1-t^2 vs t^2+1), and the
    intensity is negative on part of the parameter set (e.g. theta=0.5, t=1).
    Kept for reference only; use NONIDENT_FIXED as the working test bed.
    """

    theta_interval: ParameterInterval = ParameterInterval(0.0, 3.0)

    def _catalog_id(self):
        return "NONIDENT_CUBIC"

    def _smoothness_order(self):
        return 3

    def _lambda_bound(self):
        return 10.0

    def _check_positivity(self):
        return False

    def _value(self, theta, t, theta_side=0):
        c1 = theta ** 3 - 3.0 * theta ** 2 + 2.0 * theta
        c2 = 2.0 * theta - 3.0
        return c1 * t + c2 * t ** 2 + 1.0

    def _dtheta(self, theta, t, order, side):
        if order == 1:
            return (3.0 * theta ** 2 - 6.0 * theta + 2.0) * t + 2.0 * t ** 2
        if order == 2:
            return (6.0 * theta - 6.0) * t
        return 6.0 * t


@dataclass(frozen=True)
class NonIdentFixedModel(IntensityModel):
    """Corrected non-identifiable family: both t-coefficients vanish at theta=1,2.

    lambda = 1 + theta*(theta-1)*(theta-2)*t + (theta-1)*(theta-2)*t^2, so
    lambda(1,.) = lambda(2,.) = 1 while the scores at the two roots differ.
    """

    theta_interval: ParameterInterval = ParameterInterval(0.0, 3.0)

    def _catalog_id(self):
        return "NONIDENT_FIXED"

    def _smoothness_order(self):
        return 3

    def _lambda_bound(self):
        return 9.0

    def _value(self, theta, t, theta_side=0):
        q = (theta - 1.0) * (theta - 2.0)
        return 1.0 + theta * q * t + q * t ** 2

    def _dtheta(self, theta, t, order, side):
        if order == 1:
            return (3.0 * theta ** 2 - 6.0 * theta + 2.0) * t + (2.0 * theta - 3.0) * t ** 2
        if order == 2:
            return (6.0 * theta - 6.0) * t + 2.0 * t ** 2
        return 6.0 * t

    def nonident_roots(self) -> tuple[float, float]:
        return (1.0, 2.0)


def _frac(y):
    return y - np.floor(y)


@dataclass(frozen=True)
class PhaseModModel(IntensityModel):
    """Phase modulation lambda(theta, t) = base(t + theta) with 1-periodic base.

    smooth variant: base(y) = 2 + cos(2*pi*y); discontinuous variant:
    base(y) = 1 + 2*1{frac(y) < 1/2}.
    """

    smooth: bool = True
    theta_interval: ParameterInterval = ParameterInterval(0.1, 0.9)

    def _catalog_id(self):
        return "PHASE_MOD_SMOOTH" if self.smooth else "PHASE_MOD_DISC"

    def _smoothness_order(self):
        return 3 if self.smooth else 0

    def _lambda_bound(self):
        return 3.0

    def _value(self, theta, t, theta_side=0):
        y = t + theta
        if self.smooth:
            return 2.0 + np.cos(2.0 * math.pi * y)
        f = _frac(y)
        # base = 3 on [k, k+1/2), 1 on [k+1/2, k+1); one-sided limits in theta
        # shift the half-open conventions accordingly.
        if theta_side < 0:
            hi = (f > 0.0) & (f <= 0.5)
        else:
            hi = f < 0.5
        return 1.0 + 2.0 * hi

    def _dtheta(self, theta, t, order, side):
        if not self.smooth:
            raise CapabilityError("PHASE_MOD_DISC exposes no theta-derivatives")
        y = 2.0 * math.pi * (t + theta)
        w = 2.0 * math.pi
        if order == 1:
            return -w * np.sin(y)
        if order == 2:
            return -w ** 2 * np.cos(y)
        return w ** 3 * np.sin(y)

    def t_breakpoints(self, theta):
        if self.smooth:
            return ()
        th = float(theta)
        pts = []
        k = math.floor(th)
        y = k + 0.5
        while y - th < self.horizon + 1.0:
            for cand in (y - th - 0.5, y - th):
                if 0.0 < cand < self.horizon:
                    pts.append(cand)
            y += 1.0
        return tuple(sorted(set(pts)))

    def event_theta_breakpoints(self, events):
        if self.smooth:
            return np.empty(0)
        ev = np.asarray(events, dtype=float)
        if ev.size == 0:
            return np.empty(0)
        iv = self.theta_interval
        lo = math.floor(2.0 * (iv.alpha + float(np.min(ev))))
        hi = math.ceil(2.0 * (iv.beta + float(np.max(ev))))
        out = []
        for half in range(lo, hi + 1):
            th = half / 2.0 - ev
            out.append(th[(th > iv.alpha) & (th < iv.beta)])
        return np.unique(np.concatenate(out)) if out else np.empty(0)

    @property
    def has_event_breakpoints(self):
        return not self.smooth


@dataclass(frozen=True)
class FreqModModel(IntensityModel):
    """Frequency modulation lambda(theta, t) = base(theta * t), 1-periodic base.

    Estimated from one long record (the i.i.d.-slices equivalence does not
    apply); horizon is a free structural constant.
    """

    smooth: bool = True
    theta_interval: ParameterInterval = ParameterInterval(0.5, 1.5)
    horizon: float = 10.0

    def _catalog_id(self):
        return "FREQ_MOD_SMOOTH" if self.smooth else "FREQ_MOD_DISC"

    def _smoothness_order(self):
        return 3 if self.smooth else 0

    def _lambda_bound(self):
        return 3.0

    def _value(self, theta, t, theta_side=0):
        y = theta * t
        if self.smooth:
            return 2.0 + np.cos(2.0 * math.pi * y)
        f = _frac(y)
        if theta_side < 0:
            hi = (f > 0.0) & (f <= 0.5)
        else:
            hi = f < 0.5
        return 1.0 + 2.0 * hi

    def _dtheta(self, theta, t, order, side):
        if not self.smooth:
            raise CapabilityError("FREQ_MOD_DISC exposes no theta-derivatives")
        y = 2.0 * math.pi * theta * t
        w = 2.0 * math.pi
        if order == 1:
            return -w * t * np.sin(y)
        if order == 2:
            return -(w * t) ** 2 * np.cos(y)
        return (w * t) ** 3 * np.sin(y)

    def t_breakpoints(self, theta):
        if self.smooth:
            return ()
        th = float(theta)
        if th <= 0:
            return ()
        ks = np.arange(1, int(math.floor(2 * th * self.horizon)) + 1)
        pts = ks / (2.0 * th)
        return tuple(pts[(pts > 0) & (pts < self.horizon)])

    def event_theta_breakpoints(self, events):
        if self.smooth:
            return np.empty(0)
        iv = self.theta_interval
        ev = np.asarray(events, dtype=float)
        ev = ev[ev > 1e-12]
        out = []
        for t_i in ev:
            ks = np.arange(math.ceil(2 * t_i * iv.alpha), math.floor(2 * t_i * iv.beta) + 1)
            th = ks / (2.0 * t_i)
            out.append(th[(th > iv.alpha) & (th < iv.beta)])
        return np.unique(np.concatenate(out)) if out else np.empty(0)

    @property
    def has_event_breakpoints(self):
        return not self.smooth


# ---------------------------------------------------------------------------
# true (data-generating) intensities, possibly outside the model family
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrueIntensity:
    """A fixed data-generating intensity lambda*(t) on [0, horizon]."""

    fn: object  # callable t-array -> rate array
    horizon: float
    lambda_max: float
    breakpoints: tuple = ()
    description: str = ""

    def __post_init__(self):
        tt = np.linspace(0.0, self.horizon, 2001)
        vals = self.value(tt)
        if np.min(vals) < -1e-12:
            raise ConfigurationError(f"true intensity negative at t={tt[np.argmin(vals)]:.6g}")
        if np.max(vals) > self.lambda_max * (1 + 1e-9) + 1e-12:
            raise ConfigurationError("true intensity exceeds its certified bound")

    def value(self, t):
        return np.asarray(self.fn(np.asarray(t, dtype=float)), dtype=float)

    @staticmethod
    def from_model(model: IntensityModel, theta0: float) -> "TrueIntensity":
        theta0 = float(theta0)
        if not model.theta_interval.contains(theta0):
            raise DomainError(f"theta0={theta0} outside the closure of Theta")
        return TrueIntensity(
            fn=lambda t, m=model, th=theta0: m.value(th, t),
            horizon=model.horizon,
            lambda_max=model.lambda_max,
            breakpoints=tuple(model.t_breakpoints(theta0)),
            description=f"{model.catalog_id}@theta0={theta0:g}",
        )

    @staticmethod
    def contaminated(model: IntensityModel, theta0: float, h_fn, h_max: float,
                     h_breakpoints: tuple = (), description: str = "") -> "TrueIntensity":
        """lambda*(t) = lambda(theta0, t) + h(t)."""
        base = TrueIntensity.from_model(model, theta0)
        return TrueIntensity(
            fn=lambda t: base.value(t) + np.asarray(h_fn(np.asarray(t, dtype=float)), dtype=float),
            horizon=model.horizon,
            lambda_max=model.lambda_max + max(h_max, 0.0),
            breakpoints=tuple(sorted(set(base.breakpoints) | set(h_breakpoints))),
            description=description or f"{base.description}+h",
        )

    @staticmethod
    def changepoint(g1: float, g2: float, h1: float, h2: float, theta0: float,
                    horizon: float = 1.0) -> "TrueIntensity":
        """Contaminated change point: g1+h1 before theta0, g2+h2 after."""
        lo, hi = g1 + h1, g2 + h2
        if lo < 0 or hi < 0:
            raise ConfigurationError("contaminated change-point intensity is negative")

        def fn(t):
            return np.where(t < theta0, lo, hi)

        return TrueIntensity(
            fn=fn, horizon=horizon, lambda_max=max(lo, hi),
            breakpoints=(theta0,) if 0 < theta0 < horizon else (),
            description=f"changepoint g1+h1={lo:g}, g2+h2={hi:g} @ {theta0:g}",
        )


# ---------------------------------------------------------------------------
# catalog registry and the public operations
# ---------------------------------------------------------------------------

CATALOG = {
    "CONSTANT": ConstantModel,
    "REGULAR_EXP": RegularExpModel,
    "NULLFI_SINE": NullFisherSineModel,
    "DISCFI_KINK": DiscFisherKinkModel,
    "CUSP": CuspModel,
    "JUMP_SHIFT": JumpShiftModel,
    "CHANGEPOINT": ChangePointModel,
    "WINDOW_SINE": WindowSineModel,
    "SUFFWIN_LINEAR": SuffWinLinearModel,
    "NONIDENT_CUBIC": NonIdentCubicModel,
    "NONIDENT_FIXED": NonIdentFixedModel,
    "PHASE_MOD_SMOOTH": lambda **kw: PhaseModModel(smooth=True, **kw),
    "PHASE_MOD_DISC": lambda **kw: PhaseModModel(smooth=False, **kw),
    "FREQ_MOD_SMOOTH": lambda **kw: FreqModModel(smooth=True, **kw),
    "FREQ_MOD_DISC": lambda **kw: FreqModModel(smooth=False, **kw),
}


def make_model(catalog_id: str, params: dict | None = None,
               theta_interval: tuple | None = None,
               horizon: float | None = None) -> IntensityModel:
    """Build a catalog model by string id, with optional overrides."""
    if catalog_id not in CATALOG:
        raise ConfigurationError(
            f"unknown catalog id {catalog_id!r}; known: {sorted(CATALOG)}"
        )
    kwargs = dict(params or {})
    if theta_interval is not None:
        kwargs["theta_interval"] = ParameterInterval(float(theta_interval[0]), float(theta_interval[1]))
    if horizon is not None:
        kwargs["horizon"] = float(horizon)
    return CATALOG[catalog_id](**kwargs)


def _check_args(model: IntensityModel, theta: float, t) -> None:
    iv = model.theta_interval
    if not (iv.alpha <= theta <= iv.beta):
        raise DomainError(f"theta={theta} outside [{iv.alpha}, {iv.beta}]")
    t = np.asarray(t, dtype=float)
    if t.size and (np.min(t) < -1e-12 or np.max(t) > model.horizon + 1e-12):
        raise DomainError(f"t outside [0, {model.horizon}]")


def evaluate(model: IntensityModel, theta: float, t):
    """Intensity value at (theta, t) with full domain validation."""
    _check_args(model, theta, t)
    return model.value(theta, t)


def cumulative(model: IntensityModel, theta: float, t: float):
    """Expected count Lambda(t) = integral of the intensity over [0, t]."""
    from . import analysis  # local import: analysis owns the quadrature rule

    _check_args(model, theta, t)
    t = float(t)
    if t == 0.0:
        return 0.0
    breaks = [b for b in model.t_breakpoints(theta) if 0.0 < b < t]
    return analysis.integrate(lambda s: model.value(theta, s), 0.0, t, breakpoints=breaks)


def theta_derivative(model: IntensityModel, theta: float, t, order: int, side=None):
    """Analytic theta-derivative of order 1..3 (one-sided at declared kinks)."""
    _check_args(model, theta, t)
    return model.dtheta(theta, t, order, side=side)
