"""Theoretical RFA-madogram values for logistic bivariate GEV pairs.

Margins are Frechet-type GEVs with location 0,
``F_i(x) = exp{-(x / sigma_i)^(-1/xi_i)}``, joined by the logistic dependence
function ``V(x, y) = (x^(-1/alpha) + y^(-1/alpha))^alpha``.

Writing ``Y_i = sigma_i Z_i^xi_i`` with unit Frechet ``Z_i`` and using
``|a - b| = 2 max(a, b) - a - b`` gives

    D(c) = int_0^1 [1 - exp{-V(s1(u), s2(u))}] du
           - E[exp(-a12 W1)] / 2 - E[exp(-a21 W2)] / 2

with ``s1(u) = (a12 / -log u)^(xi2/xi1)``, ``s2(u) = (a21 / -log u)^(xi1/xi2)``,
``a12 = (c sigma1 / sigma2)^(-1/xi2)``, ``a21 = (sigma2 / (c sigma1))^(-1/xi1)``,
``W1 = Z1^(-xi1/xi2)`` so that ``P(W1 > w) = exp(-w^(xi2/xi1))``, and ``W2``
likewise with the shape ratio inverted.

When ``xi1 == xi2`` this collapses to ``theta_c / (theta_c + 1) - 1/2`` with
``theta_c = V(a12, 1/a12)``, minimised at ``c = sigma2 / sigma1``.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .errors import ConfigError, NumericError


@dataclass(frozen=True)
class GevMargin:
    sigma: float = 1.0
    xi: float = 0.1

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if not (self.xi > 0 and math.isfinite(self.xi)):
            raise ConfigError(f"xi must be positive, got {self.xi}")

    def cdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(x > 0, np.exp(-np.power(np.maximum(x, 0) / self.sigma, -1.0 / self.xi)), 0.0)

    def ppf(self, q):
        q = np.asarray(q, dtype=np.float64)
        return self.sigma * np.power(-np.log(q), -self.xi)


@dataclass(frozen=True)
class BivariateGevSpec:
    m1: GevMargin
    m2: GevMargin
    alpha: float

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ConfigError(f"logistic alpha must lie in (0, 1], got {self.alpha}")

    @property
    def homogeneous(self) -> bool:
        return self.m1.xi == self.m2.xi


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-8
    max_subdivisions: int = 200

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ConfigError("abs_tol must be positive")
        if self.max_subdivisions < 1:
            raise ConfigError("max_subdivisions must be >= 1")


def _check_alpha(alpha):
    if not 0 < alpha <= 1:
        raise ConfigError(f"logistic alpha must lie in (0, 1], got {alpha}")


def logistic_V(x, y, alpha):
    """Logistic exponent measure ``(x^(-1/alpha) + y^(-1/alpha))^alpha``.

    Evaluated in log space so that small ``alpha`` does not overflow.
    """
    _check_alpha(alpha)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if np.any(x <= 0) or np.any(y <= 0):
        raise ConfigError("logistic_V arguments must be positive")
    out = np.exp(_log_V(np.log(x), np.log(y), alpha))
    return float(out) if out.ndim == 0 else out


def _log_V(log_x, log_y, alpha):
    return alpha * np.logaddexp(-log_x / alpha, -log_y / alpha)


def extremal_coefficient(alpha) -> float:
    return float(logistic_V(1.0, 1.0, alpha))


def d_from_theta(theta) -> float:
    """F-madogram of a max-stable pair with extremal coefficient ``theta``."""
    return theta / (theta + 1.0) - 0.5


def extremal_coefficient_from_d(d) -> float:
    """Invert ``d = theta / (theta + 1) - 1/2``: ``theta = (1 + 2d) / (1 - 2d)``."""
    d = float(d)
    if not 0 <= d < 0.5:
        raise ConfigError(f"madogram value must lie in [0, 1/2), got {d}")
    return (1.0 + 2.0 * d) / (1.0 - 2.0 * d)


def _scale_coefficients(spec: BivariateGevSpec, c: float):
    if not (c > 0 and math.isfinite(c)):
        raise ConfigError(f"scale c must be positive, got {c}")
    s1, s2 = spec.m1.sigma, spec.m2.sigma
    x1, x2 = spec.m1.xi, spec.m2.xi
    log_a12 = -math.log(c * s1 / s2) / x2
    log_a21 = -math.log(s2 / (c * s1)) / x1
    return log_a12, log_a21


def theoretical_D_homogeneous(spec: BivariateGevSpec, c: float) -> float:
    """Closed form ``theta_c/(theta_c+1) - 1/(2(1+a12)) - 1/(2(1+a21))``."""
    if not spec.homogeneous:
        raise ConfigError(f"shape mismatch: xi1={spec.m1.xi}, xi2={spec.m2.xi}")
    log_a12, _ = _scale_coefficients(spec, c)
    log_a21 = -log_a12
    theta = math.exp(_log_V(log_a12, log_a21, spec.alpha))
    a12, a21 = math.exp(log_a12), math.exp(log_a21)
    return theta / (theta + 1.0) - 0.5 / (1.0 + a12) - 0.5 / (1.0 + a21)


def _quad(f, a, b, q: QuadratureConfig, what):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, info, *rest = integrate.quad(
            f, a, b, epsabs=q.abs_tol, epsrel=q.abs_tol, limit=q.max_subdivisions, full_output=1
        )
    # scipy appends a warning message only when ier > 0
    if rest and err > 10 * q.abs_tol:
        reason = str(rest[0]).strip().splitlines()[0]
        raise NumericError(f"quadrature for {what} did not converge: {reason} (err={err:.2e})")
    return val


def _exp_neg(x):
    # exp(-x) for x >= 0 that may be huge
    return 0.0 if x > 745.0 else math.exp(-x)


def _log_quad(f, v_feature, q: QuadratureConfig, what):
    """Integrate ``f(v)`` over the real line.

    ``f`` must decay at least like ``e^v`` to the left and double
    exponentially beyond ``v = 4``; ``v_feature`` marks where its mass sits.
    """
    lo = min(v_feature, 0.0) - 40.0
    hi = max(v_feature, 0.0) + 4.0
    cuts = sorted({lo, min(v_feature, 0.0), max(v_feature, 0.0), hi})
    return sum(_quad(f, x0, x1, q, what) for x0, x1 in zip(cuts, cuts[1:]) if x1 > x0)


def weibull_laplace(a: float, shape_ratio: float, quad: QuadratureConfig | None = None) -> float:
    """``E[exp(-a W)]`` where ``P(W > w) = exp(-w^(1/shape_ratio))``.

    With ``t = w^(1/shape_ratio)`` (a standard exponential) this is
    ``int_0^inf exp(-a t^shape_ratio) exp(-t) dt``, evaluated in ``v = log t``
    so that extreme ``a`` only shifts the integrand instead of squeezing it.
    """
    quad = quad or QuadratureConfig()
    log_a = math.log(a)
    r = shape_ratio

    def f(v):
        return _exp_neg(math.exp(min(log_a + r * v, 700.0)) + math.exp(min(v, 700.0))) * math.exp(v)

    return _log_quad(f, -log_a / r, quad, "Laplace term")


def theoretical_D_general(spec: BivariateGevSpec, c: float, quad: QuadratureConfig | None = None) -> float:
    """``D(c)`` for arbitrary shapes by adaptive quadrature of the three terms.

    The first term is integrated in ``v = log(-log u)``.
    """
    quad = quad or QuadratureConfig()
    x1, x2 = spec.m1.xi, spec.m2.xi
    r12 = x2 / x1
    r21 = x1 / x2
    alpha = spec.alpha
    log_a12, log_a21 = _scale_coefficients(spec, c)

    def log_v(v):
        return float(_log_V(r12 * (log_a12 - v), r21 * (log_a21 - v), alpha))

    def joint_tail(v):
        big_v = math.exp(min(log_v(v), 700.0))
        return -math.expm1(-big_v) * _exp_neg(math.exp(min(v, 700.0))) * math.exp(v)

    # log V increases in v: locate V = 1 by bisection
    lo, hi = -300.0, 300.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if log_v(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    first = _log_quad(joint_tail, 0.5 * (lo + hi), quad, "max term")
    lap12 = weibull_laplace(math.exp(log_a12), x1 / x2, quad)
    lap21 = weibull_laplace(math.exp(log_a21), x2 / x1, quad)
    return first - 0.5 * lap12 - 0.5 * lap21


def theoretical_D(spec: BivariateGevSpec, c: float, quad: QuadratureConfig | None = None) -> float:
    if spec.homogeneous:
        return theoretical_D_homogeneous(spec, c)
    return theoretical_D_general(spec, c, quad)


def minimise_theoretical_D(spec: BivariateGevSpec, quad: QuadratureConfig | None = None,
                           log_c_range=(-4.0, 4.0), coarse=33):
    """Numerical ``(c*, D(c*))``: coarse scan in log c then bounded Brent."""
    centre = math.log(spec.m2.sigma / spec.m1.sigma)
    grid = centre + np.linspace(log_c_range[0], log_c_range[1], coarse)
    vals = [theoretical_D_general(spec, math.exp(u), quad) for u in grid]
    k = int(np.argmin(vals))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, coarse - 1)]
    res = optimize.minimize_scalar(
        lambda u: theoretical_D_general(spec, math.exp(u), quad),
        bounds=(lo, hi), method="bounded", options={"xatol": 1e-9},
    )
    if res.fun <= vals[k]:
        return math.exp(res.x), float(res.fun)
    return math.exp(grid[k]), float(vals[k])


def figure3_surface(alphas, ratios, xi2: float = 0.01, quad: QuadratureConfig | None = None, threads: int = 1):
    """``D(c*)`` over (alpha, xi1/xi2) with unit scales.

    Returns a structured array with fields ``alpha``, ``ratio``, ``c_star``,
    ``d``, one row per cell, alpha-major.
    """
    alphas = [float(a) for a in alphas]
    ratios = [float(r) for r in ratios]
    if not alphas or not ratios:
        raise ConfigError("alpha and ratio grids must be non-empty")
    if any(r <= 0 for r in ratios):
        raise ConfigError("ratios must be positive")
    cells = [(a, r) for a in alphas for r in ratios]

    def one(cell):
        a, r = cell
        spec = BivariateGevSpec(GevMargin(1.0, r * xi2), GevMargin(1.0, xi2), a)
        return minimise_theoretical_D(spec, quad)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, cells))
    else:
        results = [one(cell) for cell in cells]
    out = np.empty(len(cells), dtype=[("alpha", "f8"), ("ratio", "f8"), ("c_star", "f8"), ("d", "f8")])
    for k, ((a, r), (cs, dv)) in enumerate(zip(cells, results)):
        out[k] = (a, r, cs, dv)
    return out


def write_surface_csv(table, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("alpha,ratio,c_star,d\n")
        for row in table:
            fh.write(",".join(repr(float(row[k])) for k in ("alpha", "ratio", "c_star", "d")) + "\n")
