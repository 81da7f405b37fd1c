"""High-quantile workflows: simulation-based certification on the sampling grid
and the stationary domain-of-attraction calculator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import interpolate, optimize

from .calibration import LimitLaw, SamplingScales, calibrate, deviation_level
from .errors import ConfigurationError, DomainError, EstimationError, SolverError
from .montecarlo import MCConfig, _grid, wilson_ci
from .processes import ProcessSpec, process_paths
from .rng import run_groups

__all__ = [
    "RiskQuery",
    "StationaryTailModel",
    "StationaryQuantile",
    "x_from_p",
    "grid_maxima",
    "quantile_sim",
    "quantile_stationary",
]


def _check_p(p: float):
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p}")


def x_from_p(p: float, law: LimitLaw) -> float:
    """Solve ``p = 1 - exp(-kappa e^{-x})`` for ``x``."""
    _check_p(p)
    if law.fbar != "gumbel":
        raise DomainError("this limit law is known only at x = 0; pass x directly")
    if law.kappa is None:
        raise DomainError("kappa is not stated for this law; fit it first")
    return -math.log(-math.log1p(-p) / law.kappa)


@dataclass(frozen=True)
class RiskQuery:
    """Level ``u`` with ``P{sup xi > u} <= 2p`` up to Monte Carlo and finite-epsilon error.

    ``coverage_*`` is the Wilson interval of ``P{max_k xi(kq) > u - d}``
    under the simulated law, which should bracket ``p``.
    """

    p: float
    epsilon: float
    x: float
    u: float
    d: float
    q: float
    n: int
    exceed: int
    coverage_lo: float
    coverage_hi: float

    @property
    def certificate(self) -> str:
        return (
            f"P{{sup > u}} <= 2p = {2 * self.p:.6g} at u = {self.u:.10g} "
            f"(sampled exceedance {self.exceed}/{self.n}, interval [{self.coverage_lo:.6g}, {self.coverage_hi:.6g}])"
        )


def grid_maxima(spec: ProcessSpec, q: float, cfg: MCConfig, tag: int = 3) -> np.ndarray:
    """``max_k xi(k q)`` over ``k = 0..floor(1/q)`` for ``cfg.n_paths`` replicates."""
    dt, n_steps = _grid(q, 1, cfg)
    group = lambda rng, count: process_paths(spec, count, n_steps, dt, rng).max(axis=1)
    return np.concatenate(run_groups(group, cfg.n_paths, n_steps + 1, cfg.seed, tag, cfg.threads))


def quantile_sim(spec: ProcessSpec, p: float, epsilon: float, x: float, cfg: MCConfig) -> RiskQuery:
    """``u = (empirical (1-p)-quantile of the grid maximum) + eps + x w``."""
    _check_p(p)
    if p < 10.0 / cfg.n_paths:
        raise EstimationError(f"p={p} is below the resolution 10/n_paths={10.0 / cfg.n_paths}")
    scales = calibrate(spec, epsilon, "one")
    d = deviation_level(scales, x)
    if not d > 0.0:
        raise DomainError(f"deviation allowance eps + x w = {d} must be positive")
    maxima = grid_maxima(spec, scales.q, cfg)
    level = float(np.quantile(maxima, 1.0 - p, method="inverted_cdf"))
    k = int(np.count_nonzero(maxima > level))
    lo, hi = wilson_ci(k, maxima.size, cfg.ci_level)
    return RiskQuery(p, epsilon, x, level + d, d, scales.q, maxima.size, k, lo, hi)


# --------------------------------------------------------------------------
# stationary calculator


@dataclass(frozen=True)
class StationaryTailModel:
    """Marginal tail ``P{xi(0) > u}``, scale ``w_tilde(u)`` and limit shape ``h_bar(y)`` on ``J``.

    ``u_range`` restricts where ``marginal_tail`` may be evaluated (tabulated models).
    """

    marginal_tail: Callable[[float], float]
    w_tilde: Callable[[float], float]
    h_bar: Callable[[float], float]
    J: tuple[float, float] = (-math.inf, math.inf)
    u_range: tuple[float, float] = (-math.inf, math.inf)

    def __post_init__(self):
        lo, hi = self.J
        if not lo < 0.0 < hi:
            raise ConfigurationError(f"J must be an open interval containing 0, got {self.J}")
        if abs(self.h_bar(0.0) - 1.0) > 1e-12:
            raise ConfigurationError(f"h_bar(0) must equal 1, got {self.h_bar(0.0)}")

    def in_J(self, y: float) -> bool:
        return self.J[0] < y < self.J[1]

    @classmethod
    def gumbel(cls, marginal_tail, w_tilde=None, u_range=(-math.inf, math.inf)) -> "StationaryTailModel":
        """Model with ``h_bar(y) = e^{-y}`` on the real line."""
        w = (lambda u: 1.0) if w_tilde is None else w_tilde
        return cls(marginal_tail, w, lambda y: math.exp(-y), (-math.inf, math.inf), u_range)

    @classmethod
    def from_table(cls, u, tail, w_tilde=None, h_bar=None, J=(-math.inf, math.inf)) -> "StationaryTailModel":
        """Tabulated tail, interpolated monotonically (PCHIP on ``log tail``)."""
        u = np.asarray(u, dtype=float)
        tail = np.asarray(tail, dtype=float)
        if u.ndim != 1 or u.size < 2 or u.shape != tail.shape:
            raise ConfigurationError("a tail table needs at least two (u, tail) pairs")
        if np.any(np.diff(u) <= 0.0):
            raise ConfigurationError("table u values must be strictly increasing")
        if np.any(tail <= 0.0) or np.any(np.diff(tail) >= 0.0):
            raise ConfigurationError("table tail values must be positive and strictly decreasing")
        spline = interpolate.PchipInterpolator(u, np.log(tail), extrapolate=False)
        lo, hi = float(u[0]), float(u[-1])

        def marginal(v):
            if not lo <= v <= hi:
                raise DomainError(f"u={v} lies outside the tabulated range [{lo}, {hi}]")
            return float(np.exp(spline(v)))

        w = (lambda v: 1.0) if w_tilde is None else w_tilde
        hb = (lambda y: math.exp(-y)) if h_bar is None else h_bar
        return cls(marginal, w, hb, J, (lo, hi))


@dataclass(frozen=True)
class StationaryQuantile:
    u: float
    y: float
    d: float
    p: float
    residual: float
    iterations: int

    @property
    def certificate(self) -> str:
        return f"P{{sup > u}} <= 2p = {2 * self.p:.6g} at u = {self.u:.12g}"


def quantile_stationary(
    model: StationaryTailModel,
    p: float,
    epsilon: float,
    scales: SamplingScales,
    law: LimitLaw | None = None,
    x: float | None = None,
    u_start: float | None = None,
    max_expand: int = 200,
) -> StationaryQuantile:
    """Solve ``y w_tilde(u) = eps + x w`` and ``(1/q + 1) h_bar(-y) tail(u) = p`` for ``(u, y)``.

    ``x`` defaults to ``x_from_p(p, law)``. The root in ``u`` is bracketed by
    geometric expansion from ``u_start`` and refined with Brent's method.
    """
    _check_p(p)
    if x is None:
        if law is None:
            raise DomainError("pass x or a limit law to derive it from p")
        x = x_from_p(p, law)
    d = epsilon if x == 0.0 else epsilon + x * scales.w
    if not math.isfinite(d):
        raise DomainError("eps + x w must be finite (a deviation scale w is required when x != 0)")
    factor = 1.0 / scales.q + 1.0
    y_of = lambda u: d / model.w_tilde(u)
    residual = lambda u: factor * model.h_bar(-y_of(u)) * model.marginal_tail(u) - p

    u_lo_lim, u_hi_lim = model.u_range
    if u_start is None:
        u_start = 0.5 * (u_lo_lim + u_hi_lim) if math.isfinite(u_lo_lim + u_hi_lim) else 1.0
    trail = []

    def expand(direction: int) -> float:
        u, step = u_start, max(1.0, abs(u_start))
        for _ in range(max_expand):
            r = residual(u)
            trail.append((u, r))
            if (r < 0.0) if direction > 0 else (r > 0.0):
                return u
            nxt = u + direction * step
            limit = u_hi_lim if direction > 0 else u_lo_lim
            if (nxt - limit) * direction > 0.0:
                if u == limit:
                    break
                nxt = limit
            u, step = nxt, 2.0 * step
        raise SolverError(
            "no sign change of the residual within the expansion cap; last (u, residual) pairs: "
            + ", ".join(f"({a:.6g}, {b:.6g})" for a, b in trail[-4:])
        )

    hi = expand(+1)
    lo = expand(-1)
    u, info = optimize.brentq(residual, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, full_output=True)
    y = y_of(u)
    if not model.in_J(-y):
        raise DomainError(f"-y = {-y:.6g} lies outside J = {model.J}")
    return StationaryQuantile(u, y, d, p, residual(u), info.iterations)
