"""Closed-form sampling scales q(eps), w(eps), limit laws and the deterministic
tail-ratio probes built from the skewed stable tail asymptotics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import CalibrationDomainError, DomainError
from .processes import BrownianMotion, Lfsm, ProcessSpec, StableLevy
from .stable import b_alpha_sq, c_alpha, lambda_alpha, stable_tail_skewed

__all__ = [
    "SamplingScales",
    "LimitLaw",
    "ProbeRatios",
    "q_bm",
    "calib_stable_skewed",
    "calib_lfsm",
    "calibrate",
    "deviation_level",
    "limit_law",
    "fixed_eps_levy_limit",
    "probe_condition_ratios",
]


@dataclass(frozen=True)
class SamplingScales:
    """Sampling interval ``q``, deviation scale ``w`` and inner time scales at one epsilon.

    ``eps_threshold`` is the largest epsilon below which the calibration
    bracket stays positive. ``w`` (and the inner scales) are ``nan`` when the
    process has no stated deviation scale.
    """

    epsilon: float
    q: float
    w: float
    q_tilde: float
    q_hat: float
    Q1: float = math.inf
    Q2: float = 1.0
    eps_threshold: float = 1.0


@dataclass(frozen=True)
class LimitLaw:
    """``lim P{sup deviation <= eps + x w} = exp(-kappa * fbar(x))``.

    fbar is ``"gumbel"`` (``e^{-x}`` on the real line) or ``"point0"`` (known
    only at ``x = 0``, where it equals 1). ``kappa`` is ``None`` when only
    existence is known. ``kind`` is ``"asymptotic"`` (eps -> 0) or
    ``"fixed-eps"`` (q -> 0 at fixed eps).
    """

    kappa: float | None
    fbar: str = "gumbel"
    kind: str = "asymptotic"

    def __post_init__(self):
        if self.fbar not in ("gumbel", "point0"):
            raise ValueError(f"unknown fbar {self.fbar!r}")
        if self.kind not in ("asymptotic", "fixed-eps"):
            raise ValueError(f"unknown limit kind {self.kind!r}")
        if self.kappa is not None and not self.kappa > 0.0:
            raise DomainError("kappa must be positive")

    def in_domain(self, x: float) -> bool:
        return math.isfinite(x) if self.fbar == "gumbel" else x == 0.0

    def fbar_at(self, x: float) -> float:
        if not self.in_domain(x):
            raise DomainError(f"fbar is only available at x = 0 for this law, got x={x}")
        return math.exp(-x) if self.fbar == "gumbel" else 1.0

    def probability(self, x: float = 0.0) -> float:
        if self.kappa is None:
            raise DomainError("kappa is not stated for this process; estimate it with fit_kappa_gumbel")
        return math.exp(-self.kappa * self.fbar_at(x))


@dataclass(frozen=True)
class ProbeRatios:
    epsilon: float
    x: float
    r: float
    ratio31: float
    ratio32: float
    ratio33: float

    @property
    def target31(self) -> float:
        return 1.0

    @property
    def target32(self) -> float:
        return math.exp(-self.x)

    @property
    def target33(self) -> float:
        return math.exp(-self.x - self.r)


# --------------------------------------------------------------------------
# bracket g(L) = a L - c ln(b L) - K with L = ln(1/eps)


def _bracket(L: float, a: float, c: float, b: float, K: float) -> float:
    return a * L - c * math.log(b * L) - K


def _bracket_threshold(a: float, c: float, b: float, K: float) -> float:
    """Largest epsilon such that the bracket is positive for every smaller epsilon."""
    g = lambda L: _bracket(L, a, c, b, K)
    # g is increasing for L > max(c/a, 0)
    lo = c / a if c > 0.0 else 0.0
    if c > 0.0 and g(lo) > 0.0:
        return 1.0
    if lo == 0.0:
        lo = 1e-300
        while g(lo) > 0.0:
            lo *= 1e-3
    hi = max(2.0 * lo, 1.0)
    while g(hi) <= 0.0:
        hi *= 2.0
    L_star = optimize.bisect(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return math.exp(-L_star)


def _checked_bracket(eps: float, a: float, c: float, b: float, K: float, what: str) -> tuple[float, float]:
    if not 0.0 < eps < 1.0:
        raise DomainError(f"epsilon must lie in (0, 1), got {eps}")
    L = math.log(1.0 / eps)
    threshold = _bracket_threshold(a, c, b, K)
    value = _bracket(L, a, c, b, K)
    if not value > 0.0:
        raise CalibrationDomainError(
            f"{what} bracket is {value:.6g} <= 0 at epsilon={eps}; admissible epsilon < {threshold:.6g}",
            threshold=threshold,
        )
    return value, threshold


def _bm_coeffs(var_rate: float, i: int):
    return 4.0, -1.0, 4.0, -2.0 * math.log(2.0 * var_rate * i / math.sqrt(2.0 * math.pi))


def q_bm(epsilon: float, var_rate: float = 1.0, i: int = 1) -> float:
    """Brownian sampling interval; ``i = 1`` for the one-sided, ``i = 2`` for the two-sided statistic."""
    return _q_bm_full(epsilon, var_rate, i)[0]


def _q_bm_full(epsilon: float, var_rate: float, i: int) -> tuple[float, float]:
    if i not in (1, 2):
        raise DomainError(f"i must be 1 or 2, got {i}")
    if not var_rate > 0.0:
        raise DomainError("var_rate must be positive")
    value, threshold = _checked_bracket(epsilon, *_bm_coeffs(var_rate, i), "Brownian")
    return epsilon**2 / var_rate / value, threshold


def _check_alpha(alpha: float):
    if not 1.0 < alpha < 2.0:
        raise DomainError(f"alpha must lie in the open interval (1, 2), got {alpha}")


def calib_stable_skewed(epsilon: float, alpha: float, sigma: float = 1.0) -> SamplingScales:
    """Scales for the totally skewed (beta = -1) stable Levy motion with scale ``sigma``.

    Defined for unit scale; other scales act through ``epsilon / sigma``.
    """
    _check_alpha(alpha)
    if not sigma > 0.0:
        raise DomainError("sigma must be positive")
    e = epsilon / sigma
    lam = lambda_alpha(alpha)
    bpow = math.sqrt(b_alpha_sq(alpha)) ** (alpha / lam)
    coeffs = (2.0 * alpha, 3.0 - 2.0 * alpha, 2.0 * alpha, 2.0 * math.log(math.sqrt(2.0 * math.pi * alpha) / bpow))
    if not 0.0 < e < 1.0:
        raise DomainError(f"epsilon / sigma must lie in (0, 1), got {e}")
    value, threshold = _checked_bracket(e, *coeffs, "stable")
    q = e**alpha / bpow * value ** (-alpha / (2.0 * lam))
    w = sigma * e / (2.0 * alpha * lam * math.log(1.0 / e))
    qt = alpha * w / epsilon
    return SamplingScales(epsilon, q, w, qt, qt, eps_threshold=sigma * threshold)


def calib_lfsm(epsilon: float, alpha: float, H: float, sigma1: float) -> SamplingScales:
    """Scales for LFSM whose value at time 1 has scale ``sigma1``."""
    _check_alpha(alpha)
    if not 1.0 / alpha < H < 1.0:
        raise DomainError(f"H must lie in (1/alpha, 1), got H={H}, alpha={alpha}")
    if not sigma1 > 0.0:
        raise DomainError("sigma1 must be positive")
    lam = lambda_alpha(alpha)
    k = math.sqrt(b_alpha_sq(alpha)) ** (1.0 / lam) * sigma1
    hl = H * lam
    coeffs = (2.0 / H, (hl - 1.0) / hl, 2.0 / H, 2.0 * math.log(math.sqrt(2.0 * math.pi * alpha) / k ** (1.0 / H)))
    value, threshold = _checked_bracket(epsilon, *coeffs, "LFSM")
    q = (epsilon / k) ** (1.0 / H) * value ** (-1.0 / (2.0 * hl))
    w = H * epsilon / (2.0 * lam * math.log(1.0 / epsilon))
    qt = w / (H * epsilon)
    return SamplingScales(epsilon, q, w, qt, qt, eps_threshold=threshold)


def _check_mode(mode: str):
    if mode not in ("one", "two"):
        raise ValueError(f"mode must be 'one' or 'two', got {mode!r}")


def calibrate(spec: ProcessSpec, epsilon: float, mode: str = "one") -> SamplingScales:
    _check_mode(mode)
    if isinstance(spec, BrownianMotion):
        q, threshold = _q_bm_full(epsilon, spec.var_rate, 1 if mode == "one" else 2)
        nan = math.nan
        return SamplingScales(epsilon, q, nan, nan, nan, eps_threshold=threshold)
    if isinstance(spec, StableLevy):
        p = spec.params
        if p.beta != -1.0:
            raise DomainError(
                f"asymptotic calibration needs beta = -1, got beta={p.beta}; with positive jumps the "
                "deviation is governed by the largest positive jump (use fixed_eps_levy_limit)"
            )
        if mode != "one":
            raise DomainError("the skewed stable calibration covers the one-sided statistic only")
        return calib_stable_skewed(epsilon, p.alpha, p.sigma)
    if isinstance(spec, Lfsm):
        if mode != "one":
            raise DomainError("the LFSM calibration covers the one-sided statistic only")
        return calib_lfsm(epsilon, spec.alpha, spec.H, spec.sigma1)
    raise TypeError(f"unknown process spec {spec!r}")


def deviation_level(scales: SamplingScales, x: float) -> float:
    """Threshold ``eps + x w``; ``x = 0`` is allowed when ``w`` is unavailable."""
    if x == 0.0:
        return scales.epsilon
    if math.isinf(x):
        return x
    if math.isnan(scales.w):
        raise DomainError("this process has no deviation scale w; only x = 0 is supported")
    return scales.epsilon + x * scales.w


def limit_law(spec: ProcessSpec, mode: str = "one") -> LimitLaw:
    _check_mode(mode)
    if isinstance(spec, BrownianMotion):
        return LimitLaw(2.0, "point0")
    if isinstance(spec, Lfsm):
        if mode != "one":
            raise DomainError("the LFSM limit covers the one-sided statistic only")
        return LimitLaw(1.0, "gumbel")
    if isinstance(spec, StableLevy):
        if spec.params.beta > -1.0:
            raise DomainError(
                "no asymptotic-in-epsilon limit for a stable Levy motion with beta > -1: the deviation "
                "probability is driven by the distribution of the largest positive jump and tends to 0; "
                "use fixed_eps_levy_limit for the q -> 0 limit at fixed epsilon"
            )
        if mode != "one":
            raise DomainError("the skewed stable limit covers the one-sided statistic only")
        return LimitLaw(None, "gumbel")
    raise TypeError(f"unknown process spec {spec!r}")


def fixed_eps_levy_limit(alpha: float, beta: float, epsilon: float, mode: str = "one") -> float:
    """``q -> 0`` limit at fixed epsilon: probability of no jump beyond epsilon in [0, 1]."""
    _check_mode(mode)
    if not -1.0 <= beta <= 1.0:
        raise DomainError(f"beta must lie in [-1, 1], got {beta}")
    if not epsilon > 0.0:
        raise DomainError("epsilon must be positive")
    C = c_alpha(alpha)
    if mode == "one":
        return math.exp(-0.5 * C * (1.0 + beta) * epsilon ** (-alpha))
    return math.exp(-C * epsilon ** (-alpha))


def probe_condition_ratios(spec: ProcessSpec, epsilon: float, x: float, r: float) -> ProbeRatios:
    """Tail ratios that the calibrated scales should drive to ``(1, e^{-x}, e^{-x-r})``.

    The marginal ``xi(t)`` is ``S_alpha(s t^e, -1, 0)`` with ``e = 1/alpha``
    (Levy) or ``H`` (LFSM); all tails use the asymptotic evaluator, so the
    ratios test the calibration algebra rather than the tail approximation.
    """
    if not r >= 0.0:
        raise DomainError("r must be non-negative")
    scales = calibrate(spec, epsilon, "one")
    if isinstance(spec, StableLevy):
        alpha, s, expo = spec.params.alpha, spec.params.sigma, 1.0 / spec.params.alpha
    elif isinstance(spec, Lfsm):
        alpha, s, expo = spec.alpha, spec.sigma1, spec.H
    else:
        raise DomainError("probes need a skewed StableLevy or an Lfsm spec")
    q = scales.q
    shrink = 1.0 - scales.q_tilde * r
    if not shrink > 0.0:
        raise DomainError(f"q_tilde * r = {scales.q_tilde * r} must be below 1")
    level = deviation_level(scales, x)
    if not level > 0.0:
        raise DomainError(f"eps + x w = {level} must be positive")
    tail = lambda t, u: float(stable_tail_skewed(alpha, s * t**expo, u))
    base = tail(q, epsilon)
    return ProbeRatios(
        epsilon, x, r, base / q, tail(q, level) / base, tail(q * shrink, level) / base
    )
