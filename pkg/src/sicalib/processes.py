"""Path simulation for Brownian motion, stable Levy motion and linear
fractional stable motion (LFSM), plus the block-anchored deviation statistic
``sup_t [xi(t) - xi(floor(t/q) q)]`` and exact Brownian block oracles.

Batched generators (``*_paths``) return arrays of shape ``(n_paths, n_steps + 1)``
with column 0 identically zero; the ``simulate_*`` wrappers return a single
:class:`GridPath`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Union

import numpy as np
from scipy import integrate, signal

from .errors import ConfigurationError, DomainError, NumericalError
from .stable import StableParams, gaussian_tail, sample_stable

__all__ = [
    "BrownianMotion",
    "StableLevy",
    "Lfsm",
    "LfsmDiscretization",
    "ProcessSpec",
    "GridPath",
    "DeviationStat",
    "simulate_bm",
    "simulate_stable_levy",
    "simulate_lfsm",
    "simulate",
    "bm_paths",
    "stable_levy_paths",
    "lfsm_paths",
    "process_paths",
    "LfsmSynthesizer",
    "lfsm_kernel",
    "lfsm_scale_sigma1",
    "lfsm_tail_bound",
    "lfsm_tail_mass",
    "lfsm_default_trunc_right",
    "block_multiple",
    "block_deviations",
    "sup_deviation",
    "bm_block_max_exact",
    "bm_block_exceed_prob",
    "bm_exact_deviation_prob",
]


# --------------------------------------------------------------------------
# process specifications


@dataclass(frozen=True)
class BrownianMotion:
    var_rate: float = 1.0

    def __post_init__(self):
        if not self.var_rate > 0.0:
            raise DomainError(f"var_rate must be positive, got {self.var_rate}")


@dataclass(frozen=True)
class StableLevy:
    params: StableParams


@dataclass(frozen=True)
class LfsmDiscretization:
    """Moving-average discretization of the LFSM stochastic integral.

    ``noise_step`` is the uniform cell width of the driving noise on the near
    field ``[-T, near_right * T]`` (``None``: the output grid step). Beyond the
    near field the cells grow geometrically by ``far_ratio`` up to
    ``trunc_right`` (``None``: smallest value meeting ``alpha_norm_tol``).
    """

    noise_step: float | None = None
    trunc_right: float | None = None
    alpha_norm_tol: float = 1e-3
    near_right: float = 1.0
    far_ratio: float = 0.05

    def __post_init__(self):
        if self.noise_step is not None and not self.noise_step > 0.0:
            raise ConfigurationError("noise_step must be positive")
        if self.trunc_right is not None and not self.trunc_right > 0.0:
            raise ConfigurationError("trunc_right must be positive")
        if not 0.0 < self.alpha_norm_tol < 1.0:
            raise ConfigurationError("alpha_norm_tol must lie in (0, 1)")
        if not self.near_right > 0.0 or not self.far_ratio > 0.0:
            raise ConfigurationError("near_right and far_ratio must be positive")


@dataclass(frozen=True)
class Lfsm:
    alpha: float
    H: float
    noise_scale: float = 1.0
    disc: LfsmDiscretization = field(default_factory=LfsmDiscretization)

    def __post_init__(self):
        if not 1.0 < self.alpha < 2.0:
            raise DomainError(f"LFSM needs alpha in (1, 2), got {self.alpha}")
        if not 1.0 / self.alpha < self.H < 1.0:
            raise DomainError(f"LFSM needs H in (1/alpha, 1), got H={self.H}, alpha={self.alpha}")
        if not self.noise_scale > 0.0:
            raise DomainError("noise_scale must be positive")

    @property
    def sigma1(self) -> float:
        """Scale of xi(1)."""
        return self.noise_scale * lfsm_scale_sigma1(self.H, self.alpha)


ProcessSpec = Union[BrownianMotion, StableLevy, Lfsm]


@dataclass(frozen=True, eq=False)
class GridPath:
    dt: float
    values: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ValueError("a GridPath needs at least two values")
        if values[0] != 0.0:
            raise ValueError("GridPath values must start at 0")
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)

    @property
    def duration(self) -> float:
        return self.dt * (self.values.size - 1)


@dataclass(frozen=True)
class DeviationStat:
    one_sided: float
    two_sided: float


def _check_grid(n_steps: int, dt: float):
    if int(n_steps) != n_steps or n_steps < 1:
        raise ConfigurationError(f"n_steps must be a positive integer, got {n_steps}")
    if not dt > 0.0:
        raise ConfigurationError(f"dt must be positive, got {dt}")


def _pinned(increments: np.ndarray) -> np.ndarray:
    out = np.zeros(increments.shape[:-1] + (increments.shape[-1] + 1,))
    np.cumsum(increments, axis=-1, out=out[..., 1:])
    return out


# --------------------------------------------------------------------------
# Brownian motion and stable Levy motion


def bm_paths(n_paths: int, n_steps: int, dt: float, var_rate: float, rng) -> np.ndarray:
    _check_grid(n_steps, dt)
    if not var_rate > 0.0:
        raise DomainError("var_rate must be positive")
    return _pinned(math.sqrt(var_rate * dt) * rng.standard_normal((n_paths, n_steps)))


def stable_levy_paths(n_paths: int, n_steps: int, dt: float, params: StableParams, rng) -> np.ndarray:
    # increments over dt are S_alpha(sigma dt^(1/alpha), beta, 0); sampling with the
    # scaled sigma keeps the alpha = 1 log-shift correct
    _check_grid(n_steps, dt)
    step = StableParams(params.alpha, params.beta, params.sigma * dt ** (1.0 / params.alpha))
    return _pinned(sample_stable(step, rng, (n_paths, n_steps)))


def simulate_bm(n_steps: int, dt: float, var_rate: float, rng) -> GridPath:
    return GridPath(dt, bm_paths(1, n_steps, dt, var_rate, rng)[0])


def simulate_stable_levy(n_steps: int, dt: float, params: StableParams, rng) -> GridPath:
    return GridPath(dt, stable_levy_paths(1, n_steps, dt, params, rng)[0])


# --------------------------------------------------------------------------
# LFSM


def lfsm_kernel(t, r, H: float, alpha: float):
    """``((t+r)^+)^(H-1/alpha) - (r^+)^(H-1/alpha)``; zero wherever both parts vanish."""
    if not 1.0 / alpha < H < 1.0:
        raise DomainError(f"kernel needs H in (1/alpha, 1), got H={H}, alpha={alpha}")
    d = H - 1.0 / alpha
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    return (np.maximum(t + r, 0.0) ** d - np.maximum(r, 0.0) ** d)[()]


def _far_kernel(t, r, d):
    # (t+r)^d - r^d for r > 0 without cancellation
    return r**d * np.expm1(d * np.log1p(t / r))


@lru_cache(maxsize=128)
def lfsm_scale_sigma1(H: float, alpha: float, quad_tol: float = 1e-10) -> float:
    """Scale ``sigma(xi(1)) = (int |kernel(1, r)|^alpha dr)^(1/alpha)``.

    Support splits at ``r = -1`` and ``r = 0``; ``[-1, 0]`` is integrated in
    closed form, ``[0, 1]`` adaptively, and ``[1, X]`` adaptively in
    ``log r``. The cutoff ``X`` is placed where the power-law bound on the
    discarded tail falls below ``quad_tol`` of the retained mass.
    """
    if not 1.0 / alpha < H < 1.0:
        raise DomainError(f"sigma1 needs H in (1/alpha, 1), got H={H}, alpha={alpha}")
    d = H - 1.0 / alpha
    head = 1.0 / (d * alpha + 1.0)
    expo = alpha * (1.0 - H)
    # bound: int_X^inf ((1+r)^d - r^d)^alpha dr <= (1+X)^(-expo) / expo
    cutoff = (quad_tol * head * expo) ** (-1.0 / expo) - 1.0
    kw = dict(epsabs=0.0, epsrel=quad_tol / 10.0, limit=500)
    mid, err_mid = integrate.quad(lambda r: _far_kernel(1.0, r, d) ** alpha if r > 0 else 1.0, 0.0, 1.0, **kw)
    far, err_far = integrate.quad(
        lambda s: _far_kernel(1.0, math.exp(s), d) ** alpha * math.exp(s), 0.0, math.log(cutoff), **kw
    )
    total = head + mid + far
    if err_mid + err_far > quad_tol * total:
        raise NumericalError(f"sigma1 quadrature error {err_mid + err_far:.3g} exceeds tolerance")
    return total ** (1.0 / alpha)


def lfsm_tail_bound(t: float, R: float, H: float, alpha: float) -> float:
    """Upper bound on ``int_R^inf kernel(t, r)^alpha dr``.

    Concavity gives ``(t+r)^d - r^d <= d t r^(d-1)``, so the tail is at most
    ``(d t)^alpha R^(-alpha (1-H)) / (alpha (1-H))``.
    """
    d = H - 1.0 / alpha
    expo = alpha * (1.0 - H)
    return (d * t) ** alpha * R ** (-expo) / expo


def lfsm_tail_mass(t: float, R: float, H: float, alpha: float) -> float:
    """``int_R^inf kernel(t, r)^alpha dr`` by quadrature in ``log r`` (for checking the bound)."""
    d = H - 1.0 / alpha
    val, _ = integrate.quad(
        lambda s: _far_kernel(t, math.exp(s), d) ** alpha * math.exp(s),
        math.log(R), max(math.log(R) + 1.0, 700.0), epsabs=0.0, epsrel=1e-10, limit=500,
    )
    return val


def lfsm_default_trunc_right(T: float, H: float, alpha: float, tol: float) -> float:
    """Smallest R with ``lfsm_tail_bound(t, R) <= tol * sigma1^alpha * t^(alpha H)`` for all t <= T."""
    d = H - 1.0 / alpha
    expo = alpha * (1.0 - H)
    mass = lfsm_scale_sigma1(H, alpha) ** alpha
    # the relative bound d^alpha (t / R)^expo / (expo * mass) increases in t
    return T * (tol * expo * mass / d**alpha) ** (-1.0 / expo)


class LfsmSynthesizer:
    """Precomputed moving-average plan for LFSM paths on ``t_j = j dt, j <= n_steps``.

    Near field: uniform noise cells of width ``noise_step`` on ``[-T, near_right T)``
    with midpoint kernel values, applied by FFT correlation. Far field:
    geometric cells up to ``trunc_right`` applied as a dense matrix (the kernel
    is smooth in ``t`` there). ``xi(0) = 0`` exactly because the ``t = 0`` row
    is subtracted.
    """

    def __init__(self, n_steps: int, dt: float, spec: Lfsm):
        _check_grid(n_steps, dt)
        disc = spec.disc
        alpha, H = spec.alpha, spec.H
        d = H - 1.0 / alpha
        T = n_steps * dt
        delta = dt if disc.noise_step is None else disc.noise_step
        ratio = dt / delta
        k = int(round(ratio))
        if k < 1 or abs(ratio - k) > 1e-9 * ratio:
            raise ConfigurationError(f"dt / noise_step must be a positive integer, got {ratio}")
        mass = lfsm_scale_sigma1(H, alpha) ** alpha
        R = disc.trunc_right
        if R is None:
            R = lfsm_default_trunc_right(T, H, alpha, disc.alpha_norm_tol)
        elif lfsm_tail_bound(T, R, H, alpha) > disc.alpha_norm_tol * mass * T ** (alpha * H):
            raise ConfigurationError(
                f"trunc_right={R} leaves more than alpha_norm_tol={disc.alpha_norm_tol} of the alpha-norm"
            )
        n_left = n_steps * k
        n_near_right = max(1, int(math.ceil(disc.near_right * T / delta)))
        self.n_noise = n_left + n_near_right
        near_edge = n_near_right * delta
        # g(m) = f(m - n_left), f(c) = ((c + 1/2) delta)^d for c >= 0
        m = np.arange(n_left + self.n_noise)
        c = m - n_left
        g = np.where(c >= 0, ((np.maximum(c, 0) + 0.5) * delta) ** d, 0.0)
        self._g = g
        self._k = k
        edges = [near_edge]
        while edges[-1] < max(R, near_edge):
            edges.append(edges[-1] * (1.0 + disc.far_ratio))
        edges = np.asarray(edges)
        mids = 0.5 * (edges[1:] + edges[:-1])
        widths = np.diff(edges)
        times = dt * np.arange(n_steps + 1)
        self._far = _far_kernel(times[:, None], mids[None, :], d) if mids.size else np.zeros((n_steps + 1, 0))
        self._far_widths = widths
        self.n_steps, self.dt, self.spec = n_steps, dt, spec
        self.noise_step, self.trunc_right = delta, float(edges[-1])
        self._noise = StableParams(alpha, -1.0, spec.noise_scale * delta ** (1.0 / alpha))
        self._alpha = alpha

    @property
    def n_far(self) -> int:
        return self._far.shape[1]

    def discrete_scale(self, j: int | None = None) -> float:
        """Exact scale of the discretized ``xi(t_j)`` (default: last grid time)."""
        j = self.n_steps if j is None else j
        a = self._alpha
        n_left = self.n_steps * self._k
        c = np.arange(-n_left, self.n_noise - n_left)
        near = self._g[j * self._k + c + n_left] - self._g[c + n_left]
        total = np.sum(np.abs(near) ** a) * self.noise_step + np.sum(np.abs(self._far[j]) ** a * self._far_widths)
        return self.spec.noise_scale * total ** (1.0 / a)

    def sample(self, n_paths: int, rng) -> np.ndarray:
        noise = sample_stable(self._noise, rng, (n_paths, self.n_noise))
        # Z_i = sum_e g(i + e) L_e  ==  (g * reversed L)[i + n_noise - 1]
        conv = signal.fftconvolve(self._g[None, :], noise[:, ::-1], axes=1)
        lo = self.n_noise - 1
        z = conv[:, lo : lo + self.n_steps * self._k + 1 : self._k]
        out = z - z[:, :1]
        if self.n_far:
            far_noise = sample_stable(
                StableParams(self._alpha, -1.0, self.spec.noise_scale), rng, (n_paths, self.n_far)
            ) * self._far_widths ** (1.0 / self._alpha)
            out += far_noise @ self._far.T
        out[:, 0] = 0.0
        return out


@lru_cache(maxsize=16)
def _synthesizer(n_steps: int, dt: float, spec: Lfsm) -> LfsmSynthesizer:
    return LfsmSynthesizer(n_steps, dt, spec)


def lfsm_paths(n_paths: int, n_steps: int, dt: float, spec: Lfsm, rng) -> np.ndarray:
    return _synthesizer(n_steps, dt, spec).sample(n_paths, rng)


def simulate_lfsm(n_steps: int, dt: float, spec: Lfsm, rng) -> GridPath:
    return GridPath(dt, lfsm_paths(1, n_steps, dt, spec, rng)[0])


def process_paths(spec: ProcessSpec, n_paths: int, n_steps: int, dt: float, rng) -> np.ndarray:
    if isinstance(spec, BrownianMotion):
        return bm_paths(n_paths, n_steps, dt, spec.var_rate, rng)
    if isinstance(spec, StableLevy):
        return stable_levy_paths(n_paths, n_steps, dt, spec.params, rng)
    if isinstance(spec, Lfsm):
        return lfsm_paths(n_paths, n_steps, dt, spec, rng)
    raise TypeError(f"unknown process spec {spec!r}")


def simulate(spec: ProcessSpec, n_steps: int, dt: float, rng) -> GridPath:
    return GridPath(dt, process_paths(spec, 1, n_steps, dt, rng)[0])


# --------------------------------------------------------------------------
# deviation statistic


def block_multiple(q: float, dt: float) -> int:
    """Number of grid steps per sampling block; ``q / dt`` must be an integer."""
    if not q > 0.0:
        raise ConfigurationError(f"q must be positive, got {q}")
    ratio = q / dt
    m = int(round(ratio))
    if m < 1 or abs(ratio - m) > 1e-9 * ratio:
        raise ConfigurationError(f"q / dt = {ratio} is not a positive integer; anchors would fall off the grid")
    return m


def block_deviations(values: np.ndarray, m: int, two_sided: bool = False) -> np.ndarray:
    """Per-path ``max_i (v_i - v_{floor(i/m) m})`` (or of its absolute value) over the last axis."""
    values = np.asarray(values, dtype=float)
    anchors = (np.arange(values.shape[-1]) // m) * m
    dev = values - values[..., anchors]
    if two_sided:
        np.abs(dev, out=dev)
    return dev.max(axis=-1)


def sup_deviation(path: GridPath, q: float, mode: str = "both") -> DeviationStat:
    """Grid supremum of ``xi(t) - xi(floor(t/q) q)``, one- and two-sided.

    ``mode`` is accepted for call-site symmetry; both statistics are returned.
    """
    if mode not in ("one", "two", "both"):
        raise ValueError(f"mode must be 'one', 'two' or 'both', got {mode!r}")
    m = block_multiple(q, path.dt)
    return DeviationStat(
        float(block_deviations(path.values, m, False)), float(block_deviations(path.values, m, True))
    )


# --------------------------------------------------------------------------
# exact Brownian block oracles


def _bridge_max(w_end, q: float, var_rate: float, u):
    w_end = np.asarray(w_end, dtype=float)
    return 0.5 * (w_end + np.sqrt(w_end**2 - 2.0 * var_rate * q * np.log(u)))


def bm_block_max_exact(w_end, q: float, var_rate: float, rng):
    """Draw ``max_{[0,q]} W`` given ``W(q) = w_end`` by inverting the bridge law.

    ``P{M >= m | W(q) = w} = exp(-2 m (m - w) / (var_rate q))`` for ``m >= max(w, 0)``.
    """
    if not q > 0.0 or not var_rate > 0.0:
        raise DomainError("q and var_rate must be positive")
    w_end = np.asarray(w_end, dtype=float)
    # 1 - U lies in (0, 1]; log(1) = 0 gives the support edge max(w, 0)
    u = 1.0 - rng.random(w_end.shape)
    return _bridge_max(w_end, q, var_rate, u)[()]


def bm_block_exceed_prob(epsilon: float, t: float, var_rate: float = 1.0, mode: str = "one") -> float:
    """``P{sup_[0,t] W > eps}`` (one-sided) or ``P{sup_[0,t] |W| > eps}`` (two-sided).

    The two-sided value uses the alternating reflection series
    ``4 sum_k (-1)^k Pbar((2k+1) z)`` for ``z = eps / sqrt(C t) >= 1`` and the
    eigenfunction series of the exit time from ``(-eps, eps)`` below that.
    """
    if mode not in ("one", "two"):
        raise ValueError(f"mode must be 'one' or 'two', got {mode!r}")
    z = epsilon / math.sqrt(var_rate * t)
    if mode == "one":
        return 2.0 * float(gaussian_tail(z))
    if z >= 1.0:
        k = np.arange(40)
        terms = (-1.0) ** k * gaussian_tail((2 * k + 1) * z)
        return float(4.0 * np.sum(terms[::-1]))
    k = np.arange(200)
    odd = 2 * k + 1
    stay = 4.0 / math.pi * np.sum(((-1.0) ** k / odd * np.exp(-(odd * math.pi / z) ** 2 / 8.0))[::-1])
    return float(1.0 - stay)


def bm_exact_deviation_prob(
    epsilon: float, q: float, var_rate: float = 1.0, mode: str = "one", full_output: bool = False
):
    """Exact ``P{sup_[0,1] W(t) - W(floor(t/q) q) <= epsilon}`` by block independence.

    ``(1 - p_q)^floor(1/q)`` times the residual-block factor, where ``p_q`` is
    :func:`bm_block_exceed_prob` over one block (``2 Pbar(eps / sqrt(C q))``
    one-sided; absolute deviations for ``mode="two"``). A base at or below 0
    is clamped to 0; with ``full_output`` the call returns ``(p, info)`` where
    ``info["clamped"]`` flags that case.
    """
    if mode not in ("one", "two"):
        raise ValueError(f"mode must be 'one' or 'two', got {mode!r}")
    if not epsilon > 0.0:
        raise DomainError("epsilon must be positive")
    if not 0.0 < q <= 1.0:
        raise DomainError(f"q must lie in (0, 1], got {q}")
    n_blocks = math.floor(1.0 / q)
    if n_blocks * q > 1.0:
        n_blocks -= 1
    residual = math.fmod(1.0, q) if n_blocks >= 1 else 1.0
    p_block = bm_block_exceed_prob(epsilon, q, var_rate, mode)
    clamped = p_block >= 1.0
    if clamped:
        prob = 0.0
    else:
        prob = math.exp(n_blocks * math.log1p(-p_block))
        if residual > 0.0:
            prob *= max(0.0, 1.0 - bm_block_exceed_prob(epsilon, residual, var_rate, mode))
    if full_output:
        return prob, {"clamped": clamped, "n_blocks": n_blocks, "residual": residual}
    return prob
