"""Monte Carlo estimation of sampled-deviation probabilities, with Wilson
intervals, refinement and convergence studies, Gumbel kappa fitting and the
supremum-versus-endpoint tail inequality check for stable Levy motion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .calibration import calibrate, deviation_level, fixed_eps_levy_limit, limit_law
from .errors import ConfigurationError, DomainError, EstimationError, ResourceError
from .processes import (
    BrownianMotion,
    Lfsm,
    ProcessSpec,
    StableLevy,
    _bridge_max,
    block_deviations,
    process_paths,
)
from .rng import MAX_SEED, run_groups
from .stable import StableParams, sample_stable

__all__ = [
    "MCConfig",
    "MCEstimate",
    "RefinementRow",
    "RefinementStudy",
    "ConvergenceRow",
    "KappaFit",
    "SupInequalityReport",
    "wilson_ci",
    "simulate_deviations",
    "estimate_deviation_prob",
    "block_product_estimator",
    "refinement_study",
    "convergence_to_limit",
    "fit_kappa_gumbel",
    "check_sup_inequality_52",
]

BIAS_NOTES = ("exact-block-max", "grid-understated", "none")


@dataclass(frozen=True)
class MCConfig:
    n_paths: int
    refine_m: int = 64
    seed: int = 0
    ci_level: float = 0.95
    threads: int = 1
    path_cap: int = 2**24

    def __post_init__(self):
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ConfigurationError(f"n_paths must be a positive integer, got {self.n_paths}")
        if int(self.refine_m) != self.refine_m or self.refine_m < 1:
            raise ConfigurationError(f"refine_m must be a positive integer, got {self.refine_m}")
        if int(self.seed) != self.seed or not 0 <= self.seed <= MAX_SEED:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not 0.0 < self.ci_level < 1.0:
            raise ConfigurationError(f"ci_level must lie in (0, 1), got {self.ci_level}")
        if int(self.threads) != self.threads or self.threads < 1:
            raise ConfigurationError(f"threads must be a positive integer, got {self.threads}")
        if self.path_cap < 2:
            raise ConfigurationError("path_cap must be at least 2")


@dataclass(frozen=True)
class MCEstimate:
    """Estimate of ``P{sup deviation <= eps + x w}``.

    For the direct estimator ``k`` counts the replicates where the event holds
    and ``p_hat = k / n``. For the block-product estimator ``k`` and ``n``
    count single blocks and ``p_hat`` is the propagated product.
    """

    p_hat: float
    k: int
    n: int
    ci_lo: float
    ci_hi: float
    bias_note: str
    estimator: str = "direct"
    q: float = math.nan
    level: float = math.nan

    def __post_init__(self):
        if self.bias_note not in BIAS_NOTES:
            raise ValueError(f"bias_note must be one of {BIAS_NOTES}")

    @property
    def se(self) -> float:
        return math.sqrt(self.p_hat * (1.0 - self.p_hat) / self.n)


def _z(level: float) -> float:
    return float(stats.norm.ppf(0.5 + 0.5 * level))


def wilson_ci(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    if n < 1 or not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n and n >= 1, got k={k}, n={n}")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    z = _z(level)
    p = k / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return lo, hi


def _estimate(k: int, n: int, cfg: MCConfig, note: str, q: float, level: float) -> MCEstimate:
    lo, hi = wilson_ci(k, n, cfg.ci_level)
    p = k / n
    return MCEstimate(p, k, n, min(lo, p), max(hi, p), note, "direct", q, level)


# --------------------------------------------------------------------------
# simulation drivers


def _grid(q: float, m: int, cfg: MCConfig) -> tuple[float, int]:
    dt = q / m
    n_steps = int(math.floor(1.0 / dt + 1e-9))
    if n_steps < 1:
        raise ConfigurationError(f"grid step {dt} exceeds the unit horizon")
    if n_steps + 1 > cfg.path_cap:
        raise ResourceError(
            f"{n_steps + 1} grid points per path exceed path_cap={cfg.path_cap}; raise epsilon or lower refine_m"
        )
    return dt, n_steps


def simulate_deviations(
    spec: ProcessSpec, q: float, mode: str, cfg: MCConfig, m: int | None = None, tag: int = 0
) -> np.ndarray:
    """Grid deviation statistic for ``cfg.n_paths`` replicates on ``[0, 1]`` with ``m`` steps per block."""
    m = cfg.refine_m if m is None else m
    dt, n_steps = _grid(q, m, cfg)
    two = mode == "two"

    def group(rng, count):
        return block_deviations(process_paths(spec, count, n_steps, dt, rng), m, two)

    return np.concatenate(run_groups(group, cfg.n_paths, n_steps + 1, cfg.seed, tag, cfg.threads))


def _bm_exact_block_max(var_rate: float, q: float, cfg: MCConfig, tag: int) -> np.ndarray:
    """Per-path maximum over blocks of the exact continuous block maxima on ``[0, 1]``."""
    n_blocks = math.floor(1.0 / q)
    if n_blocks * q > 1.0:
        n_blocks -= 1
    residual = math.fmod(1.0, q) if n_blocks >= 1 else 1.0
    lengths = [q] * n_blocks + ([residual] if residual > 0.0 else [])
    if len(lengths) > cfg.path_cap:
        raise ResourceError(f"{len(lengths)} blocks per path exceed path_cap={cfg.path_cap}")
    lengths = np.asarray(lengths)

    def group(rng, count):
        w = rng.standard_normal((count, lengths.size)) * np.sqrt(var_rate * lengths)
        u = 1.0 - rng.random((count, lengths.size))
        return _bridge_max(w, lengths, var_rate, u).max(axis=1)

    return np.concatenate(run_groups(group, cfg.n_paths, 2 * lengths.size, cfg.seed, tag, cfg.threads))


def estimate_deviation_prob(
    spec: ProcessSpec,
    epsilon: float,
    x: float,
    mode: str,
    cfg: MCConfig,
    q: float | None = None,
    method: str = "auto",
    tag: int = 0,
) -> MCEstimate:
    """Estimate ``P{sup_t xi(t) - xi(floor(t/q) q) <= eps + x w}`` on ``[0, 1]``.

    ``q`` defaults to the calibrated sampling interval; passing it explicitly
    (fixed-epsilon studies) requires ``x = 0``. ``method`` is ``"auto"``
    (exact block maxima for one-sided Brownian motion, grid otherwise),
    ``"exact"`` or ``"grid"``.
    """
    if mode not in ("one", "two"):
        raise ValueError(f"mode must be 'one' or 'two', got {mode!r}")
    if method not in ("auto", "exact", "grid"):
        raise ValueError(f"unknown method {method!r}")
    if q is None:
        scales = calibrate(spec, epsilon, mode)
        q, level = scales.q, deviation_level(scales, x)
    else:
        if not 0.0 < q <= 1.0:
            raise DomainError(f"q must lie in (0, 1], got {q}")
        if x != 0.0 and not math.isinf(x):
            raise DomainError("an explicit q carries no deviation scale; use x = 0")
        level = epsilon if x == 0.0 else x
    n = cfg.n_paths
    if level == math.inf:
        return _estimate(n, n, cfg, "none", q, level)
    if level == -math.inf:
        return _estimate(0, n, cfg, "none", q, level)
    exact_ok = isinstance(spec, BrownianMotion) and mode == "one"
    if method == "exact" and not exact_ok:
        raise ConfigurationError("exact block maxima are available for one-sided Brownian motion only")
    if exact_ok and method != "grid":
        dev = _bm_exact_block_max(spec.var_rate, q, cfg, tag)
        note = "exact-block-max"
    else:
        dev = simulate_deviations(spec, q, mode, cfg, tag=tag)
        note = "grid-understated"
    return _estimate(int(np.count_nonzero(dev <= level)), n, cfg, note, q, level)


def block_product_estimator(
    spec: ProcessSpec, epsilon: float, q: float, mode: str, cfg: MCConfig, n_blocks: int | None = None, tag: int = 1
) -> MCEstimate:
    """Estimate the unit-horizon probability as ``p_b^floor(1/q)`` times a residual factor.

    ``p_b`` is the single-block probability from ``n_blocks`` independent
    blocks on a grid of ``refine_m`` steps (default ``n_paths * floor(1/q)``
    blocks). The residual block is handled by self-similarity, rescaling
    epsilon. The interval is a delta-method interval on the log scale.
    """
    if isinstance(spec, Lfsm):
        raise ConfigurationError("block products need independent increments; LFSM increments are dependent")
    if isinstance(spec, BrownianMotion):
        alpha = 2.0
    elif isinstance(spec, StableLevy):
        alpha = spec.params.alpha
        if alpha == 1.0 and spec.params.beta != 0.0:
            raise ConfigurationError("alpha = 1 with beta != 0 is not strictly self-similar")
    else:
        raise TypeError(f"unknown process spec {spec!r}")
    if mode not in ("one", "two"):
        raise ValueError(f"mode must be 'one' or 'two', got {mode!r}")
    if not 0.0 < q <= 1.0 or not epsilon > 0.0:
        raise DomainError("need q in (0, 1] and epsilon > 0")
    n_full = math.floor(1.0 / q)
    if n_full * q > 1.0:
        n_full -= 1
    residual = math.fmod(1.0, q) if n_full >= 1 else 1.0
    n_b = cfg.n_paths * max(n_full, 1) if n_blocks is None else int(n_blocks)
    if n_b < 1:
        raise ConfigurationError("n_blocks must be positive")
    m = cfg.refine_m
    block_cfg = MCConfig(n_b, m, cfg.seed, cfg.ci_level, cfg.threads, cfg.path_cap)
    two = mode == "two"

    def group(rng, count):
        # one block of length q: m increments, deviation over the m left-closed points
        return block_deviations(process_paths(spec, count, m, q / m, rng)[:, :m], m, two)

    dev = np.concatenate(run_groups(group, n_b, m + 1, block_cfg.seed, tag, block_cfg.threads))
    k = int(np.count_nonzero(dev <= epsilon))
    p_b = k / n_b
    r_fac = 1.0
    if residual > 0.0:
        r_fac = float(np.count_nonzero(dev <= epsilon * (q / residual) ** (1.0 / alpha))) / n_b
    p_hat = p_b**n_full * r_fac
    z = _z(cfg.ci_level)
    p_t = (k + 0.5 * z * z) / (n_b + z * z)
    se_log = n_full * math.sqrt((1.0 - p_t) / (n_b * p_t))
    centre = math.log(p_t) * n_full + (math.log(r_fac) if r_fac > 0.0 else -math.inf)
    lo = math.exp(centre - z * se_log) if math.isfinite(centre) else 0.0
    hi = min(1.0, math.exp(centre + z * se_log)) if math.isfinite(centre) else 0.0
    if k == n_b:
        hi = 1.0
    if k == 0:
        lo = 0.0
    return MCEstimate(p_hat, k, n_b, min(lo, p_hat), max(hi, p_hat), "grid-understated", "block-product", q, epsilon)


# --------------------------------------------------------------------------
# refinement and convergence


@dataclass(frozen=True)
class RefinementRow:
    m: int
    estimate: MCEstimate


@dataclass(frozen=True)
class RefinementStudy:
    rows: list[RefinementRow]
    converged_m: int | None
    coupled: bool = True


def _interior(est: MCEstimate) -> bool:
    return 0 < est.k < est.n


def _is_power_of_two(m) -> bool:
    return int(m) == m and m >= 1 and (int(m) & (int(m) - 1)) == 0


def refinement_study(
    spec: ProcessSpec, epsilon: float, x: float, mode: str, m_schedule, cfg: MCConfig, tag: int = 0
) -> RefinementStudy:
    """Grid estimates for each refinement ``m`` from one simulation on the finest grid.

    Coarser grids subsample the finest one, so each path's deviation is
    non-decreasing in ``m``. ``converged_m`` is the first ``m`` whose change
    from its predecessor is below half the Wilson width, counting only pairs
    of non-degenerate estimates (``m = 1`` puts every grid point on an anchor).
    """
    ms = [int(m) for m in m_schedule]
    if not ms:
        raise ConfigurationError("m_schedule is empty")
    if not all(_is_power_of_two(m) for m in m_schedule):
        raise ConfigurationError(f"m_schedule must hold powers of 2, got {list(m_schedule)}")
    if any(b <= a for a, b in zip(ms, ms[1:])):
        raise ConfigurationError("m_schedule must be strictly increasing")
    scales = calibrate(spec, epsilon, mode)
    q, level = scales.q, deviation_level(scales, x)
    m_max = ms[-1]
    dt, n_steps = _grid(q, m_max, cfg)
    coarse = [(m, m_max // m, _grid(q, m, cfg)[1]) for m in ms]
    two = mode == "two"

    def group(rng, count):
        paths = process_paths(spec, count, n_steps, dt, rng)
        return np.stack([block_deviations(paths[:, : nc * f + 1 : f], m, two) for m, f, nc in coarse], axis=1)

    dev = np.concatenate(run_groups(group, cfg.n_paths, n_steps + 1, cfg.seed, tag, cfg.threads))
    rows, converged = [], None
    for j, m in enumerate(ms):
        est = _estimate(int(np.count_nonzero(dev[:, j] <= level)), cfg.n_paths, cfg, "grid-understated", q, level)
        if rows and converged is None and _interior(est) and _interior(rows[-1].estimate):
            if abs(est.p_hat - rows[-1].estimate.p_hat) < 0.5 * (est.ci_hi - est.ci_lo):
                converged = m
        rows.append(RefinementRow(m, est))
    return RefinementStudy(rows, converged)


@dataclass(frozen=True)
class ConvergenceRow:
    epsilon: float
    p_hat: float
    p_limit: float
    gap: float
    estimate: MCEstimate = field(repr=False)


def _p_limit(spec: ProcessSpec, x: float, mode: str) -> float:
    law = limit_law(spec, mode)
    return law.probability(x) if law.kappa is not None else math.nan


def convergence_to_limit(spec: ProcessSpec, eps_schedule, x: float, mode: str, cfg: MCConfig) -> list[ConvergenceRow]:
    eps = [float(e) for e in eps_schedule]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigurationError("eps_schedule must be strictly decreasing")
    if not eps:
        return []
    p_lim = _p_limit(spec, x, mode)
    rows = []
    for e in eps:
        est = estimate_deviation_prob(spec, e, x, mode, cfg)
        rows.append(ConvergenceRow(e, est.p_hat, p_lim, est.p_hat - p_lim, est))
    return rows


def fixed_eps_limit_for(spec: ProcessSpec, epsilon: float, mode: str) -> float:
    """Fixed-epsilon q -> 0 limit for stable Levy motion."""
    if not isinstance(spec, StableLevy):
        raise DomainError("the fixed-epsilon limit is defined for stable Levy motion")
    p = spec.params
    return fixed_eps_levy_limit(p.alpha, p.beta, epsilon / p.sigma, mode)


# --------------------------------------------------------------------------
# kappa fit


@dataclass(frozen=True)
class KappaFit:
    kappa: float
    ci_lo: float
    ci_hi: float
    se: float
    xs: np.ndarray
    residuals: np.ndarray
    chi2: float

    @property
    def rel_width(self) -> float:
        return (self.ci_hi - self.ci_lo) / self.kappa


def fit_kappa_gumbel(xs, p_hat, n=None, level: float = 0.95, iterations: int = 5) -> KappaFit:
    """Fit ``-ln p = kappa e^{-x}`` by least squares through the origin.

    ``p_hat`` may hold floats or :class:`MCEstimate` objects (their ``n`` is
    then used). With replicate counts the fit is weighted by the binomial
    delta-method variance of ``-ln p_hat`` at the fitted model and the interval
    comes from those variances; without them, from the residual scatter.
    Points with ``p_hat`` in ``{0, 1}`` are dropped.
    """
    xs = np.asarray(xs, dtype=float)
    items = list(p_hat)
    if items and isinstance(items[0], MCEstimate):
        n = np.array([e.n for e in items], dtype=float)
        items = [e.p_hat for e in items]
    p = np.asarray(items, dtype=float)
    if p.shape != xs.shape:
        raise EstimationError("xs and p_hat must have the same length")
    if n is not None:
        n = np.broadcast_to(np.asarray(n, dtype=float), p.shape)
    keep = (p > 0.0) & (p < 1.0)
    if np.count_nonzero(keep) < 3:
        raise EstimationError(f"need at least 3 points with p_hat in (0, 1), got {np.count_nonzero(keep)}")
    z, y = np.exp(-xs[keep]), -np.log(p[keep])
    w = np.ones_like(z)
    kappa = float(np.sum(z * y) / np.sum(z * z))
    if n is not None:
        nk = n[keep]
        for _ in range(iterations):
            pm = np.exp(-kappa * z)
            w = nk * pm / (1.0 - pm)
            kappa = float(np.sum(w * z * y) / np.sum(w * z * z))
    resid = y - kappa * z
    dof = z.size - 1
    if n is not None:
        se = float(1.0 / math.sqrt(np.sum(w * z * z)))
        quant = _z(level)
    else:
        se = float(math.sqrt(np.sum(resid**2) / dof / np.sum(z * z)))
        quant = float(stats.t.ppf(0.5 + 0.5 * level, dof))
    chi2 = float(np.sum(w * resid**2))
    return KappaFit(kappa, kappa - quant * se, kappa + quant * se, se, xs[keep], resid, chi2)


# --------------------------------------------------------------------------
# supremum versus endpoint tail


@dataclass(frozen=True)
class SupInequalityReport:
    """Left ``P{sup_[0,h] L > u}`` against right ``P{L(h) > u} / P{L(h) > 0}``."""

    h: float
    u: float
    n_steps: int
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    margin: float
    holds: bool


def check_sup_inequality_52(
    alpha: float,
    beta: float,
    h: float,
    u,
    cfg: MCConfig,
    n_steps_schedule=None,
    sigma: float = 1.0,
) -> list[SupInequalityReport]:
    """Monte Carlo check of ``P{sup_[0,h] L > u} <= P{L(h) > u} / P{L(h) > 0}``.

    The left side uses grid suprema of ``cfg.n_paths`` paths (one row per grid
    size in ``n_steps_schedule``, coarser grids subsampled from the finest);
    the right side uses ``cfg.n_paths`` independent endpoint draws. The bound
    holds when ``lhs <= rhs + 3 * sqrt(lhs_se^2 + rhs_se^2)``.
    """
    if not h > 0.0:
        raise DomainError("h must be positive")
    us = np.atleast_1d(np.asarray(u, dtype=float))
    if np.any(~(us > 0.0)):
        raise DomainError("u must be positive")
    sched = [4 * cfg.refine_m] if n_steps_schedule is None else [int(s) for s in n_steps_schedule]
    if any(b <= a or b % a for a, b in zip(sched, sched[1:])):
        raise ConfigurationError("n_steps_schedule must be increasing and nested")
    fine = sched[-1]
    if fine + 1 > cfg.path_cap:
        raise ResourceError(f"{fine + 1} grid points exceed path_cap={cfg.path_cap}")
    params = StableParams(alpha, beta, sigma)
    spec = StableLevy(params)

    def group(rng, count):
        paths = process_paths(spec, count, fine, h / fine, rng)
        return np.stack([paths[:, :: fine // s].max(axis=1) for s in sched], axis=1)

    sup = np.concatenate(run_groups(group, cfg.n_paths, fine + 1, cfg.seed, 0, cfg.threads))
    end_params = StableParams(alpha, beta, sigma * h ** (1.0 / alpha))
    ends = np.concatenate(
        run_groups(lambda rng, c: sample_stable(end_params, rng, c), cfg.n_paths, 1, cfg.seed, 2, cfg.threads)
    )
    n = cfg.n_paths
    b = np.count_nonzero(ends > 0.0) / n
    reports = []
    for uu in us:
        a = np.count_nonzero(ends > uu) / n
        if b > 0.0:
            rhs = a / b
            # {L(h) > u} lies inside {L(h) > 0}: cov(a_hat, b_hat) = (a - a b) / n
            var = (a * (1 - a) / b**2 + a * a * b * (1 - b) / b**4 - 2 * a * (a - a * b) / b**3) / n
            rhs_se = math.sqrt(max(var, 0.0))
        else:
            rhs, rhs_se = math.inf, 0.0
        for j, s in enumerate(sched):
            lhs = np.count_nonzero(sup[:, j] > uu) / n
            lhs_se = math.sqrt(lhs * (1 - lhs) / n)
            margin = rhs + 3.0 * math.hypot(lhs_se, rhs_se) - lhs
            reports.append(SupInequalityReport(h, float(uu), s, lhs, lhs_se, rhs, rhs_se, margin, margin >= 0.0))
    return reports
