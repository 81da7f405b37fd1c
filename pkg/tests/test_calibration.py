import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sicalib.calibration import (
    LimitLaw,
    SamplingScales,
    calib_lfsm,
    calib_stable_skewed,
    calibrate,
    deviation_level,
    fixed_eps_levy_limit,
    limit_law,
    probe_condition_ratios,
    q_bm,
)
from sicalib.errors import CalibrationDomainError, DomainError
from sicalib.processes import BrownianMotion, Lfsm, StableLevy, bm_exact_deviation_prob
from sicalib.stable import StableParams, c_alpha

# mpmath oracles, tests/oracles.py
Q_BM = {1: 9.10822757994303e-4, 2: 8.08709553836133e-4}
STABLE_01 = dict(q=0.00474716940493202, w=0.00965098848673893, q_tilde=0.144764827301084)
SIGMA0 = 1.03548879208872
LFSM_01 = dict(q=0.0125299151897448, w=0.0115811861840867, q_tilde=0.144764827301084)
LFSM_Q_BY_H = {0.7: 0.00654930801916879, 0.75: 0.00955245490978152, 0.8: 0.0125299151897448}
SIGMA1_BY_H = {0.7: 0.982844770287238, 0.75: 0.989281351952146, 0.8: SIGMA0}
ONE_SIDED_12 = 0.757328735992395
TWO_SIDED_12 = 0.573546814359839
# product formula along q_bm(eps, 1, i)
BM_PROB = {
    1: [0.360691872027165, 0.360923006489606, 0.361449191459548, 0.362402836673431],
    2: [0.589894019380308, 0.593544476604781, 0.595741778394542, 0.598319268111775],
}
# two-sided product (absolute block deviations), theta series in mpmath
BM_PROB_TWO = {
    1: [0.130097978714104, 0.130265412177634, 0.130645517972934, 0.131335816028947],
    2: [0.347974518778197, 0.352295042701472, 0.354908266501685, 0.357985946593808],
}
EPS_SCHEDULE = [1e-2, 1e-3, 1e-4, 1e-6]

STABLE = StableLevy(StableParams(1.5, -1.0))
LFSM = Lfsm(1.5, 0.8)


@pytest.mark.parametrize("i", [1, 2])
def test_q_bm_golden(i):
    assert q_bm(0.1, 1.0, i) == pytest.approx(Q_BM[i], rel=1e-12)


def _bm_bracket(eps, C, i):
    L = math.log(1 / eps)
    return 4 * L + math.log(4 * L) + 2 * math.log(2 * C * i / math.sqrt(2 * math.pi))


def test_q_bm_variance_scaling():
    # q = (eps^2 / C) / bracket(eps, C)
    b1, b4 = _bm_bracket(0.1, 1.0, 1), _bm_bracket(0.1, 4.0, 1)
    assert q_bm(0.1, 4.0, 1) == pytest.approx(q_bm(0.1, 1.0, 1) * b1 / (4.0 * b4), rel=1e-13)
    c = 0.5
    assert q_bm(c * 0.1, c * c * 2.0, 1) == pytest.approx(0.01 / 2.0 / _bm_bracket(0.05, 0.5, 1), rel=1e-13)


def test_q_bm_bracket_threshold():
    with pytest.raises(CalibrationDomainError) as err:
        q_bm(0.95)
    t = err.value.threshold
    assert 0.0 < t < 0.95
    assert _bm_bracket(t * (1 - 1e-9), 1.0, 1) > 0.0
    assert _bm_bracket(t * (1 + 1e-9), 1.0, 1) < 0.0
    q_bm(t * 0.999)


def test_q_bm_domain():
    for kwargs in [dict(epsilon=0.1, i=3), dict(epsilon=0.1, var_rate=0.0), dict(epsilon=1.0), dict(epsilon=-0.1)]:
        with pytest.raises(DomainError):
            q_bm(**kwargs)


def test_stable_golden():
    s = calib_stable_skewed(0.1, 1.5)
    assert s.q == pytest.approx(STABLE_01["q"], rel=1e-12)
    assert s.w == pytest.approx(STABLE_01["w"], rel=1e-12)
    assert s.q_tilde == pytest.approx(STABLE_01["q_tilde"], rel=1e-12)
    assert s.q_hat == s.q_tilde and s.Q1 == math.inf and s.Q2 == 1.0


def test_stable_scale_sigma():
    a = calib_stable_skewed(0.2, 1.5, sigma=2.0)
    b = calib_stable_skewed(0.1, 1.5)
    assert a.q == pytest.approx(b.q, rel=1e-14)
    assert a.w == pytest.approx(2.0 * b.w, rel=1e-14)
    assert a.q_tilde == pytest.approx(b.q_tilde, rel=1e-14)


@pytest.mark.parametrize("alpha", [1.0, 2.0, 2.5, 0.5])
def test_stable_alpha_domain(alpha):
    with pytest.raises(DomainError, match=r"\(1, 2\)"):
        calib_stable_skewed(0.1, alpha)


def test_stable_bracket_error_reports_threshold():
    with pytest.raises(CalibrationDomainError) as err:
        calib_stable_skewed(0.95, 1.7)
    assert 0.0 < err.value.threshold < 0.95


def test_lfsm_golden():
    s = calib_lfsm(0.1, 1.5, 0.8, SIGMA0)
    assert s.w == pytest.approx(0.08 / (3 * math.log(10)), rel=1e-14)
    assert s.w == pytest.approx(LFSM_01["w"], rel=1e-12)
    assert s.q == pytest.approx(LFSM_01["q"], rel=1e-11)
    assert s.q_tilde == pytest.approx(LFSM_01["q_tilde"], rel=1e-12)


def test_lfsm_q_decreases_towards_lower_hurst_bound():
    qs = [calib_lfsm(0.1, 1.5, H, SIGMA1_BY_H[H]).q for H in (0.8, 0.75, 0.7)]
    for H, q in zip((0.8, 0.75, 0.7), qs):
        assert q == pytest.approx(LFSM_Q_BY_H[H], rel=1e-11)
    assert qs[0] > qs[1] > qs[2]


def test_lfsm_domain():
    with pytest.raises(DomainError):
        calib_lfsm(0.1, 1.5, 0.6, 1.0)
    with pytest.raises(DomainError):
        calib_lfsm(0.1, 1.5, 0.8, 0.0)


@pytest.mark.parametrize(
    "make",
    [
        lambda e: calib_stable_skewed(e, 1.5),
        lambda e: calib_stable_skewed(e, 1.2),
        lambda e: calib_stable_skewed(e, 1.9),
        lambda e: calib_lfsm(e, 1.5, 0.8, SIGMA0),
        lambda e: calib_lfsm(e, 1.8, 0.7, 1.0),
        lambda e: calibrate(BrownianMotion(1.0), e),
        lambda e: calibrate(BrownianMotion(3.0), e, "two"),
    ],
)
def test_scales_monotone_on_decreasing_grid(make):
    grid = [0.3, 0.1, 0.03, 1e-2, 1e-3, 1e-4, 1e-6, 1e-9]
    scales = [make(e) for e in grid]
    qs = [s.q for s in scales]
    assert all(a > b > 0 for a, b in zip(qs, qs[1:]))
    ws = [s.w for s in scales]
    if not math.isnan(ws[0]):
        assert all(a > b > 0 for a, b in zip(ws, ws[1:]))
        ratios = [s.w / s.epsilon for s in scales]
        assert all(a > b for a, b in zip(ratios, ratios[1:]))


def test_stable_near_two_coherent_with_brownian():
    ratio = calib_stable_skewed(1e-3, 1.99).q / q_bm(1e-3)
    assert 0.1 <= ratio <= 10.0


@given(st.floats(1e-12, 0.5))
def test_q_tilde_identities(eps):
    s = calib_stable_skewed(eps, 1.5)
    assert s.q_tilde == pytest.approx(1.5 * s.w / eps, rel=1e-12)
    l = calib_lfsm(eps, 1.5, 0.8, SIGMA0)
    assert l.q_tilde == pytest.approx(l.w / (0.8 * eps), rel=1e-12)


def test_calibrate_dispatch():
    assert calibrate(STABLE, 0.1).q == pytest.approx(STABLE_01["q"], rel=1e-12)
    assert calibrate(LFSM, 0.1).q == pytest.approx(LFSM_01["q"], rel=1e-9)
    bm = calibrate(BrownianMotion(), 0.1, "two")
    assert bm.q == pytest.approx(Q_BM[2], rel=1e-12) and math.isnan(bm.w)
    with pytest.raises(DomainError):
        calibrate(StableLevy(StableParams(1.5, 0.0)), 0.1)
    with pytest.raises(DomainError):
        calibrate(STABLE, 0.1, "two")
    with pytest.raises(DomainError):
        calibrate(LFSM, 0.1, "two")


def test_deviation_level():
    s = calib_stable_skewed(0.1, 1.5)
    assert deviation_level(s, 0.0) == 0.1
    assert deviation_level(s, 2.0) == pytest.approx(0.1 + 2 * s.w)
    bm = calibrate(BrownianMotion(), 0.1)
    assert deviation_level(bm, 0.0) == 0.1
    with pytest.raises(DomainError):
        deviation_level(bm, 1.0)


# --------------------------------------------------------------------------
# limit laws


def test_limit_law_brownian():
    for mode in ("one", "two"):
        law = limit_law(BrownianMotion(), mode)
        assert law.kappa == 2.0 and law.fbar == "point0"
        assert law.probability(0.0) == pytest.approx(0.135335, abs=5e-7)
        with pytest.raises(DomainError):
            law.probability(1.0)


def test_limit_law_lfsm():
    law = limit_law(LFSM)
    assert law.kappa == 1.0 and law.fbar == "gumbel"
    assert law.probability(0.0) == pytest.approx(math.exp(-1), rel=1e-15)
    for x in (-1.0, 0.5, 3.0):
        assert law.probability(x) == pytest.approx(math.exp(-math.exp(-x)), rel=1e-15)


def test_limit_law_stable():
    law = limit_law(STABLE)
    assert law.kappa is None and law.fbar == "gumbel"
    with pytest.raises(DomainError):
        law.probability(0.0)
    with pytest.raises(DomainError, match="largest positive jump"):
        limit_law(StableLevy(StableParams(1.5, 0.0)))


def test_limit_law_fbar_contract():
    for law in (LimitLaw(1.0), LimitLaw(2.0, "point0"), LimitLaw(None)):
        assert law.fbar_at(0.0) == 1.0
    with pytest.raises(DomainError):
        LimitLaw(-1.0)


def test_fixed_eps_limits():
    assert fixed_eps_levy_limit(1.2, -1.0, 0.3) == 1.0
    one = fixed_eps_levy_limit(1.2, 0.0, 1.0)
    two = fixed_eps_levy_limit(1.2, 0.0, 1.0, "two")
    assert one == pytest.approx(ONE_SIDED_12, rel=1e-12)
    assert two == pytest.approx(TWO_SIDED_12, rel=1e-12)
    assert one == pytest.approx(math.exp(-0.5 * c_alpha(1.2)), rel=1e-14)
    # six-digit reference values
    assert one == pytest.approx(0.757357, abs=1e-4)
    assert two == pytest.approx(0.573590, abs=1e-4)


def test_brownian_product_limit_is_exp_minus_one_over_i():
    # the product along q_i tends to exp(-1/i); distances shrink down the schedule
    for i in (1, 2):
        vals = [bm_exact_deviation_prob(e, q_bm(e, 1.0, i)) for e in EPS_SCHEDULE]
        assert vals == pytest.approx(BM_PROB[i], rel=1e-10)
        gaps = [abs(v - math.exp(-1 / i)) for v in vals]
        assert all(a > b for a, b in zip(gaps, gaps[1:]))


@pytest.mark.parametrize("i, limit", [(1, math.exp(-2.0)), (2, math.exp(-1.0))])
def test_brownian_two_sided_product_limits(i, limit):
    # absolute deviations double the per-block exceedance: exp(-2) along q_1, exp(-1) along q_2
    vals = [bm_exact_deviation_prob(e, q_bm(e, 1.0, i), 1.0, "two") for e in EPS_SCHEDULE]
    assert vals == pytest.approx(BM_PROB_TWO[i], rel=1e-10)
    gaps = [abs(v - limit) for v in vals]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


@pytest.mark.xfail(
    strict=True,
    reason="the product formula along q_i converges to exp(-1/i), not exp(-2)",
)
@pytest.mark.parametrize("i", [1, 2])
def test_brownian_limit_law_matches_product_formula(i):
    law = limit_law(BrownianMotion(), "one" if i == 1 else "two")
    vals = [bm_exact_deviation_prob(e, q_bm(e, 1.0, i)) for e in EPS_SCHEDULE]
    assert abs(vals[-1] - law.probability(0.0)) < 0.01


# --------------------------------------------------------------------------
# probes


@pytest.mark.parametrize("spec", [STABLE, LFSM])
def test_probe_identity_at_origin(spec):
    pr = probe_condition_ratios(spec, 1e-3, 0.0, 0.0)
    assert pr.ratio32 == 1.0 and pr.ratio33 == 1.0
    assert (pr.target31, pr.target32, pr.target33) == (1.0, 1.0, 1.0)


def test_probe_stable_ratio32():
    pr = probe_condition_ratios(STABLE, 1e-6, 1.0, 0.0)
    assert pr.ratio32 == pytest.approx(math.exp(-1), rel=0.10)


@pytest.mark.parametrize("spec", [STABLE, LFSM])
def test_probe_ratio31_improves(spec):
    errs = [abs(probe_condition_ratios(spec, e, 0.0, 0.0).ratio31 - 1) for e in (1e-3, 1e-4, 1e-5, 1e-6)]
    assert all(a > b for a, b in zip(errs, errs[1:]))


@pytest.mark.parametrize("spec", [STABLE, LFSM])
@pytest.mark.parametrize("x, r", [(1.0, 0.0), (2.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (1.0, 2.0)])
def test_probe_ratios_converge(spec, x, r):
    rows = [probe_condition_ratios(spec, e, x, r) for e in (1e-3, 1e-5, 1e-7, 1e-9)]
    e32 = [abs(p.ratio32 / p.target32 - 1) for p in rows]
    e33 = [abs(p.ratio33 / p.target33 - 1) for p in rows]
    assert all(a > b for a, b in zip(e32, e32[1:])) or max(e32) < 1e-12
    assert all(a > b for a, b in zip(e33, e33[1:]))


def test_probe_rejects_bad_inputs():
    with pytest.raises(DomainError):
        probe_condition_ratios(BrownianMotion(), 0.1, 0.0, 0.0)
    with pytest.raises(DomainError):
        probe_condition_ratios(STABLE, 0.1, 0.0, -1.0)
    with pytest.raises(DomainError):
        probe_condition_ratios(STABLE, 0.1, 0.0, 100.0)


def test_sampling_scales_is_plain_record():
    s = SamplingScales(0.1, 0.01, 0.02, 0.3, 0.3)
    assert s.Q1 == math.inf and s.Q2 == 1.0 and s.eps_threshold == 1.0
