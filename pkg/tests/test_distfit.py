import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

import oracles
from tailpwf.distfit import (
    NIG,
    NORMAL,
    DistributionFit,
    NigParams,
    NormalParams,
    fit_nig,
    fit_normal,
    gof_metrics,
    information_criteria,
    ks_statistic,
    moment_init,
    nig_cdf,
    nig_pdf,
    nig_quantile,
    nig_sample,
    normal_cdf,
    normal_quantile,
    qq_points,
)
from tailpwf.errors import DegenerateSampleError, DomainError

GRID = [
    (a, b, 0.0, d)
    for a, d in itertools.product((0.5, 1.0, 10.0, 50.0), (0.01, 1.0))
    for b in (0.0, 0.3 * a, -0.3 * a)
]
UNIT = NigParams(1.0, 0.0, 0.0, 1.0)


def test_params_invariants():
    for bad in [(1.0, 1.0, 0.0, 1.0), (1.0, -2.0, 0.0, 1.0), (0.0, 0.0, 0.0, 1.0), (1.0, 0.0, 0.0, 0.0)]:
        with pytest.raises(DomainError):
            NigParams(*bad)
    with pytest.raises(DomainError):
        NormalParams(0.0, 0.0)
    assert NigParams(5.0, 3.0, 0.0, 1.0).gamma == 4.0


def test_pdf_spot_value():
    ref = oracles.nig_pdf_mp(1, 0, 0, 1, 0)
    assert ref == pytest.approx(0.5208038299916701, abs=1e-15)
    assert float(nig_pdf(UNIT, 0.0)) == pytest.approx(ref, abs=1e-14)


def test_pdf_symmetry():
    assert float(nig_pdf(UNIT, 0.7)) == pytest.approx(float(nig_pdf(UNIT, -0.7)), abs=1e-12)


@pytest.mark.parametrize("p", GRID)
def test_pdf_matches_textbook_form(p):
    law = NigParams(*p)
    for x in (-3 * p[3], 0.0, 2 * p[3]):
        assert float(nig_pdf(law, x)) == pytest.approx(oracles.nig_pdf_kv(*p, x), rel=1e-10)


@pytest.mark.parametrize("p", GRID)
def test_pdf_normalisation(p):
    law = NigParams(*p)
    mass = oracles.nig_mass(law.pdf, *p)
    assert abs(mass - 1.0) < 1e-6
    # the +-40 delta window only holds all the mass when the tails decay within it
    if (p[0] - abs(p[1])) * 40 * p[3] > 30:
        inner = oracles.nig_mass(law.pdf, *p, lo=p[2] - 40 * p[3], hi=p[2] + 40 * p[3])
        assert abs(inner - 1.0) < 1e-6


def test_cdf_examples():
    assert float(nig_cdf(UNIT, 0.0)) == pytest.approx(0.5, abs=1e-8)
    assert float(nig_cdf(UNIT, math.inf)) == 1.0
    assert float(nig_cdf(UNIT, -math.inf)) == 0.0
    assert float(nig_cdf(UNIT, 1.0)) == pytest.approx(oracles.nig_cdf_quad(1, 0, 0, 1, 1.0), abs=1e-8)


@pytest.mark.parametrize("p", GRID[::3] + [(50.0, -10.0, 0.001, 0.02)])
def test_cdf_matches_quadrature(p):
    law = NigParams(*p)
    for x in (p[2] - 5 * p[3], p[2] - 0.3 * p[3], p[2] + 2 * p[3], p[2] + 30 * p[3]):
        assert float(nig_cdf(law, x)) == pytest.approx(oracles.nig_cdf_quad(*p, x), abs=1e-8)


@settings(max_examples=50, deadline=None)
@given(
    st.sampled_from(GRID),
    st.lists(st.floats(-50, 50, allow_nan=False), min_size=2, max_size=30),
)
def test_cdf_monotone(p, xs):
    law = NigParams(*p)
    x = np.sort(np.asarray(xs) * p[3] + p[2])
    f = law.cdf(x)
    assert np.all(np.diff(f) >= 0)
    assert np.all((f >= 0) & (f <= 1))


def test_quantile_examples():
    assert float(nig_quantile(UNIT, 0.5)) == pytest.approx(0.0, abs=1e-7)
    f = lambda t: oracles.nig_cdf_quad(1, 0, 0, 1, t) - 0.99  # noqa: E731
    ref = oracles.bisect(f, 0.0, 20.0)
    assert float(nig_quantile(UNIT, 0.99)) == pytest.approx(ref, abs=1e-6)
    for bad in (0.0, 1.0, -0.1, 1.5, math.nan):
        with pytest.raises(DomainError):
            nig_quantile(UNIT, bad)


@pytest.mark.parametrize("p", GRID)
def test_round_trips(p):
    law = NigParams(*p)
    x = np.array([p[2] - 2 * p[3], p[2], p[2] + 2 * p[3]])
    f = law.cdf(x)
    # where 1 - F underflows below a few ulps the inverse is not identifiable in doubles
    ok = 1.0 - f > 1e-12
    np.testing.assert_allclose(law.quantile(f[ok]), x[ok], rtol=0, atol=1e-6)
    u = np.array([1e-6, 0.001, 0.1, 0.37, 0.5, 0.9, 0.999, 1 - 1e-6])
    back = law.cdf(law.quantile(u))
    np.testing.assert_allclose(back, u, rtol=0, atol=1e-7)
    assert np.all(np.diff(law.quantile(u)) > 0)


def test_normal_cdf_quantile_accuracy():
    for u in (1e-8, 0.001, 0.2, 0.5, 0.8413447460685429, 0.999):
        assert float(normal_quantile(u)) == pytest.approx(oracles.normal_quantile_mp(u), abs=1e-9)
    for x in (-6.0, -1.0, 0.0, 0.3, 2.5):
        assert float(normal_cdf(x, 0.1, 2.0)) == pytest.approx(oracles.normal_cdf_erf(x, 0.1, 2.0), abs=1e-15)
    with pytest.raises(DomainError):
        normal_quantile(1.0)


def test_sample_determinism_and_moments():
    law = NigParams(10.0, 0.0, 0.0, 0.01)
    a = nig_sample(law, 100_000, 7)
    assert np.array_equal(a, nig_sample(law, 100_000, 7))
    assert not np.array_equal(a, nig_sample(law, 100_000, 8))
    se = math.sqrt(law.variance / a.size)
    assert abs(a.mean() - law.mean) < 4 * se
    assert ks_statistic(a, law.cdf) < 1.63 / math.sqrt(a.size)


def test_sample_skewed_mean():
    law = NigParams(50.0, -10.0, 0.001, 0.02)
    x = law.sample(200_000, 3)
    assert law.mean == pytest.approx(0.001 + 0.02 * -10 / math.sqrt(2400))
    assert abs(x.mean() - law.mean) < 4 * math.sqrt(law.variance / x.size)
    assert ks_statistic(x, law.cdf) < 1.63 / math.sqrt(x.size)


def test_fit_normal_examples():
    f = fit_normal([-1.0, 1.0])
    assert (f.params.mu, f.params.sigma) == (0.0, 1.0)
    with pytest.raises(DegenerateSampleError):
        fit_normal([0.2] * 10)
    with pytest.raises(DegenerateSampleError):
        fit_normal([0.2])
    x = np.random.default_rng(11).normal(0.0005, 0.01, 10_000)
    f = fit_normal(x)
    assert abs(f.params.mu - 0.0005) < 3 * 0.01 / 100
    assert abs(f.params.sigma - 0.01) < 0.0005
    assert f.params.sigma == pytest.approx(np.std(x, ddof=0), rel=1e-14)


def test_fit_nig_recovery():
    true = NigParams(50.0, -10.0, 0.001, 0.02)
    f = fit_nig(true.sample(50_000, 2024))
    p = f.params
    assert abs(p.alpha - 50) / 50 < 0.15
    assert abs(p.delta - 0.02) / 0.02 < 0.15
    assert abs(p.beta + 10) < 2.5
    assert f.log_likelihood >= f.extra["init_loglik"]


def test_fit_nig_degenerate():
    with pytest.raises(DegenerateSampleError):
        fit_nig([0.01] * 50)
    with pytest.raises(DegenerateSampleError):
        fit_nig([0.01, 0.02, 0.03])


def test_fit_nig_nests_gaussian():
    x = np.random.default_rng(5).normal(0.0, 0.01, 10_000)
    assert fit_nig(x).log_likelihood >= fit_normal(x).log_likelihood - 1e-6


def test_moment_init_matches_moments():
    alpha, beta, mu, delta = moment_init(-0.8, 4.0)
    law = NigParams(alpha, beta, mu, delta)
    g = law.gamma
    assert law.mean == pytest.approx(0.0, abs=1e-12)
    assert law.variance == pytest.approx(1.0, rel=1e-12)
    assert 3 * beta / (alpha * math.sqrt(delta * g)) == pytest.approx(-0.8, rel=1e-10)
    assert 3 * (1 + 4 * beta**2 / alpha**2) / (delta * g) == pytest.approx(4.0, rel=1e-10)
    # infeasible moment pair falls back to a symmetric law
    assert moment_init(2.0, 1.0)[1] == 0.0


@pytest.mark.parametrize("seed", range(3))
def test_ic_identities(seed):
    x = NigParams(40.0, 5.0, 0.0, 0.01).sample(300, seed)
    for f, k in ((fit_normal(x), 2), (fit_nig(x), 4)):
        assert f.k == k
        assert abs(f.aic - (2 * k - 2 * f.log_likelihood)) < 1e-9
        assert abs(f.bic - (k * math.log(f.n) - 2 * f.log_likelihood)) < 1e-9
        assert 0 <= f.ks <= 1
        aic, bic, ks = gof_metrics(f, x)
        assert (aic, bic, ks) == pytest.approx((f.aic, f.bic, f.ks), abs=1e-9)


def test_information_criteria_arithmetic():
    aic, bic = information_criteria(-100.0, 2, 100)
    assert aic == 204.0
    assert bic == pytest.approx(209.2103, abs=1e-4)


def test_ks_single_point():
    assert ks_statistic([0.5], lambda x: np.full_like(x, 0.5)) == 0.5


def _ks_brute(xs, cdf):
    n = len(xs)
    best = 0.0
    for xi in xs:
        f = float(cdf(np.array([xi]))[0])
        le = sum(1 for xj in xs if xj <= xi) / n
        lt = sum(1 for xj in xs if xj < xi) / n
        best = max(best, abs(le - f), abs(lt - f))
    return best


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-300, 300), min_size=1, max_size=200))
def test_ks_equals_brute_force(ints):
    xs = [i / 100.0 for i in ints]  # coarse values produce ties
    cdf = NormalParams(0.1, 1.3).cdf
    assert ks_statistic(xs, cdf) == _ks_brute(xs, cdf)


def test_ks_matches_scipy():
    x = np.random.default_rng(0).normal(size=500)
    law = NormalParams(0.05, 0.9)
    ref = stats.kstest(x, lambda t: stats.norm.cdf(t, 0.05, 0.9)).statistic
    assert ks_statistic(x, law.cdf) == pytest.approx(ref, abs=1e-14)


@pytest.mark.parametrize("seed", range(3))
def test_nig_beats_normal_heavy_tails(seed):
    law = NigParams(30.0, -6.0, 0.0005, 0.01)  # alpha*delta = 0.3
    x = law.sample(5000, 100 + seed)
    nig, norm = fit_nig(x), fit_normal(x)
    assert nig.aic < norm.aic
    assert nig.ks < norm.ks


def test_fit_json_round_trip():
    x = NigParams(30.0, -6.0, 0.0, 0.01).sample(400, 1)
    for f in (fit_normal(x), fit_nig(x)):
        d = json.loads(json.dumps(f.to_dict()))
        assert set(d) >= {"family", "params", "loglik", "n", "aic", "bic", "ks"}
        back = DistributionFit.from_dict(d)
        assert back.family == f.family and back.params == f.params
        assert back.aic == f.aic and back.ks == f.ks
    assert fit_normal(x).family == NORMAL and fit_nig(x).family == NIG


def test_qq_points():
    x = np.random.default_rng(3).normal(size=50)
    f = fit_normal(x)
    qq = qq_points(f, x)
    assert qq.shape == (50, 2)
    np.testing.assert_array_equal(qq[:, 1], np.sort(x))
    pos = (np.arange(1, 51) - 0.5) / 50
    np.testing.assert_allclose(qq[:, 0], stats.norm.ppf(pos, f.params.mu, f.params.sigma), atol=1e-12)
