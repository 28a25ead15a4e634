import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cuepair.ensembles import make_stream
from cuepair.limits import LimitLawSpec, exp_sum_mgf, limit_law_cumulant, sample_limit_law, standard_normal_cdf
from cuepair.montecarlo import empirical_cumulant
from cuepair.spectral import make_family, v_n

INV_SQ = make_family("power:2")
# series oracles (Hurwitz zeta partial sums, see oracles.power_partial_sum), frozen
FOUR_SUM_INV_SQ_1E4 = 6.579336287392239    # 4 sum_{k<=1e4} k^-2
SIXTEEN_SUM_INV_CUBE_1E4 = 19.232910370561505  # 16 sum_{k<=1e4} k^-3


class TestSampling:
    def test_scalar_and_array(self):
        x = sample_limit_law(INV_SQ, 10, make_stream(0))
        assert isinstance(x, float)
        assert sample_limit_law(INV_SQ, 10, make_stream(0), size=7).shape == (7,)

    def test_reproducible(self):
        a = sample_limit_law(INV_SQ, 50, make_stream(3), size=100)
        np.testing.assert_array_equal(a, sample_limit_law(INV_SQ, 50, make_stream(3), size=100))

    def test_precondition(self):
        with pytest.raises(ValueError):
            sample_limit_law(INV_SQ, 0, make_stream(0))

    def test_cumulants_large_sample(self):
        # K = 100 keeps 10^6 draws cheap; the cumulants are checked against the
        # closed form at the same K
        K = 100
        x = sample_limit_law(INV_SQ, K, make_stream(5), size=10**6)
        for m, tol in ((1, 4), (2, 4), (3, 4)):
            est, se = empirical_cumulant(x, m)
            assert abs(est - limit_law_cumulant(INV_SQ, K, m)) <= tol * se

    def test_variance_and_skew_at_1e4_terms(self):
        x = sample_limit_law(INV_SQ, 10**4, make_stream(6), size=20000)
        v, sv = empirical_cumulant(x, 2)
        k3, s3 = empirical_cumulant(x, 3)
        assert abs(v - FOUR_SUM_INV_SQ_1E4) <= 3 * sv
        assert abs(k3 - SIXTEEN_SUM_INV_CUBE_1E4) <= 4 * s3


class TestCumulant:
    def test_first(self):
        assert limit_law_cumulant(INV_SQ, 10, 1) == 0.0

    def test_series(self):
        assert limit_law_cumulant(INV_SQ, 10**4, 2) == pytest.approx(FOUR_SUM_INV_SQ_1E4, rel=1e-12)
        assert limit_law_cumulant(INV_SQ, 10**4, 2) == pytest.approx(2 * math.pi**2 / 3, abs=5e-4)
        assert limit_law_cumulant(INV_SQ, 10**4, 3) == pytest.approx(SIXTEEN_SUM_INV_CUBE_1E4, rel=1e-12)

    @given(st.sampled_from(["power:1.5", "power:2", "coslist:1,2,3", "powerlog:1,1"]), st.integers(1, 500))
    def test_second_is_twice_vn(self, spec, N):
        f = make_family(spec)
        assert limit_law_cumulant(f, N, 2) == pytest.approx(2 * v_n(f, N), rel=1e-12)

    def test_general_beta(self):
        # prefactor 4/beta scales kappa_m by (2/beta)^m relative to beta = 2
        assert limit_law_cumulant(INV_SQ, 30, 3, beta=4.0) == pytest.approx(limit_law_cumulant(INV_SQ, 30, 3) / 8)

    def test_errors(self):
        with pytest.raises(ValueError):
            limit_law_cumulant(INV_SQ, 10, 0)
        with pytest.raises(ValueError):
            LimitLawSpec(np.array([1.0, np.nan]))


class TestMgf:
    def test_single_exponential(self):
        assert exp_sum_mgf([1.0], 0.5) == pytest.approx(math.exp(-0.5) / 0.5, rel=1e-14)
        assert exp_sum_mgf([1.0], 0.5) == pytest.approx(1.21306, abs=1e-5)

    def test_zero(self):
        assert exp_sum_mgf(np.arange(1.0, 20.0), 0.0) == 1.0

    def test_flat_1e4(self):
        assert abs(exp_sum_mgf(np.ones(10**4), 1.0) - math.exp(0.5)) < 0.01

    @pytest.mark.parametrize("t", [-1.0, -0.5, 0.5, 1.0])
    def test_monotone_toward_gaussian(self, t):
        gaps = [abs(exp_sum_mgf(np.ones(K), t) - math.exp(t * t / 2)) for K in (10**2, 10**3, 10**4)]
        assert gaps[0] > gaps[1] > gaps[2]

    def test_gap_asymptotic(self):
        # log M = K(-x - log(1-x)) with x = K^-1/2 gives 1/2 + x/3 + O(x^2)
        K = 10**6
        gap = math.log(exp_sum_mgf(np.ones(K), 1.0)) - 0.5
        assert gap == pytest.approx(1 / (3 * math.sqrt(K)), rel=1e-2)

    def test_domain(self):
        with pytest.raises(ValueError):
            exp_sum_mgf([1.0], 1.0)
        with pytest.raises(ValueError):
            exp_sum_mgf([], 0.1)
        with pytest.raises(ValueError):
            exp_sum_mgf([0.0, 0.0], 0.1)

    @given(st.lists(st.floats(0.01, 5), min_size=1, max_size=30), st.floats(-2, 0))
    def test_product_form(self, a, t):
        a = np.array(a)
        x = t * a / np.sqrt(np.sum(a * a))
        assert exp_sum_mgf(a, t) == pytest.approx(float(np.prod(np.exp(-x) / (1 - x))), rel=1e-10)


def test_normal_cdf():
    assert standard_normal_cdf(0.0) == 0.5
    assert standard_normal_cdf(1.959963984540054) == pytest.approx(0.975)
