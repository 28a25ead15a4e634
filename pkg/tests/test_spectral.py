import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cuepair.spectral import (FamilySpecError, UndefinedRatioError, evaluate, fourier_coeff,
                              karamata_ratio, make_family, mn_schedule, v_n)

from oracles import harmonic, power_partial_sum, trapezoid_fourier

FAMILIES = ["power:1.5", "power:1", "power:2", "powerlog:1.5,1", "coslist:1,0.5,-0.25", "const:2"]


class TestMakeFamily:
    def test_coslist_one(self):
        f = make_family("coslist:1")
        assert f.fhat(1) == f.fhat(-1) == 0.5
        assert f.fhat(0) == 0.0 and f.fhat(2) == 0.0

    def test_power_value(self):
        assert make_family("power:1.5").fhat(3) == pytest.approx(0.1924500897, abs=1e-10)

    def test_file_source_matches_coslist(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("k,fhat\n0,0\n1,0.5\n")
        f, g = make_family(f"file:{p}"), make_family("coslist:1")
        np.testing.assert_array_equal(f.coefficients(5), g.coefficients(5))
        assert v_n(f, 7) == v_n(g, 7)
        assert evaluate(f, 0.3, 5) == evaluate(g, 0.3, 5)

    @pytest.mark.parametrize("body", ["k,fhat\n-1,0.5\n", "0,0\n1,nan\n", "0,0\n0,1\n", "0,1,2\n", "1.5,2\n", ""])
    def test_bad_files(self, tmp_path, body):
        p = tmp_path / "bad.csv"
        p.write_text(body)
        with pytest.raises(FamilySpecError):
            make_family(f"file:{p}")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FamilySpecError):
            make_family(f"file:{tmp_path / 'nope.csv'}")

    @pytest.mark.parametrize("spec", ["power", "power:", "power:a", "power:-1", "power:1,2", "zeta:2",
                                      "powerlog:1", "coslist:inf", "const:1,2"])
    def test_malformed(self, spec):
        with pytest.raises(FamilySpecError):
            make_family(spec)

    @pytest.mark.parametrize("spec", ["power:0.7", "power:2", "powerlog:1.5,2", "powerlog:0,1"])
    def test_builtin_non_increasing(self, spec):
        c = make_family(spec).coefficients(500)[1:]
        assert np.all(np.diff(c) <= 0) and np.all(np.isfinite(c))

    def test_powerlog_formula(self):
        f = make_family("powerlog:1.5,2")
        assert f.fhat(7) == pytest.approx(7**-1.5 * math.log(8) ** -2, rel=1e-14)


class TestFourierCoeff:
    def test_examples(self):
        assert fourier_coeff(make_family("coslist:1"), -1) == 0.5
        assert fourier_coeff(make_family("power:1.5"), 4) == 0.125

    @pytest.mark.parametrize("spec", FAMILIES)
    def test_quadrature_recovers_coefficients(self, spec):
        f = make_family(spec)
        K = 200
        x = 2 * np.pi * np.arange(2**14) / 2**14
        vals = evaluate(f, x, K)
        for k in (0, 1, 2, 7, 150, 200):
            assert abs(trapezoid_fourier(vals, k) - f.fhat(k)) <= 1e-10

    @given(st.sampled_from(FAMILIES), st.integers(-10**6, 10**6))
    def test_even(self, spec, k):
        f = make_family(spec)
        assert fourier_coeff(f, k) == fourier_coeff(f, -k)

    def test_fhat_matches_table(self):
        f = make_family("power:1.5")
        c = f.coefficients(1000)
        assert all(f.fhat(k) == c[k] for k in (1, 17, 999, 1000))


class TestEvaluate:
    def test_examples(self):
        assert evaluate(make_family("coslist:1"), math.pi, 1) == pytest.approx(-1.0, abs=1e-15)
        assert evaluate(make_family("const:3"), 1.2, 0) == 3.0
        assert evaluate(make_family("power:2"), 0.0, 10**4) == pytest.approx(2 * power_partial_sum(2, 10**4), rel=1e-12)

    def test_vectorised(self):
        f = make_family("power:1.5")
        x = np.linspace(0, 6, 7)
        np.testing.assert_allclose(evaluate(f, x, 40), [evaluate(f, v, 40) for v in x], rtol=0, atol=1e-13)

    @given(st.sampled_from(FAMILIES), st.floats(-10, 10), st.integers(1, 300))
    def test_truncation_consistency(self, spec, x, K):
        f = make_family(spec)
        diff = evaluate(f, x, K) - evaluate(f, x, K - 1)
        assert diff == pytest.approx(2 * f.fhat(K) * math.cos(K * x), abs=1e-12)

    def test_negative_K(self):
        with pytest.raises(ValueError):
            evaluate(make_family("power:1"), 0.0, -1)


class TestVN:
    def test_examples(self):
        assert v_n(make_family("coslist:2"), 5) == 2.0
        assert v_n(make_family("power:1.5"), 4) == pytest.approx(2 * harmonic(4), rel=1e-15)
        assert v_n(make_family("power:1.5"), 4) == pytest.approx(25 / 6, rel=1e-15)
        assert v_n(make_family("power:1.5"), 0) == 0.0

    @pytest.mark.parametrize("N", [10, 1000, 123456])
    def test_harmonic(self, N):
        assert v_n(make_family("power:1.5"), N) == pytest.approx(2 * harmonic(N), rel=1e-12)
        assert v_n(make_family("power:1"), N) == pytest.approx(2 * N, rel=1e-12)

    @given(st.sampled_from(FAMILIES), st.integers(0, 2000))
    def test_monotone(self, spec, N):
        f = make_family(spec)
        a, b = v_n(f, N), v_n(f, N + 1)
        assert b >= a
        assert (b == a) == (f.fhat(N + 1) == 0)


class TestKaramata:
    def test_unit_ratio(self):
        assert karamata_ratio(make_family("power:1.5"), 77, 1.0) == 1.0

    def test_harmonic_ratio(self):
        # exact harmonic oracle: H_{2^21} / H_{2^20}
        r = karamata_ratio(make_family("power:1.5"), 2**20, 2)
        assert r == pytest.approx(harmonic(2**21) / harmonic(2**20), rel=1e-12)
        assert r == pytest.approx(1.0480013347, abs=1e-9)

    def test_linear(self):
        assert karamata_ratio(make_family("power:1"), 2**20, 2) == pytest.approx(2.0, rel=1e-12)

    def test_undefined(self):
        with pytest.raises(UndefinedRatioError):
            karamata_ratio(make_family("const:1"), 10, 2)
        with pytest.raises(ValueError):
            karamata_ratio(make_family("power:1"), 10, 0.01)


def _schedule_ok(f, N, M, delta):
    return v_n(f, N * M) <= (1 + delta) * v_n(f, N) and v_n(f, N) <= (1 + delta) * v_n(f, N // M)


class TestMnSchedule:
    def test_constant_v_reaches_cap(self):
        for N in (4, 16, 81, 100, 10**4):
            cap = math.ceil(round(N ** 0.25, 9))
            assert mn_schedule(make_family("coslist:1"), N) == max(2, cap)

    def test_linear_falls_back(self):
        assert mn_schedule(make_family("power:1"), 2**16) == 2

    def test_power15_self_check(self):
        f = make_family("power:1.5")
        N = 2**16
        M = mn_schedule(f, N, 0.05)
        assert 2 <= M <= 16
        assert M == 2 or _schedule_ok(f, N, M, 0.05)

    @given(st.sampled_from(FAMILIES[:-1]), st.integers(4, 5000), st.floats(0.01, 1.0))
    def test_output_satisfies_definition(self, spec, N, delta):
        f = make_family(spec)
        M = mn_schedule(f, N, delta)
        cap = max(2, math.ceil(N ** 0.25 - 1e-12))
        assert 2 <= M <= cap
        if M > 2:
            assert _schedule_ok(f, N, M, delta)
        for larger in range(M + 1, cap + 1):
            assert not _schedule_ok(f, N, larger, delta)

    def test_preconditions(self):
        with pytest.raises(ValueError):
            mn_schedule(make_family("power:1"), 3)
        with pytest.raises(ValueError):
            mn_schedule(make_family("power:1"), 16, 0)
