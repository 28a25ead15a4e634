import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from cuepair import montecarlo as mc
from cuepair.ensembles import SamplerError, make_stream, sample_cue
from cuepair.montecarlo import (ConfigError, ExperimentConfig, SampleFailure, empirical_central_moment,
                                empirical_cumulant, empirical_joint_cumulant, ks_distance, ks_distance_2samp,
                                run_experiment)
from cuepair.pairstats import power_traces


def cue_traces(N, n, K, seed):
    return np.array([power_traces(sample_cue(N, make_stream(seed, i, N)), K).values for i in range(n)])


class TestEmpiricalCumulant:
    def test_constant(self):
        assert empirical_cumulant([3.0] * 10, 2) == (0.0, 0.0)

    def test_exponential_variance(self):
        x = np.random.default_rng(0).exponential(size=10**6)
        est, se = empirical_cumulant(x, 2)
        assert abs(est - 1.0) <= 4 * se

    def test_normal_third(self):
        x = np.random.default_rng(1).standard_normal(10**5)
        est, se = empirical_cumulant(x, 3)
        assert abs(est) <= 4 * se

    @given(st.lists(st.floats(-100, 100), min_size=6, max_size=40), st.integers(1, 4))
    def test_matches_scipy_kstat(self, xs, m):
        est, se = empirical_cumulant(xs, m)
        ref = stats.kstat(np.array(xs), m)
        assert est == pytest.approx(ref, rel=1e-7, abs=1e-7 * (1 + np.max(np.abs(xs))) ** m)
        assert se >= 0

    def test_jackknife_matches_brute_force(self):
        x = np.random.default_rng(2).gamma(2.0, size=60)
        for m in (2, 3, 4):
            loo = np.array([stats.kstat(np.delete(x, i), m) for i in range(x.size)])
            ref = math.sqrt((x.size - 1) / x.size * np.sum((loo - loo.mean()) ** 2))
            assert empirical_cumulant(x, m)[1] == pytest.approx(ref, rel=1e-8)

    def test_errors(self):
        with pytest.raises(ValueError):
            empirical_cumulant([1.0, 2.0], 2)
        with pytest.raises(ValueError):
            empirical_cumulant([1.0] * 10, 5)

    def test_central_moment(self):
        x = np.random.default_rng(3).standard_normal(500) ** 3
        for m in (2, 3, 4):
            assert empirical_central_moment(x, m)[0] == pytest.approx(np.mean((x - x.mean()) ** m), rel=1e-9)


class TestJointCumulant:
    def test_pair_n5(self):
        est, se = empirical_joint_cumulant(cue_traces(5, 20000, 1, 51), (1, -1))
        assert abs(est - 1.0) <= 4 * se

    def test_condition_i(self):
        est, se = empirical_joint_cumulant(cue_traces(6, 20000, 1, 52), (1, 1))
        assert abs(est) <= 4 * se

    def test_condition_ii(self):
        est, se = empirical_joint_cumulant(cue_traces(8, 20000, 3, 53), (1, 2, -3))
        assert abs(est) <= 4 * se

    def test_moment_relations(self):
        # on real data the joint cumulant of (X, X) is the variance and (X, X, X) the third central moment
        rng = np.random.default_rng(4)
        x = rng.gamma(3.0, size=(4000, 1)).astype(complex)
        T = np.hstack([np.ones_like(x), x])
        v = np.mean((x - x.mean()) ** 2).real
        assert empirical_joint_cumulant(T, (1, 1))[0].real == pytest.approx(v, rel=1e-10)
        m3 = np.mean((x - x.mean()) ** 3).real
        assert empirical_joint_cumulant(T, (1, 1, 1))[0].real == pytest.approx(m3, rel=1e-9)

    def test_accepts_powertraces(self):
        ts = [power_traces(sample_cue(4, make_stream(5, i, 4)), 2) for i in range(1000)]
        a = empirical_joint_cumulant(ts, (1, -1))
        b = empirical_joint_cumulant(np.array([t.values for t in ts]), (1, -1))
        assert a == b

    def test_errors(self):
        T = np.zeros((2000, 3), dtype=complex)
        with pytest.raises(ValueError):
            empirical_joint_cumulant(T, (1, 1, 1, 1, 1))
        with pytest.raises(ValueError):
            empirical_joint_cumulant(T[:999], (1, -1))
        with pytest.raises(ValueError):
            empirical_joint_cumulant(T, (3, -3))


class TestKS:
    def test_self_reference(self):
        x = np.random.default_rng(5).standard_normal(10**4)
        assert ks_distance(x, stats.norm.cdf) < 0.02

    def test_single_at_median(self):
        assert ks_distance([0.0], stats.norm.cdf) == 0.5

    def test_two_sample(self):
        x = np.random.default_rng(6).random(100)
        assert ks_distance_2samp(x, x) == 0.0
        assert ks_distance_2samp([0.0, 1.0], [2.0, 3.0]) == 1.0

    def test_manual(self):
        x = np.array([0.1, 0.4, 0.8])
        F = np.arange(1, 4) / 3
        ref = max(np.max(F - x), np.max(x - (F - 1 / 3)))
        assert ks_distance(x, lambda v: np.clip(v, 0, 1)) == pytest.approx(ref)

    def test_empty(self):
        with pytest.raises(ValueError):
            ks_distance([], stats.norm.cdf)
        with pytest.raises(ValueError):
            ks_distance_2samp([], [1.0])


class TestConfig:
    def test_roundtrip(self):
        c = ExperimentConfig(kind="cumulant-check", n_values=[8, 16], samples=1000, seed=3, ks=[[1, 2, -3], [1, 1]])
        d = json.loads(json.dumps(c.to_dict()))
        assert ExperimentConfig.from_dict(d) == c
        assert c.ks == ((1, 2, -3), (1, 1))
        assert ExperimentConfig(kind="moment-identity", ks=[1, 2]).ks == ((1, 2),)

    @pytest.mark.parametrize("kw", [
        {"kind": "nope"}, {"kind": "clt", "samples": 1}, {"kind": "clt", "n_values": [0]},
        {"kind": "clt", "n_values": []}, {"kind": "clt", "fhat": "const:1"}, {"kind": "clt", "fhat": "bad"},
        {"kind": "clt", "beta": 1.0}, {"kind": "clt", "sampler": "gibbs"},
        {"kind": "clt", "sampler": "mcmc", "mcmc": {"thinning": 0}},
        {"kind": "clt", "sampler": "mcmc", "mcmc": {"bogus": 1}},
        {"kind": "variance-check", "n_values": [1]}, {"kind": "cumulant-check", "ks": [[1, 0]], "samples": 2000},
        {"kind": "cumulant-check", "ks": [[1, -1]], "samples": 100}, {"kind": "moment-identity"},
        {"kind": "moment-identity", "ks": [[1, -2]]}, {"kind": "truncated-moments", "n_values": [3]},
        {"kind": "truncated-moments", "M": 1}, {"kind": "clt", "workers": 0}, {"kind": "clt", "tolerance_se": 0},
    ])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            ExperimentConfig(**kw)

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"kind": "clt", "colour": 1})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"n_values": [4]})

    def test_from_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"kind": "clt", "seed": 4}')
        assert ExperimentConfig.from_json(p).seed == 4
        p.write_text("{")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json(p)


class TestRunExperiment:
    def test_variance_check_cos(self):
        s = run_experiment(ExperimentConfig(kind="variance-check", fhat="coslist:1", n_values=[8], samples=20000, seed=1))
        assert s.passed
        k2 = s.record(8)["cumulants"]["k2"]
        assert k2["reference"] == 1.0 and abs(k2["value"] - 1.0) <= 3 * k2["stderr"]

    def test_deterministic_across_workers(self):
        base = dict(kind="clt", n_values=[8, 12], samples=300, seed=77)
        a = run_experiment(ExperimentConfig(**base, workers=1))
        b = run_experiment(ExperimentConfig(**base, workers=3))
        ja, jb = a.to_json(), b.to_json()
        assert ja.replace('"workers": 1', "") == jb.replace('"workers": 3', "")
        assert "runtime" not in ja

    def test_mcmc_deterministic_across_workers(self):
        base = dict(kind="moment-identity", n_values=[6], samples=100, seed=5, sampler="mcmc",
                    trace_orders=[1], mcmc={"burn_in": 50, "thinning": 4})
        a = run_experiment(ExperimentConfig(**base, workers=1)).records
        b = run_experiment(ExperimentConfig(**base, workers=2)).records
        assert a == b

    def test_summary_contract(self):
        s = run_experiment(ExperimentConfig(kind="moment-identity", n_values=[16], samples=4000, seed=2,
                                            ks=[[1, 2], [5, 6]], trace_orders=[1, 8]))
        d = json.loads(s.to_json())
        assert d["config"]["samples"] == 4000 and d["metadata"]["seed"] == 2
        prods = d["records"][0]["products"]
        assert prods["1,2"]["reference"] == 2.0
        assert prods["5,6"]["reference"] is None  # 2 * 11 > 16: no exact value
        assert all(c["stderr"] >= 0 for c in d["checks"] if "stderr" in c)
        assert d["status"] == "PASS"

    def test_fail_flag(self):
        s = run_experiment(ExperimentConfig(kind="variance-check", fhat="coslist:1", n_values=[8], samples=500,
                                            seed=1, tolerance_se=1e-6))
        assert not s.passed and s.status == "FAIL"

    def test_sampler_failure_carries_index(self, monkeypatch):
        real = mc.sample_cue

        def flaky(N, stream, provenance=""):
            if provenance.endswith("index=3"):
                raise SamplerError("boom")
            return real(N, stream, provenance=provenance)
        monkeypatch.setattr(mc, "sample_cue", flaky)
        with pytest.raises(SampleFailure) as info:
            run_experiment(ExperimentConfig(kind="clt", n_values=[4], samples=10, seed=0))
        assert info.value.index == 3 and "sample 3" in str(info.value)

    def test_writes_outputs(self, tmp_path):
        cfg = ExperimentConfig(kind="clt", n_values=[6], samples=50, seed=9, output_dir=str(tmp_path), write_values=True)
        s = run_experiment(cfg)
        summary = tmp_path / "summary_clt_seed9.json"
        assert summary.read_text() == s.to_json()
        rows = (tmp_path / "values_clt_seed9.csv").read_text().splitlines()
        assert rows[0].startswith("# config:") and rows[1] == "n,index,value" and len(rows) == 52

    def test_lemma_sums_kind(self):
        s = run_experiment(ExperimentConfig(kind="lemma-sums", n_values=[64, 256, 1024]))
        assert s.passed
        assert s.check("ratio_i_decreasing")["passed"]

    def test_cumulant_kind(self):
        s = run_experiment(ExperimentConfig(kind="cumulant-check", n_values=[8], samples=5000, seed=3,
                                            ks=[[1, 2, -3], [1, 1], [2, 2, -1, -3]], trace_orders=[2]))
        recs = s.record(8)["cumulants"]
        assert recs["2,2,-1,-3"]["reference"] == 0.0
        assert recs["2,-2"]["reference"] == 2.0
        assert s.passed

    def test_limit_compare_kind(self):
        s = run_experiment(ExperimentConfig(kind="limit-compare", fhat="power:2", n_values=[16], samples=2000,
                                            limit_samples=20000, seed=4, ks_threshold=0.1))
        r = s.record(16)
        assert r["ks_limit"]["value"] < 0.1
        assert s.passed

    def test_truncated_moments_kind(self):
        s = run_experiment(ExperimentConfig(kind="truncated-moments", n_values=[32], samples=2000, seed=4, M=8, m=3))
        r = s.record(32)
        assert r["cutoff"] == 4 and r["admissible"]
        assert s.check("central_moment_match")["passed"]

    def test_ks_gate(self):
        base = dict(kind="clt", fhat="coslist:1", n_values=[8], samples=2000, seed=2)
        assert run_experiment(ExperimentConfig(**base)).passed
        gated = run_experiment(ExperimentConfig(**base, ks_gate=True))
        assert not gated.passed  # |t_1|^2 is exponential, far from normal
