"""Seeded Monte Carlo experiments with exact references.

Every sample ``i`` at matrix size ``N`` is generated from its own stream
``make_stream(seed, i, N)``, so a run is bit-identical for any number of
workers. Workers only fill rows of a preallocated feature array; all
estimators run afterwards over that array in index order.

Standard errors: leave-one-out jackknife for k-statistics and central
moments, 32 batch means for joint cumulants, the binomial ``sqrt(F(1-F)/n)``
at the maximising point for KS distances.
"""
from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import kernels
from .ensembles import (EnsembleParams, McmcParams, SamplerError, make_stream,
                        resolve_mcmc_params, sample_cbe_mcmc, sample_cue)
from .limits import limit_law_cumulant, sample_limit_law, standard_normal_cdf
from .pairstats import expected_pair_statistic
from .spectral import FamilySpecError, make_family, mn_schedule, v_n
from .theory import (IdentityNotGuaranteed, a_matrix_norm, joint_cumulant_exact, lemma21_sums,
                     moment_identity_rhs, variance_exact, variance_tail_exact)

__all__ = [
    "KINDS",
    "ConfigError",
    "SampleFailure",
    "ExperimentConfig",
    "MonteCarloSummary",
    "run_experiment",
    "generate_features",
    "empirical_cumulant",
    "empirical_central_moment",
    "empirical_joint_cumulant",
    "ks_distance",
    "ks_distance_2samp",
]

KINDS = ("clt", "limit-compare", "variance-check", "moment-identity",
         "cumulant-check", "lemma-sums", "truncated-moments")
SAMPLERS = ("dpp", "mcmc")
N_BATCHES = 32
MIN_JOINT_SAMPLES = 1000
_LIMIT_STREAM = 1 << 40


class ConfigError(ValueError):
    """Invalid or degenerate experiment configuration."""


class SampleFailure(RuntimeError):
    """A sampler failed; carries the sample index."""

    def __init__(self, index: int, n: int, cause: Exception):
        super().__init__(f"sample {index} (N={n}) failed: {cause}")
        self.index = index
        self.n = n


# -- estimators ----------------------------------------------------------------

def _kstat_from_sums(n, s1, s2, s3, s4, m):
    if m == 1:
        return s1 / n
    if m == 2:
        return (n * s2 - s1**2) / (n * (n - 1))
    if m == 3:
        return (2 * s1**3 - 3 * n * s1 * s2 + n * n * s3) / (n * (n - 1) * (n - 2))
    return (-6 * s1**4 + 12 * n * s1**2 * s2 - 3 * n * (n - 1) * s2**2
            - 4 * n * (n + 1) * s1 * s3 + n * n * (n + 1) * s4) / (n * (n - 1) * (n - 2) * (n - 3))


def _central_from_sums(n, s1, s2, s3, s4, m):
    mu = s1 / n
    raw = [1.0, mu, s2 / n, s3 / n, s4 / n]
    return sum(math.comb(m, j) * raw[j] * (-mu) ** (m - j) for j in range(m + 1))


def _jackknife(x, m, stat):
    """(full estimate, leave-one-out jackknife SE) for a power-sum statistic."""
    x = np.asarray(x, dtype=float).reshape(-1)
    n = x.size
    shift = float(np.mean(x)) if n else 0.0
    y = x - shift
    p = [y**r for r in range(1, 5)]
    s = [float(np.sum(v)) for v in p]
    est = stat(n, *s, m)
    loo = stat(n - 1, *(s[r] - p[r] for r in range(4)), m)
    se = math.sqrt((n - 1) / n * float(np.sum((loo - np.mean(loo)) ** 2)))
    return est, se


def empirical_cumulant(samples, m: int) -> tuple[float, float]:
    """Unbiased k-statistic of order ``m`` (1..4) and its jackknife SE.

    Examples
    --------
    >>> empirical_cumulant([2.0, 2.0, 2.0], 2)
    (0.0, 0.0)
    """
    m = int(m)
    if not 1 <= m <= 4:
        raise ValueError("m must be in 1..4")
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size <= m:
        raise ValueError(f"need more than {m} samples for order {m}, got {x.size}")
    shift = float(np.mean(x))
    est, se = _jackknife(x, m, _kstat_from_sums)
    if m == 1:
        est += shift
    return float(est), float(se)


def empirical_central_moment(samples, m: int) -> tuple[float, float]:
    """Plug-in central moment mean((x - xbar)^m), m in 1..4, with jackknife SE."""
    m = int(m)
    if not 1 <= m <= 4:
        raise ValueError("m must be in 1..4")
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size <= m:
        raise ValueError(f"need more than {m} samples for order {m}, got {x.size}")
    est, se = _jackknife(x, m, _central_from_sums)
    return float(est), float(se)


def _set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def _joint_cumulant(cols: list[np.ndarray]) -> complex:
    n = len(cols)
    total = 0j
    for part in _set_partitions(list(range(n))):
        b = len(part)
        term = (-1) ** (b - 1) * math.factorial(b - 1)
        for block in part:
            term = term * np.mean(np.prod([cols[i] for i in block], axis=0))
        total += term
    return complex(total)


def empirical_joint_cumulant(trace_samples, ks: Sequence[int]) -> tuple[complex, float]:
    """Joint cumulant of (t_{k_1}, ..., t_{k_n}) from power-trace samples.

    ``trace_samples`` is a sequence of :class:`PowerTraces` or a complex array
    of shape (samples, K+1) holding t_0..t_K. The estimate is the
    moments-to-cumulants sum over set partitions of plain sample moments.
    The standard error is the spread of the estimator over 32 contiguous
    batches divided by sqrt(32), taken on the modulus of the complex error.
    """
    ks = [int(k) for k in ks]
    if not 1 <= len(ks) <= 4:
        raise ValueError("joint cumulants are supported for 1 to 4 indices")
    if isinstance(trace_samples, np.ndarray):
        T = trace_samples
    else:
        T = np.array([t.values for t in trace_samples])
    if T.ndim != 2 or T.shape[0] < MIN_JOINT_SAMPLES:
        raise ValueError(f"need at least {MIN_JOINT_SAMPLES} samples, got {T.shape[0] if T.ndim == 2 else 0}")
    kmax = max(abs(k) for k in ks)
    if kmax >= T.shape[1]:
        raise ValueError(f"traces cover k <= {T.shape[1] - 1}, need {kmax}")
    cols = [T[:, k] if k >= 0 else np.conj(T[:, -k]) for k in ks]
    est = _joint_cumulant(cols)
    bounds = np.linspace(0, T.shape[0], N_BATCHES + 1).astype(int)
    batch = np.array([_joint_cumulant([c[a:b] for c in cols]) for a, b in zip(bounds[:-1], bounds[1:])])
    se_re = np.std(batch.real, ddof=1) / math.sqrt(N_BATCHES)
    se_im = np.std(batch.imag, ddof=1) / math.sqrt(N_BATCHES)
    return est, float(math.hypot(se_re, se_im))


def ks_distance(samples, cdf: Callable) -> float:
    """sup |F_n - F| over the sample, counting both one-sided gaps."""
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size == 0:
        raise ValueError("ks_distance needs at least one sample")
    return float(stats.kstest(x, cdf).statistic)


def ks_distance_2samp(a, b) -> float:
    """Two-sample KS distance sup |F_a - F_b|."""
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise ValueError("ks_distance_2samp needs non-empty samples")
    return float(stats.ks_2samp(a, b, method="asymp").statistic)


def _ks_with_se(x, cdf):
    res = stats.kstest(x, cdf)
    F = float(cdf(res.statistic_location))
    return float(res.statistic), math.sqrt(max(F * (1 - F), 0.0) / x.size)


def _ks2_with_se(a, b):
    res = stats.ks_2samp(a, b, method="asymp")
    F = float(np.searchsorted(np.sort(a), res.statistic_location, side="right")) / a.size
    return float(res.statistic), math.sqrt(max(F * (1 - F), 0.0) * (1 / a.size + 1 / b.size))


# -- configuration -------------------------------------------------------------

def _norm_ks(ks):
    if ks is None:
        return ()
    ks = list(ks)
    if ks and all(isinstance(k, (int, np.integer)) for k in ks):
        return (tuple(int(k) for k in ks),)
    return tuple(tuple(int(k) for k in grp) for grp in ks)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a run; round-trips through JSON.

    ``ks`` is one index set or a list of them (moment-identity: positive
    orders of the product; cumulant-check: signed trace indices).
    ``trace_orders`` lists extra k for which E|t_k|^2 = min(k, N) is checked.
    ``ks_gate`` makes the KS thresholds part of PASS/FAIL; by default only
    estimates with exact references decide the status.
    """

    kind: str
    n_values: tuple = (8,)
    seed: int = 0
    samples: int = 1000
    fhat: str = "power:1.5"
    beta: float = 2.0
    truncation: int | None = None
    sampler: str = "dpp"
    mcmc: dict = field(default_factory=dict)
    workers: int = 1
    ks: tuple = ()
    trace_orders: tuple = ()
    limit_samples: int | None = None
    m: int = 3
    M: int | None = None
    delta: float = 0.05
    tolerance_se: float = 4.0
    ks_threshold: float = 0.05
    ks_gate: bool = False
    k_tail: int | None = None
    output_dir: str | None = None
    write_values: bool = False

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)
        set_("n_values", tuple(int(n) for n in np.atleast_1d(self.n_values)))
        set_("ks", _norm_ks(self.ks))
        set_("trace_orders", tuple(int(k) for k in self.trace_orders))
        set_("mcmc", dict(self.mcmc or {}))
        self.validate()

    # JSON ----------------------------------------------------------------
    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        if "kind" not in d:
            raise ConfigError("config needs a 'kind'")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> ExperimentConfig:
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_values"] = list(self.n_values)
        d["ks"] = [list(g) for g in self.ks]
        d["trace_orders"] = list(self.trace_orders)
        return d

    # checks --------------------------------------------------------------
    def K_for(self, N: int) -> int:
        return int(self.truncation) if self.truncation is not None else int(N)

    def function(self):
        try:
            return make_family(self.fhat)
        except FamilySpecError as exc:
            raise ConfigError(str(exc)) from exc

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if not self.n_values or min(self.n_values) < 1:
            raise ConfigError("n_values must be non-empty with every N >= 1")
        if self.samples < 2:
            raise ConfigError("samples must be >= 2")
        if self.sampler not in SAMPLERS:
            raise ConfigError(f"sampler must be one of {SAMPLERS}")
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise ConfigError("beta must be finite and >= 0")
        if self.sampler == "dpp" and self.beta != 2.0:
            raise ConfigError("the dpp sampler draws the CUE only (beta = 2); use sampler 'mcmc'")
        if self.truncation is not None and self.truncation < 0:
            raise ConfigError("truncation must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not (self.tolerance_se > 0 and self.ks_threshold > 0 and self.delta > 0):
            raise ConfigError("tolerance_se, ks_threshold and delta must be positive")
        try:
            McmcParams(**self.mcmc)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad mcmc settings: {exc}") from exc
        f = self.function()
        needs_pairs = {"clt", "limit-compare", "variance-check", "lemma-sums"}
        if self.kind in needs_pairs and min(self.n_values) < 2:
            raise ConfigError(f"{self.kind} needs N >= 2")
        if self.kind == "clt":
            for N in self.n_values:
                if v_n(f, N) <= 0.0:
                    raise ConfigError(f"V_N = 0 at N={N}: the normalised statistic is undefined")
        if self.kind in ("moment-identity", "cumulant-check") and not (self.ks or self.trace_orders):
            raise ConfigError(f"{self.kind} needs 'ks' or 'trace_orders'")
        if self.kind == "moment-identity" and any(k < 1 for g in self.ks for k in g):
            raise ConfigError("moment-identity orders must be positive")
        if self.kind == "cumulant-check":
            if any(not 1 <= len(g) <= 4 or 0 in g for g in self.ks):
                raise ConfigError("cumulant index sets need 1..4 non-zero entries")
            if self.samples < MIN_JOINT_SAMPLES:
                raise ConfigError(f"cumulant-check needs samples >= {MIN_JOINT_SAMPLES}")
        if any(k < 1 for k in self.trace_orders):
            raise ConfigError("trace_orders must be positive")
        if self.kind == "truncated-moments":
            if min(self.n_values) < 4:
                raise ConfigError("truncated-moments needs N >= 4")
            if not 1 <= self.m <= 4:
                raise ConfigError("m must be in 1..4")
            if self.M is not None and self.M < 2:
                raise ConfigError("M must be >= 2")
        if self.limit_samples is not None and self.limit_samples < 2:
            raise ConfigError("limit_samples must be >= 2")


# -- summary -------------------------------------------------------------------

def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.bool_):
        return bool(x)
    return x


@dataclass
class MonteCarloSummary:
    """Per-N records, the list of pass/fail checks and run metadata.

    ``runtime_seconds`` is kept out of the JSON so summaries are byte-for-byte
    reproducible.
    """

    config: dict
    records: list
    checks: list
    metadata: dict
    runtime_seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def record(self, n: int) -> dict:
        for r in self.records:
            if r["n"] == n:
                return r
        raise KeyError(n)

    def check(self, name: str, n: int | None = None) -> dict:
        for c in self.checks:
            if c["name"] == name and (n is None or c.get("n") == n):
                return c
        raise KeyError((name, n))

    def to_dict(self) -> dict:
        return _clean({"status": self.status, "config": self.config, "records": self.records,
                       "checks": self.checks, "metadata": self.metadata})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def write(self, directory) -> str:
        os.makedirs(directory, exist_ok=True)
        path = os.path.join(directory, f"summary_{self.config['kind']}_seed{self.config['seed']}.json")
        with open(path, "w") as fh:
            fh.write(self.to_json())
        return path


def _estimate(value, se, reference=None):
    return {"value": value, "stderr": se, "reference": reference}


class _Checks(list):
    def band(self, name, n, est, se, ref, tol_se):
        diff = abs(est - ref)
        ok = bool(diff <= tol_se * se) if se > 0 else bool(diff <= 1e-12 * (1 + abs(ref)))
        self.append({"name": name, "n": n, "estimate": est, "reference": ref, "stderr": se,
                     "tolerance_se": tol_se, "passed": ok})

    def flag(self, name, n, ok, **info):
        self.append({"name": name, "n": n, "passed": bool(ok), **info})


# -- sample generation ---------------------------------------------------------

def _sampler(cfg: ExperimentConfig, N: int):
    if cfg.sampler == "dpp":
        return lambda stream, tag: sample_cue(N, stream, provenance=tag)
    params = EnsembleParams(N, cfg.beta)
    mc = resolve_mcmc_params(params, McmcParams(**cfg.mcmc))
    return lambda stream, tag: sample_cbe_mcmc(params, mc, stream, provenance=tag)


def generate_features(cfg: ExperimentConfig, N: int, width: int, feature: Callable,
                      dtype=float) -> np.ndarray:
    """Fill a (samples, width) array with ``feature(sample)`` rows.

    Row i always comes from stream (seed, i, N), whatever ``cfg.workers``.
    """
    draw = _sampler(cfg, N)
    out = np.empty((cfg.samples, width), dtype=dtype)

    def work(lo, hi):
        for i in range(lo, hi):
            tag = f"seed={cfg.seed};N={N};index={i}"
            try:
                s = draw(make_stream(cfg.seed, i, N), tag)
            except (SamplerError, ValueError, FloatingPointError) as exc:
                raise SampleFailure(i, N, exc) from exc
            out[i] = feature(s)

    if cfg.workers == 1:
        work(0, cfg.samples)
    else:
        step = max(1, -(-cfg.samples // (4 * cfg.workers)))
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            futs = [pool.submit(work, lo, min(lo + step, cfg.samples))
                    for lo in range(0, cfg.samples, step)]
            for fu in futs:
                fu.result()
    return out


def _cumulant_table(x, refs=None):
    refs = refs or {}
    table = {}
    for m in range(1, 5):
        est, se = empirical_cumulant(x, m)
        table[f"k{m}"] = _estimate(est, se, refs.get(m))
    return table


def _pair_stat_feature(f, K):
    c = f.coefficients(K)
    c0 = float(c[0])
    f0 = float(c[0] + 2.0 * np.sum(c[1:]))

    def feat(sample):
        t = kernels.power_traces(sample.angles, K)
        a2 = t.real**2 + t.imag**2
        N = sample.n
        return 2.0 * float(np.sum(c[1:] * a2[1:])) + c0 * N * N - N * f0
    return feat


# -- experiment kinds ------------------------------------------------------------

def _variance_reference(f, N, K):
    return variance_exact(f.truncate(K), N, k_tail=max(K, N)).total


def _run_variance_check(cfg, f, N, checks, values):
    K = cfg.K_for(N)
    x = generate_features(cfg, N, 1, _pair_stat_feature(f, K))[:, 0]
    values[N] = x
    mean_ref = expected_pair_statistic(f, N, K)
    var_ref = _variance_reference(f, N, K) if cfg.beta == 2.0 else None
    table = _cumulant_table(x, {1: mean_ref, 2: var_ref} if cfg.beta == 2.0 else {})
    if cfg.beta == 2.0:
        for m, name in ((1, "mean"), (2, "variance")):
            e = table[f"k{m}"]
            checks.band(name, N, e["value"], e["stderr"], e["reference"], cfg.tolerance_se)
    return {"K": K, "cumulants": table, "tail_abs": 2.0 * f.tail_abs_bound(K)}


def _run_clt(cfg, f, N, checks, values):
    K = cfg.K_for(N)
    feat = _pair_stat_feature(f, K)
    shift = expected_pair_statistic(f, N, K)
    scale = math.sqrt(2.0 * v_n(f, N))
    z = (generate_features(cfg, N, 1, feat)[:, 0] - shift) / scale
    values[N] = z
    refs = {1: 0.0, 2: _variance_reference(f, N, K) / scale**2} if cfg.beta == 2.0 else {}
    table = _cumulant_table(z, refs)
    for m, name in ((1, "mean"), (2, "variance")):
        if m in refs:
            e = table[f"k{m}"]
            checks.band(name, N, e["value"], e["stderr"], e["reference"], cfg.tolerance_se)
    ks, se = _ks_with_se(z, standard_normal_cdf)
    return {"K": K, "v_n": v_n(f, N), "cumulants": table, "ks_normal": _estimate(ks, se),
            "tail_abs": 2.0 * f.tail_abs_bound(K)}


def _finish_clt(cfg, records, checks):
    ks = [r["ks_normal"]["value"] for r in records]
    mono = all(b <= a for a, b in zip(ks, ks[1:]))
    last = records[-1]
    below = ks[-1] < cfg.ks_threshold
    info = {"ks_values": ks, "threshold": cfg.ks_threshold, "gating": cfg.ks_gate}
    return [("ks_non_increasing", None, mono, info),
            ("ks_below_threshold", last["n"], below, info)]


def _run_limit_compare(cfg, f, N, checks, values):
    K = cfg.K_for(N)
    if K < 1:
        raise ConfigError("limit-compare needs truncation K >= 1")
    x = generate_features(cfg, N, 1, _pair_stat_feature(f, K))[:, 0] - expected_pair_statistic(f, N, K)
    n_lim = cfg.limit_samples or 10 * cfg.samples
    y = sample_limit_law(f, K, make_stream(cfg.seed, N, _LIMIT_STREAM), size=n_lim, beta=cfg.beta or 2.0)
    values[N] = x
    var_ref = _variance_reference(f, N, K) if cfg.beta == 2.0 else None
    tab_x = _cumulant_table(x, {1: 0.0, 2: var_ref} if var_ref is not None else {1: 0.0})
    lim_refs = {m: limit_law_cumulant(f, K, m, cfg.beta or 2.0) for m in (1, 2, 3, 4)}
    tab_y = _cumulant_table(y, lim_refs)
    for m in (1, 2) if var_ref is not None else (1,):
        e = tab_x[f"k{m}"]
        checks.band(f"statistic_k{m}", N, e["value"], e["stderr"], e["reference"], cfg.tolerance_se)
    for m in (1, 2, 3):
        e = tab_y[f"k{m}"]
        checks.band(f"limit_law_k{m}", N, e["value"], e["stderr"], e["reference"], cfg.tolerance_se)
    ks_lim, se_lim = _ks2_with_se(x, y)
    mu, sd = float(np.mean(x)), float(np.std(x, ddof=1))
    ks_norm, se_norm = _ks_with_se(x, lambda v: standard_normal_cdf((np.asarray(v) - mu) / sd))
    return {"K": K, "limit_samples": n_lim, "statistic_cumulants": tab_x, "limit_cumulants": tab_y,
            "ks_limit": _estimate(ks_lim, se_lim), "ks_fitted_normal": _estimate(ks_norm, se_norm),
            "tail_abs": 2.0 * f.tail_abs_bound(K)}


def _finish_limit_compare(cfg, records, checks):
    out = []
    for r in records:
        kl, kn = r["ks_limit"]["value"], r["ks_fitted_normal"]["value"]
        out.append(("ks_limit_below_threshold", r["n"], kl < cfg.ks_threshold,
                    {"ks": kl, "threshold": cfg.ks_threshold, "gating": cfg.ks_gate}))
        out.append(("non_gaussian", r["n"], kn > kl,
                    {"ks_fitted_normal": kn, "ks_limit": kl, "gating": cfg.ks_gate}))
    return out


def _moment_orders(cfg, N):
    orders = sorted({k for g in cfg.ks for k in g} | set(cfg.trace_orders))
    return orders


def _run_moment_identity(cfg, f, N, checks, values):
    orders = _moment_orders(cfg, N)
    kmax = max(orders)
    idx = np.array(orders)

    def feat(sample):
        t = kernels.power_traces(sample.angles, kmax)[idx]
        return t.real**2 + t.imag**2

    A = generate_features(cfg, N, len(orders), feat)
    col = {k: A[:, i] for i, k in enumerate(orders)}
    rec = {"traces": {}, "products": {}}
    for k in cfg.trace_orders:
        ref = float(min(k, N)) if cfg.beta == 2.0 else None
        est, se = float(np.mean(col[k])), float(np.std(col[k], ddof=1) / math.sqrt(cfg.samples))
        rec["traces"][str(k)] = _estimate(est, se, ref)
        if ref is not None:
            checks.band(f"E|t_{k}|^2", N, est, se, ref, cfg.tolerance_se)
    for g in cfg.ks:
        prod = np.prod([col[k] for k in g], axis=0)
        est, se = float(np.mean(prod)), float(np.std(prod, ddof=1) / math.sqrt(cfg.samples))
        try:
            ref = moment_identity_rhs(g, N) if cfg.beta == 2.0 else None
        except IdentityNotGuaranteed:
            ref = None
        key = ",".join(map(str, g))
        rec["products"][key] = _estimate(est, se, ref)
        if ref is not None:
            checks.band(f"E prod|t_k|^2 ({key})", N, est, se, ref, cfg.tolerance_se)
    return rec


def _run_cumulant_check(cfg, f, N, checks, values):
    kmax = max([abs(k) for g in cfg.ks for k in g] + list(cfg.trace_orders))
    T = generate_features(cfg, N, kmax + 1, lambda s: kernels.power_traces(s.angles, kmax),
                          dtype=np.complex128)
    sets = list(cfg.ks) + [(k, -k) for k in cfg.trace_orders]
    rec = {"cumulants": {}}
    for g in sets:
        est, se = empirical_joint_cumulant(T, g)
        ref = joint_cumulant_exact(g, N) if cfg.beta == 2.0 else None
        key = ",".join(map(str, g))
        rec["cumulants"][key] = _estimate(est, se, ref)
        if ref is not None:
            checks.band(f"kappa({key})", N, est, se, ref, cfg.tolerance_se)
    return rec


def _run_truncated_moments(cfg, f, N, checks, values):
    M = int(cfg.M) if cfg.M is not None else mn_schedule(f, N, cfg.delta)
    L = N // M
    c = f.coefficients(max(L, 1))
    k = np.arange(0, L + 1)
    mean_abs2 = np.minimum(k, N).astype(float)

    def feat(sample):
        if L < 1:
            return 0.0
        t = kernels.power_traces(sample.angles, L)
        return 2.0 * float(np.sum(c[1:L + 1] * (t[1:].real**2 + t[1:].imag**2 - mean_abs2[1:])))

    x = generate_features(cfg, N, 1, feat)[:, 0]
    values[N] = x
    n_lim = cfg.limit_samples or cfg.samples
    rec = {"M": M, "cutoff": L, "m": cfg.m, "admissible": cfg.m < M / 2, "limit_samples": n_lim}
    if L < 1:
        checks.flag("nonempty_cutoff", N, False, cutoff=L)
        return rec
    y = sample_limit_law(f, L, make_stream(cfg.seed, N, _LIMIT_STREAM), size=n_lim, beta=2.0)
    mx, sx = empirical_central_moment(x, cfg.m)
    my, sy = empirical_central_moment(y, cfg.m)
    joint = math.hypot(sx, sy)
    rec.update(trace_model=_estimate(mx, sx), exponential_model=_estimate(my, sy),
               joint_stderr=joint)
    checks.flag("m_below_half_M", N, cfg.m < M / 2, m=cfg.m, M=M)
    checks.band("central_moment_match", N, mx, joint, my, cfg.tolerance_se)
    return rec


def _run_lemma_sums(cfg, f, N, checks, values):
    vN = v_n(f, N)
    K = cfg.k_tail if cfg.k_tail is not None else 32 * N
    s = lemma21_sums(f, N, K)
    M = int(cfg.M) if cfg.M is not None else (mn_schedule(f, N, cfg.delta) if N >= 4 else 2)
    rec = {"v_n": vN, "sums": {"i": s.i, "ii": s.ii, "iii": s.iii}, "remainder_iii": s.remainder_iii,
           "a_norm": a_matrix_norm(N), "M": M,
           "tail_variance": variance_tail_exact(f, N, M, K), "k_tail": K}
    if vN > 0:
        rec["ratios"] = {key: val / vN for key, val in rec["sums"].items()}
        rec["tail_variance_ratio"] = rec["tail_variance"] / vN
    checks.flag("a_norm_le_3", N, rec["a_norm"] <= 3.0, value=rec["a_norm"])
    return rec


def _finish_lemma_sums(cfg, records, checks):
    out = []
    rs = [r for r in records if "ratios" in r]
    for key in ("i", "ii", "iii"):
        seq = [r["ratios"][key] for r in rs]
        out.append((f"ratio_{key}_decreasing", None, all(b < a for a, b in zip(seq, seq[1:])),
                    {"values": seq, "gating": True}))
    return out


_RUNNERS = {
    "variance-check": (_run_variance_check, None),
    "clt": (_run_clt, _finish_clt),
    "limit-compare": (_run_limit_compare, _finish_limit_compare),
    "moment-identity": (_run_moment_identity, None),
    "cumulant-check": (_run_cumulant_check, None),
    "truncated-moments": (_run_truncated_moments, None),
    "lemma-sums": (_run_lemma_sums, _finish_lemma_sums),
}


def _write_values(cfg, values, directory):
    path = os.path.join(directory, f"values_{cfg.kind}_seed{cfg.seed}.csv")
    with open(path, "w", newline="") as fh:
        for line in json.dumps(cfg.to_dict(), sort_keys=True).splitlines():
            fh.write(f"# config: {line}\n")
        fh.write("n,index,value\n")
        for N in sorted(values):
            for i, v in enumerate(values[N]):
                fh.write(f"{N},{i},{v:.17g}\n")
    return path


def run_experiment(config: ExperimentConfig) -> MonteCarloSummary:
    """Run ``config`` and return its summary (written out if ``output_dir`` is set).

    Raises
    ------
    ConfigError
        On invalid configuration.
    SampleFailure
        When a sampler fails; the message carries the sample index and N.
    """
    config.validate()
    t0 = time.perf_counter()
    f = config.function()
    run, finish = _RUNNERS[config.kind]
    checks = _Checks()
    values: dict[int, np.ndarray] = {}
    records = []
    for N in config.n_values:
        rec = run(config, f, N, checks, values)
        rec["n"] = N
        records.append(rec)
    if finish is not None:
        for name, n, ok, info in finish(config, records, checks):
            info = dict(info)
            gating = info.pop("gating", True)
            if gating:
                checks.flag(name, n, ok, **info)
            else:
                records[-1].setdefault("diagnostics", []).append(
                    {"name": name, "n": n, "passed": bool(ok), **info})
    meta = {"seed": config.seed, "backend": kernels.BACKEND, "samples": config.samples,
            "n_values": list(config.n_values), "fhat": config.fhat, "beta": config.beta,
            "sampler": config.sampler, "delta": config.delta}
    if config.sampler == "mcmc":
        meta["mcmc_resolved"] = {str(N): resolve_mcmc_params(EnsembleParams(N, config.beta),
                                                               McmcParams(**config.mcmc)).as_dict()
                                 for N in config.n_values}
    summary = MonteCarloSummary(config=config.to_dict(), records=records, checks=list(checks),
                                metadata=meta, runtime_seconds=time.perf_counter() - t0)
    if config.output_dir is not None:
        summary.write(config.output_dir)
        if config.write_values and values:
            _write_values(config, values, config.output_dir)
    return summary
