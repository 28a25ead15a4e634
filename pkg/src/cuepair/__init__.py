"""Pair counting statistics of circular random-matrix ensembles.

Sampling (exact determinantal sampler for the CUE, Metropolis for general
beta), the pair statistic evaluated by direct double sum and by power
traces, exact variance and cumulant formulas, limit laws, and a seeded Monte
Carlo harness tying them together.
"""
from .spectral import (
    FamilySpecError,
    TestFunction,
    evaluate,
    fourier_coeff,
    karamata_ratio,
    make_family,
    mn_schedule,
    v_n,
)
from .ensembles import (
    EigenvalueSample,
    EnsembleParams,
    McmcParams,
    SamplerError,
    log_partition_function_cue,
    make_stream,
    partition_function_cue,
    sample_cbe_mcmc,
    sample_cue,
)
from .pairstats import (
    PowerTraces,
    expected_pair_statistic,
    normalized_pair_statistic,
    pair_statistic_direct,
    pair_statistic_spectral,
    power_traces,
)
from .theory import (
    VarianceBreakdown,
    a_matrix_norm,
    joint_cumulant_exact,
    lemma21_sums,
    moment_identity_rhs,
    r_operator_norm,
    variance_exact,
    variance_tail_exact,
)
from .limits import LimitLawSpec, exp_sum_mgf, limit_law_cumulant, sample_limit_law
from .montecarlo import (
    ExperimentConfig,
    MonteCarloSummary,
    empirical_cumulant,
    empirical_joint_cumulant,
    ks_distance,
    ks_distance_2samp,
    run_experiment,
)

__version__ = "0.1.0"
