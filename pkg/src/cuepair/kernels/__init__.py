"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba implementations are used unless ``CUEPAIR_PURE_NUMPY=1`` is set in
the environment before import. Both backends are always importable as
``kernels.numba_backend`` and ``kernels.numpy_backend`` for comparison.
"""
from .._env import PURE_NUMPY
from . import _numpy as numpy_backend

try:
    from . import _numba as numba_backend
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba_backend = None

if PURE_NUMPY or numba_backend is None:
    active = numpy_backend
else:
    active = numba_backend

BACKEND = active.BACKEND
cue_dpp = active.cue_dpp
cbe_mcmc_run = active.cbe_mcmc_run
power_traces = active.power_traces
pair_sum_direct = active.pair_sum_direct
variance_terms = active.variance_terms
limit_law_draws = active.limit_law_draws
pairwise_sum = active.pairwise_sum

__all__ = [
    "BACKEND",
    "numba_backend",
    "numpy_backend",
    "cue_dpp",
    "cbe_mcmc_run",
    "power_traces",
    "pair_sum_direct",
    "variance_terms",
    "limit_law_draws",
    "pairwise_sum",
]
