"""Power traces and the pair statistic S_N(f) = sum_{i != j} f(theta_i - theta_j).

S_N is computed two independent ways, both against the truncated function
f_K:

* directly, as the O(N^2 K) double sum of f_K over ordered pairs;
* spectrally, from power traces t_k = sum_j e^{ik theta_j}:
  ``2 sum_{k=1}^K fhat(k) |t_k|^2 + fhat(0) N^2 - N f_K(0)``.

The two agree to rounding for any configuration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .spectral import TestFunction, v_n

__all__ = [
    "PowerTraces",
    "power_traces",
    "pair_statistic_direct",
    "pair_statistic_spectral",
    "expected_pair_statistic",
    "normalized_pair_statistic",
]


def _angles(sample) -> np.ndarray:
    return np.ascontiguousarray(getattr(sample, "angles", sample), dtype=float).reshape(-1)


@dataclass(frozen=True, eq=False)
class PowerTraces:
    """t_0..t_K for one configuration; negative indices via conjugation."""

    n: int
    values: np.ndarray

    @property
    def K(self) -> int:
        return int(self.values.size - 1)

    def __getitem__(self, k: int) -> complex:
        k = int(k)
        if k < 0:
            return complex(np.conj(self.values[-k]))
        return complex(self.values[k])

    def abs2(self) -> np.ndarray:
        """|t_k|^2 for k = 0..K."""
        return self.values.real**2 + self.values.imag**2


def power_traces(sample, K: int) -> PowerTraces:
    """Power traces up to order K by per-angle phase recurrence, O(NK)."""
    K = int(K)
    if K < 0:
        raise ValueError("K must be >= 0")
    a = _angles(sample)
    return PowerTraces(n=a.size, values=kernels.power_traces(a, K))


def pair_statistic_direct(sample, f: TestFunction, K: int) -> float:
    """Direct double sum of f_K over ordered pairs i != j.

    For N = 1 the sum is empty and 0 is returned.
    """
    K = int(K)
    if K < 0:
        raise ValueError("K must be >= 0")
    a = _angles(sample)
    return float(kernels.pair_sum_direct(a, f.coefficients(K)))


def _f_at_zero(c: np.ndarray) -> float:
    return float(c[0] + 2.0 * np.sum(c[1:]))


def pair_statistic_spectral(traces: PowerTraces, f: TestFunction, K: int | None = None) -> float:
    """S_N(f_K) from power traces.

    ``K`` defaults to the trace range; asking for a truncation beyond it is
    an error.
    """
    if K is None:
        K = traces.K
    K = int(K)
    if K > traces.K:
        raise ValueError(f"traces cover k <= {traces.K} but truncation K = {K} was requested")
    c = f.coefficients(K)
    N = traces.n
    quad = 2.0 * float(np.sum(c[1:] * traces.abs2()[1:K + 1])) if K else 0.0
    return quad + c[0] * N * N - N * _f_at_zero(c)


def expected_pair_statistic(f: TestFunction, N: int, K: int) -> float:
    """CUE mean of S_N(f_K), using E|t_k|^2 = min(k, N)."""
    N, K = int(N), int(K)
    if N < 1 or K < 0:
        raise ValueError("need N >= 1 and K >= 0")
    c = f.coefficients(K)
    k = np.arange(1, K + 1, dtype=float)
    return 2.0 * float(np.sum(c[1:] * np.minimum(k, N))) + c[0] * N * N - N * _f_at_zero(c)


def normalized_pair_statistic(sample, f: TestFunction, K: int) -> float:
    """(S_N(f_K) - E S_N(f_K)) / sqrt(2 V_N)."""
    a = _angles(sample)
    N = a.size
    vN = v_n(f, N)
    if vN <= 0.0:
        raise ZeroDivisionError(f"V_{N} = 0; normalisation undefined")
    s = pair_statistic_spectral(power_traces(a, K), f, K)
    return (s - expected_pair_statistic(f, N, K)) / math.sqrt(2.0 * vN)
