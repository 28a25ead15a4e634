"""Limit objects for the pair statistic.

When sum k^2 fhat(k)^2 converges, S_N - E S_N tends to the exponential sum
``(4/beta) sum_k fhat(k) k (phi_k - 1)`` with phi_k i.i.d. Exp(1). When it
diverges slowly, the statistic normalised by sqrt(2 V_N) tends to N(0, 1);
:func:`exp_sum_mgf` gives the exact moment generating function that drives
that Gaussian limit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .spectral import TestFunction

__all__ = ["LimitLawSpec", "sample_limit_law", "limit_law_cumulant", "exp_sum_mgf", "standard_normal_cdf"]


@dataclass(frozen=True, eq=False)
class LimitLawSpec:
    """Weights a_k = fhat(k) k for k = 1..K and the prefactor 4/beta."""

    weights: np.ndarray
    prefactor: float = 2.0

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("need K >= 1 weights")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_function(cls, f: TestFunction, K: int, beta: float = 2.0) -> LimitLawSpec:
        K = int(K)
        if K < 1:
            raise ValueError("K must be >= 1")
        if not beta > 0:
            raise ValueError("beta must be > 0")
        k = np.arange(1, K + 1, dtype=float)
        return cls(weights=f.coefficients(K)[1:] * k, prefactor=4.0 / beta)

    @property
    def K(self) -> int:
        return int(self.weights.size)

    @property
    def scaled(self) -> np.ndarray:
        return self.prefactor * self.weights


def sample_limit_law(f: TestFunction, K: int, stream: np.random.Generator,
                     size: int | None = None, beta: float = 2.0):
    """Draw(s) of (4/beta) sum_{k<=K} fhat(k) k (phi_k - 1).

    Returns a float when ``size`` is None, else an array of ``size`` draws.
    The acceptance checks use the default beta = 2 (prefactor 2).
    """
    spec = LimitLawSpec.from_function(f, K, beta)
    n = 1 if size is None else int(size)
    if n < 0:
        raise ValueError("size must be >= 0")
    out = kernels.limit_law_draws(spec.scaled, n, stream)
    return float(out[0]) if size is None else out


def limit_law_cumulant(f: TestFunction, K: int, m: int, beta: float = 2.0) -> float:
    """m-th cumulant of the truncated exponential-sum law.

    kappa_1 = 0 and kappa_m = (m-1)! sum_k (c fhat(k) k)^m, c = 4/beta.
    """
    m = int(m)
    if m < 1:
        raise ValueError("m must be >= 1")
    if m == 1:
        return 0.0
    a = LimitLawSpec.from_function(f, K, beta).scaled
    return math.factorial(m - 1) * float(np.sum(a**m))


def exp_sum_mgf(a, t: float) -> float:
    """E exp(t sum_k a_k (phi_k - 1) / sigma), sigma = sqrt(sum a_k^2).

    Exactly ``prod_k exp(-t a_k/sigma) / (1 - t a_k/sigma)``, evaluated in
    log space.

    Raises
    ------
    ValueError
        If ``a`` is empty or all zero, or t a_k >= sigma for some k.
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.size == 0 or not np.all(np.isfinite(a)):
        raise ValueError("a must be a non-empty finite sequence")
    sigma = math.sqrt(float(np.sum(a * a)))
    if sigma == 0.0:
        raise ValueError("a must not be identically zero")
    x = float(t) * a / sigma
    if np.any(x >= 1.0):
        raise ValueError("outside the MGF domain: t * a_k >= sigma for some k")
    return math.exp(float(np.sum(-x - np.log1p(-x))))


def standard_normal_cdf(x):
    """Phi(x), the Gaussian limit's distribution function."""
    from scipy.special import ndtr
    return ndtr(x)
