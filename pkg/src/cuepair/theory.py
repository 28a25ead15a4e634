"""Exact CUE formulas and the finite sums behind the slow-variance CLT.

Conventions: coefficient sums over infinite ranges are cut at ``k_tail``
(default 32 N). For finite coefficient tables the cut is exact once
``k_tail`` covers the support; for the closed-form monotone families an
analytic bound on the omitted part is reported next to the value.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .spectral import TestFunction

__all__ = [
    "VarianceBreakdown",
    "Lemma21Sums",
    "CoefficientVector",
    "IdentityNotGuaranteed",
    "variance_exact",
    "variance_tail_exact",
    "lemma21_sums",
    "a_matvec",
    "a_rmatvec",
    "a_matrix_norm",
    "r_matvec",
    "r_rmatvec",
    "r_operator_norm",
    "joint_cumulant_exact",
    "moment_identity_rhs",
]

DEFAULT_TAIL_FACTOR = 32


class IdentityNotGuaranteed(ValueError):
    """The trace-moment identity is only proved for 2 * sum(k_i) <= N."""


@dataclass(frozen=True)
class VarianceBreakdown:
    """Exact Var S_N(f) split as ``term1 + term2 - term3 - term4``.

    term1   4 sum_{1<=s<=N-1} s^2 fhat(s)^2
    term2   4 (N^2 - N) sum_{s>=N} fhat(s)^2
    term3   4 sum (N - |s-t|) fhat(s) fhat(t) over 1 <= |s-t| <= N-1, max(s,t) >= N
    term4   4 sum (s + t - N) fhat(s) fhat(t) over 1 <= s,t <= N-1, s+t >= N+1
    """

    n: int
    k_tail: int
    term1: float
    term2: float
    term3: float
    term4: float
    total: float
    remainder_bound: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


class Lemma21Sums(NamedTuple):
    i: float
    ii: float
    iii: float
    remainder_iii: float


@dataclass(frozen=True)
class CoefficientVector:
    """x_s = s |fhat(s)| for s = start, ..., start + len(values) - 1."""

    start: int
    values: np.ndarray

    @classmethod
    def from_function(cls, f: TestFunction, lo: int, hi: int) -> CoefficientVector:
        c = f.coefficients(hi)
        s = np.arange(lo, hi + 1, dtype=float)
        return cls(start=lo, values=s * np.abs(c[lo:hi + 1]))

    def norm2(self) -> float:
        return float(np.sum(self.values**2))

    def masked(self, lo: int, hi: int) -> CoefficientVector:
        """Copy keeping only coordinates with lo <= s < hi (others zero)."""
        s = np.arange(self.start, self.start + self.values.size)
        return CoefficientVector(self.start, np.where((s >= lo) & (s < hi), self.values, 0.0))


def _coeffs(f: TestFunction, K: int) -> np.ndarray:
    return np.ascontiguousarray(f.coefficients(K))


def _tail_remainder(f: TestFunction, N: int, K: int) -> float:
    if f.support is not None and f.support <= K:
        return 0.0
    sq = f.tail_sq_bound(K)
    ab = f.tail_abs_bound(K)
    m = f.max_abs_beyond(K - N + 1)
    return 4.0 * (N * N - N) * (sq + m * ab)


def variance_exact(f: TestFunction, N: int, k_tail: int | None = None) -> VarianceBreakdown:
    """Exact CUE variance of S_N(f) from the four-term formula.

    Parameters
    ----------
    f : TestFunction
        Coefficients fhat(k); pass ``f.truncate(K)`` to get Var S_N(f_K).
    N : int
        Matrix size, N >= 2.
    k_tail : int, optional
        Cut for the s >= N sums, at least N. Defaults to 32 N.

    Returns
    -------
    VarianceBreakdown
        The terms, their signed total and a bound on what the cut omits.
    """
    N = int(N)
    if N < 2:
        raise ValueError("N must be >= 2")
    K = DEFAULT_TAIL_FACTOR * N if k_tail is None else int(k_tail)
    if K < N:
        raise ValueError("k_tail must be >= N")
    t1, t2, t3, t4 = kernels.variance_terms(_coeffs(f, K), N)
    return VarianceBreakdown(n=N, k_tail=K, term1=t1, term2=t2, term3=t3, term4=t4,
                             total=t1 + t2 - t3 - t4, remainder_bound=_tail_remainder(f, N, K))


def variance_tail_exact(f: TestFunction, N: int, M: int, k_tail: int | None = None) -> float:
    """Variance of the high-frequency part ``2 sum_{k > floor(N/M)} fhat(k) |t_k|^2``.

    Same four-term structure as :func:`variance_exact` with s, t restricted
    to s, t >= floor(N/M) + 1, which is the formula with all lower
    coefficients zeroed.
    """
    N, M = int(N), int(M)
    if M < 2:
        raise ValueError("M must be >= 2")
    if N < 2:
        raise ValueError("N must be >= 2")
    K = DEFAULT_TAIL_FACTOR * N if k_tail is None else int(k_tail)
    if K < N:
        raise ValueError("k_tail must be >= N")
    c = _coeffs(f, K).copy()
    c[: N // M + 1] = 0.0
    t1, t2, t3, t4 = kernels.variance_terms(c, N)
    return t1 + t2 - t3 - t4


def lemma21_sums(f: TestFunction, N: int, k_tail: int | None = None) -> Lemma21Sums:
    """The three off-diagonal sums that must be o(V_N).

    (i)   sum_{1<=s,t<=N, s+t>=N+1} s |fhat(s)| |fhat(t)|
    (ii)  (N+1) sum_{s>=N+1, 1<=t<=N, s-t<=N} |fhat(s)| |fhat(t)|
    (iii) N sum_{s,t>=N, |s-t|<=N-1} |fhat(s)| |fhat(t)|

    (i) and (ii) involve only s <= 2N and are exact; (iii) is cut at
    ``k_tail`` and the bound on its remainder is returned as well.
    """
    N = int(N)
    if N < 2:
        raise ValueError("N must be >= 2")
    K = DEFAULT_TAIL_FACTOR * N if k_tail is None else int(k_tail)
    if K < 2 * N:
        raise ValueError("k_tail must be >= 2N")
    a = np.abs(_coeffs(f, K))
    csum = np.concatenate([[0.0], np.cumsum(a)])  # csum[j] = sum_{k<j} a_k

    def rng_sum(lo, hi):  # sum_{k=lo}^{hi} a_k, vectorised, empty when hi < lo
        lo = np.asarray(lo)
        hi = np.asarray(hi)
        return np.where(hi >= lo, csum[np.minimum(hi, K) + 1] - csum[lo], 0.0)

    s = np.arange(1, N + 1)
    s_i = float(np.sum(s * a[1:N + 1] * rng_sum(N + 1 - s, np.full(N, N))))
    s_ii = (N + 1) * float(np.sum(a[1:N + 1] * rng_sum(np.full(N, N + 1), N + s)))
    u = np.arange(N, K + 1)
    s_iii = N * float(np.sum(a[N:K + 1] * rng_sum(np.maximum(N, u - N + 1), np.minimum(K, u + N - 1))))
    if f.support is not None and f.support <= K:
        rem = 0.0
    else:
        rem = 2.0 * N * (2 * N - 1) * f.max_abs_beyond(K - N + 1) * f.tail_abs_bound(K)
    return Lemma21Sums(s_i, s_ii, s_iii, rem)


# -- structured operators ----------------------------------------------------

def _suffix(x):
    return np.cumsum(x[::-1])[::-1]


def a_matvec(x: np.ndarray) -> np.ndarray:
    """A_N x with (A_N)_{s,t} = 1/s for t >= N - s + 1 (1-based), O(N)."""
    x = np.asarray(x, dtype=float)
    N = x.size
    suf = _suffix(x)  # suf[j] = sum_{t >= j} x_t (0-based)
    s = np.arange(1, N + 1)
    return suf[N - s] / s


def a_rmatvec(y: np.ndarray) -> np.ndarray:
    """A_N^T y."""
    y = np.asarray(y, dtype=float)
    N = y.size
    s = np.arange(1, N + 1)
    suf = _suffix(y / s)
    t = np.arange(1, N + 1)
    return suf[N - t]


def _power_norm(matvec, rmatvec, n, tol, max_iter):
    v = np.ones(n) / math.sqrt(n)
    lam = 0.0
    for _ in range(max_iter):
        w = rmatvec(matvec(v))
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        lam_new = float(v @ w)
        v = w / nw
        if abs(lam_new - lam) <= tol * lam_new:
            return math.sqrt(lam_new)
        lam = lam_new
    raise RuntimeError(f"power iteration did not reach tolerance {tol} in {max_iter} steps")


def a_matrix_norm(N: int, tol: float = 1e-10, max_iter: int = 100_000) -> float:
    """Operator norm of A_N by power iteration on A_N^T A_N."""
    N = int(N)
    if N < 1:
        raise ValueError("N must be >= 1")
    return _power_norm(a_matvec, a_rmatvec, N, tol, max_iter)


def _r_ranges(N, j):
    rows = np.arange(j * N, (j + 1) * N)          # t
    col0 = (j - 1) * N + 1                         # s from col0 to (j+1)N - 1
    return rows, col0, (j + 1) * N - 1


def r_matvec(x: np.ndarray, N: int, j: int) -> np.ndarray:
    """R_{N,j} x; ``x`` indexed by s = (j-1)N+1, ..., (j+1)N-1."""
    rows, col0, _ = _r_ranges(N, j)
    cs = np.concatenate([[0.0], np.cumsum(np.asarray(x, dtype=float))])
    lo = rows - N + 1 - col0
    hi = rows - col0 + 1
    return (cs[hi] - cs[lo]) / rows


def r_rmatvec(y: np.ndarray, N: int, j: int) -> np.ndarray:
    """R_{N,j}^T y; ``y`` indexed by t = jN, ..., (j+1)N-1."""
    rows, col0, col1 = _r_ranges(N, j)
    cs = np.concatenate([[0.0], np.cumsum(np.asarray(y, dtype=float) / rows)])
    s = np.arange(col0, col1 + 1)
    lo = np.maximum(s, j * N) - j * N
    hi = np.minimum(s + N - 1, (j + 1) * N - 1) - j * N + 1
    return np.where(hi > lo, cs[np.maximum(hi, 0)] - cs[np.clip(lo, 0, N)], 0.0)


def r_operator_norm(N: int, j: int, tol: float = 1e-10, max_iter: int = 100_000) -> tuple[float, float]:
    """(operator norm, Hilbert-Schmidt norm) of the banded operator R_{N,j}.

    (R_{N,j})_{t,s} = 1/t for jN <= t < (j+1)N and t-N+1 <= s <= t.
    """
    N, j = int(N), int(j)
    if N < 1 or j < 1:
        raise ValueError("need N >= 1 and j >= 1")
    t = np.arange(j * N, (j + 1) * N, dtype=float)
    hs = math.sqrt(N * float(np.sum(1.0 / t**2)))
    op = _power_norm(lambda x: r_matvec(x, N, j), lambda y: r_rmatvec(y, N, j),
                     2 * N - 1, tol, max_iter)
    return op, hs


# -- trace cumulants and moments ---------------------------------------------

def joint_cumulant_exact(ks: Sequence[int], N: int) -> float | None:
    """Joint cumulant kappa(t_{k_1}, ..., t_{k_n}) where it is pinned down.

    Zero when sum k_j != 0; zero when n > 2, sum k_j = 0 and
    sum |k_j| <= N; min(|k|, N) for the pair (k, -k). Any other index set
    returns ``None`` (undetermined) rather than a guess.
    """
    ks = [int(k) for k in ks]
    if not ks:
        raise ValueError("ks must be non-empty")
    if any(k == 0 for k in ks):
        raise ValueError("entries of ks must be non-zero")
    N = int(N)
    if sum(ks) != 0:
        return 0.0
    if len(ks) == 2:
        return float(min(abs(ks[0]), N))
    if len(ks) > 2 and sum(abs(k) for k in ks) <= N:
        return 0.0
    return None


def moment_identity_rhs(ks: Sequence[int], N: int) -> float:
    """E prod_i k_i phi_{k_i} with phi i.i.d. Exp(1), equal to E prod_i |t_{k_i}|^2.

    A value k repeated m times contributes k^m m!. Only valid, and only
    computed, when 2 sum k_i <= N.
    """
    ks = [int(k) for k in ks]
    if not ks or any(k < 1 for k in ks):
        raise ValueError("ks must be a non-empty sequence of positive integers")
    if 2 * sum(ks) > int(N):
        raise IdentityNotGuaranteed(
            f"identity not guaranteed: 2*sum(ks) = {2 * sum(ks)} > N = {N}")
    out = 1.0
    for k, m in Counter(ks).items():
        out *= float(k) ** m * math.factorial(m)
    return out
