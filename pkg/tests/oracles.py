"""Independent reference computations used by the tests.

Nothing here calls into the package's numerics: these are brute-force
quadratures and textbook series, kept deliberately simple.
"""
import itertools
import math

import numpy as np
from scipy.special import digamma, zeta


def harmonic(n):
    """H_n = sum_{k<=n} 1/k via digamma (no summation)."""
    return float(digamma(n + 1) + np.euler_gamma)


def power_partial_sum(p, n):
    """sum_{k=1}^n k^-p through the Hurwitz zeta difference."""
    return float(zeta(p, 1) - zeta(p, n + 1))


def trapezoid_fourier(values, k):
    """(1/2pi) int g(x) e^{-ikx} dx from equispaced samples on [0, 2pi)."""
    n = values.size
    x = 2 * np.pi * np.arange(n) / n
    return float(np.mean(values * np.cos(k * x)))


def truncated_series(coeffs, x):
    """f_K(x) summed term by term with math.cos (slow, obvious)."""
    return coeffs[0] + 2 * sum(c * math.cos(k * x) for k, c in enumerate(coeffs) if k)


def cue_density_grid(N, M):
    """Grid nodes (theta_1 = 0, others on M equispaced points) and CUE weights.

    Rotation invariance pins theta_1; the Vandermonde density is a
    trigonometric polynomial, so the equispaced rule is exact for integrands
    of low enough degree. Returns (angles of shape (M^(N-1), N), weights).
    """
    grid = 2 * np.pi * np.arange(M) / M
    pts = np.array(list(itertools.product(grid, repeat=N - 1)))
    theta = np.hstack([np.zeros((pts.shape[0], 1)), pts])
    z = np.exp(1j * theta)
    w = np.ones(theta.shape[0])
    for j in range(N):
        for k in range(j + 1, N):
            w *= np.abs(z[:, j] - z[:, k]) ** 2
    return theta, w / w.sum()


def cue_expect(func, N, M):
    theta, w = cue_density_grid(N, M)
    return np.sum(w * func(theta))


def pair_sum_brute(theta, coeffs):
    """sum_{i != j} f_K(theta_i - theta_j) over rows of theta, vectorised over rows."""
    N = theta.shape[1]
    out = np.zeros(theta.shape[0])
    k = np.arange(1, len(coeffs))
    for i in range(N):
        for j in range(N):
            if i != j:
                d = theta[:, i] - theta[:, j]
                out += coeffs[0] + 2 * np.cos(np.multiply.outer(d, k)) @ np.asarray(coeffs[1:])
    return out


def power_trace_direct(theta, k):
    return np.sum(np.exp(1j * k * np.asarray(theta)), axis=-1)


def dense_a_matrix(N):
    s = np.arange(1, N + 1)[:, None]
    t = np.arange(1, N + 1)[None, :]
    return np.where(t >= N - s + 1, 1.0 / s, 0.0)


def dense_r_matrix(N, j):
    t = np.arange(j * N, (j + 1) * N)[:, None]
    s = np.arange((j - 1) * N + 1, (j + 1) * N)[None, :]
    return np.where((s >= t - N + 1) & (s <= t), 1.0 / t, 0.0)
