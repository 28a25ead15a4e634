"""Pure-numpy twins of the kernels in :mod:`._numba`.

Same signatures, same order of random draws. These are vectorised where the
algorithm allows it; the sequential samplers keep a Python loop over points
(DPP) or site updates (Metropolis) and are much slower.
"""
import math

import numpy as np

TWO_PI = 2.0 * math.pi
_RENORM_EVERY = 32

BACKEND = "numpy"


def pairwise_sum(x):
    # numpy's reduction is already pairwise for contiguous float arrays
    return float(np.sum(np.asarray(x, dtype=float)))


def _wrap(x):
    x = x % TWO_PI
    if x >= TWO_PI:
        x = 0.0
    return x


def cue_dpp(n, rng, max_proposals, clip_tol):
    U = np.zeros((n, n), dtype=np.complex128)
    c = np.zeros(n, dtype=np.complex128)
    angles = np.empty(n)
    d = np.arange(n)
    proposals = 0
    for i in range(n):
        accepted = False
        x = 0.0
        for _ in range(max_proposals):
            proposals += 1
            x = TWO_PI * rng.random()
            g = c[0].real + 2.0 * np.sum(c[1:] * np.exp(1j * d[1:] * x)).real
            q = n - g
            if q < 0.0:
                if q < -clip_tol * n:
                    return angles, 2, proposals
                q = 0.0
            if rng.random() * n < q:
                accepted = True
                break
        if not accepted:
            return angles, 1, proposals
        angles[i] = x
        if i == n - 1:
            break
        v = np.cos(d * x) + 1j * np.sin(d * x)
        if i > 0:
            Ui = U[:i]
            for _ in range(2):
                v = v - (Ui.conj() @ v) @ Ui
        u = v / np.sqrt(np.sum(v.real**2 + v.imag**2))
        U[i] = u
        # autocorrelation sum_l conj(u_{l+d}) u_l for d >= 0
        full = np.correlate(u, u, mode="full")  # index n-1+d holds sum_l u_{l+d} conj(u_l)
        c += np.conj(full[n - 1:])
    return angles, 0, proposals


def cbe_mcmc_run(theta, beta, width, n_sweeps, rng, record):
    n = theta.size
    z = np.exp(1j * theta)
    trace = np.empty(n_sweeps if record else 0)
    accepted = 0
    mask = np.ones(n, dtype=bool)
    for sweep in range(n_sweeps):
        for j in range(n):
            prop = _wrap(theta[j] + width * (rng.random() - 0.5))
            if beta == 0.0:
                ok = True
            else:
                mask[j] = False
                zp = complex(math.cos(prop), math.sin(prop))
                dn = np.abs(zp - z[mask]) ** 2
                mask[j] = True
                if np.any(dn <= 0.0):
                    ok = False
                else:
                    mask[j] = False
                    do = np.abs(z[j] - z[mask]) ** 2
                    mask[j] = True
                    delta = 0.5 * beta * np.sum(np.log(dn / do))
                    u = rng.random()
                    ok = delta >= 0.0 or u < math.exp(delta)
            if ok:
                theta[j] = prop
                z[j] = complex(math.cos(prop), math.sin(prop))
                accepted += 1
        if record:
            trace[sweep] = np.sum(z.real)
    return accepted, trace


def power_traces(angles, K):
    angles = np.asarray(angles, dtype=float)
    n = angles.size
    out = np.empty(K + 1, dtype=np.complex128)
    out[0] = n
    z = np.cos(angles) + 1j * np.sin(angles)
    w = np.ones(n, dtype=np.complex128)
    for k in range(1, K + 1):
        w = w * z
        if k % _RENORM_EVERY == 0:
            w = w / np.abs(w)
        out[k] = complex(np.sum(w.real), np.sum(w.imag))
    return out


def pair_sum_direct(angles, coeffs):
    angles = np.asarray(angles, dtype=float)
    n = angles.size
    if n < 2:
        return 0.0
    K = coeffs.size - 1
    iu, ju = np.triu_indices(n, k=1)
    diff = angles[iu] - angles[ju]
    vals = np.full(diff.size, coeffs[0])
    if K > 0:
        k = np.arange(1, K + 1, dtype=float)
        step = max(1, 2**20 // K)
        for lo in range(0, diff.size, step):
            blk = diff[lo:lo + step]
            vals[lo:lo + step] += 2.0 * np.sum(coeffs[1:] * np.cos(np.multiply.outer(blk, k)), axis=1)
    return 2.0 * float(np.sum(vals))


def variance_terms(c, N):
    c = np.asarray(c, dtype=float)
    K = c.size - 1
    s = np.arange(1, N, dtype=float)
    t1 = 4.0 * float(np.sum(s * s * c[1:N] ** 2))
    t2 = 4.0 * (N * N - N) * float(np.sum(c[N:] ** 2))
    outer = np.zeros(max(N - 1, 0))
    for d in range(1, N):
        lo = max(1, N - d)
        outer[d - 1] = (N - d) * float(np.sum(c[lo:K - d + 1] * c[lo + d:K + 1]))
    t3 = 8.0 * float(np.sum(outer))
    # term4 via the self-convolution of c[1..N-1], evaluated at u = s + t
    if N > 1:
        conv = np.convolve(c[1:N], c[1:N])  # index u-2 holds sum_{s+t=u}
        u = np.arange(2, 2 * N - 1)
        sel = u >= N + 1
        t4 = 4.0 * float(np.sum((u[sel] - N) * conv[sel]))
    else:
        t4 = 0.0
    return t1, t2, t3, t4


def limit_law_draws(a, n_draws, rng):
    a = np.asarray(a, dtype=float)
    K = a.size
    out = np.empty(n_draws)
    rows = max(1, 2**22 // max(K, 1))
    for lo in range(0, n_draws, rows):
        m = min(rows, n_draws - lo)
        phi = -np.log(1.0 - rng.random((m, K)))
        out[lo:lo + m] = np.sum((phi - 1.0) * a, axis=1)
    return out
