"""numba-compiled hot loops.

Every kernel here has a numpy twin in :mod:`._numpy` with the same signature
and the same consumption order of the random stream, so both paths produce
identical samples for identical generators.
"""
import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi
_RENORM_EVERY = 32
_BLOCK = 128

BACKEND = "numba"


@njit(cache=True, nogil=True)
def pairwise_sum(x):
    """Blocked pairwise summation of a 1-d float array."""
    n = x.size
    if n <= _BLOCK:
        s = 0.0
        for i in range(n):
            s += x[i]
        return s
    nb = (n + _BLOCK - 1) // _BLOCK
    buf = np.empty(nb)
    for b in range(nb):
        s = 0.0
        for i in range(b * _BLOCK, min(n, (b + 1) * _BLOCK)):
            s += x[i]
        buf[b] = s
    m = nb
    while m > 1:
        h = m // 2
        for i in range(h):
            buf[i] = buf[2 * i] + buf[2 * i + 1]
        if m % 2 == 1:
            buf[h] = buf[m - 1]
            m = h + 1
        else:
            m = h
    return buf[0]


@njit(cache=True, nogil=True)
def _wrap(x):
    x = x % TWO_PI
    if x >= TWO_PI:
        x = 0.0
    return x


@njit(cache=True, nogil=True)
def cue_dpp(n, rng, max_proposals, clip_tol):
    """Sequential projection-DPP draw of n CUE eigenangles.

    Returns ``(angles, status, proposals)`` with ``status`` 0 on success,
    1 when the rejection cap was hit and 2 when a conditional density came
    out more negative than ``clip_tol * n``. Angles are in draw order.
    """
    U = np.zeros((n, n), dtype=np.complex128)
    # c[d], d >= 0: Fourier coefficients of sum_m |psi_m(x)|^2 (c[-d] = conj c[d])
    cr = np.zeros(n)
    ci = np.zeros(n)
    angles = np.empty(n)
    v = np.empty(n, dtype=np.complex128)
    ur = np.empty(n)
    ui = np.empty(n)
    proposals = 0
    for i in range(n):
        accepted = False
        x = 0.0
        for _ in range(max_proposals):
            proposals += 1
            x = TWO_PI * rng.random()
            zr = math.cos(x)
            zi = math.sin(x)
            ar = 0.0
            ai = 0.0
            for d in range(n - 1, 0, -1):
                tr = ar * zr - ai * zi + cr[d]
                ai = ar * zi + ai * zr + ci[d]
                ar = tr
            q = n - (cr[0] + 2.0 * (ar * zr - ai * zi))
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
        # residual of the evaluation vector e(x) against chosen directions
        for k in range(n):
            v[k] = complex(math.cos(k * x), math.sin(k * x))
        if i > 0:
            Ui = U[:i]
            for _ in range(2):
                proj = np.conj(Ui) @ v
                v = v - proj @ Ui
        nrm = 0.0
        for k in range(n):
            nrm += v[k].real * v[k].real + v[k].imag * v[k].imag
        nrm = math.sqrt(nrm)
        for k in range(n):
            U[i, k] = v[k] / nrm
            ur[k] = U[i, k].real
            ui[k] = U[i, k].imag
        # |psi(x)|^2 with psi(x) = sum_k conj(u_k) e^{ikx}
        for d in range(n):
            sr = 0.0
            si = 0.0
            for l in range(n - d):
                sr += ur[l + d] * ur[l] + ui[l + d] * ui[l]
                si += ur[l + d] * ui[l] - ui[l + d] * ur[l]
            cr[d] += sr
            ci[d] += si
    return angles, 0, proposals


@njit(cache=True, nogil=True)
def cbe_mcmc_run(theta, beta, width, n_sweeps, rng, record):
    """Single-site Metropolis sweeps on the circular beta ensemble, in place.

    Returns ``(accepted, trace)`` where ``trace`` holds Re t_1 after each
    sweep when ``record`` is true (empty otherwise).
    """
    n = theta.size
    zr = np.cos(theta)
    zi = np.sin(theta)
    trace = np.empty(n_sweeps if record else 0)
    accepted = 0
    for sweep in range(n_sweeps):
        for j in range(n):
            prop = _wrap(theta[j] + width * (rng.random() - 0.5))
            if beta == 0.0:
                ok = True
            else:
                pr = math.cos(prop)
                pi = math.sin(prop)
                logr = 0.0
                prod = 1.0
                dead = False
                cnt = 0
                for k in range(n):
                    if k == j:
                        continue
                    dr = pr - zr[k]
                    di = pi - zi[k]
                    dn = dr * dr + di * di
                    if dn <= 0.0:
                        dead = True
                        break
                    er = zr[j] - zr[k]
                    ei = zi[j] - zi[k]
                    prod *= dn / (er * er + ei * ei)
                    cnt += 1
                    if cnt == _RENORM_EVERY:
                        logr += math.log(prod)
                        prod = 1.0
                        cnt = 0
                if dead:
                    ok = False
                else:
                    logr += math.log(prod)
                    delta = 0.5 * beta * logr
                    u = rng.random()
                    ok = delta >= 0.0 or u < math.exp(delta)
            if ok:
                theta[j] = prop
                zr[j] = math.cos(prop)
                zi[j] = math.sin(prop)
                accepted += 1
        if record:
            s = 0.0
            for k in range(n):
                s += zr[k]
            trace[sweep] = s
    return accepted, trace


@njit(cache=True, nogil=True)
def power_traces(angles, K):
    """t_k = sum_j exp(i k theta_j) for k = 0..K by phase recurrence."""
    n = angles.size
    out = np.empty(K + 1, dtype=np.complex128)
    wr = np.ones(n)
    wi = np.zeros(n)
    zr = np.cos(angles)
    zi = np.sin(angles)
    out[0] = complex(n, 0.0)
    bufr = np.empty(n)
    bufi = np.empty(n)
    for k in range(1, K + 1):
        renorm = k % _RENORM_EVERY == 0
        for j in range(n):
            a = wr[j] * zr[j] - wi[j] * zi[j]
            b = wr[j] * zi[j] + wi[j] * zr[j]
            if renorm:
                m = math.sqrt(a * a + b * b)
                a /= m
                b /= m
            wr[j] = a
            wi[j] = b
            bufr[j] = a
            bufi[j] = b
        out[k] = complex(pairwise_sum(bufr), pairwise_sum(bufi))
    return out


@njit(cache=True, nogil=True)
def pair_sum_direct(angles, coeffs):
    """sum_{i != j} f_K(theta_i - theta_j) with f_K from ``coeffs`` = fhat(0..K)."""
    n = angles.size
    K = coeffs.size - 1
    npairs = n * (n - 1) // 2
    if npairs == 0:
        return 0.0
    vals = np.empty(npairs)
    zr = np.cos(angles)
    zi = np.sin(angles)
    tmp = np.empty(K) if K > 0 else np.empty(1)
    p = 0
    for i in range(n):
        for j in range(i + 1, n):
            # e^{i(theta_i - theta_j)}
            er = zr[i] * zr[j] + zi[i] * zi[j]
            ei = zi[i] * zr[j] - zr[i] * zi[j]
            m = math.sqrt(er * er + ei * ei)
            er /= m
            ei /= m
            wr = 1.0
            wi = 0.0
            for k in range(1, K + 1):
                a = wr * er - wi * ei
                wi = wr * ei + wi * er
                wr = a
                if k % _RENORM_EVERY == 0:
                    m = math.sqrt(wr * wr + wi * wi)
                    wr /= m
                    wi /= m
                tmp[k - 1] = coeffs[k] * wr
            s = pairwise_sum(tmp[:K]) if K > 0 else 0.0
            vals[p] = coeffs[0] + 2.0 * s
            p += 1
    return 2.0 * pairwise_sum(vals)


@njit(cache=True, nogil=True)
def variance_terms(c, N):
    """Four terms of the exact CUE variance of S_N for coefficients c = fhat(0..K).

    ``c`` must have length >= N + 1 (zero padded); terms are returned with
    their factor 4 (or 8 for the symmetric mixed term) but unsigned.
    """
    K = c.size - 1
    buf = np.empty(max(K, 1))
    # term1: diagonal s < N
    m = 0
    for s in range(1, N):
        buf[m] = s * s * c[s] * c[s]
        m += 1
    t1 = 4.0 * pairwise_sum(buf[:m])
    # term2: s >= N
    m = 0
    for s in range(N, K + 1):
        buf[m] = c[s] * c[s]
        m += 1
    t2 = 4.0 * (N * N - N) * pairwise_sum(buf[:m])
    # term3: 1 <= |s-t| <= N-1, max(s,t) >= N; ordered pairs give factor 2
    outer = np.zeros(max(N - 1, 1))
    for d in range(1, N):
        lo = max(1, N - d)
        m = 0
        for s in range(lo, K - d + 1):
            buf[m] = c[s] * c[s + d]
            m += 1
        outer[d - 1] = (N - d) * pairwise_sum(buf[:m])
    t3 = 8.0 * pairwise_sum(outer[:N - 1]) if N > 1 else 0.0
    # term4: 1 <= s,t <= N-1, s+t >= N+1
    rows = np.zeros(max(N - 1, 1))
    for s in range(1, N):
        m = 0
        for t in range(max(1, N + 1 - s), N):
            buf[m] = (s + t - N) * c[t]
            m += 1
        rows[s - 1] = c[s] * pairwise_sum(buf[:m])
    t4 = 4.0 * pairwise_sum(rows[:N - 1]) if N > 1 else 0.0
    return t1, t2, t3, t4


@njit(cache=True, nogil=True)
def limit_law_draws(a, n_draws, rng):
    """Draws of sum_k a_k (phi_k - 1), phi_k = -log(1 - U) i.i.d. Exp(1)."""
    K = a.size
    out = np.empty(n_draws)
    tmp = np.empty(K)
    for i in range(n_draws):
        u = rng.random(K)
        for k in range(K):
            tmp[k] = a[k] * (-math.log(1.0 - u[k]) - 1.0)
        out[i] = pairwise_sum(tmp)
    return out
