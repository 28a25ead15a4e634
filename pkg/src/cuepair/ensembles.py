"""Eigenvalue configurations of circular ensembles.

Two samplers:

* :func:`sample_cue` draws the CUE (beta = 2) exactly, as the projection
  determinantal point process with kernel onto span{e^{ik theta}: 0 <= k < N},
  one point at a time by rejection against a uniform envelope.
* :func:`sample_cbe_mcmc` runs single-site Metropolis on the circular beta
  ensemble density for any beta >= 0.

Randomness is always an explicit :class:`numpy.random.Generator`. Use
:func:`make_stream` to derive the generator for sample ``index`` from a root
seed; the result does not depend on how many workers generate samples.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels

__all__ = [
    "SamplerError",
    "EigenvalueSample",
    "EnsembleParams",
    "McmcParams",
    "make_stream",
    "sample_cue",
    "sample_cbe_mcmc",
    "mcmc_chain",
    "resolve_mcmc_params",
    "integrated_autocorr_time",
    "partition_function_cue",
    "log_partition_function_cue",
    "write_samples_csv",
]

TWO_PI = 2.0 * math.pi
MAX_PROPOSALS = 10**6
CLIP_TOL = 1e-12
_PILOT_SEED = 0x5A3D_17C1
_PILOT_SWEEPS = 10_000


class SamplerError(RuntimeError):
    """A sampler could not produce a configuration."""


@dataclass(frozen=True, eq=False)
class EigenvalueSample:
    """N eigenangles in [0, 2 pi), stored sorted ascending."""

    angles: np.ndarray
    beta: float
    sampler: str
    provenance: str = ""

    def __post_init__(self):
        a = np.sort(np.asarray(self.angles, dtype=float).reshape(-1))
        if a.size < 1:
            raise ValueError("a sample needs at least one angle")
        if not (np.all(np.isfinite(a)) and a[0] >= 0.0 and a[-1] < TWO_PI):
            raise ValueError("angles must lie in [0, 2*pi)")
        a.setflags(write=False)
        object.__setattr__(self, "angles", a)

    @property
    def n(self) -> int:
        return int(self.angles.size)


@dataclass(frozen=True)
class EnsembleParams:
    n: int
    beta: float = 2.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("N must be an integer >= 1")
        # beta = 0 is admitted as the i.i.d.-uniform check for the MCMC machinery
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise ValueError("beta must be finite and >= 0")

    @property
    def is_cue(self) -> bool:
        return self.beta == 2.0


@dataclass(frozen=True)
class McmcParams:
    """Metropolis settings; ``None`` fields take the documented defaults.

    proposal_width: 2 pi / N.  burn_in: 100 N sweeps.  thinning: smallest
    interval exceeding twice the integrated autocorrelation time of Re t_1,
    estimated from a fixed-seed pilot chain.
    """

    proposal_width: float | None = None
    burn_in: int | None = None
    thinning: int | None = None

    def __post_init__(self):
        w = self.proposal_width
        if w is not None and not (0.0 < w <= math.pi):
            raise ValueError("proposal width must lie in (0, pi]")
        if self.burn_in is not None and self.burn_in < 0:
            raise ValueError("burn-in must be >= 0")
        if self.thinning is not None and self.thinning < 1:
            raise ValueError("thinning must be >= 1")

    def as_dict(self) -> dict:
        return {"proposal_width": self.proposal_width, "burn_in": self.burn_in,
                "thinning": self.thinning}


def make_stream(seed: int, index: int = 0, stream_id: int = 0) -> np.random.Generator:
    """Generator for sample ``index`` of stream ``stream_id`` under root ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id), int(index)))
    return np.random.Generator(np.random.PCG64(ss))


def sample_cue(N: int, stream: np.random.Generator, *, max_proposals: int = MAX_PROPOSALS,
               provenance: str = "") -> EigenvalueSample:
    """Exact CUE eigenangles via sequential projection-DPP sampling.

    Point i is drawn from the conditional density
    ``(K(x,x) - sum_{m<i} |phi_m(x)|^2) / (N - i + 1)`` by rejection against
    the uniform density, accepting a uniform proposal with probability
    ``(N - sum_m |phi_m(x)|^2) / N``.

    Raises
    ------
    ValueError
        If ``N < 1``.
    SamplerError
        If any point needs more than ``max_proposals`` proposals, or a
        conditional density is negative beyond rounding.
    """
    N = int(N)
    if N < 1:
        raise ValueError("N must be >= 1")
    angles, status, _ = kernels.cue_dpp(N, stream, int(max_proposals), CLIP_TOL)
    if status == 1:
        raise SamplerError(f"rejection cap of {max_proposals} proposals exceeded (N={N})")
    if status == 2:
        raise SamplerError(f"conditional density below -{CLIP_TOL}*N (N={N}); numerical degeneracy")
    return EigenvalueSample(angles=angles, beta=2.0, sampler="cue-dpp", provenance=provenance)


def integrated_autocorr_time(x) -> float:
    """Integrated autocorrelation time by Geyer's initial positive sequence."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4:
        raise ValueError("need at least 4 points")
    x = x - x.mean()
    m = 1 << (2 * n - 1).bit_length()
    fx = np.fft.rfft(x, m)
    acov = np.fft.irfft(fx * np.conj(fx), m)[:n] / n
    if acov[0] <= 0:
        return 1.0
    rho = acov / acov[0]
    tau = -1.0
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    return max(tau, 1.0)


def _initial_angles(N: int, stream: np.random.Generator) -> np.ndarray:
    # distinct equispaced angles under a uniform global rotation
    offset = TWO_PI * stream.random()
    theta = (offset + TWO_PI * np.arange(N) / N) % TWO_PI
    theta[theta >= TWO_PI] = 0.0
    return theta


@functools.lru_cache(maxsize=64)
def _pilot_thinning(N: int, beta: float, width: float, burn_in: int) -> int:
    rng = make_stream(_PILOT_SEED, 0, N)
    theta = _initial_angles(N, rng)
    kernels.cbe_mcmc_run(theta, beta, width, burn_in, rng, False)
    _, trace = kernels.cbe_mcmc_run(theta, beta, width, _PILOT_SWEEPS, rng, True)
    tau = integrated_autocorr_time(trace)
    return int(math.floor(2.0 * tau)) + 1


def resolve_mcmc_params(params: EnsembleParams, mcmc: McmcParams | None = None) -> McmcParams:
    """Fill unset Metropolis settings with their defaults for ``params``."""
    mcmc = mcmc or McmcParams()
    N = params.n
    width = mcmc.proposal_width if mcmc.proposal_width is not None else min(math.pi, TWO_PI / N)
    burn = mcmc.burn_in if mcmc.burn_in is not None else 100 * N
    thin = mcmc.thinning
    if thin is None:
        thin = _pilot_thinning(N, float(params.beta), float(width), int(burn))
    return McmcParams(proposal_width=width, burn_in=burn, thinning=thin)


def sample_cbe_mcmc(params: EnsembleParams, mcmc: McmcParams | None, stream: np.random.Generator,
                    *, provenance: str = "") -> EigenvalueSample:
    """One circular-beta configuration from an independent Metropolis chain.

    The chain starts from equispaced angles with a uniformly random rotation,
    runs ``burn_in`` sweeps and then ``thinning`` more sweeps; the final
    state is returned. A sweep updates each site once with a wrapped uniform
    proposal; proposals that coincide with another angle are rejected.
    """
    if params.beta < 0:
        raise ValueError("beta must be >= 0")
    m = resolve_mcmc_params(params, mcmc)
    theta = _initial_angles(params.n, stream)
    kernels.cbe_mcmc_run(theta, float(params.beta), float(m.proposal_width),
                         int(m.burn_in + m.thinning), stream, False)
    return EigenvalueSample(angles=theta, beta=float(params.beta), sampler="cbe-mcmc",
                            provenance=provenance)


def mcmc_chain(params: EnsembleParams, mcmc: McmcParams | None, stream: np.random.Generator,
               n_samples: int) -> list[EigenvalueSample]:
    """``n_samples`` thinned states from a single chain (consecutive, correlated)."""
    m = resolve_mcmc_params(params, mcmc)
    theta = _initial_angles(params.n, stream)
    beta, width = float(params.beta), float(m.proposal_width)
    kernels.cbe_mcmc_run(theta, beta, width, int(m.burn_in), stream, False)
    out = []
    for i in range(int(n_samples)):
        kernels.cbe_mcmc_run(theta, beta, width, int(m.thinning), stream, False)
        out.append(EigenvalueSample(angles=theta.copy(), beta=beta, sampler="cbe-mcmc-chain",
                                    provenance=f"chain-state={i}"))
    return out


def partition_function_cue(N: int) -> float:
    """Z_N(2) = (2 pi)^N N!, for 1 <= N <= 20 (use the log variant beyond)."""
    N = int(N)
    if not 1 <= N <= 20:
        raise ValueError("partition_function_cue supports 1 <= N <= 20; "
                         "use log_partition_function_cue for larger N")
    return TWO_PI**N * math.factorial(N)


def log_partition_function_cue(N: int) -> float:
    N = int(N)
    if N < 1:
        raise ValueError("N must be >= 1")
    return N * math.log(TWO_PI) + math.lgamma(N + 1)


def write_samples_csv(samples, path, header: str = "") -> None:
    """One configuration per row, angles in radians with 17 significant digits.

    ``header`` lines are written first, each prefixed with ``#``.
    """
    with open(path, "w", newline="") as fh:
        for line in header.splitlines():
            fh.write(f"# {line}\n")
        for s in samples:
            fh.write(",".join(f"{a:.17g}" for a in s.angles))
            fh.write("\n")
