"""Even real test functions on the circle, described by Fourier coefficients.

A :class:`TestFunction` only ever exposes ``fhat(k)`` for integer ``k``; the
function itself is materialised as the truncated cosine series

    f_K(x) = fhat(0) + 2 * sum_{k=1}^{K} fhat(k) cos(k x)

and every statistic in the package is defined against ``f_K``.

Family spec strings
-------------------
``power:p``            fhat(k) = |k|^-p for k != 0, fhat(0) = 0
``powerlog:p,q``       fhat(k) = |k|^-p * log(|k|+1)^-q, fhat(0) = 0
``coslist:a1,...,aK``  f(x) = sum_k a_k cos(k x), i.e. fhat(+-k) = a_k / 2
``const:c``            f(x) = c
``file:<path>``        CSV rows ``k,fhat`` with k >= 0 (header optional)
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "FamilySpecError",
    "UndefinedRatioError",
    "TestFunction",
    "make_family",
    "fourier_coeff",
    "evaluate",
    "v_n",
    "karamata_ratio",
    "mn_schedule",
]


class FamilySpecError(ValueError):
    """Malformed family spec string or coefficient file."""


class UndefinedRatioError(ZeroDivisionError):
    """Raised when a ratio of V_N values has a zero denominator."""


@dataclass(frozen=True, eq=False)
class TestFunction:
    """Coefficient source for an even real function on the circle.

    Either ``family`` is a closed-form family (``power``, ``powerlog``) with
    ``params``, or ``table`` holds explicit coefficients fhat(0..len-1) and
    everything beyond is zero.
    """

    __test__ = False  # keep pytest from collecting this class

    spec: str
    family: str
    params: tuple = ()
    table: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.table is not None:
            tab = np.asarray(self.table, dtype=float)
            if tab.ndim != 1 or tab.size == 0:
                raise FamilySpecError("coefficient table must be a non-empty 1-d array")
            if not np.all(np.isfinite(tab)):
                raise FamilySpecError("non-finite coefficient in table")
            tab = tab.copy()
            tab.setflags(write=False)
            object.__setattr__(self, "table", tab)

    # -- coefficient access -------------------------------------------------

    @property
    def support(self) -> int | None:
        """Largest k with a possibly non-zero coefficient, ``None`` if infinite."""
        if self.table is None:
            return None
        nz = np.flatnonzero(self.table)
        return int(nz[-1]) if nz.size else 0

    def coefficients(self, kmax: int) -> np.ndarray:
        """fhat(0), ..., fhat(kmax) as a float array."""
        kmax = int(kmax)
        if kmax < 0:
            raise ValueError("kmax must be >= 0")
        if self.table is not None:
            out = np.zeros(kmax + 1)
            m = min(kmax + 1, self.table.size)
            out[:m] = self.table[:m]
            return out
        k = np.arange(kmax + 1, dtype=float)
        out = np.zeros(kmax + 1)
        kk = k[1:]
        if self.family == "power":
            (p,) = self.params
            out[1:] = kk ** (-p)
        elif self.family == "powerlog":
            p, q = self.params
            out[1:] = kk ** (-p) * np.log(kk + 1.0) ** (-q)
        else:  # pragma: no cover - guarded by make_family
            raise FamilySpecError(f"unknown family {self.family!r}")
        return out

    def fhat(self, k: int) -> float:
        k = abs(int(k))
        if self.table is not None:
            return float(self.table[k]) if k < self.table.size else 0.0
        if k == 0:
            return 0.0
        if self.family == "power":
            return float(k) ** (-self.params[0])
        p, q = self.params
        return float(k) ** (-p) * math.log(k + 1.0) ** (-q)

    def truncate(self, K: int) -> TestFunction:
        """The finite function f_K as an explicit table."""
        return TestFunction(spec=f"{self.spec}|K={int(K)}", family="table",
                            table=self.coefficients(int(K)))

    # -- tail bounds (valid for the built-in monotone families) --------------

    def tail_abs_bound(self, K: int) -> float:
        """Upper bound on sum_{k>K} |fhat(k)|."""
        return self._tail_bound(K, power=1)

    def tail_sq_bound(self, K: int) -> float:
        """Upper bound on sum_{k>K} fhat(k)^2."""
        return self._tail_bound(K, power=2)

    def max_abs_beyond(self, K: int) -> float:
        """sup_{k>K} |fhat(k)|."""
        K = int(K)
        if self.table is not None:
            rest = np.abs(self.table[K + 1:])
            return float(rest.max()) if rest.size else 0.0
        # non-increasing families: attained at K+1
        return abs(self.fhat(K + 1))

    def _tail_bound(self, K: int, power: int) -> float:
        K = int(K)
        if self.table is not None:
            rest = np.abs(self.table[K + 1:]) ** power
            return float(rest.sum())
        p = self.params[0] * power
        logfac = 1.0
        if self.family == "powerlog":
            q = self.params[1] * power
            logfac = math.log(K + 2.0) ** (-q)
        if p <= 1.0:
            return math.inf
        # sum_{k>K} k^-p <= integral_K^inf x^-p dx, K >= 1
        K = max(K, 1)
        return logfac * K ** (1.0 - p) / (p - 1.0)


def _parse_floats(body: str, spec: str) -> list[float]:
    try:
        vals = [float(tok) for tok in body.split(",")]
    except ValueError as exc:
        raise FamilySpecError(f"cannot parse numbers in {spec!r}") from exc
    if not all(math.isfinite(v) for v in vals):
        raise FamilySpecError(f"non-finite parameter in {spec!r}")
    return vals


def _read_table(path: str, spec: str) -> np.ndarray:
    rows: dict[int, float] = {}
    try:
        with open(Path(path), newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or row[0].strip().startswith("#"):
                    continue
                if len(row) != 2:
                    raise FamilySpecError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
                a, b = row[0].strip(), row[1].strip()
                if lineno == 1 and a.lower() == "k":
                    continue
                try:
                    kf, v = float(a), float(b)
                except ValueError as exc:
                    raise FamilySpecError(f"{path}:{lineno}: not numeric: {row!r}") from exc
                if kf != int(kf):
                    raise FamilySpecError(f"{path}:{lineno}: k must be an integer")
                k = int(kf)
                if k < 0:
                    raise FamilySpecError(f"{path}:{lineno}: negative k")
                if not math.isfinite(v):
                    raise FamilySpecError(f"{path}:{lineno}: non-finite coefficient")
                if k in rows:
                    raise FamilySpecError(f"{path}:{lineno}: duplicate k={k}")
                rows[k] = v
    except OSError as exc:
        raise FamilySpecError(f"cannot read coefficient file {path!r}: {exc}") from exc
    if not rows:
        raise FamilySpecError(f"coefficient file {path!r} has no rows")
    table = np.zeros(max(rows) + 1)
    for k, v in rows.items():
        table[k] = v
    return table


def make_family(spec: str) -> TestFunction:
    """Build a :class:`TestFunction` from a family spec string.

    >>> make_family("coslist:1").fhat(-1)
    0.5
    """
    if not isinstance(spec, str) or ":" not in spec:
        raise FamilySpecError(f"malformed family spec {spec!r}; expected 'name:params'")
    name, body = spec.split(":", 1)
    name = name.strip().lower()
    body = body.strip()
    if name == "file":
        if not body:
            raise FamilySpecError("file: spec needs a path")
        return TestFunction(spec=spec, family="file", table=_read_table(body, spec))
    if not body:
        raise FamilySpecError(f"{spec!r}: missing parameters")
    vals = _parse_floats(body, spec)
    if name == "power":
        if len(vals) != 1:
            raise FamilySpecError("power:p takes exactly one parameter")
        if vals[0] < 0:
            raise FamilySpecError("power:p needs p >= 0 (non-increasing coefficients)")
        return TestFunction(spec=spec, family="power", params=(vals[0],))
    if name == "powerlog":
        if len(vals) != 2:
            raise FamilySpecError("powerlog:p,q takes exactly two parameters")
        if vals[0] < 0 or vals[1] < 0:
            raise FamilySpecError("powerlog:p,q needs p, q >= 0 (non-increasing coefficients)")
        return TestFunction(spec=spec, family="powerlog", params=(vals[0], vals[1]))
    if name == "coslist":
        return TestFunction(spec=spec, family="coslist",
                            table=np.concatenate([[0.0], np.asarray(vals) / 2.0]))
    if name == "const":
        if len(vals) != 1:
            raise FamilySpecError("const:c takes exactly one parameter")
        return TestFunction(spec=spec, family="const", table=np.array([vals[0]]))
    raise FamilySpecError(f"unknown family {name!r} in {spec!r}")


def fourier_coeff(f: TestFunction, k: int) -> float:
    """fhat(k), with evenness fhat(-k) = fhat(k) applied."""
    return f.fhat(k)


def evaluate(f: TestFunction, x, K: int):
    """Truncated cosine series f_K at ``x`` (scalar or array, radians)."""
    K = int(K)
    if K < 0:
        raise ValueError("K must be >= 0")
    c = f.coefficients(K)
    xs = np.asarray(x, dtype=float)
    flat = xs.reshape(-1)
    out = np.empty(flat.size)
    if K == 0:
        out[:] = c[0]
    else:
        k = np.arange(1, K + 1, dtype=float)
        # chunk rows so the cos table stays small
        step = max(1, 2**20 // K)
        for lo in range(0, flat.size, step):
            blk = flat[lo:lo + step]
            terms = c[1:] * np.cos(np.multiply.outer(blk, k))
            out[lo:lo + step] = c[0] + 2.0 * np.sum(terms, axis=-1)
    if xs.ndim == 0:
        return float(out[0])
    return out.reshape(xs.shape)


def v_n(f: TestFunction, N: int) -> float:
    """V_N = sum_{|k|<=N} k^2 fhat(k)^2 = 2 sum_{k=1}^N k^2 fhat(k)^2."""
    N = int(N)
    if N < 0:
        raise ValueError("N must be >= 0")
    if N == 0:
        return 0.0
    c = f.coefficients(N)[1:]
    k = np.arange(1, N + 1, dtype=float)
    return float(2.0 * np.sum((k * c) ** 2))


def karamata_ratio(f: TestFunction, N: int, lam: float) -> float:
    """V_{floor(lam N)} / V_N.

    A finite-N diagnostic for slow variation; it does not decide it.
    """
    N = int(N)
    if N < 1:
        raise ValueError("N must be >= 1")
    if not lam > 0:
        raise ValueError("lambda must be > 0")
    m = math.floor(lam * N)
    if m < 1:
        raise ValueError("floor(lambda * N) must be >= 1")
    denom = v_n(f, N)
    if denom == 0.0:
        raise UndefinedRatioError(f"V_{N} = 0; ratio undefined")
    return v_n(f, m) / denom


def _fourth_root_ceil(N: int) -> int:
    m = max(1, int(round(N ** 0.25)))
    while m**4 < N:
        m += 1
    while m > 1 and (m - 1) ** 4 >= N:
        m -= 1
    return m


def mn_schedule(f: TestFunction, N: int, delta: float = 0.05) -> int:
    """Largest M in [2, ceil(N^(1/4))] with both slow-growth ratios within 1 + delta.

    The two checks are ``V_{N M} <= (1+delta) V_N`` and
    ``V_N <= (1+delta) V_{floor(N/M)}``. Falls back to 2 when no M passes.
    """
    N = int(N)
    if N < 4:
        raise ValueError("N must be >= 4")
    if not delta > 0:
        raise ValueError("delta must be > 0")
    vN = v_n(f, N)
    for M in range(_fourth_root_ceil(N), 1, -1):
        if v_n(f, N * M) <= (1.0 + delta) * vN and vN <= (1.0 + delta) * v_n(f, N // M):
            return M
    return 2
