"""Realizations of the bandlimited zero-crossing process and its crossing patterns.

A realization is the product

    s(t) = (t - tau_0) * prod_{k=1..K} (1 - t/tau_k) (1 - t/tau_{-k})

where only finitely many crossings deviate from the integers. Products are
accumulated as log-magnitude plus sign so that depths of 10^4 and beyond
neither underflow nor overflow.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate

DEFAULT_DEPTH = 10_000

# factor blocks are chunked so a (points x factors) slab stays under ~4M entries
_CHUNK = 4_000_000


class PatternKind(str, enum.Enum):
    UNIFORM = "uniform"
    NONUNIFORM = "nonuniform"


@dataclass(frozen=True)
class ZeroCrossingPattern:
    """Admissible crossing offsets within one Nyquist interval.

    ``labels[i]`` is the pattern index l attached to ``offsets[i]``: 1..n for
    the uniform pattern, 0..n for the nonuniform one (label 0 is the extra
    interior position lambda/n).
    """

    kind: PatternKind
    n: int
    lam: float | None
    offsets: tuple[float, ...]
    labels: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.offsets)

    def offset(self, label: int) -> float:
        return self.offsets[self.labels.index(label)]


def make_pattern(kind: PatternKind | str, n: int, lam: float | None = None) -> ZeroCrossingPattern:
    kind = PatternKind(kind)
    if n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    uniform = tuple(l / n for l in range(1, n + 1))
    if kind is PatternKind.UNIFORM:
        return ZeroCrossingPattern(kind, n, None, uniform, tuple(range(1, n + 1)))
    if lam is None or not 0.0 < lam < 1.0:
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")
    return ZeroCrossingPattern(kind, n, float(lam), (lam / n,) + uniform, tuple(range(0, n + 1)))


@dataclass(frozen=True)
class CrossingSequence:
    """Crossings tau_k for k in [first, first + len(inner)); every other tau_k equals k."""

    inner: tuple[float, ...]
    first: int = 0

    def __post_init__(self):
        for j, tau in enumerate(self.inner):
            k = self.first + j
            if not (k - 0.5 < tau <= k + 0.5):
                raise ValueError(f"tau_{k}={tau} outside ({k - 0.5}, {k + 0.5}]")

    @property
    def kappa(self) -> int:
        return len(self.inner)

    def tau(self, k: int) -> float:
        j = k - self.first
        if 0 <= j < len(self.inner):
            return self.inner[j]
        return float(k)

    @classmethod
    def from_labels(cls, pattern: ZeroCrossingPattern, labels: Sequence[int]) -> "CrossingSequence":
        return cls(tuple(k - 0.5 + pattern.offset(l) for k, l in enumerate(labels)))


@dataclass(frozen=True)
class ProcessRealization:
    crossings: CrossingSequence
    depth: int = DEFAULT_DEPTH

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("product depth K must be >= 1")

    @property
    def kappa(self) -> int:
        return self.crossings.kappa


@dataclass
class _LogProduct:
    logabs: np.ndarray
    sign: np.ndarray = field(repr=False)

    def value(self) -> np.ndarray:
        with np.errstate(under="ignore"):
            return self.sign * np.exp(self.logabs)


def integer_log_product(t, indices: np.ndarray) -> _LogProduct:
    """log|prod_j (1 - t/j)| and its sign over the given nonzero integer indices."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    idx = np.asarray(indices, dtype=float)
    logabs = np.zeros_like(t)
    negatives = np.zeros(t.shape, dtype=np.int64)
    if idx.size == 0:
        return _LogProduct(logabs, np.ones_like(t))
    step = max(1, _CHUNK // idx.size)
    inv = 1.0 / idx
    for lo in range(0, t.size, step):
        tt = t[lo:lo + step, None]
        fac = 1.0 - tt * inv[None, :]
        with np.errstate(divide="ignore"):
            logabs[lo:lo + step] = np.log(np.abs(fac)).sum(axis=1)
        negatives[lo:lo + step] = (fac < 0).sum(axis=1)
    sign = np.where(negatives % 2 == 0, 1.0, -1.0)
    return _LogProduct(logabs, sign)


def _window_log_product(cs: CrossingSequence, t: np.ndarray, lo: int, hi: int) -> _LogProduct:
    """(t - tau_0) * prod_{j in [lo, hi], j != 0} (1 - t/tau_j) in log/sign form."""
    special = {cs.first + j: tau for j, tau in enumerate(cs.inner) if lo <= cs.first + j <= hi}
    special.setdefault(0, cs.tau(0))
    ints = np.arange(lo, hi + 1)
    ints = ints[(ints != 0) & ~np.isin(ints, list(special))]
    base = integer_log_product(t, ints)
    logabs, sign = base.logabs.copy(), base.sign.copy()
    for k, tau in special.items():
        if k == 0:
            fac = t - tau
        else:
            if tau == 0.0:
                raise ValueError(f"tau_{k}=0 sits in a denominator position")
            fac = 1.0 - t / tau
        with np.errstate(divide="ignore"):
            logabs += np.log(np.abs(fac))
        sign *= np.where(fac < 0, -1.0, 1.0)
    return _LogProduct(logabs, sign)


def eval_s(r: ProcessRealization, t) -> np.ndarray | float:
    """Evaluate the depth-K product for realization ``r`` at ``t`` (scalar or array)."""
    scalar = np.ndim(t) == 0
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    if not np.all(np.isfinite(tt)):
        raise ValueError("t must be finite")
    out = _window_log_product(r.crossings, tt, -r.depth, r.depth).value()
    return float(out[0]) if scalar else out


def background_log_product(t, kappa: int, depth: int = DEFAULT_DEPTH) -> _LogProduct:
    """Factors of a crossing window [0, kappa) realization that do not depend on the window.

    For any realization whose non-integer crossings are tau_0..tau_{kappa-1},
    s(t) = (t - tau_0) prod_{k=1..kappa-1} (1 - t/tau_k) * background(t).
    """
    ints = np.concatenate([np.arange(-depth, 0), np.arange(kappa, depth + 1)])
    return integer_log_product(t, ints)


def inner_factor(cs: CrossingSequence, t: np.ndarray) -> np.ndarray:
    if cs.first != 0:
        raise ValueError("inner_factor expects a crossing window starting at k=0")
    out = np.asarray(t, dtype=float) - cs.inner[0]
    for tau in cs.inner[1:]:
        out = out * (1.0 - t / tau)
    return out


def shift_equivalence_check(
    r: ProcessRealization, i: int, grid, align_window: bool = True
) -> tuple[float, float]:
    """Fit c_i in s(delta_(i), t - i) = (-1)^i c_i s(delta, t) over ``grid``.

    ``delta_(i)`` is the crossing sequence re-indexed by i. With
    ``align_window`` the reference product runs over indices [i-K, i+K], which
    is the finite-K identity; without it both sides use the symmetric window and
    the residual carries the O(i*t/K) truncation mismatch.

    Returns the constant (median of pointwise ratios) and the max relative residual.
    """
    cs = r.crossings
    K = r.depth
    shifted = CrossingSequence(tuple(tau - i for tau in cs.inner), cs.first - i)
    t = np.asarray(grid, dtype=float)
    lhs = _window_log_product(shifted, t - i, -K, K).value()
    lo, hi = (i - K, i + K) if align_window else (-K, K)
    rhs = ((-1) ** i) * _window_log_product(cs, t, lo, hi).value()
    keep = np.abs(rhs) > 1e-12 * np.max(np.abs(rhs))
    if not np.any(keep):
        raise ValueError("every grid point sits on a zero of s")
    ratio = lhs[keep] / rhs[keep]
    c = float(np.median(ratio))
    return c, float(np.max(np.abs(ratio / c - 1.0)))


def verify_lambda(pattern: ZeroCrossingPattern, kappa: int = 1, depth: int = DEFAULT_DEPTH) -> bool:
    """True iff an interior crossing at lambda/n flips the sign of the first sample.

    Checked in every interval k of a kappa-interval window, each time with the
    other crossings at the integers. The first integrate-and-dump sample of the
    interval must take the sign opposite to the known boundary sign (-1)^(k-1).
    """
    if pattern.kind is not PatternKind.NONUNIFORM:
        raise ValueError("verify_lambda needs a nonuniform pattern")
    n = pattern.n
    for k in range(kappa):
        inner = [float(j) for j in range(kappa)]
        inner[k] = k - 0.5 + pattern.offset(0)
        r = ProcessRealization(CrossingSequence(tuple(inner)), depth)
        a, b, z = k - 0.5, k - 0.5 + 1.0 / n, inner[k]
        val, _ = integrate.quad(lambda x: eval_s(r, x), a, b, points=[z], epsabs=1e-13, epsrel=1e-10, limit=200)
        boundary = (-1.0) ** (k - 1)
        if not val * boundary < 0:
            return False
    return True
