"""Discrete memoryless channel from waveform index to one-bit sample signs.

Output words are integers 0..2^(kappa n)-1; sample (k, l) occupies bit
position k*n + l counted from the most significant end, and a set bit means
the received sign is +1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import special

from .spectral import _check_uniform_traces, _spectra, power_containment_bandwidth, psd
from .waveforms import WaveformSet, certify_uniqueness

MAX_OUTPUT_BITS = 20
FLUSH = 1e-300


class ConvergenceError(RuntimeError):
    pass


def output_bits(d: int) -> np.ndarray:
    """(d, 2^d) matrix; column b holds the bits of output word b, MSB first."""
    words = np.arange(2**d, dtype=np.int64)
    shifts = np.arange(d - 1, -1, -1, dtype=np.int64)
    return ((words[None, :] >> shifts[:, None]) & 1).astype(float)


def word_of(signs: np.ndarray) -> np.ndarray:
    """Map rows of +-1 sign vectors to output word integers."""
    s = np.atleast_2d(np.asarray(signs))
    d = s.shape[-1]
    bits = (s > 0).astype(np.int64)
    return bits @ (1 << np.arange(d - 1, -1, -1, dtype=np.int64))


def noise_psd(power: float, snr_db: float, T_N: float) -> float:
    """N0 from SNR = P / (N0 W_N)."""
    W_N = 1.0 / (2.0 * T_N)
    return power / (10 ** (snr_db / 10.0) * W_N)


def sample_noise_var(N0: float, T_N: float, n: int) -> float:
    return N0 * T_N / (2.0 * n)


@dataclass(frozen=True, eq=False)
class DmcModel:
    wset: WaveformSet
    snr_db: float
    N0: float
    noise_var: float
    trans: np.ndarray
    input_dist: np.ndarray

    @property
    def m(self) -> int:
        return self.trans.shape[0]

    @property
    def num_outputs(self) -> int:
        return self.trans.shape[1]

    def save(self, path: str | Path) -> None:
        np.savez_compressed(
            path, trans=self.trans, input_dist=self.input_dist, snr_db=self.snr_db, N0=self.N0,
            noise_var=self.noise_var, samples=self.wset.samples, sign_seqs=self.wset.sign_seqs,
            kappa=self.wset.kappa, n=self.wset.n, T_N=self.wset.T_N,
        )


def load_dmc_arrays(path: str | Path) -> dict:
    with np.load(path) as z:
        return {k: z[k] for k in z.files}


def log_transitions(samples: np.ndarray, sigma: float) -> np.ndarray:
    """log p(b | u) for every u (rows of ``samples``) and every output word."""
    S = np.asarray(samples, dtype=float) / sigma
    bits = output_bits(S.shape[1])
    return special.log_ndtr(S) @ bits + special.log_ndtr(-S) @ (1.0 - bits)


def build_dmc(wset: WaveformSet, snr_db: float, input_dist: np.ndarray | None = None) -> DmcModel:
    d = wset.kappa * wset.n
    if d > MAX_OUTPUT_BITS:
        raise ValueError(f"kappa*n = {d} exceeds {MAX_OUTPUT_BITS}; output alphabet too large to enumerate")
    energies = wset.energies
    if not np.allclose(energies, energies[0], rtol=1e-9):
        raise ValueError("waveform energies are not normalized; SNR mapping undefined")
    if input_dist is None:
        input_dist = np.full(wset.m, 1.0 / wset.m)
    input_dist = np.asarray(input_dist, dtype=float)
    if input_dist.shape != (wset.m,) or np.any(input_dist < 0) or abs(input_dist.sum() - 1) > 1e-9:
        raise ValueError("input distribution must be a probability vector over the set")
    N0 = noise_psd(wset.power, snr_db, wset.T_N)
    var = sample_noise_var(N0, wset.T_N, wset.n)
    with np.errstate(under="ignore"):
        trans = np.exp(log_transitions(wset.samples, math.sqrt(var)))
    trans[trans < FLUSH] = 0.0
    return DmcModel(wset, float(snr_db), N0, var, trans, input_dist)


def mutual_information_from(trans: np.ndarray, p: np.ndarray) -> float:
    """I(U; B) in bits."""
    q = p @ trans
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(trans > 0, trans / np.where(q > 0, q, 1.0)[None, :], 1.0)
        terms = special.xlogy(trans, ratio)
    return float(p @ terms.sum(axis=1) / math.log(2))


def mutual_information(model: DmcModel) -> tuple[float, float]:
    """Information per symbol in bits and the rate I / (kappa T_N) in bits/s."""
    I = mutual_information_from(model.trans, model.input_dist)
    return I, I / (model.wset.kappa * model.wset.T_N)


def blahut_arimoto(model: DmcModel, tol: float = 1e-8, max_iter: int = 200_000) -> tuple[float, np.ndarray]:
    """Capacity in bits per symbol and a capacity-achieving input distribution."""
    W = model.trans
    p = np.full(model.m, 1.0 / model.m)
    logW = np.where(W > 0, np.log(np.where(W > 0, W, 1.0)), 0.0)
    gap = math.inf
    for _ in range(max_iter):
        q = p @ W
        logq = np.log(np.where(q > 0, q, 1.0))
        D = (W * (logW - logq[None, :])).sum(axis=1)
        lower = math.log(float(p @ np.exp(D)))
        upper = float(D.max())
        gap = upper - lower
        if gap <= tol * max(lower, 1e-300):
            break
        p = p * np.exp(D - D.max())
        p /= p.sum()
    else:
        raise ConvergenceError(f"Blahut-Arimoto stopped after {max_iter} iterations with bound gap {gap:.3e} nats")
    return mutual_information_from(W, p), p


def max_set_size(kappa: int, n: int) -> int:
    if kappa < 1 or n < 1:
        raise ValueError("kappa and n must be >= 1")
    return 2 * (n + 1) ** kappa - 2**kappa


def r_max(kappa: int, n: int, T_N: float = 1.0) -> float:
    return (math.log2((n + 1) ** kappa - 2 ** (kappa - 1)) / kappa + 1.0 / kappa) / T_N


def r_unif(kappa: int, n: int, T_N: float = 1.0) -> float:
    return (math.log2(n) + 1.0 / kappa) / T_N


def stationary_sign_upper_bound(n: int) -> float:
    """Bits per Nyquist interval for stationary sign sequences."""
    if n < 2:
        raise ValueError("bound needs n >= 2")
    return math.log2(n) + (n - 1) * math.log2(n / (n - 1))


@dataclass(frozen=True, eq=False)
class Selection:
    subset: WaveformSet
    W: float
    W_eta: float
    eta: float
    achieved_eta: float
    I_bits: float
    R: float

    @property
    def m(self) -> int:
        return self.subset.m

    @property
    def SE(self) -> float:
        return self.R / self.W_eta

    @property
    def bits_per_dim(self) -> float:
        return self.SE / 2.0


class _PairSpectra:
    """Cumulative energy spectra per antipodal pair for fast in-band sums."""

    def __init__(self, wset: WaveformSet, pad: int):
        self.pairs = wset.pairs()
        if 2 * len(self.pairs) != wset.m:
            raise ValueError("heuristic selection needs a fully paired set")
        traces, dt = _check_uniform_traces(wset)
        first = traces[[a for a, _ in self.pairs]]
        E = _spectra(first, dt, pad)
        self.f = np.arange(E.shape[1]) / (pad * traces.shape[1] * dt)
        self.E = E
        self.cum = np.concatenate([np.zeros((E.shape[0], 1)), np.cumsum(0.5 * (E[:, 1:] + E[:, :-1]) * np.diff(self.f), axis=1)], axis=1)
        self.total = self.cum[:, -1]
        self.keys = [(wset[a].sign_seq.tobytes(), wset[b].sign_seq.tobytes()) for a, b in self.pairs]

    def in_band(self, W: float) -> np.ndarray:
        j = int(np.clip(np.searchsorted(self.f, W, side="right") - 1, 0, self.f.size - 2))
        h = min(W - self.f[j], self.f[j + 1] - self.f[j])
        slope = (self.E[:, j + 1] - self.E[:, j]) / (self.f[j + 1] - self.f[j])
        return self.cum[:, j] + self.E[:, j] * h + 0.5 * slope * h * h

    def choose(self, W: float, half: int) -> list[int]:
        energy = self.in_band(W)
        order = sorted(range(len(self.pairs)), key=lambda i: (-energy[i], i))
        chosen, seen = [], set()
        for i in order:
            a, b = self.keys[i]
            if a in seen or b in seen or a == b:
                continue
            chosen.append(i)
            seen.update((a, b))
            if len(chosen) == half:
                return chosen
        raise ValueError(f"only {len(chosen)} pairs satisfy the uniqueness condition; asked for {half}")

    def fraction(self, chosen: list[int], W: float) -> float:
        return float(self.in_band(W)[chosen].sum() / self.total[chosen].sum())


@lru_cache(maxsize=16)
def _pair_spectra(wset: WaveformSet, pad: int) -> _PairSpectra:
    return _PairSpectra(wset, pad)


def select_subset(
    wset: WaveformSet,
    eta: float,
    m_target: int,
    slack: float = 0.002,
    iterations: int = 40,
    pad: int = 16,
) -> Selection:
    """Choose m_target/2 antipodal pairs that concentrate power below a bandwidth W.

    W is bisected until the selected subset holds between eta and eta + slack
    of its power inside [-W, W], re-ranking the pairs at every step. Pairs
    whose sign sequences collide with an already chosen pair are skipped. The
    rate fields hold the noiseless limit log2(m) / (kappa T_N).
    """
    if m_target % 2 or m_target < 2:
        raise ValueError("m_target must be a positive even number")
    if m_target > wset.m:
        raise ValueError(f"m_target {m_target} exceeds set size {wset.m}")
    ps = _pair_spectra(wset, pad)
    half = m_target // 2
    W_N = 1.0 / (2.0 * wset.T_N)
    lo, hi = W_N, 4.0 * W_N

    def frac(W):
        c = ps.choose(W, half)
        return c, ps.fraction(c, W)

    chosen, fr = frac(hi)
    while fr < eta:
        if hi >= ps.f[-1]:
            raise ValueError(f"target eta={eta} unreachable; best fraction {fr:.4f}")
        hi = min(2 * hi, float(ps.f[-1]))
        chosen, fr = frac(hi)
    best = (hi, chosen, fr)
    c_lo, fr_lo = frac(lo)
    if fr_lo >= eta:
        best = (lo, c_lo, fr_lo)
    else:
        for _ in range(iterations):
            if best[2] <= eta + slack:
                break
            mid = 0.5 * (lo + hi)
            c, fr = frac(mid)
            if fr >= eta:
                hi, best = mid, (mid, c, fr)
            else:
                lo = mid
    W, chosen, fr = best
    subset = wset.subset(pair_indices=sorted(chosen))
    if not certify_uniqueness(subset):
        raise AssertionError("selected subset violates uniqueness")
    W_eta = power_containment_bandwidth(psd(subset, pad), eta)
    I = math.log2(subset.m)
    return Selection(subset, W, W_eta, eta, fr, I, I / (subset.kappa * subset.T_N))


def rate_at(sel: Selection, snr_db: float | None) -> Selection:
    """Selection with its rate evaluated on the DMC at ``snr_db`` (None: noiseless limit)."""
    if snr_db is None:
        return sel
    I, R = mutual_information(build_dmc(sel.subset, snr_db))
    return replace(sel, I_bits=I, R=R)


def heuristic_select(wset: WaveformSet, snr_db: float | None, eta: float, m_target: int, **kw) -> Selection:
    """Subset selection followed by the information rate at ``snr_db``."""
    return rate_at(select_subset(wset, eta, m_target, **kw), snr_db)


def random_pair_subset(wset: WaveformSet, half: int, rng: np.random.Generator) -> WaveformSet:
    pairs = wset.pairs()
    idx = np.sort(rng.choice(len(pairs), size=half, replace=False))
    return wset.subset(pair_indices=idx.tolist())
