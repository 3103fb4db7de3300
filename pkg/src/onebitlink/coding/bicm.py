"""Bit-interleaved coded modulation with iterative demodulation and decoding.

One LDPC codeword fills ceil(N_code / q) symbols; the trailing pad bits are
zeros known to the receiver.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from ..dmc import DmcModel, word_of
from ..waveforms import WaveformSet
from .interleaver import Interleaver
from .labeling import Labeling
from .ldpc import LLR_MAX, LdpcCode, SumProductDecoder


class Feedback(str, enum.Enum):
    # prior LLR handed back to the demodulator equals the decoder extrinsic LLR
    CONSISTENT = "consistent"
    # Pr(a=0) = e^L / (1 + e^L): the prior LLR is the negated extrinsic LLR
    SWAPPED = "swapped"


def _log_bit_probs(prior_llr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """log Pr(a=1), log Pr(a=0) from L = log Pr(1)/Pr(0); handles +-inf."""
    L = np.asarray(prior_llr, dtype=float)
    return -np.logaddexp(0.0, -L), -np.logaddexp(0.0, L)


def demod_llr_from_loglik(loglik: np.ndarray, prior_llr: np.ndarray, labeling: Labeling) -> np.ndarray:
    """Per-bit LLRs for each received symbol.

    ``loglik[s, u]`` is log p(b_s | u); ``prior_llr[s, j]`` the a-priori LLR of
    bit j of symbol s. The prior of the bit being computed is left out.
    """
    loglik = np.atleast_2d(loglik)
    S, m = loglik.shape
    q = labeling.q
    A = labeling.bits.astype(bool)  # (m, q)
    lp1, lp0 = _log_bit_probs(np.broadcast_to(prior_llr, (S, q)))
    lp = np.where(A[None, :, :], lp1[:, None, :], lp0[:, None, :])  # (S, m, q)
    out = np.empty((S, q))
    for j in range(q):
        others = [k for k in range(q) if k != j]
        metric = loglik + lp[:, :, others].sum(axis=-1)
        mask1 = A[:, j]
        with np.errstate(divide="ignore"):
            p1 = special.logsumexp(np.where(mask1[None, :], metric, -np.inf), axis=1)
            p0 = special.logsumexp(np.where(~mask1[None, :], metric, -np.inf), axis=1)
        both = np.isneginf(p1) & np.isneginf(p0)
        with np.errstate(invalid="ignore"):
            llr = p1 - p0
        llr = np.where(both, 0.0, llr)
        out[:, j] = np.clip(np.nan_to_num(llr, posinf=LLR_MAX, neginf=-LLR_MAX), -LLR_MAX, LLR_MAX)
    return out


def demod_llr(observed_words: np.ndarray, prior_llr: np.ndarray, dmc: DmcModel, labeling: Labeling) -> np.ndarray:
    """LLRs from observed output words using the tabulated DMC rows."""
    words = np.atleast_1d(np.asarray(observed_words, dtype=np.int64))
    with np.errstate(divide="ignore"):
        loglik = np.log(dmc.trans[:, words].T)
    return demod_llr_from_loglik(loglik, prior_llr, labeling)


def sign_loglik(signs: np.ndarray, samples: np.ndarray, sigma: float) -> np.ndarray:
    """log p(b | u) for received +-1 vectors ``signs`` (S, d) against member samples (m, d)."""
    z = signs[:, None, :].astype(float) * samples[None, :, :] / sigma
    return special.log_ndtr(z).sum(axis=-1)


@dataclass(frozen=True)
class BicmConfig:
    outer_iterations: int = 5
    decoder_iterations: int = 50
    interleaved: bool = True
    feedback: Feedback = Feedback.CONSISTENT

    def __post_init__(self):
        object.__setattr__(self, "feedback", Feedback(self.feedback))
        if self.outer_iterations < 1 or self.decoder_iterations < 1:
            raise ValueError("iteration counts must be positive")


@dataclass(frozen=True, eq=False)
class FrameLayout:
    """Maps one codeword onto a block of symbols."""

    code: LdpcCode
    labeling: Labeling
    interleaver: Interleaver
    num_symbols: int
    pad: int

    @classmethod
    def build(cls, code: LdpcCode, labeling: Labeling, interleaved: bool = True) -> "FrameLayout":
        q = labeling.q
        S = math.ceil(code.N_code / q)
        il = Interleaver.diagonal(S, q) if interleaved else Interleaver.identity(S, q)
        return cls(code, labeling, il, S, S * q - code.N_code)

    @property
    def q(self) -> int:
        return self.labeling.q

    def symbols(self, codewords: np.ndarray) -> np.ndarray:
        """(B, N_code) codeword bits to (B, num_symbols) member indices."""
        cw = np.atleast_2d(codewords).astype(np.int64)
        bits = np.concatenate([cw, np.zeros((cw.shape[0], self.pad), dtype=np.int64)], axis=1)
        tup = self.interleaver.interleave(bits).reshape(cw.shape[0], self.num_symbols, self.q)
        t = tup @ (1 << np.arange(self.q - 1, -1, -1))
        return self.labeling.member_of[t]

    def pad_prior(self, B: int) -> np.ndarray:
        """Prior LLRs on the interleaved frame: -inf on pad bits (known zeros), 0 elsewhere."""
        frame = np.zeros((B, self.num_symbols * self.q))
        frame[:, self.code.N_code:] = -np.inf
        return frame


@dataclass(frozen=True, eq=False)
class BicmResult:
    decoded: np.ndarray
    first_pass: np.ndarray
    codeword_hard: np.ndarray
    iterations: list[int] = field(default_factory=list)


def bicm_id_run(
    cfg: BicmConfig,
    layout: FrameLayout,
    signs: np.ndarray,
    samples: np.ndarray,
    sigma: float,
    decoder: SumProductDecoder | None = None,
) -> BicmResult:
    """Iterative receiver for a batch of frames.

    ``signs`` has shape (B, num_symbols, d) and holds the received +-1
    vectors; ``samples`` is the (m, d) table of noiseless member samples.
    Returns the decoded message bits after the last pass and after the first.
    """
    dec = decoder or SumProductDecoder(layout.code)
    B, S, d = signs.shape
    q, N = layout.q, layout.code.N_code
    loglik = sign_loglik(signs.reshape(B * S, d), samples, sigma)
    prior_frame = layout.pad_prior(B)
    pad_llr = prior_frame[:, N:]
    first = None
    used = []
    hard = None
    for it in range(cfg.outer_iterations):
        prior = layout.interleaver.interleave(prior_frame).reshape(B * S, q)
        llr_c = demod_llr_from_loglik(loglik, prior, layout.labeling).reshape(B, S * q)
        llr_code = layout.interleaver.deinterleave(llr_c)[:, :N]
        post, hard, n_it = dec.decode(llr_code, cfg.decoder_iterations)
        used.append(n_it)
        if first is None:
            first = layout.code.extract(hard)
        ext = np.clip(post - llr_code, -LLR_MAX, LLR_MAX)
        if cfg.feedback is Feedback.SWAPPED:
            ext = -ext
        prior_frame = np.concatenate([ext, pad_llr], axis=1)
    return BicmResult(layout.code.extract(hard), first, hard, used)


def observed_words(signs: np.ndarray) -> np.ndarray:
    return word_of(signs.reshape(-1, signs.shape[-1])).reshape(signs.shape[:-1])


def member_samples(wset: WaveformSet) -> np.ndarray:
    return wset.samples
