"""AWGN channel with integrate-and-dump one-bit reception."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dmc import noise_psd, sample_noise_var
from ..waveforms import WaveformSet, sign


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, *stream), independent of execution order."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *stream])))


@dataclass(frozen=True)
class ChannelRealization:
    seed: int
    noise_var: float
    stream: tuple[int, ...] = ()

    @classmethod
    def at_snr(cls, wset: WaveformSet, snr_db: float, seed: int, *stream: int) -> "ChannelRealization":
        N0 = noise_psd(wset.power, snr_db, wset.T_N)
        return cls(seed, sample_noise_var(N0, wset.T_N, wset.n), tuple(stream))

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.noise_var))

    def noise(self, shape) -> np.ndarray:
        return self.sigma * make_rng(self.seed, *self.stream).standard_normal(shape)


def transmit_receive(symbols: np.ndarray, wset: WaveformSet, channel: ChannelRealization) -> np.ndarray:
    """Signs of the noisy integrate-and-dump samples; shape symbols.shape + (kappa*n,)."""
    u = np.asarray(symbols, dtype=np.int64)
    if u.size and (u.min() < 0 or u.max() >= wset.m):
        raise ValueError("symbol index outside the waveform set")
    y = wset.samples[u]
    if channel.noise_var > 0:
        y = y + channel.noise(y.shape)
    return sign(y)
