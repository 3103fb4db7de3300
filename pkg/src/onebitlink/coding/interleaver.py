"""Diagonal-write, column-read block interleaver over an N x q array."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def diagonal_schedule(N: int, q: int) -> np.ndarray:
    """perm[j] = input index placed at output position j.

    Cell (r, c) of the N x q array holds input bit ((r + c) mod N) * q + c, so
    input tuple i runs down a diagonal starting at (i, 0); the array is then
    read column by column.
    """
    if N < 1 or q < 1:
        raise ValueError("N and q must be positive")
    r = np.arange(N)[None, :]
    c = np.arange(q)[:, None]
    return (((r + c) % N) * q + c).ravel()


@dataclass(frozen=True, eq=False)
class Interleaver:
    N: int
    q: int
    perm: np.ndarray

    @classmethod
    def diagonal(cls, N: int, q: int) -> "Interleaver":
        return cls(N, q, diagonal_schedule(N, q))

    @classmethod
    def identity(cls, N: int, q: int) -> "Interleaver":
        return cls(N, q, np.arange(N * q))

    @property
    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.perm.size)
        return inv

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[-1] != self.N * self.q:
            raise ValueError(f"expected length {self.N * self.q}, got {x.shape[-1]}")
        return x

    def interleave(self, x: np.ndarray) -> np.ndarray:
        return self._check(x)[..., self.perm]

    def deinterleave(self, y: np.ndarray) -> np.ndarray:
        return self._check(y)[..., self.inverse]


def interleave(bits: np.ndarray, N: int, q: int) -> np.ndarray:
    return Interleaver.diagonal(N, q).interleave(bits)


def deinterleave(bits: np.ndarray, N: int, q: int) -> np.ndarray:
    return Interleaver.diagonal(N, q).deinterleave(bits)
