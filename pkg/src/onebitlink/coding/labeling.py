"""Bit-tuple labelings of a waveform set.

Tuples are integers in [0, 2^q) with bit a[1] as the most significant bit.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..waveforms import WaveformSet, boundary_labels

DEFAULT_SEARCH_CAP = math.factorial(10)


class LabelSearchError(ValueError):
    pass


def popcount(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    out = np.zeros_like(x)
    while np.any(x):
        out += x & 1
        x = x >> 1
    return out


def tuple_bits(tuples: np.ndarray, q: int) -> np.ndarray:
    """(..., q) array of 0/1 bits, a[1] first."""
    t = np.asarray(tuples, dtype=np.int64)
    return ((t[..., None] >> np.arange(q - 1, -1, -1)) & 1).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class Labeling:
    q: int
    label_of: np.ndarray
    d_sum: int

    def __post_init__(self):
        if sorted(self.label_of.tolist()) != list(range(2**self.q)):
            raise ValueError("labeling is not a bijection onto all q-bit tuples")

    @property
    def member_of(self) -> np.ndarray:
        inv = np.empty_like(self.label_of)
        inv[self.label_of] = np.arange(self.label_of.size)
        return inv

    @property
    def bits(self) -> np.ndarray:
        """(m, q) bit table of the member labels."""
        return tuple_bits(self.label_of, self.q)

    def to_json(self) -> str:
        return json.dumps({"format": "onebitlink.labeling", "version": 1, "q": self.q,
                           "label_of": self.label_of.tolist(), "d_sum": self.d_sum})

    @classmethod
    def from_json(cls, text: str) -> "Labeling":
        d = json.loads(text)
        if d.get("format") != "onebitlink.labeling" or d.get("version") != 1:
            raise ValueError("not a version-1 labeling container")
        return cls(d["q"], np.array(d["label_of"], dtype=np.int64), d["d_sum"])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())


def neighbor_edges(wset: WaveformSet) -> np.ndarray:
    """Ordered member pairs (u, v) whose sign sequences differ in exactly one place."""
    S = wset.sign_seqs.astype(np.int64)
    diff = (S[:, None, :] != S[None, :, :]).sum(axis=-1)
    return np.argwhere(diff == 1)


def d_sum(label_of: np.ndarray, edges: np.ndarray) -> int:
    lab = np.asarray(label_of)
    return int(popcount(lab[edges[:, 0]] ^ lab[edges[:, 1]]).sum())


def _q_of(m: int) -> int:
    q = int(round(math.log2(m)))
    if 2**q != m or m < 2:
        raise ValueError(f"set size {m} is not a power of two")
    return q


def _gray(i: int) -> int:
    return i ^ (i >> 1)


def gray_step(wset: WaveformSet, q: int) -> dict[int, int]:
    """Per-interval Gray codes for positive-start members whose first crossing is early.

    Applies when each interval offers 2^b crossing positions and q = kappa b;
    otherwise returns an empty assignment.
    """
    positions = sorted(wset.pattern.labels)
    P = len(positions)
    b = int(round(math.log2(P))) if P > 0 else 0
    if 2**b != P or q != wset.kappa * b or b < 1:
        return {}
    rank = {l: i for i, l in enumerate(positions)}
    out = {}
    for _, plus in wset.pairs():
        w = wset[plus]
        ls = boundary_labels(w.sign_seq, True)
        r = [rank[l] for l in ls]
        if r[0] >= P // 2:
            continue
        t = 0
        for rk in r:
            t = (t << b) | _gray(rk)
        out[plus] = t
    return out


def _complement_fill(label_of: np.ndarray, wset: WaveformSet, q: int) -> None:
    full = 2**q - 1
    for minus, plus in wset.pairs():
        if label_of[plus] >= 0:
            label_of[minus] = full ^ label_of[plus]


def label_heuristic(
    wset: WaveformSet,
    cap: int = DEFAULT_SEARCH_CAP,
    greedy: bool = False,
    seed: int = 0,
    starts: int = 100,
    use_gray: bool = True,
) -> Labeling:
    """Antipodal complement rule, Gray-coded early crossings, then D_sum search."""
    if not wset.paired:
        raise ValueError("labeling heuristic needs a paired set")
    m = wset.m
    q = _q_of(m)
    edges = neighbor_edges(wset)
    label_of = -np.ones(m, dtype=np.int64)
    fixed = gray_step(wset, q) if use_gray else {}
    for u, t in fixed.items():
        label_of[u] = t
    _complement_fill(label_of, wset, q)
    free_members = [plus for _, plus in wset.pairs() if label_of[plus] < 0]
    used = set(label_of[label_of >= 0].tolist())
    free_tuples = [t for t in range(2 ** (q - 1)) if t not in used]
    m1 = len(free_members)
    if m1 != len(free_tuples):
        raise AssertionError("remaining tuples and members differ in number")
    if m1 == 0:
        return Labeling(q, label_of, d_sum(label_of, edges))
    minus_of = {plus: minus for minus, plus in wset.pairs()}
    free_minus = np.array([minus_of[p] for p in free_members])
    free_members = np.array(free_members)
    tuples = np.array(free_tuples, dtype=np.int64)
    full = 2**q - 1

    def score_batch(perms: np.ndarray) -> np.ndarray:
        L = np.broadcast_to(label_of, (perms.shape[0], m)).copy()
        L[:, free_members] = tuples[perms]
        L[:, free_minus] = full ^ tuples[perms]
        return popcount(L[:, edges[:, 0]] ^ L[:, edges[:, 1]]).sum(axis=1)

    if math.factorial(m1) <= cap:
        best, best_perm = None, None
        it = itertools.permutations(range(m1))
        while True:
            chunk = np.array(list(itertools.islice(it, 20000)), dtype=np.int64)
            if chunk.size == 0:
                break
            scores = score_batch(chunk)
            j = int(np.argmin(scores))
            if best is None or scores[j] < best:
                best, best_perm = int(scores[j]), chunk[j]
    elif greedy:
        best_perm = _local_search(score_batch, m1, seed, starts)
    else:
        raise LabelSearchError(f"{m1}! assignments exceed the search cap {cap}; enable the greedy fallback")
    label_of[free_members] = tuples[best_perm]
    label_of[free_minus] = full ^ tuples[best_perm]
    return Labeling(q, label_of, d_sum(label_of, edges))


def _local_search(score_batch, m1: int, seed: int, starts: int) -> np.ndarray:
    """Best-improvement pairwise-swap descent from random starting assignments."""
    rng = np.random.default_rng(seed)
    swaps = np.array(list(itertools.combinations(range(m1), 2)))
    best, best_perm = None, None
    for _ in range(starts):
        perm = rng.permutation(m1)
        score = int(score_batch(perm[None])[0])
        while True:
            cand = np.broadcast_to(perm, (swaps.shape[0], m1)).copy()
            rows = np.arange(swaps.shape[0])
            cand[rows, swaps[:, 0]], cand[rows, swaps[:, 1]] = perm[swaps[:, 1]], perm[swaps[:, 0]]
            s = score_batch(cand)
            j = int(np.argmin(s))
            if s[j] >= score:
                break
            perm, score = cand[j], int(s[j])
        if best is None or score < best:
            best, best_perm = score, perm
    return best_perm


def random_labeling(wset: WaveformSet, rng: np.random.Generator) -> Labeling:
    """Uniformly random bijection from q-bit tuples to members."""
    q = _q_of(wset.m)
    label_of = rng.permutation(wset.m).astype(np.int64)
    return Labeling(q, label_of, d_sum(label_of, neighbor_edges(wset)))
