"""Finite waveform sets built by truncating process realizations.

Process time x runs over (-1/2, kappa - 1/2]; channel time is t = (x + 1/2) T_N,
so waveform u lives on (0, kappa T_N]. Each Nyquist interval is split into n
integrate-and-dump sub-intervals.
"""
from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate

from .process import (
    DEFAULT_DEPTH,
    CrossingSequence,
    PatternKind,
    ProcessRealization,
    ZeroCrossingPattern,
    background_log_product,
    inner_factor,
    make_pattern,
)

DEFAULT_RESOLUTION = 256
SIGN_FLOOR = 1e-12


class UniquenessError(ValueError):
    """Two members of a waveform set share a sign sequence."""


class SignDeterminationError(ValueError):
    """An integrate-and-dump sample is too close to zero to carry a sign."""


class WindowKind(str, enum.Enum):
    HARD = "hard"
    RAISED_COSINE = "raised_cosine"


@dataclass(frozen=True)
class WindowSpec:
    kind: WindowKind = WindowKind.HARD
    alpha: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", WindowKind(self.kind))
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"roll-off alpha must lie in [0, 1], got {self.alpha}")

    def __call__(self, frac: np.ndarray) -> np.ndarray:
        """Window value at fractional position ``frac`` = t / (kappa T_N) in [0, 1]."""
        if self.kind is WindowKind.HARD:
            return np.ones_like(frac)
        return raised_cosine(frac - 0.5, self.alpha)


def raised_cosine(x: np.ndarray, alpha: float) -> np.ndarray:
    """Raised-cosine window of unit length centred at 0 (zero outside |x| > 1/2)."""
    ax = np.abs(np.asarray(x, dtype=float))
    flat = (1.0 - alpha) / 2.0
    out = np.where(ax <= flat, 1.0, 0.0)
    if alpha > 0:
        roll = (ax > flat) & (ax <= 0.5)
        out = np.where(roll, 0.5 * (1.0 + np.cos(np.pi / alpha * (2.0 * ax - (1.0 - alpha)))), out)
    return out


def windowed(alpha: float) -> WindowSpec:
    return WindowSpec(WindowKind.RAISED_COSINE if alpha > 0 else WindowKind.HARD, alpha)


@dataclass(frozen=True)
class _Grid:
    kappa: int
    n: int
    per_sub: int
    nodes: np.ndarray
    mids: np.ndarray

    @property
    def h(self) -> float:
        """Node spacing in process time."""
        return 1.0 / (self.n * self.per_sub)


@lru_cache(maxsize=32)
def _grid(kappa: int, n: int, resolution: int) -> _Grid:
    # nodes must land on every sub-interval boundary with an even count per sub for Simpson
    per_sub = 2 * math.ceil(resolution / (2 * n))
    total = kappa * n * per_sub
    h = 1.0 / (n * per_sub)
    nodes = -0.5 + h * np.arange(total + 1)
    mids = -0.5 + h * (np.arange(total) + 0.5)
    return _Grid(kappa, n, per_sub, nodes, mids)


@lru_cache(maxsize=32)
def _background(kappa: int, n: int, resolution: int, depth: int) -> tuple[np.ndarray, np.ndarray]:
    g = _grid(kappa, n, resolution)
    return background_log_product(g.nodes, kappa, depth).value(), background_log_product(g.mids, kappa, depth).value()


@dataclass(frozen=True, eq=False)
class Waveform:
    """One truncated, windowed and scaled realization.

    ``samples[k, l]`` is the integral of g_u over the l-th sub-interval of the
    k-th Nyquist interval; ``dense_trace`` holds g_u at the midpoints of a
    uniform grid of spacing ``dt`` covering (0, kappa T_N].
    """

    uid: int
    labels: tuple[int, ...]
    realization: ProcessRealization
    phi: float
    T_N: float
    n: int
    window: WindowSpec
    samples: np.ndarray
    sign_seq: np.ndarray
    energy: float
    dense_trace: np.ndarray = field(repr=False)
    dt: float = field(repr=False)

    @property
    def kappa(self) -> int:
        return self.realization.kappa

    @property
    def starts_positive(self) -> bool:
        """Sign of g(0+): the process is negative just after x = -1/2."""
        return self.phi < 0

    def scaled(self, factor: float, uid: int | None = None) -> "Waveform":
        return replace(
            self,
            uid=self.uid if uid is None else uid,
            phi=self.phi * factor,
            samples=_frozen(self.samples * factor),
            sign_seq=_frozen(self.sign_seq * (1 if factor > 0 else -1)),
            energy=self.energy * factor * factor,
            dense_trace=_frozen(self.dense_trace * factor),
        )


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


def sign(x: np.ndarray) -> np.ndarray:
    """Binary sign with sgn(0) = +1."""
    return np.where(np.asarray(x) >= 0, 1, -1).astype(np.int8)


def truncate_realization(
    r: ProcessRealization,
    T_N: float,
    window: WindowSpec,
    phi: float,
    n: int,
    resolution: int = DEFAULT_RESOLUTION,
    uid: int = 0,
    labels: Sequence[int] = (),
) -> Waveform:
    """Cut realization ``r`` to (-1/2, kappa - 1/2], scale it, and take its samples."""
    if phi == 0:
        raise ValueError("phi must be nonzero")
    if not isinstance(window, WindowSpec):
        raise TypeError("window must be a WindowSpec")
    kappa = r.kappa
    grid = _grid(kappa, n, resolution)
    bg_nodes, bg_mids = _background(kappa, n, resolution, r.depth)
    cs = r.crossings

    def values(x, bg):
        frac = (x + 0.5) / kappa
        return phi * inner_factor(cs, x) * bg * window(frac)

    g_nodes = values(grid.nodes, bg_nodes)
    g_mids = values(grid.mids, bg_mids)
    h_t = grid.h * T_N
    idx = np.arange(kappa * n)[:, None] * grid.per_sub + np.arange(grid.per_sub + 1)[None, :]
    samples = integrate.simpson(g_nodes[idx], dx=h_t, axis=-1).reshape(kappa, n)
    energy = float(integrate.simpson(g_nodes**2, dx=h_t))
    if energy <= 0:
        raise ValueError("waveform has zero energy")
    tiny = np.abs(samples) < SIGN_FLOOR * math.sqrt(energy)
    if np.any(tiny):
        k, l = np.argwhere(tiny)[0]
        raise SignDeterminationError(f"sample ({k}, {l}) of waveform {uid} is {samples[k, l]:.3e}; sign undetermined")
    return Waveform(
        uid=uid,
        labels=tuple(labels),
        realization=r,
        phi=float(phi),
        T_N=float(T_N),
        n=n,
        window=window,
        samples=_frozen(samples),
        sign_seq=_frozen(sign(samples)),
        energy=energy,
        dense_trace=_frozen(g_mids),
        dt=h_t,
    )


@dataclass(frozen=True, eq=False)
class WaveformSet:
    """An ordered waveform set; paired sets list the g(0+)<0 half first."""

    members: tuple[Waveform, ...]
    pattern: ZeroCrossingPattern
    kappa: int
    T_N: float
    window: WindowSpec
    paired: bool
    depth: int = DEFAULT_DEPTH
    resolution: int = DEFAULT_RESOLUTION

    @property
    def m(self) -> int:
        return len(self.members)

    @property
    def n(self) -> int:
        return self.pattern.n

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i: int) -> Waveform:
        return self.members[i]

    @property
    def samples(self) -> np.ndarray:
        """(m, kappa*n) array of integrate-and-dump samples."""
        return np.stack([w.samples.ravel() for w in self.members])

    @property
    def sign_seqs(self) -> np.ndarray:
        return np.stack([w.sign_seq.ravel() for w in self.members])

    @property
    def energies(self) -> np.ndarray:
        return np.array([w.energy for w in self.members])

    @property
    def power(self) -> float:
        """Average power of the channel input for uniform symbols."""
        return float(self.energies.sum() / (self.m * self.kappa * self.T_N))

    def pairs(self) -> list[tuple[int, int]]:
        """Index pairs (g(0+)<0 member, its opposite)."""
        by_labels: dict[tuple, dict[bool, int]] = {}
        for i, w in enumerate(self.members):
            by_labels.setdefault(w.labels, {})[w.starts_positive] = i
        out = []
        for slot in by_labels.values():
            if False in slot and True in slot:
                out.append((slot[False], slot[True]))
        return sorted(out)

    def subset(self, pair_indices: Iterable[int] | None = None, member_indices: Iterable[int] | None = None) -> "WaveformSet":
        """Sub-set by pair positions (keeps the pairing) or by raw member indices."""
        if pair_indices is not None:
            pairs = self.pairs()
            chosen = [pairs[p] for p in pair_indices]
            idx = [a for a, _ in chosen] + [b for _, b in chosen]
            paired = self.paired
        else:
            idx = list(member_indices or [])
            paired = False
        members = tuple(self.members[i] for i in idx)
        return replace(self, members=members, paired=paired and _is_paired(members))

    def with_members(self, members: Sequence[Waveform]) -> "WaveformSet":
        return replace(self, members=tuple(members), paired=_is_paired(members))


def _is_paired(members: Sequence[Waveform]) -> bool:
    if len(members) % 2:
        return False
    seen: dict[tuple, list[bool]] = {}
    for w in members:
        seen.setdefault(w.labels, []).append(w.starts_positive)
    return all(sorted(v) == [False, True] for v in seen.values())


def is_admissible(seq, rule: str = "parity") -> bool:
    """Sign-sequence admissibility for a kappa x n matrix over {+1, -1}.

    ``parity``: each row flips at most once, and only from the boundary sign of
    its interval to the opposite sign, with boundary signs alternating across
    intervals. Equivalently some global sign sigma makes row k times
    sigma * (-1)^k non-increasing.

    ``transition``: at most one flip per row, where the change between the last
    entry of row k and the first of row k+1 is charged to row k. This rejects
    sequences whose crossing sits just after an interval boundary.
    """
    s = np.asarray(seq)
    if s.ndim == 1:
        s = s[None, :]
    if rule == "transition":
        flips = (np.diff(s, axis=1) != 0).sum(axis=1)
        flips[:-1] += s[:-1, -1] != s[1:, 0]
        return bool(np.all(flips <= 1))
    if rule != "parity":
        raise ValueError(f"unknown admissibility rule {rule!r}")
    parity = np.where(np.arange(s.shape[0]) % 2 == 0, 1, -1)[:, None]
    for sigma in (1, -1):
        rows = s * parity * sigma
        if np.all(np.diff(rows, axis=1) <= 0):
            return True
    return False


def certify_uniqueness(wset: WaveformSet | Sequence[Waveform]) -> bool:
    members = wset.members if isinstance(wset, WaveformSet) else wset
    keys = {w.sign_seq.tobytes() for w in members}
    return len(keys) == len(members)


def boundary_labels(sign_seq: np.ndarray, starts_positive: bool) -> tuple[int, ...]:
    """Recover per-interval crossing labels from a noiseless sign sequence.

    Label l of interval k is the number of samples that still carry the
    boundary sign of that interval.
    """
    s = np.asarray(sign_seq)
    start = 1 if starts_positive else -1
    out = []
    for k, row in enumerate(s):
        b = start * (-1) ** k
        out.append(int(np.sum(row == b)))
    return tuple(out)


def _label_product(pattern: ZeroCrossingPattern, kappa: int) -> list[tuple[int, ...]]:
    return list(itertools.product(pattern.labels, repeat=kappa))


def build_full_set(
    pattern: ZeroCrossingPattern,
    kappa: int,
    T_N: float = 1.0,
    window: WindowSpec = WindowSpec(),
    depth: int = DEFAULT_DEPTH,
    resolution: int = DEFAULT_RESOLUTION,
    drop_duplicates: bool = True,
) -> WaveformSet:
    """All antipodal pairs obtainable from ``pattern`` over ``kappa`` intervals.

    The g(0+)<0 half is built with phi = +1 in lexicographic label order, the
    opposite half follows in the same order. For the nonuniform pattern the
    constant-row members with first label 0 (and their opposites) duplicate
    sign sequences of other members and are dropped unless
    ``drop_duplicates`` is False, in which case the set is returned uncertified.
    """
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    n = pattern.n
    minus = []
    for labels in _label_product(pattern, kappa):
        if drop_duplicates and pattern.kind is PatternKind.NONUNIFORM:
            if all(l in (0, n) for l in labels) and labels[0] == 0:
                continue
        r = ProcessRealization(CrossingSequence.from_labels(pattern, labels), depth)
        minus.append(truncate_realization(r, T_N, window, 1.0, n, resolution, uid=len(minus), labels=labels))
    half = len(minus)
    plus = [w.scaled(-1.0, uid=half + i) for i, w in enumerate(minus)]
    wset = WaveformSet(tuple(minus + plus), pattern, kappa, T_N, window, True, depth, resolution)
    if not drop_duplicates:
        return wset
    for w in minus:
        if boundary_labels(w.sign_seq, False) != w.labels:
            raise UniquenessError(f"labels of waveform {w.uid} not recoverable from its sign sequence")
    if not certify_uniqueness(wset):
        raise UniquenessError("sign sequences collide; lambda too large or quadrature failed")
    return wset


def normalize_energy(wset: WaveformSet, epsilon: float = 1.0) -> WaveformSet:
    """Rescale every phi_u so that each waveform carries energy ``epsilon``."""
    if epsilon <= 0:
        raise ValueError("target energy must be positive")
    members = []
    for w in wset.members:
        if w.energy <= 0:
            raise ValueError(f"waveform {w.uid} has zero energy")
        members.append(w.scaled(math.sqrt(epsilon / w.energy)))
    return replace(wset, members=tuple(members))


def full_set_size(pattern: ZeroCrossingPattern, kappa: int) -> int:
    if pattern.kind is PatternKind.UNIFORM:
        return 2 * pattern.n**kappa
    return 2 * (pattern.n + 1) ** kappa - 2**kappa


def standard_set(
    kind: PatternKind | str,
    n: int,
    kappa: int,
    alpha: float = 0.0,
    lam: float = 0.25,
    T_N: float = 1.0,
    energy: float = 1.0,
    **kw,
) -> WaveformSet:
    """Convenience: certified, energy-normalized full set."""
    kind = PatternKind(kind)
    pattern = make_pattern(kind, n, lam if kind is PatternKind.NONUNIFORM else None)
    return normalize_energy(build_full_set(pattern, kappa, T_N, windowed(alpha), **kw), energy)


CONTAINER_FORMAT = "onebitlink.waveform_set"
CONTAINER_VERSION = 1


def set_to_json(wset: WaveformSet) -> str:
    """Versioned JSON; floats are written with full repr precision."""
    p = wset.pattern
    doc = {
        "format": CONTAINER_FORMAT,
        "version": CONTAINER_VERSION,
        "pattern": {"kind": p.kind.value, "n": p.n, "lam": p.lam},
        "kappa": wset.kappa,
        "T_N": wset.T_N,
        "window": {"kind": wset.window.kind.value, "alpha": wset.window.alpha},
        "depth": wset.depth,
        "resolution": wset.resolution,
        "paired": wset.paired,
        "members": [
            {
                "uid": w.uid,
                "labels": list(w.labels),
                "crossings": list(w.realization.crossings.inner),
                "phi": w.phi,
                "energy": w.energy,
                "samples": w.samples.tolist(),
                "sign_seq": w.sign_seq.tolist(),
            }
            for w in wset.members
        ],
    }
    return json.dumps(doc)


def set_from_json(text: str) -> WaveformSet:
    doc = json.loads(text)
    if doc.get("format") != CONTAINER_FORMAT or doc.get("version") != CONTAINER_VERSION:
        raise ValueError(f"not a version-{CONTAINER_VERSION} waveform-set container")
    pd = doc["pattern"]
    pattern = make_pattern(pd["kind"], pd["n"], pd["lam"])
    window = WindowSpec(doc["window"]["kind"], doc["window"]["alpha"])
    members = []
    for md in doc["members"]:
        r = ProcessRealization(CrossingSequence(tuple(md["crossings"])), doc["depth"])
        w = truncate_realization(r, doc["T_N"], window, md["phi"], pattern.n, doc["resolution"], md["uid"], md["labels"])
        stored = np.array(md["samples"], dtype=float)
        if not np.allclose(w.samples, stored, rtol=1e-9, atol=1e-15):
            raise ValueError(f"member {md['uid']} samples disagree with its crossings")
        if not np.array_equal(w.sign_seq, np.array(md["sign_seq"])):
            raise ValueError(f"member {md['uid']} sign sequence disagrees with its samples")
        members.append(replace(w, samples=_frozen(stored), energy=float(md["energy"])))
    return WaveformSet(tuple(members), pattern, doc["kappa"], doc["T_N"], window, doc["paired"], doc["depth"], doc["resolution"])


def save_set(wset: WaveformSet, path) -> None:
    Path(path).write_text(set_to_json(wset))


def load_set(path) -> WaveformSet:
    return set_from_json(Path(path).read_text())
