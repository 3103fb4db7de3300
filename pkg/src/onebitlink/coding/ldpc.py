"""Regular LDPC codes: construction, systematic encoding and sum-product decoding.

LLRs follow L = log Pr(bit = 1) / Pr(bit = 0) throughout, so a positive value
favours a one.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

LLR_MAX = 30.0
_TANH_EDGE = 1.0 - 1e-15


class RankDeficiencyError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class LdpcCode:
    N_code: int
    K_code: int
    H: sparse.csr_matrix
    G: np.ndarray
    col_perm: np.ndarray
    col_weight: int
    seed: int

    @property
    def rate(self) -> float:
        return self.K_code / self.N_code

    @property
    def message_positions(self) -> np.ndarray:
        """Codeword positions that carry the message bits verbatim."""
        return self.col_perm[: self.K_code]

    def encode(self, msg: np.ndarray) -> np.ndarray:
        """Encode one message (K,) or a batch (B, K) of 0/1 bits."""
        m = np.asarray(msg, dtype=np.uint8)
        return (m @ self.G % 2).astype(np.uint8)

    def syndrome(self, c: np.ndarray) -> np.ndarray:
        c = np.atleast_2d(np.asarray(c, dtype=np.int64))
        return (self.H @ c.T).T % 2

    def extract(self, c: np.ndarray) -> np.ndarray:
        return np.asarray(c)[..., self.message_positions]

    def save(self, stem: str | Path) -> None:
        """Write ``stem.json`` (metadata) and ``stem.H.npz`` (sparse H)."""
        stem = Path(stem)
        sparse.save_npz(str(stem) + ".H.npz", self.H.tocsr())
        meta = {
            "format": "onebitlink.ldpc", "version": 1, "N_code": self.N_code, "K_code": self.K_code,
            "col_weight": self.col_weight, "seed": self.seed, "col_perm": self.col_perm.tolist(),
        }
        Path(str(stem) + ".json").write_text(json.dumps(meta))

    @classmethod
    def load(cls, stem: str | Path) -> "LdpcCode":
        meta = json.loads(Path(str(stem) + ".json").read_text())
        if meta.get("format") != "onebitlink.ldpc" or meta.get("version") != 1:
            raise ValueError("not a version-1 LDPC container")
        H = sparse.load_npz(str(stem) + ".H.npz").tocsr()
        Hd = H.toarray().astype(np.uint8)
        _, _, G, perm = _systematic(Hd)
        if not np.array_equal(perm, meta["col_perm"]):
            raise ValueError("stored column permutation does not match H")
        return cls(meta["N_code"], meta["K_code"], H, G, perm, meta["col_weight"], meta["seed"])


def _mackay_h(N: int, M: int, wc: int, rng: np.random.Generator) -> np.ndarray | None:
    """Column-by-column regular construction that refuses 4-cycles when it can."""
    if (N * wc) % M:
        raise ValueError("N * col_weight must be divisible by the number of checks")
    wr = N * wc // M
    H = np.zeros((M, N), dtype=np.uint8)
    deg = np.zeros(M, dtype=np.int64)
    share = np.zeros((M, M), dtype=bool)
    for j in range(N):
        picked: list[int] = []
        for _ in range(wc):
            open_rows = np.flatnonzero(deg < wr)
            open_rows = open_rows[~np.isin(open_rows, picked)]
            if open_rows.size == 0:
                return None
            clean = open_rows[~share[np.ix_(open_rows, picked)].any(axis=1)] if picked else open_rows
            pool = clean if clean.size else open_rows
            low = pool[deg[pool] == deg[pool].min()]
            picked.append(int(rng.choice(low)))
        for a in picked:
            H[a, j] = 1
            deg[a] += 1
            for b in picked:
                if a != b:
                    share[a, b] = True
    return H


def _systematic(H: np.ndarray) -> tuple[int, np.ndarray, np.ndarray, np.ndarray]:
    """GF(2) elimination; returns (rank, reduced H, generator, column permutation).

    The permutation lists information columns first and pivot columns last, so
    codeword positions ``perm[:K]`` carry the message.
    """
    A = H.copy()
    M, N = A.shape
    pivots: list[int] = []
    row = 0
    for col in range(N):
        if row == M:
            break
        hits = np.flatnonzero(A[row:, col]) + row
        if hits.size == 0:
            continue
        p = hits[0]
        if p != row:
            A[[row, p]] = A[[p, row]]
        others = np.flatnonzero(A[:, col])
        others = others[others != row]
        A[others] ^= A[row]
        pivots.append(col)
        row += 1
    rank = row
    A = A[:rank]
    pivot_set = set(pivots)
    info = np.array([c for c in range(N) if c not in pivot_set], dtype=np.int64)
    perm = np.concatenate([info, np.array(pivots, dtype=np.int64)])
    K = N - rank
    # A[:, pivots] is the identity; parity bits = A[:, info] @ msg
    P = A[:, info]
    G = np.zeros((K, N), dtype=np.uint8)
    G[:, info] = np.eye(K, dtype=np.uint8)
    G[:, pivots] = P.T
    return rank, A, G, perm


def ldpc_construct(N_code: int = 1024, K_code: int = 832, col_weight: int = 3, seed: int = 0, retries: int = 20) -> LdpcCode:
    if not 0 < K_code < N_code:
        raise ValueError("rate must lie in (0, 1)")
    if col_weight < 2:
        raise ValueError("column weight must be >= 2")
    M = N_code - K_code
    ss = np.random.SeedSequence(seed)
    for attempt, child in enumerate(ss.spawn(retries)):
        rng = np.random.Generator(np.random.Philox(child))
        H = _mackay_h(N_code, M, col_weight, rng)
        if H is None:
            continue
        rank, _, G, perm = _systematic(H)
        if rank != M:
            continue
        code = LdpcCode(N_code, K_code, sparse.csr_matrix(H.astype(np.int64)), G, perm, col_weight, seed)
        return code
    raise RankDeficiencyError(f"no full-rank regular H after {retries} attempts (seed {seed})")


def four_cycles(H) -> int:
    """Number of column pairs sharing more than one check."""
    Hd = H.toarray() if sparse.issparse(H) else np.asarray(H)
    overlap = Hd.T.astype(np.int64) @ Hd.astype(np.int64)
    np.fill_diagonal(overlap, 0)
    return int((overlap > 1).sum() // 2)


class SumProductDecoder:
    """Batched flooding sum-product decoder over a fixed parity-check matrix."""

    def __init__(self, code: LdpcCode):
        H = code.H.tocsr()
        self.code = code
        self.N = code.N_code
        rows, cols = H.nonzero()
        order = np.lexsort((cols, rows))
        self.edge_check = rows[order]
        self.edge_var = cols[order]
        E = self.edge_var.size
        self.E = E
        self.M = H.shape[0]
        self.var_sum = sparse.csr_matrix((np.ones(E), (self.edge_var, np.arange(E))), shape=(self.N, E))
        self.check_sum = sparse.csr_matrix((np.ones(E), (self.edge_check, np.arange(E))), shape=(self.M, E))

    def decode(self, llr: np.ndarray, iterations: int = 50, early_stop: bool = True) -> tuple[np.ndarray, np.ndarray, int]:
        """Return (posterior LLR, hard bits, iterations used) for a (B, N) batch."""
        L = -np.clip(np.atleast_2d(np.asarray(llr, dtype=float)), -LLR_MAX, LLR_MAX)  # log P0/P1 internally
        B = L.shape[0]
        c2v = np.zeros((B, self.E))
        post = L.copy()
        used = 0
        for it in range(iterations):
            used = it + 1
            v2c = post[:, self.edge_var] - c2v
            t = np.tanh(np.clip(v2c, -LLR_MAX, LLR_MAX) / 2.0)
            mag = np.maximum(np.abs(t), 1e-300)
            neg = (t < 0).astype(float)
            logmag = np.log(mag)
            tot_log = (self.check_sum @ logmag.T).T
            tot_neg = (self.check_sum @ neg.T).T
            ext_log = tot_log[:, self.edge_check] - logmag
            ext_sign = 1.0 - 2.0 * ((tot_neg[:, self.edge_check] - neg) % 2)
            prod = np.clip(ext_sign * np.exp(ext_log), -_TANH_EDGE, _TANH_EDGE)
            c2v = np.clip(2.0 * np.arctanh(prod), -LLR_MAX, LLR_MAX)
            post = L + (self.var_sum @ c2v.T).T
            if early_stop:
                hard = (post < 0).astype(np.int64)
                if not np.any(self.code.syndrome(hard)):
                    break
        hard = (post < 0).astype(np.uint8)
        return -post, hard, used
