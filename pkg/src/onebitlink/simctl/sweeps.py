"""Experiment drivers: rate, capacity, BER and high-SNR asymptote sweeps."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy import stats

from ..coding.bicm import BicmConfig, FrameLayout, bicm_id_run
from ..coding.labeling import Labeling, label_heuristic, random_labeling
from ..coding.ldpc import LdpcCode, SumProductDecoder, ldpc_construct
from ..dmc import Selection, blahut_arimoto, build_dmc, mutual_information, random_pair_subset, rate_at, select_subset
from ..process import PatternKind, make_pattern
from ..waveforms import WaveformSet, build_full_set, normalize_energy, windowed
from .channel import ChannelRealization, make_rng, transmit_receive
from .config import SimConfig


@lru_cache(maxsize=64)
def _cached_set(kind: str, n: int, lam: float, kappa: int, alpha: float, T_N: float, energy: float,
                depth: int, resolution: int, certified: bool) -> WaveformSet:
    k = PatternKind(kind)
    pattern = make_pattern(k, n, lam if k is PatternKind.NONUNIFORM else None)
    raw = build_full_set(pattern, kappa, T_N, windowed(alpha), depth, resolution, drop_duplicates=certified)
    return normalize_energy(raw, energy)


def full_set(cfg: SimConfig, *, n: int | None = None, kappa: int | None = None, alpha: float | None = None) -> WaveformSet:
    """Certified full set (duplicate sign sequences removed)."""
    return _cached_set(cfg.pattern, n or cfg.n, cfg.lam, kappa or cfg.kappa, cfg.alpha if alpha is None else alpha,
                       cfg.T_N, cfg.energy, cfg.depth, cfg.resolution, True)


def candidate_set(cfg: SimConfig, *, n: int | None = None, kappa: int | None = None, alpha: float | None = None) -> WaveformSet:
    """Every antipodal pair the pattern yields; selection skips colliding pairs."""
    return _cached_set(cfg.pattern, n or cfg.n, cfg.lam, kappa or cfg.kappa, cfg.alpha if alpha is None else alpha,
                       cfg.T_N, cfg.energy, cfg.depth, cfg.resolution, False)


def select(cfg: SimConfig, m: int | None = None, **kw) -> Selection:
    return select_subset(candidate_set(cfg, **kw), cfg.eta, m or cfg.m, pad=cfg.pad)


def write_csv(rows: list[dict], path: str | Path) -> None:
    if not rows:
        raise ValueError("nothing to write")
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})


def sweep_rate(cfg: SimConfig) -> list[dict]:
    """Information rate and spectral efficiency over SNR, kappa, alpha and m."""
    rows = []
    for kappa in cfg.kappas:
        for alpha in cfg.alphas:
            pool = candidate_set(cfg, kappa=kappa, alpha=alpha)
            for half in cfg.m_halves:
                if 2 * half > pool.m:
                    continue
                try:
                    sel = select_subset(pool, cfg.eta, 2 * half, pad=cfg.pad)
                except ValueError:
                    continue
                for snr in cfg.snr_db:
                    s = rate_at(sel, snr)
                    rows.append({
                        "snr_db": float(snr), "pattern": cfg.pattern, "n": cfg.n, "kappa": kappa, "alpha": float(alpha),
                        "m": s.m, "I_bits": s.I_bits, "R_bits_per_s": s.R, "W_eta": s.W_eta, "SE": s.SE,
                        "bits_per_dim": s.bits_per_dim,
                    })
    return rows


def best_by_snr(rows: Iterable[dict]) -> dict[float, dict]:
    best: dict[float, dict] = {}
    for r in rows:
        b = best.get(r["snr_db"])
        if b is None or r["SE"] > b["SE"]:
            best[r["snr_db"]] = r
    return best


def capacity_sweep(cfg: SimConfig) -> list[dict]:
    """Capacity of the full-set DMC against uniform-input rates of random pair subsets."""
    wset = full_set(cfg)
    half = cfg.m // 2 if cfg.m else len(wset.pairs()) // 2
    rows = []
    for i, snr in enumerate(cfg.snr_db):
        C, _ = blahut_arimoto(build_dmc(wset, snr))
        rng = make_rng(cfg.seed, 1000 + i)
        mis = np.array([
            mutual_information(build_dmc(random_pair_subset(wset, half, rng), snr))[0] for _ in range(cfg.random_subsets)
        ])
        rows.append({
            "snr_db": float(snr), "m_full": wset.m, "capacity_bits": C, "m_subset": 2 * half,
            "mi_min": float(mis.min()), "mi_mean": float(mis.mean()), "mi_max": float(mis.max()),
            "spread_over_mean": float((mis.max() - mis.min()) / mis.mean()),
        })
    return rows


@dataclass(frozen=True, eq=False)
class BerSetup:
    selection: Selection
    labeling: Labeling
    code: LdpcCode
    layout: FrameLayout
    bicm: BicmConfig

    @property
    def coded_bits_per_dim(self) -> float:
        """Nominal coded rate per real dimension: R_code q / (kappa T_N) / (2 W_eta)."""
        s = self.selection.subset
        R = self.code.rate * self.labeling.q / (s.kappa * s.T_N)
        return R / (2.0 * self.selection.W_eta)


def ber_setup(cfg: SimConfig, labeling_seed: int | None = None) -> BerSetup:
    sel = select(cfg)
    if cfg.labeling == "proposed":
        lab = label_heuristic(sel.subset, cap=cfg.label_cap, greedy=cfg.greedy_labeling, seed=cfg.seed)
    else:
        lab = random_labeling(sel.subset, make_rng(cfg.seed if labeling_seed is None else labeling_seed, 2000))
    code = _cached_code(cfg.code_n, cfg.code_k, cfg.col_weight, cfg.code_seed)
    layout = FrameLayout.build(code, lab, cfg.interleaved)
    bicm = BicmConfig(cfg.outer_iterations, cfg.decoder_iterations, cfg.interleaved, cfg.feedback)
    return BerSetup(sel, lab, code, layout, bicm)


@lru_cache(maxsize=8)
def _cached_code(N: int, K: int, wc: int, seed: int) -> LdpcCode:
    return ldpc_construct(N, K, wc, seed)


@lru_cache(maxsize=8)
def _cached_decoder(N: int, K: int, wc: int, seed: int) -> SumProductDecoder:
    return SumProductDecoder(_cached_code(N, K, wc, seed))


def run_frames(setup: BerSetup, cfg: SimConfig, snr_db: float, batch_index: int, frames: int, snr_index: int = 0) -> dict:
    """One reproducible batch of frames; streams keyed by (seed, snr index, batch index)."""
    sub = setup.selection.subset
    rng = make_rng(cfg.seed, snr_index, batch_index, 0)
    msg = rng.integers(0, 2, size=(frames, setup.code.K_code), dtype=np.uint8)
    u = setup.layout.symbols(setup.code.encode(msg))
    ch = ChannelRealization.at_snr(sub, snr_db, cfg.seed, snr_index, batch_index, 1)
    signs = transmit_receive(u, sub, ch)
    dec = _cached_decoder(cfg.code_n, cfg.code_k, cfg.col_weight, cfg.code_seed)
    res = bicm_id_run(setup.bicm, setup.layout, signs, sub.samples, ch.sigma, dec)
    err = res.decoded != msg
    err1 = res.first_pass != msg
    return {
        "frames": frames, "bit_errors": int(err.sum()), "frame_errors": int(err.any(axis=1).sum()),
        "first_bit_errors": int(err1.sum()), "bits": int(err.size), "frame_bit_errors": err.sum(axis=1),
    }


def clopper_pearson(k: int, n: int, conf: float = 0.95) -> tuple[float, float]:
    a = 1 - conf
    lo = 0.0 if k == 0 else float(stats.beta.ppf(a / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - a / 2, k + 1, n - k))
    return lo, hi


def sweep_ber(cfg: SimConfig, setup: BerSetup | None = None) -> list[dict]:
    """BICM-ID Monte Carlo; each SNR point stops at max_frame_errors or max_frames."""
    setup = setup or ber_setup(cfg)
    rows = []
    for i, snr in enumerate(cfg.snr_db):
        frames = bit_err = frame_err = first_err = bits = 0
        b = 0
        while frame_err < cfg.max_frame_errors and frames < cfg.max_frames:
            todo = min(cfg.batch_frames, cfg.max_frames - frames)
            r = run_frames(setup, cfg, snr, b, todo, i)
            frames += r["frames"]
            bit_err += r["bit_errors"]
            frame_err += r["frame_errors"]
            first_err += r["first_bit_errors"]
            bits += r["bits"]
            b += 1
        lo, hi = clopper_pearson(bit_err, bits)
        rows.append({
            "snr_db": float(snr), "frames": frames, "bit_errors": bit_err, "ber": bit_err / bits,
            "frame_errors": frame_err, "ber_ci_low": lo, "ber_ci_high": hi, "first_pass_ber": first_err / bits,
            "coded_bits_per_dim": setup.coded_bits_per_dim, "m": setup.selection.m, "d_sum": setup.labeling.d_sum,
        })
    return rows


def asymptote_table(cfg: SimConfig) -> list[dict]:
    """Best noiseless-limit SE over alpha and m <= 2 max_half for each n and eta, with the log2(n_o + 1) benchmark."""
    rows = []
    W_N = 1.0 / (2.0 * cfg.T_N)
    for eta in cfg.etas:
        for n in cfg.n_values:
            best = None
            for alpha in cfg.alphas:
                pool = candidate_set(cfg, n=n, alpha=alpha)
                for half in range(1, min(len(pool.pairs()), cfg.max_half) + 1):
                    try:
                        sel = select_subset(pool, eta, 2 * half, pad=cfg.pad)
                    except ValueError:
                        break
                    if best is None or sel.SE > best[0].SE:
                        best = (sel, alpha)
            sel, alpha = best
            n_o = n * W_N / sel.W_eta
            rows.append({
                "eta": float(eta), "pattern": cfg.pattern, "n": n, "kappa": cfg.kappa, "alpha": float(alpha), "m": sel.m,
                "W_eta": sel.W_eta, "n_o": n_o, "SE": sel.SE, "bits_per_dim": sel.bits_per_dim,
                "benchmark_bits_per_dim": math.log2(n_o + 1), "benchmark_SE": 2.0 * math.log2(n_o + 1),
            })
    return rows


def log_growth_fit(rows: list[dict], eta: float, key: str = "SE") -> tuple[float, float]:
    """Least-squares slope and intercept of ``key`` (default SE in bits/s/Hz) against log2(n_o)."""
    pts = [(math.log2(r["n_o"]), r[key]) for r in rows if r["eta"] == eta]
    x, y = np.array(pts).T
    slope, icept = np.polyfit(x, y, 1)
    return float(slope), float(icept)
