"""Acceptance checks. Each test emits one PASS/FAIL line (see the terminal summary)."""
import itertools
import math
import time

import mpmath as mp
import numpy as np
import pytest
from scipy import stats

from onebitlink.coding.bicm import demod_llr
from onebitlink.coding.labeling import random_labeling
from onebitlink.dmc import (
    blahut_arimoto,
    build_dmc,
    heuristic_select,
    max_set_size,
    mutual_information,
    r_max,
    r_unif,
)
from onebitlink.process import CrossingSequence, ProcessRealization, eval_s, make_pattern, shift_equivalence_check
from onebitlink.simctl import sweeps
from onebitlink.simctl.config import SimConfig
from onebitlink.spectral import periodogram_estimate, psd, relative_l2
from onebitlink.waveforms import is_admissible, standard_set

pytestmark = pytest.mark.acceptance


def _rowwise_admissible(m):
    # one boundary sign per matrix, alternating by interval; each row is b..b then -b..-b
    kappa, n = m.shape
    for sigma in (1, -1):
        ok = True
        for k in range(kappa):
            b = sigma * (-1) ** k
            row = list(m[k])
            l = 0
            while l < n and row[l] == b:
                l += 1
            if any(v != -b for v in row[l:]):
                ok = False
                break
        if ok:
            return True
    return False


def test_combinatorics(report):
    t0 = time.time()
    bad = []
    for kappa in (1, 2, 3):
        for n in (1, 2, 3, 4):
            count = lib = 0
            for flat in itertools.product((1, -1), repeat=kappa * n):
                m = np.array(flat).reshape(kappa, n)
                count += _rowwise_admissible(m)
                lib += is_admissible(m)
            if not count == lib == max_set_size(kappa, n):
                bad.append((kappa, n, count, lib))
    dt = time.time() - t0
    ok = not bad and max_set_size(3, 4) == 242 and dt < 1.0
    assert report("combinatorics", ok, f"12 (kappa,n) cases, mismatches={bad}, (3,4)->{max_set_size(3, 4)}, {dt:.2f}s")


def test_euler_product(report):
    t0 = time.time()
    r = ProcessRealization(CrossingSequence((0.0,)), 10_000)
    t = np.linspace(-2, 2, 4001)
    err = float(np.max(np.abs(eval_s(r, t) - np.sin(np.pi * t) / np.pi)))
    dt = time.time() - t0
    assert report("euler product", err < 1e-3 and dt < 1.0, f"max |s - sin(pi t)/pi| = {err:.2e}, {dt:.2f}s")


def test_shift_equivalence(report):
    t0 = time.time()
    rng = np.random.default_rng(2024)
    worst, cs_ = 0.0, []
    for _ in range(10):
        kappa = int(rng.integers(1, 5))
        cs = CrossingSequence(tuple(k - 0.5 + float(rng.uniform(0.01, 1.0)) for k in range(kappa)))
        grid = np.linspace(-0.45, kappa - 0.55, 41)
        c, res = shift_equivalence_check(ProcessRealization(cs, 10_000), 1, grid)
        worst = max(worst, res)
        cs_.append(c)
    dt = time.time() - t0
    ok = worst < 1e-6 and all(0 < c < 9 for c in cs_) and dt < 10
    assert report("shift equivalence", ok, f"max residual {worst:.1e}, c1 in [{min(cs_):.3f}, {max(cs_):.3f}], {dt:.1f}s")


def test_psd_against_periodogram(report, uniform43):
    t0 = time.time()
    spec = psd(uniform43)
    est, power = periodogram_estimate(uniform43, 10_000, seed=7)
    err = relative_l2(est, spec)
    perr = abs(power / spec.power - 1)
    dt = time.time() - t0
    ok = err < 0.05 and perr < 0.02 and dt < 60
    assert report("PSD formula", ok, f"relative L2 {err:.3%}, power error {perr:.3%}, {dt:.1f}s")


def test_high_snr_limit(report, nonuniform43):
    t0 = time.time()
    I, _ = mutual_information(build_dmc(nonuniform43, 60.0))
    top = math.log2(242)
    dt = time.time() - t0
    ok = nonuniform43.m == 242 and top - 0.01 <= I <= top + 1e-12 and dt < 300
    assert report("high-SNR limit", ok, f"m={nonuniform43.m}, I={I:.6f} vs log2(242)={top:.6f}, {dt:.1f}s")


def test_rate_identities(report):
    worst = 0.0
    for kappa in range(1, 6):
        for n in range(1, 9):
            for T in (0.5, 1.0, 3.0):
                worst = max(worst, abs(r_max(kappa, n, T) - math.log2(max_set_size(kappa, n)) / (kappa * T)))
                worst = max(worst, abs(r_unif(kappa, n, T) - math.log2(n**kappa * 2) / (kappa * T)))
    # independent arithmetic: 2*5^3 - 2^3 = 242 and 4^3 * 2 = 128 symbols per 3 intervals
    a, b = r_max(3, 4, 1), r_unif(3, 4, 1)
    ok = worst < 1e-12 and round(a, 4) == 2.6396 and round(b, 4) == 2.3333
    ok &= abs(a - math.log(242, 2) / 3) < 1e-12 and abs(b - 7 / 3) < 1e-12
    assert report("rate identities", ok, f"max deviation {worst:.1e}, r_max={a:.4f}, r_unif={b:.4f}")


def test_selection_optimum(report):
    t0 = time.time()
    cfg = SimConfig()
    table = {}
    for alpha in (0.0, 0.1, 0.3):
        pool = sweeps.candidate_set(cfg, alpha=alpha)
        for half in (8, 16, 24, 32, 48, 64):
            table[(alpha, 2 * half)] = heuristic_select(pool, 25.0, 0.95, 2 * half).bits_per_dim
    (alpha, m), best = max(table.items(), key=lambda kv: kv[1])
    dt = time.time() - t0
    interior = 16 < m < 128
    ok = interior and 48 <= m <= 96 and abs(best - 1.4) <= 0.1 and dt < 1800
    by_m = {mm: round(max(v for (a, k), v in table.items() if k == mm), 3) for mm in (16, 32, 48, 64, 96, 128)}
    assert report("selection optimum", ok, f"best alpha={alpha} m={m} at {best:.4f} bits/dim; best per m {by_m}; {dt:.0f}s")


def test_random_subsets_below_capacity(report, uniform43):
    t0 = time.time()
    rows = []
    ok = True
    rng = np.random.default_rng(88)
    pairs = uniform43.pairs()
    for snr in (5.0, 15.0, 25.0):
        C, _ = blahut_arimoto(build_dmc(uniform43, snr))
        mis = []
        for _ in range(20):
            idx = np.sort(rng.choice(len(pairs), size=32, replace=False))
            mis.append(mutual_information(build_dmc(uniform43.subset(pair_indices=idx.tolist()), snr))[0])
        mis = np.array(mis)
        spread = (mis.max() - mis.min()) / mis.mean()
        ok &= bool(mis.max() <= C)
        if snr <= 15:
            ok &= bool(spread < 0.10)
        rows.append(f"{snr:.0f}dB C={C:.4f} max={mis.max():.4f} spread={spread:.2%}")
    dt = time.time() - t0
    ok &= dt < 1800
    assert report("subsets vs capacity", ok, "; ".join(rows) + f"; {dt:.0f}s")


def _oracle_rows(samples, sigma):
    mp.mp.dps = 40
    Q = lambda x: mp.erfc(x / mp.sqrt(2)) / 2
    m, d = samples.shape
    pr = [[(Q(mp.mpf(float(g)) / sigma), Q(-mp.mpf(float(g)) / sigma)) for g in row] for row in samples]
    rows = []
    for u in range(m):
        row = []
        for bits in itertools.product((0, 1), repeat=d):
            p = mp.mpf(1)
            for i, b in enumerate(bits):
                p *= pr[u][i][b]
            row.append(p)
        rows.append(row)
    return rows


def _oracle_mi(rows):
    m = len(rows)
    out = mp.mpf(0)
    for j in range(len(rows[0])):
        qj = mp.fsum(r[j] for r in rows) / m
        for r in rows:
            if r[j] > 0:
                out += r[j] * mp.log(r[j] / qj, 2) / m
    return float(out)


def _oracle_llr(rows, j_word, prior1, bits):
    m, q = bits.shape
    out = []
    for j in range(q):
        p = [mp.mpf(0), mp.mpf(0)]
        for u in range(m):
            w = rows[u][j_word]
            for jj in range(q):
                if jj != j:
                    w *= mp.mpf(prior1[jj]) if bits[u, jj] else 1 - mp.mpf(prior1[jj])
            p[bits[u, j]] += w
        out.append(float(mp.log(p[1]) - mp.log(p[0])))
    return np.array(out)


def test_small_instance_oracles(report):
    t0 = time.time()
    cases = [(kind, kappa, n) for kind in ("uniform", "nonuniform")
             for kappa in range(1, 9) for n in range(1, 9) if kappa * n <= 8]
    mi_err = llr_err = 0.0
    rng = np.random.default_rng(3)
    for kind, kappa, n in cases:
        wset = standard_set(kind, n, kappa)
        model = build_dmc(wset, 6.0)
        rows = _oracle_rows(wset.samples, mp.sqrt(mp.mpf(model.noise_var)))
        ref = _oracle_mi(rows)
        mi_err = max(mi_err, abs(mutual_information(model)[0] - ref) / max(ref, 1e-300))
        # demodulator on the largest power-of-two pair subset
        half = 2 ** int(math.log2(len(wset.pairs())))
        pick = np.sort(rng.choice(len(wset.pairs()), size=half, replace=False)).tolist()
        sub = wset.subset(pair_indices=pick)
        sub_model = build_dmc(sub, 6.0)
        sub_rows = _oracle_rows(sub.samples, mp.sqrt(mp.mpf(sub_model.noise_var)))
        lab = random_labeling(sub, rng)
        words = rng.integers(0, sub_model.num_outputs, size=4)
        priors = rng.uniform(0.05, 0.95, size=(4, lab.q))
        got = demod_llr(words, np.log(priors / (1 - priors)), sub_model, lab)
        for s in range(4):
            llr_err = max(llr_err, float(np.max(np.abs(got[s] - _oracle_llr(sub_rows, int(words[s]), priors[s], lab.bits)))))
    dt = time.time() - t0
    ok = mi_err < 1e-10 and llr_err < 1e-9
    assert report("DMC and LLR oracles", ok, f"{len(cases)} instances, MI rel err {mi_err:.1e}, LLR abs err {llr_err:.1e}, {dt:.0f}s")


PIN_DB = 22.0
PATTERNS = {
    "uniform": SimConfig(),
    "nonuniform": SimConfig(pattern="nonuniform", n=3, alpha=0.1),
}


def _frame_errors(setup, cfg, snr, frames, snr_index, batch=0):
    r = sweeps.run_frames(setup, cfg, snr, batch, frames, snr_index)
    return np.asarray(r["frame_bit_errors"]), r["bits"] // frames


@pytest.mark.slow
def test_coded_error_rate(report):
    t0 = time.time()
    ok = True
    parts = []
    for name, cfg in PATTERNS.items():
        setup = sweeps.ber_setup(cfg)
        # waterfall floor: some SNR <= 25 dB with BER < 1e-4 over >= 100 frames
        floor = {}
        for i, snr in enumerate((24.0, 25.0)):
            e, k = _frame_errors(setup, cfg, snr, 100, 10 + i)
            floor[snr] = e.sum() / (e.size * k)
        reached = min(floor.values()) < 1e-4
        # proposed labeling against 20 random labelings, 5 frames each, same SNR pin
        prop, k = _frame_errors(setup, cfg, PIN_DB, 100, 0)
        rand = []
        rcfg = cfg.replace(labeling="random")
        for j in range(20):
            e, _ = _frame_errors(sweeps.ber_setup(rcfg, labeling_seed=100 + j), rcfg, PIN_DB, 5, 0, batch=j)
            rand.append(e)
        rand = np.concatenate(rand)
        p_lab = stats.mannwhitneyu(prop, rand, alternative="less").pvalue
        better = prop.mean() < rand.mean() and p_lab < 0.05
        # interleaving: same messages and noise with and without the interleaver
        flat_cfg = cfg.replace(interleaved=False)
        flat, _ = _frame_errors(sweeps.ber_setup(flat_cfg), flat_cfg, PIN_DB, 100, 0)
        p_worse = stats.wilcoxon(prop, flat, alternative="greater", zero_method="zsplit").pvalue \
            if np.any(prop != flat) else 1.0
        not_worse = prop.mean() <= flat.mean() or p_worse >= 0.05
        ok &= reached and better and not_worse
        parts.append(
            f"{name}: BER@24/25dB {floor[24.0]:.1e}/{floor[25.0]:.1e}; @{PIN_DB:.0f}dB proposed {prop.sum() / (prop.size * k):.2e}"
            f" vs random {rand.sum() / (rand.size * k):.2e} (p={p_lab:.1e}); interleaved vs plain"
            f" {prop.sum() / (prop.size * k):.2e} vs {flat.sum() / (flat.size * k):.2e} (p_worse={p_worse:.2f})"
        )
    dt = time.time() - t0
    ok &= dt < 7200
    assert report("coded error rate", ok, " | ".join(parts) + f" | {dt:.0f}s")


@pytest.mark.slow
def test_logarithmic_growth(report):
    t0 = time.time()
    cfg = SimConfig(pattern="nonuniform", n=3, kappa=3, alphas=tuple(round(0.1 * i, 1) for i in range(11)),
                    n_values=(2, 3, 4, 5, 6), etas=(0.9, 0.95))
    rows = sweeps.asymptote_table(cfg)
    # the benchmark counts bits per real dimension; SE (bits/s/Hz) carries two dimensions per Hz
    below = all(r["SE"] <= r["benchmark_SE"] for r in rows)
    fits = {eta: sweeps.log_growth_fit(rows, eta) for eta in cfg.etas}
    per_dim = {eta: sweeps.log_growth_fit(rows, eta, "bits_per_dim")[0] for eta in cfg.etas}
    slopes_ok = all(0.8 <= s <= 1.2 for s, _ in fits.values())
    dt = time.time() - t0
    pts = ", ".join(f"n={r['n']}:{r['SE']:.3f}@n_o={r['n_o']:.2f}" for r in rows if r["eta"] == 0.9)
    slopes = ", ".join(f"eta={e}: {s:.3f} (per dim {per_dim[e]:.3f})" for e, (s, _) in fits.items())
    assert report("logarithmic growth", below and slopes_ok and dt < 3600,
                  f"SE slopes {slopes}; all SE/2 <= log2(n_o+1): {below}; eta=0.9 SE points {pts}; {dt:.0f}s")
