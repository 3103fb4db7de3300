import csv
import json

import numpy as np
import pytest

from onebitlink.process import make_pattern
from onebitlink.spectral import (
    ContainmentError,
    bits_per_dimension,
    effective_oversampling,
    grid_spacing,
    periodogram_estimate,
    power_containment_bandwidth,
    psd,
    relative_l2,
    spectral_efficiency,
    with_bandwidth,
)
from onebitlink.waveforms import WindowSpec, build_full_set, standard_set, windowed


@pytest.fixture(scope="module")
def spec43(uniform43):
    return psd(uniform43)


def test_power_of_normalized_set_is_energy_over_duration(uniform43, spec43):
    assert spec43.power == pytest.approx(1.0 / 3.0, rel=2e-3)
    assert spec43.spectral_power == pytest.approx(spec43.power, rel=5e-3)
    assert np.all(spec43.psd >= 0)


def test_frequency_grid(spec43):
    assert spec43.df == pytest.approx(grid_spacing(3, 1.0, 16), rel=1e-12)
    assert spec43.freq_grid[0] == 0.0


def test_parseval_per_waveform(uniform43):
    for w in uniform43.members[::9]:
        L = w.dense_trace.size
        G = np.abs(np.fft.fft(w.dense_trace, n=16 * L) * w.dt) ** 2
        df = 1.0 / (16 * L * w.dt)
        assert G.sum() * df == pytest.approx(w.energy, rel=1e-3)


def test_psd_is_even_in_frequency(uniform43):
    # a real trace has a conjugate-symmetric transform, so |G(-f)|^2 = |G(f)|^2
    tr = uniform43[5].dense_trace
    G = np.fft.fft(tr, n=8 * tr.size)
    assert np.allclose(np.abs(G[1:]) ** 2, np.abs(G[1:][::-1]) ** 2, rtol=1e-9, atol=1e-12)


def test_containment_fraction_and_monotonicity(spec43):
    ws = [power_containment_bandwidth(spec43, e) for e in (0.5, 0.8, 0.9, 0.95, 0.99)]
    assert ws == sorted(ws)
    for eta in (0.9, 0.95):
        W = power_containment_bandwidth(spec43, eta)
        assert spec43.in_band(W) / spec43.spectral_power == pytest.approx(eta, rel=1e-6)
    assert ws[3] > spec43.W_N


def test_bandwidth_near_one_stays_on_grid(spec43):
    W = power_containment_bandwidth(spec43, 1 - 1e-12)
    assert W <= spec43.freq_grid[-1]
    with pytest.raises(ValueError):
        power_containment_bandwidth(spec43, 1.0)


def test_empty_spectrum_has_no_containment_bandwidth():
    from onebitlink.spectral import SpectrumResult

    f = np.linspace(0, 1, 11)
    with pytest.raises(ContainmentError):
        power_containment_bandwidth(SpectrumResult(f, np.zeros_like(f), 0.0, 1.0, 1), 0.5)


def test_bandwidth_shrinks_with_truncation_length():
    ws = [power_containment_bandwidth(psd(standard_set("uniform", 4, k)), 0.95) for k in (1, 2, 3)]
    assert ws[0] > ws[1] > ws[2]


def test_oversampling_factor(spec43):
    s = with_bandwidth(spec43, 0.95)
    assert s.n_o == pytest.approx(effective_oversampling(4, 1.0, s.W_eta))
    assert 0 < s.n_o < 4
    assert set(s.summary()) == {"P", "W_eta", "eta", "W_N", "n_o"}


def test_unpaired_set_rejected(uniform43):
    with pytest.raises(ValueError):
        psd(uniform43.subset(member_indices=[0, 1, 2]))


def test_windowed_psd_equals_spectrum_of_windowed_traces():
    pattern = make_pattern("uniform", 3)
    hard = build_full_set(pattern, 2, window=WindowSpec(), depth=2000)
    soft = build_full_set(pattern, 2, window=windowed(0.5), depth=2000)
    w0 = hard[0]
    L = w0.dense_trace.size
    t = (np.arange(L) + 0.5) * w0.dt
    h = windowed(0.5)(t / (2 * w0.T_N))
    traces = np.stack([w.dense_trace for w in hard]) * h
    S = (np.abs(np.fft.rfft(traces, n=16 * L, axis=-1) * w0.dt) ** 2).sum(0) / (hard.m * 2)
    got = psd(soft)
    assert np.allclose(got.psd, S, rtol=1e-9, atol=1e-15)


def test_periodogram_matches_analytic(uniform43, spec43):
    est, emp = periodogram_estimate(uniform43, 10_000, seed=1)
    assert relative_l2(est, spec43) < 0.05
    assert emp == pytest.approx(spec43.power, rel=0.02)
    other, _ = periodogram_estimate(uniform43, 10_000, seed=2)
    assert relative_l2(est, other) < 0.1
    with pytest.raises(ValueError):
        periodogram_estimate(uniform43, 50, seed=0)


def test_efficiency_helpers():
    assert spectral_efficiency(0.0, 1.0) == 0.0
    assert bits_per_dimension(2.0, 0.5) == 2.0
    with pytest.raises(ValueError):
        spectral_efficiency(1.0, 0.0)


def test_artifacts(tmp_path, spec43):
    s = with_bandwidth(spec43, 0.9)
    s.write_csv(tmp_path / "psd.csv")
    s.write_summary(tmp_path / "psd.json")
    rows = list(csv.reader(open(tmp_path / "psd.csv")))
    assert rows[0] == ["f_Hz", "S_f"] and len(rows) == s.psd.size + 1
    assert float(rows[7][1]) == s.psd[6]
    assert json.loads((tmp_path / "psd.json").read_text())["W_eta"] == s.W_eta
