"""Power spectral density, containment bandwidth and spectral efficiency of X(t)."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import optimize, signal

from .waveforms import WaveformSet

DEFAULT_PAD = 16


class ContainmentError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    """Two-sided PSD sampled at f >= 0 (S is even in f).

    ``power`` is computed in the time domain from the dense traces; the
    containment fraction is measured against the spectral integral so that the
    two never disagree by more than the quadrature error.
    """

    freq_grid: np.ndarray
    psd: np.ndarray
    power: float
    T_N: float
    n: int
    eta: float | None = None
    W_eta: float | None = None

    @property
    def W_N(self) -> float:
        return 1.0 / (2.0 * self.T_N)

    @property
    def df(self) -> float:
        return float(self.freq_grid[1] - self.freq_grid[0])

    @property
    def n_o(self) -> float | None:
        return None if self.W_eta is None else self.n * self.W_N / self.W_eta

    @property
    def spectral_power(self) -> float:
        """Trapezoid integral of S over the whole real line."""
        return 2.0 * float(np.trapezoid(self.psd, self.freq_grid))

    def in_band(self, W: float) -> float:
        """Integral of S over [-W, W] with S linear between grid points."""
        return 2.0 * _cumulative_linear(self.freq_grid, self.psd, W)

    def summary(self) -> dict:
        return {"P": self.power, "W_eta": self.W_eta, "eta": self.eta, "W_N": self.W_N, "n_o": self.n_o}

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["f_Hz", "S_f"])
            for f, s in zip(self.freq_grid, self.psd):
                w.writerow([repr(float(f)), repr(float(s))])

    def write_summary(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2))


def _cumulative_linear(f: np.ndarray, s: np.ndarray, W: float) -> float:
    if W <= f[0]:
        return 0.0
    if W >= f[-1]:
        return float(np.trapezoid(s, f))
    j = int(np.searchsorted(f, W, side="right")) - 1
    head = float(np.trapezoid(s[: j + 1], f[: j + 1]))
    h = W - f[j]
    slope = (s[j + 1] - s[j]) / (f[j + 1] - f[j])
    return head + s[j] * h + 0.5 * slope * h * h


def _check_uniform_traces(wset: WaveformSet) -> tuple[np.ndarray, float]:
    traces = np.stack([w.dense_trace for w in wset.members])
    dts = {w.dt for w in wset.members}
    if len(dts) != 1:
        raise ValueError("members use different trace resolutions")
    return traces, dts.pop()


def _spectra(traces: np.ndarray, dt: float, pad: int) -> np.ndarray:
    """|G_u(f)|^2 at f = k / (pad * L * dt), k = 0..pad*L/2."""
    L = traces.shape[-1]
    G = np.fft.rfft(traces, n=pad * L, axis=-1) * dt
    return np.abs(G) ** 2


def psd(wset: WaveformSet, pad: int = DEFAULT_PAD) -> SpectrumResult:
    """PSD of X(t) for IID uniform symbols drawn from a paired set.

    Antipodal pairing makes the mean waveform vanish, so only the average
    energy spectrum survives. The frequency spacing is 1 / (pad kappa T_N).
    """
    if not wset.paired:
        raise ValueError("PSD formula requires a set of antipodal pairs")
    traces, dt = _check_uniform_traces(wset)
    L = traces.shape[-1]
    dur = wset.kappa * wset.T_N
    S = _spectra(traces, dt, pad).sum(axis=0) / (wset.m * dur)
    f = np.arange(S.size) / (pad * L * dt)
    P = float(np.sum(traces**2) * dt / (wset.m * dur))
    return SpectrumResult(f, S, P, wset.T_N, wset.n)


def power_containment_bandwidth(spec: SpectrumResult, eta: float) -> float:
    """Smallest W such that the band [-W, W] holds a fraction eta of the power."""
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    f, S = spec.freq_grid, spec.psd
    total = float(np.trapezoid(S, f))
    if not total > 0:
        raise ContainmentError("spectrum carries no power on the grid")
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (S[1:] + S[:-1]) * np.diff(f))])
    target = eta * total
    j = int(np.searchsorted(cum, target, side="left"))
    if j >= cum.size:
        raise ContainmentError(f"grid holds at most fraction {cum[-1] / total:.6f}")
    if j == 0:
        return float(f[0])
    lo, hi = float(f[j - 1]), float(f[j])
    return float(optimize.bisect(lambda w: _cumulative_linear(f, S, w) - target, lo, hi, xtol=1e-15, rtol=1e-9))


def with_bandwidth(spec: SpectrumResult, eta: float) -> SpectrumResult:
    return replace(spec, eta=eta, W_eta=power_containment_bandwidth(spec, eta))


def spectral_efficiency(R: float, W_eta: float) -> float:
    """Bits/s/Hz; half of it is bits per real dimension."""
    if R < 0 or W_eta <= 0:
        raise ValueError("need R >= 0 and W_eta > 0")
    return R / W_eta


def bits_per_dimension(R: float, W_eta: float) -> float:
    return spectral_efficiency(R, W_eta) / 2.0


def simulate_input(wset: WaveformSet, num_symbols: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, float]:
    """Concatenated dense trace of X(t) for IID uniform symbols."""
    traces, dt = _check_uniform_traces(wset)
    u = rng.integers(0, wset.m, size=num_symbols)
    return u, traces[u].ravel(), dt


def periodogram_estimate(
    wset: WaveformSet, num_symbols: int, seed: int, pad: int = DEFAULT_PAD
) -> tuple[SpectrumResult, float]:
    """Welch estimate of the PSD from a simulated symbol stream.

    Segments span ``pad`` symbol slots so the frequency grid coincides with
    :func:`psd`; consecutive segments overlap by half a segment, rectangular
    taper. Returns the estimate and the empirical time-average power.
    """
    if num_symbols < 100:
        raise ValueError("num_symbols must be >= 100")
    if num_symbols < pad:
        raise ValueError("need at least one full segment")
    rng = np.random.default_rng(seed)
    _, x, dt = simulate_input(wset, num_symbols, rng)
    seg = pad * wset.members[0].dense_trace.size
    f, S = signal.welch(x, fs=1.0 / dt, window="boxcar", nperseg=seg, noverlap=seg // 2,
                        detrend=False, return_onesided=False, scaling="density")
    S = S[: seg // 2 + 1]
    f = f[: seg // 2 + 1]
    f[-1] = abs(f[-1])
    power = float(np.mean(x**2))
    return SpectrumResult(f, S, power, wset.T_N, wset.n), power


def relative_l2(a: SpectrumResult, b: SpectrumResult) -> float:
    if a.psd.shape != b.psd.shape or not np.allclose(a.freq_grid, b.freq_grid):
        raise ValueError("spectra on different grids")
    return float(np.linalg.norm(a.psd - b.psd) / np.linalg.norm(b.psd))


def effective_oversampling(n: int, T_N: float, W_eta: float) -> float:
    return n * (1.0 / (2.0 * T_N)) / W_eta


def grid_spacing(kappa: int, T_N: float, pad: int = DEFAULT_PAD) -> float:
    return 1.0 / (pad * kappa * T_N)


__all__ = [
    "SpectrumResult", "ContainmentError", "psd", "power_containment_bandwidth", "with_bandwidth",
    "spectral_efficiency", "bits_per_dimension", "periodogram_estimate", "relative_l2",
    "effective_oversampling", "grid_spacing", "simulate_input",
]
