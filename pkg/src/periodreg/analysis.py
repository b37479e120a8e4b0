"""Steady-state extraction, norms, and harmonic content of trajectories.

The closed loop converges to a T-periodic steady state; all quantitative
claims are statements about that limit cycle.  This module cuts the tail
window off a trajectory, computes the sup and per-period mean-square
norms there, and evaluates Fourier coefficients at exact frequencies by
direct trapezoid quadrature -- no FFT binning, so detuned oscillator
frequencies suffer no spectral leakage.  (An FFT-grid export is provided
separately for plot reproduction.)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SteadyWindow",
    "HarmonicSpectrum",
    "steady_window",
    "noisy_period_window",
    "norms",
    "fourier_at",
    "fft_spectrum",
    "sigma_scaling_check",
    "write_norms_csv",
    "NORMS_HEADER",
]


@dataclass(eq=False)
class SteadyWindow:
    """A tail slice of a trajectory spanning an integer number of periods."""

    times: np.ndarray
    e: np.ndarray
    t_start: float
    t_end: float
    period: float
    n_periods: int

    @property
    def length(self):
        return self.t_end - self.t_start


def steady_window(traj, T, n_periods=20, settle_fraction=0.5):
    """Last ``n_periods * T`` seconds of a trajectory, snapped to samples.

    Raises ValueError when the window would eat into the first
    ``settle_fraction`` of the run (trajectory too short to have settled).
    """
    if n_periods < 1:
        raise ValueError(f"n_periods must be >= 1, got {n_periods}")
    times = traj.times
    span = times[-1] - times[0]
    window = n_periods * T
    if window > (1.0 - settle_fraction) * span + 1e-9:
        raise ValueError(
            f"trajectory too short: window {window:g} s needs a run longer than "
            f"{window / (1.0 - settle_fraction):g} s to leave the settling portion out"
        )
    h = times[1] - times[0]
    count = int(round(window / h))
    i0 = len(times) - 1 - count
    return SteadyWindow(
        times=times[i0:],
        e=traj.e[i0:],
        t_start=float(times[i0]),
        t_end=float(times[-1]),
        period=float(T),
        n_periods=int(n_periods),
    )


def noisy_period_window(traj, T, seed):
    """One period chosen uniformly at random inside the last 30 seconds.

    Noisy runs have no deterministic steady state; tabulated noisy norms
    integrate over a single arbitrary late period, so the choice of
    period is seeded and reproducible.
    """
    times = traj.times
    t_end = times[-1]
    lo = max(times[0], t_end - 30.0)
    rng = np.random.default_rng(seed)
    start = rng.uniform(lo, t_end - T)
    h = times[1] - times[0]
    i0 = int(np.searchsorted(times, start))
    count = int(round(T / h))
    i0 = min(i0, len(times) - 1 - count)
    return SteadyWindow(
        times=times[i0 : i0 + count + 1],
        e=traj.e[i0 : i0 + count + 1],
        t_start=float(times[i0]),
        t_end=float(times[i0 + count]),
        period=float(T),
        n_periods=1,
    )


def norms(window):
    """(sup |e|, mean-square per period) over a steady window.

    The second value is (1/T) * integral of e^2 over one period, averaged
    across the window's periods with trapezoid quadrature.  Note the
    tabulated comparisons elsewhere report sqrt of this quantity (RMS).
    """
    sup = float(np.max(np.abs(window.e)))
    samples_per_period = int(round(window.period / (window.times[1] - window.times[0])))
    acc = 0.0
    for p in range(window.n_periods):
        sl = slice(p * samples_per_period, (p + 1) * samples_per_period + 1)
        acc += np.trapezoid(window.e[sl] ** 2, window.times[sl]) / window.period
    return sup, float(acc / window.n_periods)


@dataclass(eq=False)
class HarmonicSpectrum:
    """Fourier coefficients of e over a window, at explicit frequencies."""

    frequencies: np.ndarray       # rad/s
    cos_coeffs: np.ndarray
    sin_coeffs: np.ndarray
    magnitudes: np.ndarray

    def to_csv(self, path):
        data = np.column_stack(
            [self.frequencies, self.cos_coeffs, self.sin_coeffs, self.magnitudes]
        )
        np.savetxt(path, data, fmt="%.17g", delimiter=",",
                   header="freq_rad_s,cos,sin,magnitude", comments="")


def fourier_at(window, freqs):
    """Fourier coefficients at exact frequencies by trapezoid quadrature.

    Coefficient convention: (2/W) * integral(e * cos(w t)) over the
    window of length W (and likewise sin); the DC coefficient uses 1/W.
    Over an integer number of periods this is the standard Fourier-series
    coefficient of the periodic signal.
    """
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    t, e = window.times, window.e
    W = window.length
    cos_c = np.empty(len(freqs))
    sin_c = np.empty(len(freqs))
    for i, w in enumerate(freqs):
        if w == 0.0:
            cos_c[i] = np.trapezoid(e, t) / W
            sin_c[i] = 0.0
        else:
            cos_c[i] = 2.0 * np.trapezoid(e * np.cos(w * t), t) / W
            sin_c[i] = 2.0 * np.trapezoid(e * np.sin(w * t), t) / W
    return HarmonicSpectrum(
        frequencies=freqs,
        cos_coeffs=cos_c,
        sin_coeffs=sin_c,
        magnitudes=np.hypot(cos_c, sin_c),
    )


def fft_spectrum(window):
    """(freqs rad/s, amplitude) on the FFT grid of the window.

    Amplitudes are single-sided: 2|X_k|/N (DC term |X_0|/N), matching the
    Fourier-series magnitude for tones on the grid.
    """
    e = window.e[:-1]             # drop duplicated endpoint of the periodic window
    n = len(e)
    h = window.times[1] - window.times[0]
    X = np.fft.rfft(e)
    mags = np.abs(X) / n
    mags[1:] *= 2.0
    freqs = 2.0 * np.pi * np.fft.rfftfreq(n, d=h)
    return freqs, mags


def sigma_scaling_check(results):
    """Fitted bound and monotonicity verdict for the 1/sigma error law.

    ``results`` holds (sigma, sup_norm) pairs.  Returns (psi_hat,
    decreasing) where psi_hat = max sigma*sup (the smallest constant
    making sup <= psi_hat/sigma hold on the data) and ``decreasing``
    says whether sup strictly decreases as sigma grows.
    """
    pts = sorted((float(s), float(v)) for s, v in results)
    if len(pts) < 3:
        raise ValueError(f"need at least 3 sigma values, got {len(pts)}")
    psi_hat = max(s * v for s, v in pts)
    decreasing = all(pts[i + 1][1] < pts[i][1] for i in range(len(pts) - 1))
    return psi_hat, decreasing


NORMS_HEADER = "scenario,sigma,mu,n_o,omega_hat,sup,inf_l2,noisy"


def write_norms_csv(path, rows):
    """Write norm-report rows; each row is a dict with NORMS_HEADER's keys."""
    keys = NORMS_HEADER.split(",")
    with open(path, "w") as fh:
        fh.write(NORMS_HEADER + "\n")
        for row in rows:
            vals = []
            for key in keys:
                val = row[key]
                vals.append(f"{val:.17g}" if isinstance(val, float) else str(val))
            fh.write(",".join(vals) + "\n")
