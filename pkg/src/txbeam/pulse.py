"""Transmitted waveform, its spectrum on the map bins, and band selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, EmptyBandError, InvalidArgumentError


@dataclass(frozen=True)
class Pulse:
    """A causal windowed sinusoid ``sin(2 pi f0 t)`` on ``[0, C / f0)``, or user samples.

    For ``kind == "sampled"`` the waveform is ``samples`` taken every
    ``sample_dt`` starting at t = 0.
    """

    f0: float
    cycles: float = 2.0
    kind: str = "windowed-sinusoid"
    samples: np.ndarray | None = None
    sample_dt: float | None = None

    def __post_init__(self) -> None:
        if not self.f0 > 0:
            raise InvalidArgumentError("pulse frequency must be positive")
        if self.kind == "windowed-sinusoid":
            if not self.cycles > 0:
                raise InvalidArgumentError("pulse must have a positive number of cycles")
        elif self.kind == "sampled":
            if self.samples is None or len(self.samples) == 0 or not self.sample_dt:
                raise InvalidArgumentError("sampled pulse needs samples and sample_dt")
        else:
            raise InvalidArgumentError(f"unknown pulse kind {self.kind!r}")

    @property
    def duration(self) -> float:
        if self.kind == "sampled":
            return len(self.samples) * self.sample_dt
        return self.cycles / self.f0

    def fractional_band(self, f_min: float, f_max: float) -> float:
        return (f_max - f_min) / self.f0

    def sampled(self, dt: float, num_samples: int) -> np.ndarray:
        """Waveform on ``t_n = n * dt``; raises if it does not fit."""
        if self.duration > num_samples * dt:
            raise CoverageError(
                f"pulse lasts {self.duration:g} s, axis holds only {num_samples * dt:g} s")
        t = np.arange(num_samples) * dt
        if self.kind == "sampled":
            ts = np.arange(len(self.samples)) * self.sample_dt
            return np.interp(t, ts, self.samples, left=0.0, right=0.0)
        return np.where(t < self.duration, np.sin(2 * np.pi * self.f0 * t), 0.0)


def load_pulse_file(path, f0: float) -> Pulse:
    """Two-column text file ``time_s amplitude``, resampled linearly to a uniform step.

    ``f0`` is the nominal centre frequency used for narrowband settings.
    """
    data = np.loadtxt(path, ndmin=2)
    if data.shape[1] != 2 or data.shape[0] < 2:
        raise InvalidArgumentError(f"{path}: expected two columns (time_s, amplitude)")
    t, a = data[:, 0], data[:, 1]
    if np.any(np.diff(t) <= 0):
        raise InvalidArgumentError(f"{path}: time column must be increasing")
    dt = float(np.min(np.diff(t)))
    # the first sample is taken as t = 0
    grid = t[0] + np.arange(int(np.floor((t[-1] - t[0]) / dt + 1e-9)) + 1) * dt
    return Pulse(f0=f0, kind="sampled", samples=np.interp(grid, t, a), sample_dt=dt)


@dataclass
class PulseSpectrum:
    freqs: np.ndarray
    values: np.ndarray
    mask: np.ndarray | None = None

    @property
    def kept(self) -> np.ndarray:
        return np.ones(self.freqs.size, bool) if self.mask is None else self.mask


def pulse_spectrum(p: Pulse, freqs, dt: float, n_fft: int) -> PulseSpectrum:
    """``I(f) = sum_n I(t_n) exp(-2 pi i f t_n) dt`` at ``freqs``.

    On-bin frequencies (multiples of ``1 / (n_fft dt)``) come from the FFT;
    any others fall back to a direct sum.
    """
    freqs = np.asarray(freqs, dtype=float)
    x = p.sampled(dt, n_fft)
    df = 1.0 / (n_fft * dt)
    k = np.rint(freqs / df)
    if np.allclose(k * df, freqs, rtol=0, atol=1e-9 * df) and k.min() >= 0 and k.max() <= n_fft // 2:
        vals = np.fft.rfft(x)[k.astype(int)] * dt
    else:
        t = np.arange(n_fft) * dt
        vals = np.exp(-2j * np.pi * np.outer(freqs, t)) @ x * dt
    return PulseSpectrum(freqs, vals)


def select_band(spec: PulseSpectrum, band: tuple[float, float], threshold_db: float = 40.0) -> np.ndarray:
    """Bins within ``threshold_db`` of the spectral peak and inside ``band``."""
    if not threshold_db > 0:
        raise InvalidArgumentError("threshold_db must be positive")
    mag = np.abs(spec.values)
    peak = mag.max() if mag.size else 0.0
    if peak == 0:
        raise EmptyBandError("pulse spectrum is identically zero")
    with np.errstate(divide="ignore"):
        level = 20 * np.log10(mag / peak)
    mask = (level >= -threshold_db) & (spec.freqs >= band[0]) & (spec.freqs <= band[1])
    if not mask.any():
        raise EmptyBandError(f"no bins within {threshold_db:g} dB of the peak in band {band}")
    return mask


def with_band(spec: PulseSpectrum, band, threshold_db: float = 40.0) -> PulseSpectrum:
    return PulseSpectrum(spec.freqs, spec.values, select_band(spec, band, threshold_db))
