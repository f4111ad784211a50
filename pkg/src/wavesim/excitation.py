"""Hanning-windowed tone bursts and sampling plans."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SampledSignal:
    dt: float
    samples: np.ndarray
    center_frequencies: tuple = ()
    duration: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) * self.dt

    @property
    def envelope_peak_time(self) -> float:
        """Centre of the Hanning window, i.e. when the burst envelope peaks."""
        return 0.5 * self.duration

    def padded(self, n: int) -> np.ndarray:
        if n < self.samples.size:
            raise ValueError(f"cannot pad {self.samples.size} samples into {n}")
        out = np.zeros(n)
        out[: self.samples.size] = self.samples
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "f"])
            for t, f in zip(self.times, self.samples):
                w.writerow([f"{t:.9g}", f"{f:.9g}"])


def _check_dt(dt: float, f_top: float) -> None:
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    if dt > 1.0 / (20.0 * f_top):
        warnings.warn(
            f"time step {dt:.3g} s gives fewer than 20 samples per period at {f_top:.3g} Hz",
            stacklevel=3,
        )


def _window_times(duration: float, dt: float, n_samples: int | None) -> np.ndarray:
    n_burst = int(math.floor(duration / dt + 1e-6)) + 1
    n = n_burst if n_samples is None else int(n_samples)
    return np.arange(n) * dt


def hanning_toneburst(
    fc: float, n_cycles: int, dt: float, n_samples: int | None = None
) -> SampledSignal:
    """``0.5 (1 - cos(2 pi fc t / n)) sin(2 pi fc t)`` on ``[0, n/fc]``, zero elsewhere."""
    if not fc > 0:
        raise ValueError(f"centre frequency must be positive, got {fc}")
    if int(n_cycles) != n_cycles or n_cycles < 1:
        raise ValueError(f"n_cycles must be a positive integer, got {n_cycles}")
    _check_dt(dt, fc)
    duration = n_cycles / fc
    t = _window_times(duration, dt, n_samples)
    phase = fc * t  # carrier cycles elapsed
    f = 0.5 * (1.0 - np.cos(2.0 * np.pi * phase / n_cycles)) * np.sin(2.0 * np.pi * phase)
    f[t >= duration * (1 - 1e-12)] = 0.0  # window endpoint and beyond
    return SampledSignal(dt, f, (fc,), duration, {"type": "toneburst", "cycles": int(n_cycles)})


def dual_toneburst(
    fc1: float,
    fc2: float,
    dt: float,
    window_frequency: float = 20e3,
    n_samples: int | None = None,
) -> SampledSignal:
    """Two half-amplitude carriers under one Hanning window of length ``1/window_frequency``."""
    if not (fc1 > 0 and fc2 > 0 and window_frequency > 0):
        raise ValueError("frequencies must be positive")
    _check_dt(dt, max(fc1, fc2))
    duration = 1.0 / window_frequency
    t = _window_times(duration, dt, n_samples)
    win = 0.5 * (1.0 - np.cos(2.0 * np.pi * window_frequency * t))
    f = win * (0.5 * np.sin(2.0 * np.pi * fc1 * t) + 0.5 * np.sin(2.0 * np.pi * fc2 * t))
    f[t >= duration * (1 - 1e-12)] = 0.0  # window endpoint and beyond
    return SampledSignal(
        dt, f, (fc1, fc2), duration, {"type": "dual", "window_frequency": window_frequency}
    )


def next_pow2(n: float) -> int:
    return 1 << max(1, int(math.ceil(math.log2(max(n, 2.0)) - 1e-12)))


def sampling_plan(f_max: float, spp: int, duration: float) -> tuple[float, int]:
    """Time step ``(1/f_max)/spp`` and the power-of-two sample count covering ``duration``."""
    if not (f_max > 0 and spp >= 1 and duration > 0):
        raise ValueError(f"invalid sampling plan ({f_max}, {spp}, {duration})")
    dt = 1.0 / f_max / spp
    return dt, next_pow2(duration / dt)
