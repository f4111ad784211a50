"""Post-processing of time histories: envelopes, arrivals, velocities, CWT, crack metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, signal

from .laplace import TimeSeriesField

DEFAULT_THRESHOLD = 0.05
MORLET_W0 = 6.0


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class Envelope:
    dt: float
    magnitude: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.magnitude.size) * self.dt


@dataclass(frozen=True)
class ArrivalSet:
    times: np.ndarray
    amplitudes: np.ndarray

    def __len__(self) -> int:
        return self.times.size

    def within(self, t0: float, t1: float) -> ArrivalSet:
        keep = (self.times >= t0) & (self.times <= t1)
        return ArrivalSet(self.times[keep], self.amplitudes[keep])


def envelope(x, dt: float = 1.0) -> Envelope:
    """Modulus of the analytic signal."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 8:
        raise AnalysisError(f"envelope needs a 1-D signal of length >= 8, got shape {x.shape}")
    if not np.any(x):
        return Envelope(dt, np.zeros_like(x))
    # zero padding keeps the end of the record from wrapping onto its start
    n = x.size
    return Envelope(dt, np.abs(signal.hilbert(x, N=2 * n))[:n])


def pick_arrivals(
    env: Envelope,
    threshold: float = DEFAULT_THRESHOLD,
    min_separation: float | None = None,
    floor: float = 0.0,
) -> ArrivalSet:
    """Envelope maxima above ``threshold * max`` (and above ``floor``).

    Peaks closer than ``min_separation`` seconds are thinned to the larger one.
    Peak times are refined by a parabola through the three top samples.
    """
    if not 0 < threshold < 1:
        raise AnalysisError(f"threshold must lie in (0, 1), got {threshold}")
    m = env.magnitude
    top = float(m.max()) if m.size else 0.0
    height = max(threshold * top, floor)
    if top == 0.0 or top <= floor:
        return ArrivalSet(np.empty(0), np.empty(0))
    distance = None if min_separation is None else max(1, int(round(min_separation / env.dt)))
    idx, _ = signal.find_peaks(m, height=height, distance=distance)
    times = np.empty(idx.size)
    amps = np.empty(idx.size)
    for q, i in enumerate(idx):
        shift, peak = 0.0, m[i]
        if 0 < i < m.size - 1:
            a, b, c = m[i - 1], m[i], m[i + 1]
            den = a - 2 * b + c
            if den < 0:
                shift = 0.5 * (a - c) / den
                peak = b - 0.25 * (a - c) * shift
        times[q] = (i + shift) * env.dt
        amps[q] = peak
    return ArrivalSet(times, amps)


def group_velocity(arrivals: ArrivalSet, paths) -> float:
    """Least-squares slope of path length against arrival time.

    With two arrivals this is exactly ``dpath / dtime``.
    """
    paths = np.asarray(paths, dtype=float)
    if len(arrivals) < 2 or paths.size < 2:
        raise AnalysisError("group velocity needs at least two arrivals")
    n = min(len(arrivals), paths.size)
    t = arrivals.times[:n]
    if n == 2:
        return float((paths[1] - paths[0]) / (t[1] - t[0]))
    slope, _ = np.polyfit(t, paths[:n], 1)
    return float(slope)


def snapshot(field_: TimeSeriesField, x, t: float, rows=None) -> tuple[np.ndarray, np.ndarray]:
    """Values at the sample nearest ``t`` normalised to unit peak magnitude.

    ``rows`` selects the channels that correspond to positions ``x``
    (default: all channels in order).
    """
    t_end = (field_.n_samples - 1) * field_.dt
    if not 0 <= t <= t_end * (1 + 1e-12):
        raise AnalysisError(f"snapshot time {t} outside [0, {t_end}]")
    n = int(round(t / field_.dt))
    data = field_.data if rows is None else field_.data[np.asarray(rows)]
    vals = np.array(data[:, n], dtype=float)
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="stable")
    peak = np.max(np.abs(vals))
    if peak > 0:
        vals = vals / peak
    return x[order], vals[order]


@dataclass(frozen=True)
class CWTResult:
    dt: float
    frequencies: np.ndarray
    coefficients: np.ndarray = field(repr=False)

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.coefficients)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.coefficients.shape[1]) * self.dt

    def ridge(self) -> tuple[float, float]:
        """(time, frequency) of the global magnitude maximum."""
        i, j = np.unravel_index(np.argmax(self.magnitude), self.magnitude.shape)
        return float(j * self.dt), float(self.frequencies[i])


def cwt_spectrum(x, dt: float, frequencies, w0: float = MORLET_W0) -> CWTResult:
    """Complex Morlet transform evaluated per scale in the frequency domain.

    Scales are ``s = w0 / (2 pi f)``; the filter ``2 exp(-(s w - w0)^2 / 2)``
    is applied to positive frequencies only, so a unit sinusoid at ``f``
    yields magnitude 1 on its ridge.
    """
    freqs = np.atleast_1d(np.asarray(frequencies, dtype=float))
    if freqs.size == 0:
        raise AnalysisError("empty frequency list")
    nyq = 0.5 / dt
    if np.any(freqs <= 0) or np.any(freqs >= nyq):
        raise AnalysisError(f"frequencies must lie in (0, {nyq})")
    x = np.asarray(x, dtype=float)
    n = x.size
    nfft = 1 << int(math.ceil(math.log2(2 * n)))  # zero padding against wraparound
    X = np.fft.fft(x, nfft)
    w = 2 * np.pi * np.fft.fftfreq(nfft, dt)
    scales = w0 / (2 * np.pi * freqs)
    psi = 2.0 * np.exp(-0.5 * (scales[:, None] * w[None, :] - w0) ** 2)
    psi[:, w <= 0] = 0.0
    W = np.fft.ifft(X[None, :] * psi, axis=1)[:, :n]
    return CWTResult(dt, freqs, W)


def morlet_admissibility(w0: float = MORLET_W0) -> float:
    """``C = int_0^inf exp(-(u - w0)^2) / u du`` for the filter above."""
    val, _ = integrate.quad(lambda u: np.exp(-((u - w0) ** 2)) / u, 1e-8, w0 + 12.0, limit=200)
    return float(val)


def cwt_energy(result: CWTResult, w0: float = MORLET_W0) -> float:
    """Signal energy reconstructed from the scalogram (log-scale quadrature)."""
    order = np.argsort(result.frequencies)
    lnf = np.log(result.frequencies[order])
    per_scale = np.sum(np.abs(result.coefficients[order]) ** 2, axis=1) * result.dt
    return float(integrate.trapezoid(per_scale, lnf) / (2.0 * morlet_admissibility(w0)))


def ridge_frequencies(result: CWTResult) -> np.ndarray:
    """Frequencies at local maxima of the time-maximum scalogram profile."""
    prof = result.magnitude.max(axis=1)
    order = np.argsort(result.frequencies)
    p = prof[order]
    idx, _ = signal.find_peaks(np.r_[0.0, p, 0.0], height=0.05 * p.max() if p.size else None)
    return result.frequencies[order][idx - 1]


def band_envelope(x, dt: float, fc: float, bandwidth: float) -> Envelope:
    """Envelope of the component near ``fc`` through a Gaussian band-pass of std ``bandwidth``.

    Unlike a Morlet row the time resolution does not depend on ``fc``, so
    envelopes at different centre frequencies can be compared directly.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    nfft = 2 * n
    X = np.fft.fft(x, nfft)
    f = np.fft.fftfreq(nfft, dt)
    H = np.where(f > 0, 2.0 * np.exp(-0.5 * ((f - fc) / bandwidth) ** 2), 0.0)
    return Envelope(dt, np.abs(np.fft.ifft(X * H))[:n])


def half_amplitude_duration(env: Envelope, t0: float | None = None, t1: float | None = None) -> float:
    """Length of the contiguous interval around the peak where ``env >= peak / 2``."""
    m = env.magnitude
    lo = 0 if t0 is None else max(0, int(math.floor(t0 / env.dt)))
    hi = m.size if t1 is None else min(m.size, int(math.ceil(t1 / env.dt)) + 1)
    seg = m[lo:hi]
    if seg.size == 0 or seg.max() == 0:
        return 0.0
    i = int(np.argmax(seg))
    half = 0.5 * seg[i]
    a = i
    while a > 0 and seg[a - 1] >= half:
        a -= 1
    b = i
    while b < seg.size - 1 and seg[b + 1] >= half:
        b += 1
    return (b - a) * env.dt


@dataclass
class CrackMetrics:
    direct_amplitude: float
    direct_time: float
    velocity: float
    flaw_amplitude: float
    flaw_time: float | None
    flaw_count: int
    below_detection: bool
    predicted_flaw_time: float | None = None

    def as_row(self) -> dict:
        return {
            "direct_amplitude": self.direct_amplitude,
            "direct_time": self.direct_time,
            "velocity": self.velocity,
            "flaw_amplitude": self.flaw_amplitude,
            "flaw_time": float("nan") if self.flaw_time is None else self.flaw_time,
            "flaw_count": self.flaw_count,
            "below_detection": self.below_detection,
        }


def crack_paths(length: float, crack_position: float, max_path: float) -> np.ndarray:
    """Single- and multi-bounce ray lengths ``L + 2 m x_c + 2 n (L - x_c)`` up to ``max_path``."""
    a = 2.0 * crack_position
    b = 2.0 * (length - crack_position)
    out = set()
    m = 0
    while length + m * a <= max_path:
        n = 0
        while length + m * a + n * b <= max_path:
            if m or n:
                out.add(round(length + m * a + n * b, 12))
            n += 1
            if b <= 0:
                break
        m += 1
        if a <= 0:
            break
    return np.array(sorted(out))


def crack_metrics(
    x,
    dt: float,
    *,
    length: float,
    crack_position: float | None,
    burst_duration: float,
    reference=None,
    window: float | None = None,
    gate: float = 0.15,
    threshold: float = DEFAULT_THRESHOLD,
) -> CrackMetrics:
    """Direct and crack-related packets in the signal received at ``x = length``.

    The excitation acts at ``x = 0``.  The direct packet is the envelope
    maximum between the first threshold crossing and the earliest time an echo
    could arrive; its transit over ``length`` calibrates the packet speed.
    Crack echoes are expected after the ray paths from :func:`crack_paths`
    and searched for within ``+-gate`` of each predicted time.  When an
    uncracked ``reference`` record is given, echoes are picked on
    ``x - reference``, which removes the end reflections shared by both runs.

    ``flaw_amplitude`` is the largest arrival in the gate of the shortest path;
    ``flaw_count`` is the number of gates up to ``window`` seconds that hold at
    least one arrival above ``threshold`` times the direct amplitude.
    """
    x = np.asarray(x, dtype=float)
    env = envelope(x, dt)
    m = env.magnitude
    if not np.any(m):
        raise AnalysisError("signal is identically zero")
    t = env.times
    onset = float(t[np.argmax(m >= threshold * m.max())])
    d_min = length if crack_position is None else min(crack_position, length - crack_position)
    direct_end = onset * (1.0 + 2.0 * d_min / length)
    seg = np.where(t <= direct_end, m, 0.0)
    i = int(np.argmax(seg))
    direct_amp = float(m[i])
    direct_time = float(t[i])
    centre = 0.5 * burst_duration
    velocity = length / max(direct_time - centre, dt)
    if crack_position is None:
        return CrackMetrics(direct_amp, direct_time, velocity, 0.0, None, 0, True)

    t_end = t[-1] if window is None else min(window, t[-1])
    paths = crack_paths(length, crack_position, velocity * (t_end - centre))
    predicted = centre + paths / velocity
    if reference is not None:
        r_env = envelope(x - np.asarray(reference, dtype=float)[: x.size], dt)
    else:
        r_env = env
    floor = threshold * direct_amp
    if r_env.magnitude.max() <= floor:
        cand = ArrivalSet(np.empty(0), np.empty(0))
    else:
        cand = pick_arrivals(
            r_env, min(floor / r_env.magnitude.max(), 0.999), burst_duration
        )
        cand = cand.within(direct_time + 0.5 * burst_duration, t_end)

    hits = set()
    for tc in cand.times:
        rel = np.abs(tc - predicted) / predicted
        j = int(np.argmin(rel)) if rel.size else -1
        if j >= 0 and rel[j] <= gate:
            hits.add(j)
    t_pred = float(predicted[0]) if predicted.size else None
    if t_pred is None:
        return CrackMetrics(direct_amp, direct_time, velocity, 0.0, None, 0, True)
    first = cand.within(t_pred * (1 - gate), t_pred * (1 + gate))
    if not len(first):
        return CrackMetrics(direct_amp, direct_time, velocity, 0.0, None, len(hits), True, t_pred)
    k = int(np.argmax(first.amplitudes))
    return CrackMetrics(
        direct_amp, direct_time, velocity,
        float(first.amplitudes[k]), float(first.times[k]), len(hits), False, t_pred,
    )
