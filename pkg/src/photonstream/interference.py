"""Unbalanced Mach-Zehnder two-photon interference: closed forms and Monte Carlo.

Routing convention (used by the simulator and by the brute-force check in
the tests): the long arm feeds output-splitter port ``a`` and the short arm
port ``b``. A photon in ``a`` reflects to detector 0 and transmits to
detector 1; a photon in ``b`` reflects to detector 1 and transmits to
detector 0. The correlation delay is ``t(detector 1) - t(detector 0)``.
With this convention the side peaks are A(-delay) = 1 - R^2 and
A(+delay) = 1 - T^2.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .emitter import EmitterParams, PhotonStream
from .events import PS_PER_NS, EventStream
from .rng import make_rng, spawn


@dataclass(frozen=True)
class InterferometerConfig:
    delay: float = 50.0
    reflectivity: float = 0.5
    parallel_polarization: bool = True

    def __post_init__(self):
        if not self.delay > 0:
            raise ValueError("delay must be positive")
        if not 0 < self.reflectivity < 1:
            raise ValueError("reflectivity must be in (0, 1)")

    @property
    def transmittance(self) -> float:
        return 1.0 - self.reflectivity

    def delay_in_periods(self, period: float) -> int:
        d = self.delay / period
        k = round(d)
        if k < 1 or abs(d - k) > 1e-9 * max(1.0, d):
            raise ValueError(f"delay {self.delay} ns is not a positive multiple of the period {period} ns")
        return k


@dataclass(frozen=True)
class DetectorModel:
    efficiency: float = 1.0
    dark_rate: float = 0.0  # counts/ns per detector
    jitter_sigma: float = 0.0
    dead_time: float = 0.0

    def __post_init__(self):
        for name in ("efficiency", "dark_rate", "jitter_sigma", "dead_time"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")
        if self.efficiency > 1:
            raise ValueError("efficiency must be <= 1")


@dataclass(frozen=True)
class SourcePair:
    gamma_a: float
    gamma_b: float
    gamma_star_a: float = 0.0
    gamma_star_b: float = 0.0
    delta_omega: float = 0.0

    def __post_init__(self):
        if not (self.gamma_a > 0 and self.gamma_b > 0):
            raise ValueError("radiative rates must be positive")
        if not (self.gamma_star_a >= 0 and self.gamma_star_b >= 0):
            raise ValueError("dephasing rates must be non-negative")


class PeakPattern(NamedTuple):
    """Relative peak areas of the infinite periodic stream, normalised to A_k = 1."""

    a0: float
    a_minus: float
    a_plus: float
    a_k: float = 1.0


def pair_visibility(pair: SourcePair) -> float:
    """Two-photon interference visibility of photons from two emitters."""
    return float(_pair_visibility(pair.gamma_a, pair.gamma_b, pair.gamma_star_a,
                                  pair.gamma_star_b, pair.delta_omega))


def _pair_visibility(ga, gb, gsa, gsb, dw):
    total = ga + gb + gsa + gsb
    return (ga * gb / (ga + gb)) * total / ((total / 2) ** 2 + np.square(dw))


def temporal_visibility(v0, domega_r, tau_c, delay):
    """Visibility of photons emitted ``delay`` apart under exponentially correlated wandering.

    ``domega_r`` is the RMS wander in units of the linewidth gamma + gamma_star.
    Works element-wise on arrays.
    """
    decay = -np.expm1(-np.asarray(delay, dtype=float) / tau_c)
    out = v0 / (1.0 + 2.0 * np.square(domega_r) * decay)
    return float(out) if np.ndim(out) == 0 else out


def temporal_visibility_telegraph(v0, domega_r, tau_c, delay):
    """Exact mean visibility for the two-valued wandering process.

    The detuning difference is 0 or 2*domega_rms, the latter with probability
    (1 - exp(-delay/tau_c))/2. :func:`temporal_visibility` is the form obtained
    by averaging the squared detuning before dividing; the two agree to first
    order in domega_r^2.
    """
    p_diff = 0.5 * -np.expm1(-np.asarray(delay, dtype=float) / tau_c)
    out = v0 * ((1 - p_diff) + p_diff / (1 + 4 * np.square(domega_r)))
    return float(out) if np.ndim(out) == 0 else out


def analytic_peak_areas(config: InterferometerConfig, v: float) -> PeakPattern:
    if not 0 <= v <= 1:
        raise ValueError("visibility must be in [0, 1]")
    R, T = config.reflectivity, config.transmittance
    return PeakPattern(a0=R * R + T * T - 2 * R * T * v, a_minus=1 - R * R, a_plus=1 - T * T)


def general_peak_pattern(time_bins, delay, reflectivity) -> dict:
    """Coincidence-peak areas for distinguishable photons in arbitrary time bins.

    Every photon pair separated by dt contributes R^2, 2RT, T^2 at
    +/-dt - delay, +/-dt, +/-dt + delay. Arithmetic is generic, so exact
    rationals (``fractions.Fraction``) stay exact.
    """
    bins = list(time_bins)
    R = reflectivity
    T = 1 - R
    weights = ((-delay, R * R), (0, 2 * R * T), (delay, T * T))
    out: dict = defaultdict(int)
    for i in range(len(bins)):
        for j in range(i + 1, len(bins)):
            dt = abs(bins[j] - bins[i])
            for centre in (dt, -dt):
                for shift, w in weights:
                    out[centre + shift] += w
    return dict(out)


def simulate_mz(stream: PhotonStream, config: InterferometerConfig, det: DetectorModel,
                params: EmitterParams, seed) -> EventStream:
    """Send a photon stream through the unbalanced interferometer and detectors.

    Photons pick the short or long arm with probability 1/2. A slot holding
    exactly one long-arm and one short-arm photon, neither of them an extra
    multi-photon, is sampled jointly: coincidence with probability
    R^2 + T^2 - 2RT V, where V is the pair visibility for their detuning
    difference. Every other photon routes independently. Three-photon slot
    collisions are O(eps^2) and are not treated coherently.
    """
    arm_ss, bs_ss, det_ss = spawn(seed, 3)
    n = len(stream)
    period = stream.pulse_period
    D = config.delay_in_periods(period)
    R = config.reflectivity
    T = config.transmittance

    long_arm = make_rng(arm_ss).random(n) < 0.5
    slot = stream.pulse_index + D * long_arm
    arrival = stream.emit_times + config.delay * long_arm

    bs_rng = make_rng(bs_ss)
    u_route = bs_rng.random(n)
    # independent routing: reflect w.p. R; port a (long) reflects to 0, port b (short) to 1
    reflect = u_route < R
    detector = np.where(long_arm, ~reflect, reflect).astype(np.uint8)

    order = np.argsort(slot, kind="stable")
    s_sorted = slot[order]
    if n > 1:
        starts = np.flatnonzero(np.r_[True, s_sorted[1:] != s_sorted[:-1]])
        sizes = np.diff(np.r_[starts, n])
        pair_starts = starts[sizes == 2]
        i = order[pair_starts]
        j = order[pair_starts + 1]
        coherent = (long_arm[i] != long_arm[j]) & ~stream.extra[i] & ~stream.extra[j]
        i, j = i[coherent], j[coherent]
        li = np.where(long_arm[i], i, j)
        si = np.where(long_arm[i], j, i)
        if config.parallel_polarization:
            g, gs = params.gamma, params.gamma_star
            v = _pair_visibility(g, g, gs, gs, stream.detuning[li] - stream.detuning[si])
        else:
            v = np.zeros(len(li))
        p_coinc = R * R + T * T - 2 * R * T * v
        u_joint = bs_rng.random((2, len(li)))
        coinc = u_joint[0] < p_coinc
        # coincidence: both reflect (long->0, short->1) w.p. R^2/(R^2+T^2), else both transmit
        both_reflect = u_joint[1] < R * R / (R * R + T * T)
        # bunching: both photons on one detector, either one with probability 1/2
        bunch_det = (u_joint[1] < 0.5).astype(np.uint8)
        long_det = np.where(coinc, np.where(both_reflect, 0, 1), bunch_det)
        short_det = np.where(coinc, 1 - long_det, bunch_det)
        detector[li] = long_det
        detector[si] = short_det

    span = stream.n_pulses * period + config.delay
    return _detect(arrival, detector, det, span, det_ss)


def simulate_hbt(stream: PhotonStream, det: DetectorModel, seed, reflectivity: float = 0.5) -> EventStream:
    """Plain beamsplitter (Hanbury Brown-Twiss) measurement of a stream."""
    route_ss, det_ss = spawn(seed, 2)
    detector = (make_rng(route_ss).random(len(stream)) < reflectivity).astype(np.uint8)
    return _detect(stream.emit_times, detector, det, stream.n_pulses * stream.pulse_period, det_ss)


def _detect(times, detector, det: DetectorModel, span: float, seed) -> EventStream:
    """Efficiency thinning, Gaussian jitter, dark counts, dead time, ps quantisation."""
    eff_ss, jit_ss, dark_ss = spawn(seed, 3)
    keep = make_rng(eff_ss).random(len(times)) < det.efficiency
    t = times[keep]
    ch = detector[keep]
    if det.jitter_sigma > 0:
        t = t + make_rng(jit_ss).normal(0.0, det.jitter_sigma, len(t))
    if det.dark_rate > 0:
        drng = make_rng(dark_ss)
        n_dark = drng.poisson(det.dark_rate * span, 2)
        t = np.concatenate([t, drng.uniform(0, span, n_dark.sum())])
        ch = np.concatenate([ch, np.repeat(np.array([0, 1], np.uint8), n_dark)])
    t_ps = np.rint(np.maximum(t, 0.0) * PS_PER_NS).astype(np.int64)
    stream = EventStream.from_arrays(ch, t_ps)
    if det.dead_time > 0 and len(stream):
        stream = apply_dead_time(stream, det.dead_time)
    return stream


def apply_dead_time(events: EventStream, dead_time: float) -> EventStream:
    """Non-paralysable dead time, applied per detector."""
    dead_ps = dead_time * PS_PER_NS
    keep = np.zeros(len(events), dtype=bool)
    for c in (0, 1):
        idx = np.flatnonzero(events.channel == c)
        t = events.time_ps[idx]
        if len(t) == 0:
            continue
        if np.all(np.diff(t) >= dead_ps):
            keep[idx] = True
            continue
        k = 0
        while k < len(t):
            keep[idx[k]] = True
            k = int(np.searchsorted(t, t[k] + dead_ps, side="left"))
    return EventStream(events.channel[keep], events.time_ps[keep])


def expected_pair_rate(brightness: float, efficiency: float) -> float:
    """Coincidences per pulse pair in a lateral (A_k) peak for a single-photon stream.

    Each detected photon lands on a given detector with probability 1/2
    regardless of R, so A_k per pulse = (brightness * efficiency / 2)^2.
    """
    return (brightness * efficiency / 2) ** 2


def accidental_rate(brightness: float, efficiency: float, period: float, dark_rate: float) -> float:
    """Uncorrelated cross-detector coincidences per ns of delay window per ns of acquisition."""
    s = brightness * efficiency / (2 * period)
    return dark_rate * dark_rate + 2 * dark_rate * s


def dark_rate_for_raw_visibility(v_true: float, v_raw: float, reflectivity: float, brightness: float,
                                 efficiency: float, period: float, window: float) -> float:
    """Dark-count rate per detector that drags the raw visibility from ``v_true`` to ``v_raw``.

    A flat floor ``bg`` in every integration window gives
    (a0 + bg)/(A + bg) in place of a0/A; solve for bg, then for the dark
    rate from the accidental-coincidence rate.
    """
    R = reflectivity
    T = 1 - R
    s2 = R * R + T * T
    r_true = s2 - 2 * R * T * v_true
    r_raw = s2 - 2 * R * T * v_raw
    if not r_raw > r_true:
        raise ValueError("v_raw must be below v_true")
    # per pulse: A = expected_pair_rate, bg = window * period * accidental_rate
    A = expected_pair_rate(brightness, efficiency)
    bg = A * (r_raw - r_true) / (1 - r_raw)
    target = bg / (window * period)
    s = brightness * efficiency / (2 * period)
    # d^2 + 2 s d - target = 0
    return -s + math.sqrt(s * s + target)
