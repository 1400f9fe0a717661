"""Source model: emission statistics, spectral wandering and closed-form source laws.

Units throughout: time in ns, rates in 1/ns, angular frequencies in rad/ns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .rng import make_rng, spawn

WANDERING_MODES = ("telegraph", "gaussian")


@dataclass(frozen=True)
class EmitterParams:
    """Physical description of a pulsed single-photon emitter.

    ``brightness`` is the probability that a pulse yields at least one photon
    and ``multi_photon_eps`` the probability that it yields two.
    """

    gamma: float = 2.5
    gamma_star: float = 0.0
    domega_rms: float = 0.0
    tau_c: float = 45.5
    brightness: float = 1.0
    multi_photon_eps: float = 0.0
    pulse_period: float = 12.5
    wandering_mode: str = "telegraph"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if not self.gamma_star >= 0:
            raise ValueError(f"gamma_star must be >= 0, got {self.gamma_star}")
        if not self.domega_rms >= 0:
            raise ValueError(f"domega_rms must be >= 0, got {self.domega_rms}")
        if not self.tau_c > 0:
            raise ValueError(f"tau_c must be > 0, got {self.tau_c}")
        if not 0 <= self.multi_photon_eps < 1:
            raise ValueError(f"multi_photon_eps must be in [0, 1), got {self.multi_photon_eps}")
        if not self.brightness <= 1:
            raise ValueError(f"brightness must be <= 1, got {self.brightness}")
        # brightness = 0 is allowed for the empty source; otherwise eps < brightness
        if self.brightness < 0 or (self.brightness > 0 and not self.multi_photon_eps < self.brightness):
            raise ValueError("need 0 <= multi_photon_eps < brightness <= 1")
        if self.brightness == 0 and self.multi_photon_eps != 0:
            raise ValueError("multi_photon_eps must be 0 when brightness is 0")
        if not self.pulse_period > 0:
            raise ValueError(f"pulse_period must be > 0, got {self.pulse_period}")
        if self.wandering_mode not in WANDERING_MODES:
            raise ValueError(f"wandering_mode must be one of {WANDERING_MODES}")

    @property
    def linewidth(self) -> float:
        """Homogeneous linewidth gamma + gamma_star (rad/ns)."""
        return self.gamma + self.gamma_star

    @property
    def domega_r(self) -> float:
        """RMS wander in units of the homogeneous linewidth."""
        return self.domega_rms / self.linewidth


class PhotonEmission(NamedTuple):
    pulse_index: int
    emit_offset: float
    detuning: float
    extra: bool = False


@dataclass
class PhotonStream:
    """Column store of emitted photons, sorted by absolute emission time.

    ``extra`` marks the second photon of a multi-photon pulse; it never
    interferes with anything.
    """

    pulse_index: np.ndarray
    emit_offset: np.ndarray
    detuning: np.ndarray
    extra: np.ndarray
    pulse_period: float
    n_pulses: int

    def __len__(self) -> int:
        return len(self.pulse_index)

    def __iter__(self) -> Iterator[PhotonEmission]:
        for p, o, d, e in zip(self.pulse_index, self.emit_offset, self.detuning, self.extra):
            yield PhotonEmission(int(p), float(o), float(d), bool(e))

    def __getitem__(self, i) -> PhotonEmission:
        return PhotonEmission(int(self.pulse_index[i]), float(self.emit_offset[i]),
                              float(self.detuning[i]), bool(self.extra[i]))

    @property
    def emit_times(self) -> np.ndarray:
        return self.pulse_index * self.pulse_period + self.emit_offset

    @classmethod
    def from_emissions(cls, emissions, pulse_period: float, n_pulses: int | None = None) -> "PhotonStream":
        emissions = list(emissions)
        pulse_index = np.array([e.pulse_index for e in emissions], dtype=np.int64)
        emit_offset = np.array([e.emit_offset for e in emissions], dtype=float)
        detuning = np.array([e.detuning for e in emissions], dtype=float)
        extra = np.array([getattr(e, "extra", False) for e in emissions], dtype=bool)
        if np.any(emit_offset < 0):
            raise ValueError("emit_offset must be >= 0")
        t = pulse_index * pulse_period + emit_offset
        if np.any(np.diff(t) < 0):
            raise ValueError("emissions must be sorted by absolute time")
        if n_pulses is None:
            n_pulses = int(pulse_index.max()) + 1 if len(pulse_index) else 0
        return cls(pulse_index, emit_offset, detuning, extra, pulse_period, n_pulses)

    @classmethod
    def concatenate(cls, shards: list["PhotonStream"]) -> "PhotonStream":
        """Join pulse-contiguous shards; pulse indices of each shard are offset by the preceding shards."""
        if not shards:
            raise ValueError("no shards")
        period = shards[0].pulse_period
        offset = 0
        parts = []
        for s in shards:
            if s.pulse_period != period:
                raise ValueError("shards disagree on pulse_period")
            parts.append((s.pulse_index + offset, s.emit_offset, s.detuning, s.extra))
            offset += s.n_pulses
        cols = [np.concatenate(c) for c in zip(*parts)]
        return cls(*cols, pulse_period=period, n_pulses=offset)


@dataclass(frozen=True)
class SaturationParams:
    R0: float
    P0: float

    def __post_init__(self):
        if not (self.R0 > 0 and self.P0 > 0):
            raise ValueError("R0 and P0 must be positive")


def intrinsic_visibility(params: EmitterParams) -> float:
    """Single-emitter indistinguishability gamma / (gamma + gamma_star)."""
    return params.gamma / (params.gamma + params.gamma_star)


def gamma_star_for_visibility(gamma: float, v0: float) -> float:
    """Pure dephasing rate giving intrinsic visibility ``v0`` at radiative rate ``gamma``."""
    if not 0 < v0 <= 1:
        raise ValueError("v0 must be in (0, 1]")
    return gamma * (1.0 / v0 - 1.0)


def saturation_rate(P, sat: SaturationParams):
    """Detected rate R0 (1 - exp(-P/P0)) at pump power ``P``."""
    P_arr = np.asarray(P, dtype=float)
    if np.any(P_arr < 0):
        raise ValueError("pump power must be >= 0")
    out = sat.R0 * -np.expm1(-P_arr / sat.P0)
    return float(out) if out.ndim == 0 else out


def visibility_power_linear(P: float, vmax: float, slope: float) -> tuple[float, bool]:
    """Linear visibility-vs-power law. Returns ``(value, clamped)``."""
    v = vmax + slope * P
    clamped = v < 0 or v > 1
    return min(max(v, 0.0), 1.0), clamped


def multi_photon_g2(brightness: float, eps: float) -> float:
    """Zero-delay g2 of the emission statistics (P1 = b - eps, P2 = eps)."""
    mean = brightness + eps
    return 2.0 * eps / mean**2


def eps_for_g2(brightness: float, g2: float) -> float:
    """Inverse of :func:`multi_photon_g2` on the small-eps branch."""
    if g2 == 0:
        return 0.0
    b = brightness
    # g eps^2 + (2 g b - 2) eps + g b^2 = 0
    qb = 2 * g2 * b - 2
    disc = qb * qb - 4 * g2 * g2 * b * b
    if disc < 0:
        raise ValueError("g2 not reachable at this brightness")
    return (-qb - math.sqrt(disc)) / (2 * g2)


def sample_wandering(params: EmitterParams, times, seed, mode: str | None = None) -> np.ndarray:
    """Sample the detuning trajectory at the given sorted times.

    Telegraph mode jumps between +/- domega_rms with flip rate 1/(2 tau_c);
    gaussian mode is the Ornstein-Uhlenbeck process with the same stationary
    variance and autocovariance exp(-dt/tau_c). Both are sampled exactly at
    arbitrary (irregular) times.
    """
    mode = mode or params.wandering_mode
    if mode not in WANDERING_MODES:
        raise ValueError(f"unknown wandering mode {mode!r}")
    t = np.asarray(times, dtype=float)
    if t.ndim != 1:
        raise ValueError("times must be one-dimensional")
    dt = np.diff(t)
    if np.any(dt < 0):
        raise ValueError("times must be sorted ascending")
    n = len(t)
    a = params.domega_rms
    if n == 0:
        return np.zeros(0)
    if a == 0:
        return np.zeros(n)
    rng = make_rng(seed)
    rho = np.exp(-dt / params.tau_c)
    if mode == "telegraph":
        first = rng.random() < 0.5
        # an odd number of flips in dt has probability (1 - exp(-2 lambda dt)) / 2
        flips = rng.random(n - 1) < 0.5 * (1.0 - rho)
        parity = np.concatenate(([first], flips)).astype(np.int8)
        sign = 1 - 2 * (np.cumsum(parity) & 1)
        return a * sign.astype(float)
    noise = rng.standard_normal(n)
    innov = np.sqrt(1.0 - rho * rho)
    out = np.empty(n)
    x = noise[0]
    out[0] = x
    for i in range(1, n):
        x = rho[i - 1] * x + innov[i - 1] * noise[i]
        out[i] = x
    return a * out


def sample_stream(params: EmitterParams, n_pulses: int, seed) -> PhotonStream:
    """Draw the photons emitted over ``n_pulses`` excitation pulses."""
    if n_pulses < 0:
        raise ValueError("n_pulses must be >= 0")
    counts_ss, offsets_ss, wander_ss = spawn(seed, 3)
    u = make_rng(counts_ss).random(n_pulses)
    n_ph = (u < params.brightness).astype(np.int64) + (u < params.multi_photon_eps)
    pulse_index = np.repeat(np.arange(n_pulses, dtype=np.int64), n_ph)
    # second photon of a pulse is the one flagged as extra
    extra = np.zeros(len(pulse_index), dtype=bool)
    if len(pulse_index) > 1:
        extra[1:] = pulse_index[1:] == pulse_index[:-1]
    offsets = make_rng(offsets_ss).exponential(1.0 / params.gamma, len(pulse_index))
    t = pulse_index * params.pulse_period + offsets
    order = np.argsort(t, kind="stable")
    pulse_index, offsets, extra, t = pulse_index[order], offsets[order], extra[order], t[order]
    detuning = sample_wandering(params, t, wander_ss)
    return PhotonStream(pulse_index, offsets, detuning, extra, params.pulse_period, n_pulses)


def sample_stream_sharded(params: EmitterParams, n_pulses: int, seed, n_shards: int,
                          executor=None) -> PhotonStream:
    """Generate a stream as ``n_shards`` pulse-contiguous shards.

    Each shard gets its own child seed and its own wandering trajectory, so
    correlations across shard boundaries are lost; shards should be much
    longer than tau_c. ``executor`` is any object with a ``map`` method.
    """
    if n_shards < 1:
        raise ValueError("n_shards must be >= 1")
    sizes = [n_pulses // n_shards + (i < n_pulses % n_shards) for i in range(n_shards)]
    seeds = spawn(seed, n_shards)
    mapper = executor.map if executor is not None else map
    shards = list(mapper(sample_stream, [params] * n_shards, sizes, seeds))
    return PhotonStream.concatenate(shards)


def coherent_stream(mean_photons: float, n_pulses: int, gamma: float, pulse_period: float, seed) -> PhotonStream:
    """Reference source with Poissonian photon number per pulse (g2 = 1).

    All photons are flagged ``extra`` so none of them interfere.
    """
    counts_ss, offsets_ss = spawn(seed, 2)
    n_ph = make_rng(counts_ss).poisson(mean_photons, n_pulses)
    return _fixed_count_stream(n_ph, gamma, pulse_period, offsets_ss)


def fock_stream(n: int, n_pulses: int, gamma: float, pulse_period: float, seed) -> PhotonStream:
    """Reference source emitting exactly ``n`` photons every pulse (g2 = 1 - 1/n)."""
    n_ph = np.full(n_pulses, n, dtype=np.int64)
    return _fixed_count_stream(n_ph, gamma, pulse_period, seed)


def _fixed_count_stream(n_ph, gamma, pulse_period, seed) -> PhotonStream:
    pulse_index = np.repeat(np.arange(len(n_ph), dtype=np.int64), n_ph)
    offsets = make_rng(seed).exponential(1.0 / gamma, len(pulse_index))
    order = np.argsort(pulse_index * pulse_period + offsets, kind="stable")
    return PhotonStream(pulse_index[order], offsets[order], np.zeros(len(order)),
                        np.ones(len(order), dtype=bool), pulse_period, len(n_ph))
