"""Correlation histograms and the peak-area extractions built on them.

Bin ``j`` of a histogram covers ``[j*bin_width, (j+1)*bin_width)`` for
``j = -M .. M-1`` with ``M = max_delay / bin_width``; an integration window of
full width ``w`` around ``c`` sums exactly ``[c - w/2, c + w/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .events import PS_PER_NS, EventStream


class EmptyPeaksError(ValueError):
    """Reference peaks hold no counts, so no ratio can be formed."""


class InconsistentInputsError(ValueError):
    pass


def _as_int_ratio(a: float, b: float, what: str) -> int:
    r = a / b
    k = round(r)
    if abs(r - k) > 1e-6 * max(1.0, abs(r)):
        raise ValueError(f"{what} ({a}) must be a multiple of the bin width ({b})")
    return int(k)


@dataclass
class CorrelationHistogram:
    bin_width: float
    max_delay: float
    counts: np.ndarray

    def __post_init__(self):
        if not self.bin_width > 0 or not self.max_delay > 0:
            raise ValueError("bin_width and max_delay must be positive")
        self.counts = np.asarray(self.counts)
        if self.counts.shape != (2 * self.n_half,):
            raise ValueError(f"expected {2 * self.n_half} bins, got {self.counts.shape}")

    @property
    def n_half(self) -> int:
        return _as_int_ratio(self.max_delay, self.bin_width, "max_delay")

    @property
    def edges(self) -> np.ndarray:
        return np.arange(-self.n_half, self.n_half + 1) * self.bin_width

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(-self.n_half, self.n_half) + 0.5) * self.bin_width

    def window_sum(self, centre: float, width: float) -> float:
        """Counts in ``[centre - width/2, centre + width/2)`` snapped to the nearest bin edge."""
        wb = _as_int_ratio(width, self.bin_width, "window")
        lo = round(centre / self.bin_width - wb / 2)
        i0 = lo + self.n_half
        if i0 < 0 or i0 + wb > len(self.counts):
            raise ValueError(f"window around {centre} ns exceeds the histogram range +/-{self.max_delay} ns")
        return float(self.counts[i0:i0 + wb].sum())

    def same_geometry(self, other: "CorrelationHistogram") -> bool:
        return self.bin_width == other.bin_width and self.max_delay == other.max_delay

    def __add__(self, other: "CorrelationHistogram") -> "CorrelationHistogram":
        if not self.same_geometry(other):
            raise ValueError("cannot merge histograms with different bin geometry")
        return CorrelationHistogram(self.bin_width, self.max_delay, self.counts + other.counts)

    @classmethod
    def zeros(cls, bin_width: float, max_delay: float) -> "CorrelationHistogram":
        n = _as_int_ratio(max_delay, bin_width, "max_delay")
        return cls(bin_width, max_delay, np.zeros(2 * n, dtype=np.int64))


def build_histogram(events, bin_width: float, max_delay: float) -> CorrelationHistogram:
    """Full cross-correlation of detector 1 against detector 0.

    Every cross-detector pair with ``-max_delay <= t1 - t0 < max_delay`` is
    counted once at delay ``t1 - t0`` (positive when detector 0 fires first).
    """
    if not bin_width > 0 or not max_delay > 0:
        raise ValueError("bin_width and max_delay must be positive")
    if not isinstance(events, EventStream):
        events = EventStream.from_events(events)
    if not events.is_sorted():
        raise ValueError("events must be sorted by time")
    hist = CorrelationHistogram.zeros(bin_width, max_delay)
    bw_ps = bin_width * PS_PER_NS
    max_ps = hist.n_half * bw_ps
    t = events.time_ps
    ch = events.channel.astype(bool)
    nbins = len(hist.counts)
    acc = np.zeros(nbins, dtype=np.int64)
    active = np.arange(len(t) - 1)
    j = 1
    while len(active):
        active = active[active + j < len(t)]
        d = t[active + j] - t[active]
        near = d <= max_ps
        active, d = active[near], d[near]
        cross = ch[active] != ch[active + j]
        # earlier click on detector 0 -> positive delay
        dt = np.where(ch[active[cross]], -d[cross], d[cross])
        idx = np.floor(dt / bw_ps).astype(np.int64) + hist.n_half
        idx = idx[(idx >= 0) & (idx < nbins)]
        acc += np.bincount(idx, minlength=nbins)
        j += 1
    hist.counts = acc
    return hist


@dataclass(frozen=True)
class PeakIntegrationConfig:
    period: float
    window: float = 2.0
    n_reference_peaks: int = 14
    delay: float | None = None
    exclude: frozenset | None = None
    n_background_windows: int = 14

    def __post_init__(self):
        if not 0 < self.window < self.period:
            raise ValueError("window must satisfy 0 < window < period")
        if self.n_reference_peaks < 2:
            raise ValueError("n_reference_peaks must be >= 2")

    @property
    def delay_index(self) -> int | None:
        if self.delay is None:
            return None
        return _as_int_ratio(self.delay, self.period, "delay")

    @property
    def excluded(self) -> frozenset:
        if self.exclude is not None:
            return frozenset(self.exclude)
        d = self.delay_index
        return frozenset() if d is None else frozenset({d, -d})

    def reference_indices(self) -> list[int]:
        """The ``n_reference_peaks`` lateral peaks closest to zero delay, +k before -k."""
        out: list[int] = []
        k = 1
        skip = self.excluded
        while len(out) < self.n_reference_peaks:
            for cand in (k, -k):
                if cand not in skip and len(out) < self.n_reference_peaks:
                    out.append(cand)
            k += 1
        return out

    def background_centres(self) -> list[float]:
        return [(m + 0.5) * self.period for m in range(1, self.n_background_windows + 1)]


@dataclass
class PeakAreas:
    a0: float
    reference: dict
    a_minus: float | None = None
    a_plus: float | None = None

    @property
    def mean(self) -> float:
        return float(np.mean(list(self.reference.values())))

    @property
    def n_reference(self) -> int:
        return len(self.reference)

    def shifted(self, background: float) -> "PeakAreas":
        """Subtract a constant from every area."""
        sub = lambda a: None if a is None else a - background  # noqa: E731
        return PeakAreas(self.a0 - background, {k: v - background for k, v in self.reference.items()},
                         sub(self.a_minus), sub(self.a_plus))


def integrate_peaks(hist: CorrelationHistogram, cfg: PeakIntegrationConfig) -> PeakAreas:
    """Sum counts in a window centred on every k*period peak that the analysis needs."""
    _as_int_ratio(cfg.period, hist.bin_width, "period")
    _as_int_ratio(cfg.window, hist.bin_width, "window")
    area = lambda k: hist.window_sum(k * cfg.period, cfg.window)  # noqa: E731
    reference = {k: area(k) for k in cfg.reference_indices()}
    d = cfg.delay_index
    return PeakAreas(
        a0=area(0),
        reference=reference,
        a_minus=None if d is None else area(-d),
        a_plus=None if d is None else area(d),
    )


@dataclass
class G2Estimate:
    value: float
    uncertainty: float
    areas: PeakAreas


def estimate_g2(hist: CorrelationHistogram, cfg: PeakIntegrationConfig) -> G2Estimate:
    """Zero-delay peak area over the mean lateral peak area, raw counts, Poisson errors."""
    areas = integrate_peaks(hist, cfg)
    A = areas.mean
    if A <= 0:
        raise EmptyPeaksError("lateral peaks are empty")
    g2 = areas.a0 / A
    var = (max(areas.a0, 1.0) + g2 * g2 * A / areas.n_reference) / (A * A)
    return G2Estimate(g2, math.sqrt(var), areas)


@dataclass
class VisibilityEstimate:
    raw: float
    uncertainty: float
    areas: PeakAreas
    corrected: float | None = None
    corrected_uncertainty: float | None = None
    background: float | None = None
    background_windows: list = field(default_factory=list)
    clamped: bool = False


def _visibility_from_ratio(ratio: float, R: float) -> float:
    T = 1 - R
    return (R * R + T * T - ratio) / (2 * R * T)


def estimate_visibility(areas: PeakAreas, reflectivity: float) -> VisibilityEstimate:
    """Raw two-photon visibility from the zero-delay and reference peak areas.

    No correction for non-zero g2(0) is applied.
    """
    R = reflectivity
    if not 0 < R < 1:
        raise ValueError("reflectivity must be in (0, 1)")
    A = areas.mean
    if A <= 0:
        raise EmptyPeaksError("reference peaks are empty")
    ratio = areas.a0 / A
    var_ratio = (max(areas.a0, 1.0) + ratio * ratio * A / areas.n_reference) / (A * A)
    sigma = math.sqrt(var_ratio) / (2 * R * (1 - R))
    return VisibilityEstimate(_visibility_from_ratio(ratio, R), sigma, areas)


def background_windows(hist: CorrelationHistogram, cfg: PeakIntegrationConfig) -> list[tuple[float, float]]:
    """(centre, counts) of the between-peak windows at (m + 1/2) * period."""
    if cfg.window > cfg.period / 2:
        raise ValueError("between-peak windows overlap the peak windows (need window <= period/2)")
    if cfg.n_background_windows < 2:
        raise ValueError("need at least 2 background windows")
    return [(c, hist.window_sum(c, cfg.window)) for c in cfg.background_centres()]


@dataclass
class BackgroundCorrection:
    raw: PeakAreas
    areas: PeakAreas
    background: float
    windows: list
    clamped: bool


def correct_areas(hist: CorrelationHistogram, cfg: PeakIntegrationConfig) -> BackgroundCorrection:
    """Subtract the mean between-peak window count from every peak area (clamped at zero)."""
    raw = integrate_peaks(hist, cfg)
    windows = background_windows(hist, cfg)
    b = float(np.mean([w for _, w in windows]))
    shifted = raw.shifted(b)
    clamp = lambda a: None if a is None else max(a, 0.0)  # noqa: E731
    clamped = any(a is not None and a < 0 for a in
                  [shifted.a0, shifted.a_minus, shifted.a_plus, *shifted.reference.values()])
    areas = PeakAreas(clamp(shifted.a0), {k: clamp(v) for k, v in shifted.reference.items()},
                      clamp(shifted.a_minus), clamp(shifted.a_plus))
    return BackgroundCorrection(raw, areas, b, windows, clamped)


def background_correct(hist: CorrelationHistogram, cfg: PeakIntegrationConfig,
                       reflectivity: float) -> VisibilityEstimate:
    """Raw and background-corrected visibility.

    The mean between-peak window count is subtracted from every peak area
    before forming the area ratio; negative corrected areas clamp to zero.
    """
    bc = correct_areas(hist, cfg)
    est = estimate_visibility(bc.raw, reflectivity)
    Ac = bc.areas.mean
    if Ac <= 0:
        raise EmptyPeaksError("reference peaks vanish after background subtraction")
    r = bc.areas.a0 / Ac
    m = len(bc.windows)
    raw = bc.raw
    # first-order propagation; the background enters numerator and denominator
    var = (max(raw.a0, 1.0) + r * r * raw.mean / raw.n_reference
           + (1 - r) ** 2 * max(bc.background, 1.0) / m) / (Ac * Ac)
    R = reflectivity
    est.corrected = _visibility_from_ratio(r, R)
    est.corrected_uncertainty = math.sqrt(var) / (2 * R * (1 - R))
    est.background = bc.background
    est.background_windows = bc.windows
    est.clamped = bc.clamped
    return est


def subtract_flat_background(hist: CorrelationHistogram, cfg: PeakIntegrationConfig) -> CorrelationHistogram:
    """Remove the between-peak floor bin by bin.

    The result holds float counts that may dip below zero where only the
    floor was present; rounding or clipping would bias a second pass.
    """
    windows = background_windows(hist, cfg)
    per_bin = np.mean([w for _, w in windows]) * hist.bin_width / cfg.window
    return CorrelationHistogram(hist.bin_width, hist.max_delay, hist.counts - per_bin)


def efficiency_budget(transmittances) -> tuple[float, float]:
    """Overall transmission of a chain of optical elements.

    Takes ``(value, absolute_uncertainty)`` pairs; uncertainties combine in
    relative quadrature.
    """
    items = list(transmittances)
    if not items:
        raise ValueError("empty element list")
    eta = 1.0
    rel = 0.0
    for value, sigma in items:
        if not 0 < value <= 1:
            raise ValueError(f"transmittance must be in (0, 1], got {value}")
        if sigma < 0:
            raise ValueError("uncertainty must be >= 0")
        eta *= value
        rel = math.hypot(rel, sigma / value)
    return eta, eta * rel


def absolute_brightness(detected_rate: float, pump_rate: float, detector_efficiency: float) -> float:
    """Photons per excitation pulse delivered to the detector input."""
    if detected_rate < 0 or pump_rate <= 0 or not 0 < detector_efficiency <= 1:
        raise ValueError("need detected_rate >= 0, pump_rate > 0 and 0 < detector_efficiency <= 1")
    b = detected_rate / (pump_rate * detector_efficiency)
    if b > 1 + 1e-12:
        raise InconsistentInputsError(f"brightness {b:.4f} exceeds one photon per pulse")
    return b
