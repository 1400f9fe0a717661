"""Simulation and analysis of pulsed single-photon sources in an unbalanced Mach-Zehnder interferometer."""

from .emitter import (
    EmitterParams,
    PhotonEmission,
    PhotonStream,
    SaturationParams,
    intrinsic_visibility,
    sample_stream,
    sample_wandering,
    saturation_rate,
    visibility_power_linear,
)
from .events import DetectionEvent, EventStream
from .fitting import DataSeries, FitResult, WanderingFit, fit_saturation, fit_visibility_power, fit_wandering
from .histogram import (
    CorrelationHistogram,
    PeakIntegrationConfig,
    VisibilityEstimate,
    absolute_brightness,
    background_correct,
    build_histogram,
    efficiency_budget,
    estimate_g2,
    estimate_visibility,
    integrate_peaks,
)
from .interference import (
    DetectorModel,
    InterferometerConfig,
    SourcePair,
    analytic_peak_areas,
    general_peak_pattern,
    pair_visibility,
    simulate_hbt,
    simulate_mz,
    temporal_visibility,
)

__version__ = "0.1.0"
