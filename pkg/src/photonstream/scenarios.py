"""Parameter presets resembling the measured devices, used by scripts and acceptance tests."""

from __future__ import annotations

from .emitter import EmitterParams, eps_for_g2, gamma_star_for_visibility
from .interference import DetectorModel, InterferometerConfig, dark_rate_for_raw_visibility

# lifetime 0.3 ns; the 2 ns window then holds ~96% of each peak
GAMMA = 1 / 0.3

DEVICE1_REFLECTIVITY = 0.471
DEVICE1_PERIOD = 12.5
DEVICE2_PERIOD = 12.2

# low-power temporal wandering fit of the non-resonant device
DEVICE1_V0, DEVICE1_DOMEGA_R, DEVICE1_TAU_C = 0.728, 0.294, 45.5
# resonant device fit
DEVICE2_V0, DEVICE2_DOMEGA_R, DEVICE2_TAU_C = 0.966, 0.178, 54.4

MEASURED_DELAYS = (12.5, 25.0, 50.0, 100.0, 200.0, 300.0, 400.0)


def constant_visibility_emitter(v: float, period: float = DEVICE1_PERIOD, brightness: float = 1.0,
                                eps: float = 0.0) -> EmitterParams:
    """No wandering: every photon pair interferes with visibility ``v``."""
    return EmitterParams(gamma=GAMMA, gamma_star=gamma_star_for_visibility(GAMMA, v), domega_rms=0.0,
                         brightness=brightness, multi_photon_eps=eps, pulse_period=period)


def wandering_emitter(v0: float, domega_r: float, tau_c: float, period: float = DEVICE1_PERIOD,
                      mode: str = "telegraph") -> EmitterParams:
    gs = gamma_star_for_visibility(GAMMA, v0)
    return EmitterParams(gamma=GAMMA, gamma_star=gs, domega_rms=domega_r * (GAMMA + gs), tau_c=tau_c,
                         brightness=1.0, pulse_period=period, wandering_mode=mode)


def g2_emitter(g2: float, brightness: float = 0.5, period: float = DEVICE1_PERIOD) -> EmitterParams:
    return EmitterParams(gamma=GAMMA, brightness=brightness, multi_photon_eps=eps_for_g2(brightness, g2),
                         pulse_period=period)


def device1_mz(delay: float = 50.0) -> InterferometerConfig:
    return InterferometerConfig(delay=delay, reflectivity=DEVICE1_REFLECTIVITY)


def device2_background(v_true: float = 0.95, v_raw: float = 0.89, brightness: float = 1.0,
                       efficiency: float = 0.5, window: float = 2.0):
    """Resonant-device-like run whose dark counts pull the raw visibility to ``v_raw``."""
    emitter = constant_visibility_emitter(v_true, period=DEVICE2_PERIOD, brightness=brightness)
    mz = InterferometerConfig(delay=DEVICE2_PERIOD, reflectivity=0.5)
    dark = dark_rate_for_raw_visibility(v_true, v_raw, 0.5, brightness, efficiency, DEVICE2_PERIOD, window)
    return emitter, mz, DetectorModel(efficiency=efficiency, dark_rate=dark)
