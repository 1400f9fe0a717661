import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import count_pairs_bruteforce, poisson_sigma_ratio
from photonstream import scenarios
from photonstream.emitter import EmitterParams, coherent_stream, fock_stream, sample_stream
from photonstream.events import DetectionEvent, EventStream
from photonstream.histogram import (
    CorrelationHistogram,
    EmptyPeaksError,
    InconsistentInputsError,
    PeakAreas,
    PeakIntegrationConfig,
    absolute_brightness,
    background_correct,
    build_histogram,
    correct_areas,
    efficiency_budget,
    estimate_g2,
    estimate_visibility,
    integrate_peaks,
    subtract_flat_background,
)
from photonstream.interference import (
    DetectorModel,
    InterferometerConfig,
    analytic_peak_areas,
    simulate_hbt,
    simulate_mz,
)


def _events(pairs):
    return EventStream.from_events([DetectionEvent(c, t) for c, t in pairs])


# --- build_histogram --------------------------------------------------------

def test_empty_events_give_zero_histogram():
    h = build_histogram(EventStream.empty(), 0.1, 50)
    assert h.counts.shape == (1000,)
    assert h.counts.sum() == 0


def test_single_pair_lands_in_its_bin():
    h = build_histogram(_events([(0, 100.0), (1, 125.0)]), 0.1, 50)
    assert h.counts.sum() == 1
    (i,) = np.nonzero(h.counts)[0]
    assert h.edges[i] == pytest.approx(25.0)
    # reversed order gives the mirror bin
    h = build_histogram(_events([(1, 100.0), (0, 125.0)]), 0.1, 50)
    (i,) = np.nonzero(h.counts)[0]
    assert h.edges[i] == pytest.approx(-25.0)


def test_same_detector_pairs_ignored():
    h = build_histogram(_events([(0, 1.0), (0, 2.0), (0, 3.0)]), 0.1, 10)
    assert h.counts.sum() == 0


@pytest.mark.parametrize("bw, md", [(0, 10), (0.1, 0), (-1, 10)])
def test_build_histogram_rejects_bad_geometry(bw, md):
    with pytest.raises(ValueError):
        build_histogram(EventStream.empty(), bw, md)


def test_build_histogram_rejects_unsorted():
    ev = EventStream(np.array([0, 1], dtype=np.uint8), np.array([10, 5], dtype=np.int64))
    with pytest.raises(ValueError):
        build_histogram(ev, 0.1, 10)


def test_flat_correlation_of_uncorrelated_streams():
    rng = np.random.default_rng(5)
    span_ps = 2 * 10**9  # 2 ms
    r = 2e-3  # per ns on each detector
    n = rng.poisson(r * span_ps / 1000, size=2)
    t = np.concatenate([rng.integers(0, span_ps, n[0]), rng.integers(0, span_ps, n[1])])
    ch = np.concatenate([np.zeros(n[0]), np.ones(n[1])])
    ev = EventStream.from_arrays(ch, t)
    bw, md = 1.0, 50.0
    h = build_histogram(ev, bw, md)
    T = span_ps / 1000
    expected = r * r * bw * (T - np.abs(h.centers))
    z = (h.counts - expected) / np.sqrt(expected)
    # every bin within 3 sigma up to the handful expected from 100 bins at 0.27%
    assert np.count_nonzero(np.abs(z) > 3) <= 3
    assert abs(z.mean()) < 3 / math.sqrt(len(z))


@settings(deadline=None, max_examples=60)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 5000)), max_size=40),
       st.sampled_from([100, 250, 1000]), st.integers(1, 30))
def test_histogram_conserves_pairs(raw, bw_ps, nmax):
    ev = EventStream.from_arrays([c for c, _ in raw], [t for _, t in raw])
    max_ps = bw_ps * nmax
    h = build_histogram(ev, bw_ps / 1000, max_ps / 1000)
    assert h.counts.sum() == count_pairs_bruteforce(ev.channel, ev.time_ps, max_ps)


def _random_hist(seed, bw=0.5, md=10.0):
    rng = np.random.default_rng(seed)
    return CorrelationHistogram(bw, md, rng.integers(0, 50, int(2 * md / bw)))


def test_merge_associative_commutative():
    a, b, c = (_random_hist(s) for s in range(3))
    assert np.array_equal((a + b).counts, (b + a).counts)
    assert np.array_equal(((a + b) + c).counts, (a + (b + c)).counts)


def test_merge_of_shards_equals_whole():
    rng = np.random.default_rng(1)
    t = np.sort(rng.integers(0, 10**7, 2000))
    ch = rng.integers(0, 2, 2000)
    whole = build_histogram(EventStream(ch.astype(np.uint8), t), 0.1, 5)
    # shards separated by more than max_delay share no pairs
    cut = np.searchsorted(t, 5 * 10**6)
    t[cut:] += 10**6
    left = build_histogram(EventStream(ch[:cut].astype(np.uint8), t[:cut]), 0.1, 5)
    right = build_histogram(EventStream(ch[cut:].astype(np.uint8), t[cut:]), 0.1, 5)
    split = build_histogram(EventStream(ch.astype(np.uint8), t), 0.1, 5)
    assert np.array_equal((left + right).counts, split.counts)
    assert (left + right).counts.sum() <= whole.counts.sum()


def test_merge_rejects_geometry_mismatch():
    with pytest.raises(ValueError):
        CorrelationHistogram.zeros(0.1, 10) + CorrelationHistogram.zeros(0.2, 10)


def test_histogram_shape_checked():
    with pytest.raises(ValueError):
        CorrelationHistogram(0.1, 1.0, np.zeros(5))


# --- peak integration --------------------------------------------------------

def _delta_peaks(period, heights, bw=0.1, md=None):
    md = md or period * (max(abs(k) for k in heights) + 2)
    h = CorrelationHistogram.zeros(bw, md)
    for k, v in heights.items():
        i = int(round(k * period / bw)) + h.n_half
        h.counts[i] += v
    return h


def test_delta_peaks_every_area_equals_height():
    heights = {k: 7 for k in range(-16, 17)}
    h = _delta_peaks(12.5, heights)
    a = integrate_peaks(h, PeakIntegrationConfig(12.5))
    assert a.a0 == 7
    assert all(v == 7 for v in a.reference.values())
    assert a.n_reference == 14


def test_synthesis_round_trip():
    # spread every peak over the window with an arbitrary fixed shape
    R, v, N = 0.471, 0.6031, 10**5
    pat = analytic_peak_areas(InterferometerConfig(50, R), v)
    period, bw = 12.5, 0.1
    h = CorrelationHistogram.zeros(bw, 250)
    shape = np.array([1, 3, 6, 10, 14, 16, 14, 10, 6, 3, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0], float)
    for k in range(-19, 20):
        area = {0: pat.a0, -4: pat.a_minus, 4: pat.a_plus}.get(k, pat.a_k)
        i0 = int(round(k * period / bw)) - 10 + h.n_half
        h.counts[i0:i0 + 20] += np.rint(N * area * shape / shape.sum()).astype(np.int64)
    a = integrate_peaks(h, PeakIntegrationConfig(period, delay=50))
    A = a.mean
    tol = 20 / (N * pat.a_k)  # rounding of 20 bins
    assert a.a0 / A == pytest.approx(pat.a0, abs=tol)
    assert a.a_minus / A == pytest.approx(pat.a_minus, abs=tol)
    assert a.a_plus / A == pytest.approx(pat.a_plus, abs=tol)


def test_reference_peaks_skip_delay_peaks():
    cfg = PeakIntegrationConfig(12.5, delay=50)
    idx = cfg.reference_indices()
    assert len(idx) == 14
    assert 0 not in idx and 4 not in idx and -4 not in idx
    assert idx[:4] == [1, -1, 2, -2]


@pytest.mark.parametrize("kwargs", [dict(window=12.5), dict(window=0), dict(window=14),
                                    dict(n_reference_peaks=1)])
def test_peak_config_invariants(kwargs):
    with pytest.raises(ValueError):
        PeakIntegrationConfig(12.5, **kwargs)


def test_integrate_requires_multiples_of_bin_width():
    h = CorrelationHistogram.zeros(0.3, 300)
    with pytest.raises(ValueError):
        integrate_peaks(h, PeakIntegrationConfig(12.5))


def test_integrate_rejects_out_of_range_peaks():
    h = CorrelationHistogram.zeros(0.1, 50)
    with pytest.raises(ValueError):
        integrate_peaks(h, PeakIntegrationConfig(12.5))


def test_ideal_hom_zero_peak_consistent_with_zero():
    p = EmitterParams(gamma=scenarios.GAMMA)
    s = sample_stream(p, 2 * 10**5, 3)
    ev = simulate_mz(s, InterferometerConfig(50, 0.5), DetectorModel(), p, 4)
    a = integrate_peaks(build_histogram(ev, 0.1, 250), PeakIntegrationConfig(12.5, delay=50))
    assert a.a0 == 0
    assert a.mean > 1000


# --- g2 ----------------------------------------------------------------------

def _g2_of(stream, seed, nref=10):
    ev = simulate_hbt(stream, DetectorModel(), seed)
    h = build_histogram(ev, 0.1, 12.5 * (nref + 2))
    return estimate_g2(h, PeakIntegrationConfig(12.5, n_reference_peaks=nref))


def test_g2_ideal_single_photons():
    s = sample_stream(EmitterParams(gamma=scenarios.GAMMA), 10**5, 1)
    est = _g2_of(s, 2)
    assert est.value == 0
    assert est.uncertainty > 0


def test_g2_fock_two():
    s = fock_stream(2, 10**5, scenarios.GAMMA, 12.5, 1)
    est = _g2_of(s, 2)
    assert abs(est.value - 0.5) < 3 * est.uncertainty


def test_g2_coherent():
    s = coherent_stream(0.3, 3 * 10**5, scenarios.GAMMA, 12.5, 7)
    est = _g2_of(s, 8)
    assert abs(est.value - 1.0) < 3 * est.uncertainty


def test_g2_calibrated_eps():
    p = scenarios.g2_emitter(0.013)
    s = sample_stream(p, 10**6, 21)
    est = _g2_of(s, 22)
    assert abs(est.value - 0.013) < 0.002


def test_g2_uncertainty_matches_poisson_oracle():
    h = _delta_peaks(12.5, {0: 4, **{k: 400 for k in range(-12, 13) if k}})
    est = estimate_g2(h, PeakIntegrationConfig(12.5, n_reference_peaks=10))
    assert est.value == pytest.approx(0.01)
    assert est.uncertainty == pytest.approx(poisson_sigma_ratio(4, 400, 10), rel=1e-12)


def test_g2_empty_lateral_peaks():
    with pytest.raises(EmptyPeaksError):
        estimate_g2(CorrelationHistogram.zeros(0.1, 200), PeakIntegrationConfig(12.5, n_reference_peaks=10))


# --- visibility ----------------------------------------------------------------

def _areas(a0, A, n=14):
    return PeakAreas(a0, {k: A for k in range(1, n + 1)})


def test_visibility_examples():
    assert estimate_visibility(_areas(0.2011, 1.0), 0.471).raw == pytest.approx(0.6031, abs=1e-4)
    R, T = 0.3, 0.7
    assert estimate_visibility(_areas(R * R + T * T, 1.0), R).raw == pytest.approx(0.0, abs=1e-15)
    assert estimate_visibility(_areas(0.0, 100.0), 0.5).raw == 1.0


def test_visibility_uncertainty_positive_and_poisson():
    est = estimate_visibility(_areas(100, 1000), 0.5)
    assert est.uncertainty == pytest.approx(poisson_sigma_ratio(100, 1000, 14) / 0.5, rel=1e-12)
    assert estimate_visibility(_areas(0, 1000), 0.5).uncertainty > 0


def test_visibility_errors():
    with pytest.raises(EmptyPeaksError):
        estimate_visibility(_areas(0, 0), 0.5)
    with pytest.raises(ValueError):
        estimate_visibility(_areas(1, 1), 1.0)


@given(st.floats(0.01, 0.99), st.floats(0, 1))
def test_visibility_inverts_peak_areas(R, v):
    p = analytic_peak_areas(InterferometerConfig(50, R), v)
    assert estimate_visibility(_areas(p.a0, p.a_k), R).raw == pytest.approx(v, abs=1e-12)


# --- background ----------------------------------------------------------------

def _mz_hist(emitter, mz, det, n, seed, md=200.0):
    s = sample_stream(emitter, n, seed)
    ev = simulate_mz(s, mz, det, emitter, seed + 1)
    return build_histogram(ev, 0.1, md)


def test_background_dark_free_matches_raw():
    p = scenarios.constant_visibility_emitter(0.9, brightness=0.8)
    h = _mz_hist(p, InterferometerConfig(50, 0.5), DetectorModel(efficiency=0.5), 3 * 10**5, 9)
    est = background_correct(h, PeakIntegrationConfig(12.5, delay=50), 0.5)
    # the only floor is the few-percent tail of the emission leaking between peaks
    assert abs(est.corrected - est.raw) < 3 * est.uncertainty + 0.01
    assert est.background < 0.02 * est.areas.mean


def test_background_correction_recovers_true_visibility():
    emitter, mz, det = scenarios.device2_background()
    h = _mz_hist(emitter, mz, det, 4 * 10**5, 31, md=12.2 * 16)
    cfg = PeakIntegrationConfig(12.2, delay=12.2, n_background_windows=14)
    est = background_correct(h, cfg, 0.5)
    assert abs(est.raw - 0.89) < 3 * est.uncertainty
    assert abs(est.corrected - 0.95) < 0.010
    assert est.corrected >= est.raw
    assert len(est.background_windows) == 14


def test_constant_histogram_corrects_to_zero():
    h = CorrelationHistogram(0.1, 250, np.full(5000, 9))
    bc = correct_areas(h, PeakIntegrationConfig(12.5, delay=50))
    assert bc.areas.a0 == pytest.approx(0, abs=1e-9)
    assert all(v == pytest.approx(0, abs=1e-9) for v in bc.areas.reference.values())
    with pytest.raises(EmptyPeaksError):
        background_correct(h, PeakIntegrationConfig(12.5, delay=50), 0.5)


def test_background_clamps_negative_areas():
    h = _delta_peaks(12.5, {k: 50 for k in range(-16, 17) if k})
    # add a floor that is only present between peaks
    for m in range(1, 15):
        h.counts[int(round((m + 0.5) * 12.5 / 0.1)) + h.n_half] += 20
    bc = correct_areas(h, PeakIntegrationConfig(12.5))
    assert bc.clamped
    assert bc.areas.a0 == 0.0
    assert bc.areas.mean == pytest.approx(30.0)


def test_background_correction_idempotent():
    emitter, mz, det = scenarios.device2_background()
    h = _mz_hist(emitter, mz, det, 10**5, 41, md=12.2 * 16)
    cfg = PeakIntegrationConfig(12.2, delay=12.2)
    once = subtract_flat_background(h, cfg)
    first = background_correct(once, cfg, 0.5)
    twice = background_correct(subtract_flat_background(once, cfg), cfg, 0.5)
    assert first.background == pytest.approx(0.0, abs=1e-9)
    assert abs(twice.corrected - first.corrected) < 1e-9
    # and the floor-subtracted histogram carries the corrected visibility as its raw one
    direct = background_correct(h, cfg, 0.5)
    assert abs(first.raw - direct.corrected) < direct.corrected_uncertainty


def test_background_window_errors():
    h = CorrelationHistogram.zeros(0.1, 250)
    with pytest.raises(ValueError):
        correct_areas(h, PeakIntegrationConfig(12.5, n_background_windows=1))
    with pytest.raises(ValueError):
        correct_areas(h, PeakIntegrationConfig(12.5, window=7))


# --- budget & brightness ----------------------------------------------------------

def test_budget_device_chain():
    eta, sigma = efficiency_budget([(0.96, 0.01), (0.91, 0.01), (1.0, 0.0), (0.95, 0.01),
                                    (0.91, 0.01), (0.65, 0.04)])
    assert eta == pytest.approx(0.96 * 0.91 * 0.95 * 0.91 * 0.65, rel=1e-15)
    assert round(eta, 3) == 0.491
    assert round(sigma, 2) == 0.03


def test_budget_trivial():
    assert efficiency_budget([(0.7, 0.05)]) == pytest.approx((0.7, 0.05))
    assert efficiency_budget([(1.0, 0.0)] * 5) == (1.0, 0.0)


@pytest.mark.parametrize("items", [[], [(0.0, 0.1)], [(-0.5, 0.1)], [(1.2, 0.1)], [(0.5, -0.1)]])
def test_budget_errors(items):
    with pytest.raises(ValueError):
        efficiency_budget(items)


@given(st.lists(st.tuples(st.floats(0.01, 1), st.floats(0, 0.1)), min_size=1, max_size=8))
def test_budget_product_and_quadrature(items):
    eta, sigma = efficiency_budget(items)
    assert eta == pytest.approx(math.prod(v for v, _ in items), rel=1e-12)
    assert sigma == pytest.approx(eta * math.hypot(*(s / v for v, s in items)), rel=1e-9, abs=1e-300)


def test_brightness_examples():
    assert absolute_brightness(3.6, 80, 0.32) == pytest.approx(0.1406, abs=1e-4)
    assert absolute_brightness(0, 80, 0.32) == 0
    assert absolute_brightness(25.6, 80, 0.32) == pytest.approx(1.0, rel=1e-12)
    assert float(Fraction(36, 10) / (80 * Fraction(32, 100))) == pytest.approx(0.140625)


def test_brightness_errors():
    with pytest.raises(InconsistentInputsError):
        absolute_brightness(30, 80, 0.32)
    for args in [(-1, 80, 0.3), (1, 0, 0.3), (1, 80, 0), (1, 80, 1.5)]:
        with pytest.raises(ValueError):
            absolute_brightness(*args)
