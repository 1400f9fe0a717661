"""Independent reference computations used to freeze or check expected values."""

from __future__ import annotations

import itertools
from collections import defaultdict

import numpy as np


def enumerate_routing(time_bins, delay, R):
    """Expected coincidence pattern by enumerating every joint routing outcome.

    Each photon independently takes the short or long arm (1/2 each) and then
    leaves the output splitter: from the long-arm port it reaches detector 0
    with probability R, from the short-arm port detector 1 with probability R.
    For every outcome, each photon pair on different detectors adds its
    probability at delay t(detector 1) - t(detector 0). The result is scaled
    by 4 to match the per-pair normalisation R^2 + 2RT + T^2 per +/- dt.
    """
    T = 1 - R
    routes = [
        # (extra delay, detector, probability)
        (0, 0, T / 2), (0, 1, R / 2),          # short arm, port b
        (delay, 0, R / 2), (delay, 1, T / 2),  # long arm, port a
    ]
    out = defaultdict(int)
    n = len(time_bins)
    for combo in itertools.product(routes, repeat=n):
        prob = 1
        for _, _, p in combo:
            prob = prob * p
        for i in range(n):
            for j in range(i + 1, n):
                (di, ci, _), (dj, cj, _) = combo[i], combo[j]
                if ci == cj:
                    continue
                ti, tj = time_bins[i] + di, time_bins[j] + dj
                dt = (tj - ti) if cj == 1 else (ti - tj)
                out[dt] += 4 * prob
    return {k: v for k, v in out.items() if v != 0}


def count_pairs_bruteforce(channels, times_ps, max_ps):
    """O(n^2) count of cross-detector pairs with -max <= t1 - t0 < max."""
    n = 0
    for i in range(len(times_ps)):
        for j in range(len(times_ps)):
            if channels[i] == 0 and channels[j] == 1:
                d = times_ps[j] - times_ps[i]
                if -max_ps <= d < max_ps:
                    n += 1
    return n


def batch_autocorrelation(x, lag, n_batches=100):
    """Lag autocorrelation (known zero mean) with a batch-means standard error."""
    x = np.asarray(x, dtype=float)
    var = np.mean(x * x)
    prods = x[:-lag] * x[lag:] / var
    batches = np.array_split(prods, n_batches)
    means = np.array([b.mean() for b in batches])
    return prods.mean(), means.std(ddof=1) / np.sqrt(n_batches)


def poisson_sigma_ratio(num, den_mean, n_den):
    """Poisson standard error of num / mean(den) when den averages n_den windows."""
    r = num / den_mean
    return np.sqrt(max(num, 1) + r * r * den_mean / n_den) / den_mean
