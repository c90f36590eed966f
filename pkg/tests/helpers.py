"""Shared fixtures for building small well-conditioned problems."""

import numpy as np

from kronar.data import covariance_lags
from kronar.synth import random_kgm_model, simulate, spectral_factorize


def simulated_lags(m1, m2, n, N, seed, eta=0.3):
    rng = np.random.default_rng(seed)
    sigma, ks = random_kgm_model(m1, m2, n, eta, eta, rng)
    y = simulate(spectral_factorize(sigma), N, rng)
    return covariance_lags(y, n), sigma, ks


ACCEPTANCE_LINES = []


def report(number, ok, detail):
    """Record and print one acceptance line."""
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok
