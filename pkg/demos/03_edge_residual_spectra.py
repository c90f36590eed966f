"""
How strongly are two modules linked?
====================================

Given an estimate of Sigma, the residual spectrum of a pair of modules (after
conditioning on everything else) has a cross block that vanishes exactly when the
two modules are conditionally independent. Its norm across frequency is a compact
picture of the link strength.
"""

import numpy as np

from kronar.data import covariance_lags
from kronar.pipeline import EstimationConfig, edge_residual_spectrum, estimate
from kronar.spectral import FreqGrid
from kronar.synth import random_kgm_model, simulate, spectral_factorize

rng = np.random.default_rng(11)
m1, m2, n = 3, 2, 2
sigma, support = random_kgm_model(m1, m2, n, 0.4, 0.5, rng)
lags = covariance_lags(simulate(spectral_factorize(sigma), 5000, rng), n)
res = estimate(lags, EstimationConfig("K1", m1, m2, n))

grid = FreqGrid(64)
print("true module graph:\n", support.E1)
for h in range(m1):
    for j in range(h):
        curve = edge_residual_spectrum(res.poly, m1, m2, "modules", (h, j), grid)
        print(f"modules {h}-{j}: linked={bool(res.E1[h, j])}, peak norm {curve.max():.4f}, "
              f"mean norm {curve.mean():.4f}")

# Node pairs are treated the same way, grouping all modules together.
curve = edge_residual_spectrum(res.poly, m1, m2, "nodes", (0, 1), grid)
print(f"nodes 0-1: linked={bool(res.E2[1, 0])}, peak norm {curve.max():.4f}")
