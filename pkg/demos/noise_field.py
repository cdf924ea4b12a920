"""Spatially correlated noise increments.

White noise is smoothed by a truncated Gaussian kernel and normalized so that
each grid point keeps unit variance. The empirical correlation between points
``lag`` cells apart should follow ``exp(-(lag dx)^2 / (2 lc^2))``.

Run with ``python demos/noise_field.py``.
"""
import math

import numpy as np

from spatial_ews.sim import NoiseConfig, make_rng, sample_noise_increment

dx, nx = 0.1, 41
for lc in (0.0, 0.1, 0.2):
    draws = sample_noise_increment(make_rng(0), nx, NoiseConfig(1.0, lc), dx, 1.0,
                                   size=20_000).reshape(-1, nx)
    print(f"lc={lc}: pointwise variance {draws.var(axis=0).mean():.3f}")
    for lag in (1, 2, 3):
        rho = np.corrcoef(draws[:, 20], draws[:, 20 + lag])[0, 1]
        expected = math.exp(-(lag * dx) ** 2 / (2 * lc**2)) if lc else 0.0
        print(f"  lag {lag}: {rho:+.3f} (expected {expected:+.3f})")
