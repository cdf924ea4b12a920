"""True dispersion relations of the vegetated state at p=6.

For delta=0.01 the leading growth rate peaks at a non-zero wavenumber, the
signature of an approaching Turing instability. For delta=0.5 the peak sits
at k=0, as expected before a homogeneous tipping point.

Run with ``python demos/true_dispersion.py``.
"""
import numpy as np

from spatial_ews.dispersion import classify, default_kgrid, dominant_mode
from spatial_ews.experiments import true_curve
from spatial_ews.model import ModelParams

for delta in (0.01, 0.5):
    params = ModelParams(p=6.0, delta=delta)
    curve = true_curve(params, default_kgrid())
    mode = dominant_mode(curve)
    print(f"delta={delta}: k*={mode.k_star:.4f}, lambda*={mode.lambda_star:.4f}, "
          f"{classify(mode).value}")
    # a coarse text rendering of max Re(lambda) against k
    for k in np.linspace(0, 6, 7):
        i = int(np.argmin(np.abs(curve.k - k)))
        print(f"  k={curve.k[i]:5.2f}  {curve.max_real[i]:+.3f}")
