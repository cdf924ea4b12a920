"""Saddle-node and Turing thresholds across diffusion ratios.

Decreasing rainfall from p=6 the vegetated state loses stability either at
the saddle-node (homogeneous collapse) or earlier, at a Turing point
(pattern formation). Which comes first depends on the diffusion ratio.

Run with ``python demos/thresholds.py``.
"""
from spatial_ews.model import (ModelParams, critical_wavenumber, jacobian, saddle_node_p,
                               stable_state, turing_p)

m, h = 0.5, 0.1
p_sn = saddle_node_p(m, h)
print(f"saddle-node rainfall: {p_sn:.5f}")

# The Turing threshold only exists for slow enough water-vs-plant diffusion
for delta in (0.01, 0.05, 0.1, 0.2, 0.5):
    p_t = turing_p(m, h, delta)
    if p_t is None:
        print(f"delta={delta:<5} saddle-node first")
        continue
    params = ModelParams(p=p_t, m=m, h=h, delta=delta)
    k_c = critical_wavenumber(jacobian(params, stable_state(params)), delta)
    print(f"delta={delta:<5} Turing at p={p_t:.5f}, k_c={k_c:.4f}")
