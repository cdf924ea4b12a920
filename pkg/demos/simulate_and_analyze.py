"""From one noisy simulation to an estimated dispersion relation.

A single baseline run (p=6, delta=0.01, one time unit) is recorded, reduced
to fluctuations around the spatial mean, and fitted with a linear
reaction-diffusion model. The dominant mode of the fitted model is compared
with the one of the true Jacobian.

Run with ``python demos/simulate_and_analyze.py``. Takes a few seconds.
"""
from spatial_ews.dispersion import classify, default_kgrid, dominant_mode
from spatial_ews.estimator import analyze_window, fluctuations
from spatial_ews.experiments import baseline_config, true_curve
from spatial_ews.sim import simulate

cfg = baseline_config(0.01, seed=0)
data = simulate(cfg)
print(f"recorded {data.values.shape[1]} frames on {data.values.shape[2]} points")

Z = fluctuations(data)
kgrid = default_kgrid(dx=data.dx_effective)
fit, curve, mode = analyze_window(Z, data.dt_record, data.dx_effective, kgrid=kgrid)
print("fitted A:\n", fit.model.A.round(3))
print("fitted D:", fit.model.D.round(4))

truth = dominant_mode(true_curve(cfg.params_at(0.0), kgrid))
print(f"estimated k*={mode.k_star:.3f}, lambda*={mode.lambda_star:.3f} "
      f"({classify(mode).value})")
print(f"true      k*={truth.k_star:.3f}, lambda*={truth.lambda_star:.3f}")
