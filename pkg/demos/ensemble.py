"""A small seeded ensemble and its summary statistics.

Ten members of the baseline setting are run and summarized: percentile
bands of the estimated curves, the spread of (k*, lambda*) errors, and the
classification counts. The full experiment grids are available through
``spatial-ews experiment``.

Run with ``python demos/ensemble.py``. Takes about half a minute.
"""
from spatial_ews.experiments import ExperimentSetting, baseline_config, run_ensemble, summarize
from spatial_ews.stats import format_mean_std

cfg = baseline_config(0.01)
setting = ExperimentSetting("demo", {"delta": 0.01}, cfg, truth=(cfg.params_at(0.0),))
summary = summarize(run_ensemble(setting, range(10)))

print(f"members: {summary.n_members}, failed: {summary.n_failed}")
print(f"classification: {summary.classification_counts}")
(mk, sk), (ml, sl) = summary.delta_k, summary.delta_lambda
print(f"delta k*      = {format_mean_std(mk, sk)}")
print(f"delta lambda* = {format_mean_std(ml, sl)}")
for name, mean in summary.theta_mean.items():
    print(f"  {name:6s} {format_mean_std(mean, summary.theta_std[name])}")
