import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spatial_ews.dispersion import LinearRDModel, dispersion_curve, make_kgrid
from spatial_ews.estimator import (MIN_WINDOW_FRAMES, DerivativeSample, RankDeficientError,
                                   WindowPlan, analyze_window, equilibrium_series,
                                   estimate_derivatives, fit_linear_rd, fluctuations,
                                   split_windows, windows_for_intervals)
from spatial_ews.experiments import baseline_config
from spatial_ews.model import stable_state
from spatial_ews.sim import Forcing, NoiseConfig, SpatioTemporalData, simulate

from conftest import P6, integrate_linear_rd, smooth_random_field

EXACT_TOL = 1e-3


def theta_error(fit, A, D):
    return np.abs(np.r_[(fit.model.A - A).ravel(), fit.model.D - D])


# -- equilibrium and fluctuations --------------------------------------------

def test_equilibrium_of_constant_data():
    values = np.broadcast_to(np.array([2.0, -1.0])[:, None, None], (2, 5, 7))
    np.testing.assert_array_equal(equilibrium_series(values), [[2.0] * 5, [-1.0] * 5])
    assert np.all(fluctuations(values) == 0)


def test_equilibrium_removes_full_period_sine():
    nx = 400
    x = np.arange(nx) * 40.0 / nx  # periodic sampling spans whole periods
    u = 5 + np.sin(2 * math.pi * x / 40.0)
    values = np.stack([np.tile(u, (3, 1)), np.tile(u, (3, 1))])
    np.testing.assert_allclose(equilibrium_series(values), 5.0, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), offset=st.floats(-1e3, 1e3))
def test_fluctuations_have_zero_frame_mean(seed, offset):
    values = offset + np.random.default_rng(seed).normal(size=(2, 6, 31))
    assert np.abs(fluctuations(values).mean(axis=2)).max() < 1e-12


def test_fluctuations_shape_mismatch():
    with pytest.raises(ValueError):
        fluctuations(np.zeros((2, 4, 5)), np.zeros((2, 3)))


def test_equilibrium_of_noise_free_run_is_v2():
    data = simulate(baseline_config(0.01, noise=NoiseConfig(0.0, 0.1), t_end=0.1))
    s = stable_state(P6)
    eq = equilibrium_series(data)
    np.testing.assert_allclose(eq[0], s.u, atol=1e-12)
    np.testing.assert_allclose(eq[1], s.v, atol=1e-12)


def test_baseline_fluctuations_small_relative_to_equilibrium():
    data = simulate(baseline_config(0.01, seed=2))
    Z = fluctuations(data)
    eq = np.abs(equilibrium_series(data)).mean(axis=1)
    rms = np.sqrt((Z**2).mean(axis=(1, 2)))
    assert np.all(rms / eq < 0.5)


# -- windows -----------------------------------------------------------------

def test_split_windows_whole_dataset():
    Z = np.zeros((2, 10001, 5))
    assert split_windows(Z, WindowPlan()) == [slice(0, 10001)]


def test_split_windows_two_halves():
    Z = np.zeros((2, 10001, 5))
    assert split_windows(Z, WindowPlan(5000, 5000)) == [slice(0, 5000), slice(5000, 10000)]


def test_split_windows_rejects_bad_plans():
    with pytest.raises(ValueError):
        WindowPlan(length=MIN_WINDOW_FRAMES - 1)
    with pytest.raises(ValueError):
        split_windows(np.zeros((2, 20, 5)), WindowPlan(length=30))


def test_window_plan_from_span():
    plan = WindowPlan.from_span(1.0, 1e-4)
    assert plan.length == 10001 and plan.stride == 10000


def test_ramp_windows_match_rainfall_intervals():
    dt_rec = 1e-3
    times = np.arange(9001) * dt_rec
    forcing = Forcing(20.0, 2.0)
    intervals = [(20, 18), (8, 6), (4, 2)]
    t_ranges = [((20 - p0) / 2.0, (20 - p1) / 2.0) for p0, p1 in intervals]
    assert t_ranges == [(0.0, 1.0), (6.0, 7.0), (8.0, 9.0)]
    slices = windows_for_intervals(times, t_ranges)
    for sl, (t0, t1), (p0, p1) in zip(slices, t_ranges, intervals):
        assert times[sl][0] == pytest.approx(t0) and times[sl][-1] == pytest.approx(t1)
        assert forcing.at(times[sl][0]) == pytest.approx(p0)
        assert forcing.at(times[sl][-1]) == pytest.approx(p1)
    with pytest.raises(ValueError):
        windows_for_intervals(times, [(9.5, 10.0)])


# -- derivatives -------------------------------------------------------------

def test_time_derivative_of_exponential():
    dt = 1e-3
    t = np.arange(50) * dt
    Z = np.broadcast_to(np.exp(-t)[None, :, None], (2, 50, 6)).copy()
    fwd = estimate_derivatives(Z, dt, 0.1)
    rel = np.abs(fwd.z_t / -fwd.z - 1).max()
    assert rel == pytest.approx(dt / 2, rel=0.01)  # first-order bias
    fwd2 = estimate_derivatives(Z, dt, 0.1, stencil="forward2")
    assert np.abs(fwd2.z_t / -fwd2.z - 1).max() < dt**2
    assert fwd.z.shape == (2, 49, 4) and fwd2.z.shape == (2, 48, 4)


def test_space_derivative_of_cosine():
    L, dx = 40.0, 0.1
    x = np.arange(401) * dx
    c = np.cos(math.pi * x / L)
    Z = np.broadcast_to(c, (2, 3, 401)).copy()
    s = estimate_derivatives(Z, 1.0, dx)
    k2 = (math.pi / L) ** 2
    assert np.abs(s.z_xx + k2 * s.z).max() < k2**2 * dx**2


def test_derivative_preconditions():
    with pytest.raises(ValueError):
        estimate_derivatives(np.zeros((2, 1, 10)), 1.0, 0.1)
    with pytest.raises(ValueError):
        estimate_derivatives(np.zeros((2, 10, 10)), 1.0, 0.1, stencil="central")


# -- fitting -----------------------------------------------------------------

def test_exact_recovery_p6(linear_dataset):
    ds = linear_dataset
    fit = fit_linear_rd(estimate_derivatives(ds["Z"], ds["dt_record"], ds["dx"], "forward2"))
    assert theta_error(fit, ds["A"], ds["D"]).max() < EXACT_TOL
    assert fit.n_samples == 4999 * 399
    assert not fit.negative_diffusion


def test_noise_free_curve_matches_truth(linear_dataset):
    ds = linear_dataset
    k = make_kgrid(5.0, 257)
    _, curve, _ = analyze_window(ds["Z"], ds["dt_record"], ds["dx"], kgrid=k,
                                 stencil="forward2")
    true = dispersion_curve(LinearRDModel(ds["A"], ds["D"]), k)
    assert np.abs(curve.max_real - true.max_real).max() < 1e-2


@pytest.mark.parametrize("seed", range(5))
def test_exact_recovery_random_models(seed):
    rng = np.random.default_rng(100 + seed)
    A = rng.uniform(-2, 2, (2, 2))
    D = rng.uniform(0.05, 1.0, 2)
    Z = integrate_linear_rd(A, D, smooth_random_field(rng, 101, 0.1), 0.1, 1e-5, 10, 5000)
    fit = fit_linear_rd(estimate_derivatives(Z, 1e-4, 0.1, "forward2"))
    err = theta_error(fit, A, D)
    big = np.abs(np.r_[A.ravel(), D]) >= 0.01
    assert err[big].max() < EXACT_TOL


def test_refinement_moves_toward_truth(p6_jacobian):
    A, D = p6_jacobian.matrix, np.array([1.0, 0.01])
    fine, coarse = [], []
    for seed in range(20):
        z0 = smooth_random_field(np.random.default_rng(200 + seed), 101, 0.1)
        Z = integrate_linear_rd(A, D, z0, 0.1, 1e-5, 10, 2000)
        fine.append(theta_error(fit_linear_rd(estimate_derivatives(Z, 1e-4, 0.1)), A, D))
        coarse.append(theta_error(fit_linear_rd(estimate_derivatives(Z[:, ::2], 2e-4, 0.1)),
                                  A, D))
    assert np.mean(fine) <= np.mean(coarse)
    assert np.all(np.mean(fine, axis=0) <= np.mean(coarse, axis=0) + 1e-12)


def test_scale_invariance(linear_dataset):
    ds = linear_dataset
    Z = ds["Z"][:, :1000]
    base = analyze_window(Z, ds["dt_record"], ds["dx"])
    scaled = analyze_window(3.7 * Z, ds["dt_record"], ds["dx"])
    np.testing.assert_allclose(scaled[0].model.A, base[0].model.A, rtol=1e-10)
    np.testing.assert_allclose(scaled[0].model.D, base[0].model.D, rtol=1e-10)
    assert scaled[2].k_star == pytest.approx(base[2].k_star, rel=1e-10)
    assert scaled[2].lambda_star == pytest.approx(base[2].lambda_star, rel=1e-10)


def test_zero_fluctuations_are_rank_deficient():
    with pytest.raises(RankDeficientError) as info:
        fit_linear_rd(estimate_derivatives(np.zeros((2, 20, 30)), 1e-4, 0.1))
    assert info.value.condition == math.inf


def test_collinear_regressors_are_rank_deficient():
    rng = np.random.default_rng(0)
    z = rng.normal(size=(1, 50, 20))
    sample = DerivativeSample(z=np.concatenate([z, 2 * z]), z_t=rng.normal(size=(2, 50, 20)),
                              z_xx=rng.normal(size=(2, 50, 20)))
    with pytest.raises(RankDeficientError):
        fit_linear_rd(sample)


def test_fit_matches_lstsq_on_random_regression():
    rng = np.random.default_rng(5)
    sample = DerivativeSample(z=rng.normal(size=(2, 40, 30)), z_t=rng.normal(size=(2, 40, 30)),
                              z_xx=rng.normal(size=(2, 40, 30)))
    fit = fit_linear_rd(sample)
    for i in range(2):
        X = np.column_stack([sample.z[0].ravel(), sample.z[1].ravel(), sample.z_xx[i].ravel()])
        coef, res, *_ = np.linalg.lstsq(X, sample.z_t[i].ravel(), rcond=None)
        np.testing.assert_allclose(np.r_[fit.model.A[i], fit.model.D[i]], coef, rtol=1e-10)
        assert fit.residual_rms[i] == pytest.approx(math.sqrt(res[0] / X.shape[0]))
        assert fit.condition[i] == pytest.approx(np.linalg.cond(X.T @ X), rel=1e-8)


def test_analyze_window_on_dataset_object():
    data = simulate(baseline_config(0.01, seed=1))
    assert isinstance(data, SpatioTemporalData)
    fit, curve, mode = analyze_window(fluctuations(data), data.dt_record, data.dx_effective)
    assert curve.k[-1] == pytest.approx(math.pi / 0.1)
    assert mode.k_star > 0.5


# -- ensemble-level behaviour (100 members each) -----------------------------

@pytest.mark.slow
@pytest.mark.parametrize("delta,turing", [(0.01, True), (0.5, False)])
def test_classification_over_100_members(baseline_setting, delta, turing):
    from spatial_ews.experiments import run_ensemble

    res = run_ensemble(baseline_setting(delta), range(100))
    ks = np.array([m.mode.k_star for m in res.members if m.ok])
    hits = np.sum(ks > 0.5) if turing else np.sum(ks <= 0.2)
    assert hits >= 90
