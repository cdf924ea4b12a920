import numpy as np
import pytest

from spatial_ews.experiments import ExperimentSetting, baseline_config, run_ensemble
from spatial_ews.model import ModelParams, jacobian, stable_state
from spatial_ews.sim import laplacian_neumann, noise_kernel

P6 = ModelParams(p=6.0, m=0.5, h=0.1, delta=0.01)


def integrate_linear_rd(A, D, z0, dx, dt, record_every, n_records):
    """Explicit Euler integration of z_t = A z + D z_xx with no-flux ends.

    This is the forward-model oracle for the regression tests: it shares
    nothing with the estimator except the second-difference stencil.
    """
    z = np.array(z0, dtype=float)
    frames = [z.copy()]
    for _ in range(n_records):
        for _ in range(record_every):
            z = z + dt * (A @ z + D[:, None] * laplacian_neumann(z, dx))
        frames.append(z.copy())
    return np.stack(frames, axis=1)


def smooth_random_field(rng, nx, dx, scale=1.0, amplitude=1e-2):
    w = noise_kernel(scale, dx)
    return np.stack([np.convolve(rng.standard_normal(nx + w.size - 1), w, "valid")
                     for _ in range(2)]) * amplitude


@pytest.fixture(scope="session")
def p6_jacobian():
    return jacobian(P6, stable_state(P6))


@pytest.fixture(scope="session")
def linear_dataset(p6_jacobian):
    """Noise-free linear data: p=6 Jacobian, D=(1, 0.01), dt=1e-6 recorded every
    1e-4 up to T=0.5 on L=40, dx=0.1."""
    A = p6_jacobian.matrix
    D = np.array([1.0, 0.01])
    dx, nx = 0.1, 401
    z0 = smooth_random_field(np.random.default_rng(1), nx, dx)
    Z = integrate_linear_rd(A, D, z0, dx, dt=1e-6, record_every=100, n_records=5000)
    return {"A": A, "D": D, "Z": Z, "dt_record": 1e-4, "dx": dx}


def _baseline_setting(delta, **overrides):
    cfg = baseline_config(delta, **overrides)
    return ExperimentSetting("baseline", {"delta": delta}, cfg, truth=(cfg.params_at(0.0),))


@pytest.fixture(scope="session")
def turing_ensemble20():
    return run_ensemble(_baseline_setting(0.01), range(20))


@pytest.fixture(scope="session")
def saddle_ensemble20():
    return run_ensemble(_baseline_setting(0.5), range(20))


@pytest.fixture(scope="session")
def baseline_setting():
    return _baseline_setting
