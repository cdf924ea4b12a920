import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from spatial_ews.dispersion import (DEFAULT_KNUM, Destabilization, DispersionCurve,
                                    DominantMode, LinearRDModel, classify, default_kgrid,
                                    dispersion_curve, dominant_mode, eigenvalues, make_kgrid)

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def lapack_sorted(M):
    ev = np.linalg.eigvals(M).astype(complex)
    return ev[np.lexsort((-ev.imag, -ev.real))]


# -- eigenvalues -------------------------------------------------------------

def test_eigenvalues_examples():
    np.testing.assert_array_equal(eigenvalues([[-1, 0], [0, -0.5]]), [-0.5, -1])
    np.testing.assert_array_equal(eigenvalues(np.eye(2)), [1, 1])
    np.testing.assert_allclose(eigenvalues([[0, 1], [-1, 0]]), [1j, -1j], atol=1e-15)


def test_eigenvalues_rejects_bad_input():
    with pytest.raises(ValueError):
        eigenvalues(np.ones((2, 3)))
    with pytest.raises(ValueError):
        eigenvalues([[np.nan, 0], [0, 1]])


def test_closed_form_matches_lapack_on_random_matrices():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        M = rng.normal(scale=10.0, size=(2, 2))
        np.testing.assert_allclose(eigenvalues(M), lapack_sorted(M), rtol=0, atol=1e-9)


@settings(max_examples=300, deadline=None)
@given(arrays(float, (2, 2), elements=finite))
def test_eigenvalue_ordering_and_trace_det(M):
    ev = eigenvalues(M)
    assert np.all(np.diff(ev.real) <= 0)
    scale = 1 + np.abs(M).max() ** 2
    assert abs(ev.sum() - np.trace(M)) < 1e-9 * scale
    assert abs(np.prod(ev) - np.linalg.det(M)) < 1e-9 * scale


def test_three_component_uses_general_path():
    M = np.diag([-3.0, 1.0, -2.0])
    np.testing.assert_allclose(eigenvalues(M), [1.0, -2.0, -3.0])


# -- model and grids ---------------------------------------------------------

def test_linear_model_validation():
    with pytest.raises(ValueError):
        LinearRDModel(np.ones((2, 3)), np.ones(2))
    with pytest.raises(ValueError):
        LinearRDModel(np.eye(2), np.ones(3))
    assert LinearRDModel(np.eye(2), np.array([1.0, -0.1])).negative_diffusion


def test_default_kgrid():
    k = default_kgrid(dx=0.1)
    assert k.size == DEFAULT_KNUM and k[0] == 0 and k[-1] == pytest.approx(np.pi / 0.1)
    assert default_kgrid(k_c=2.0)[-1] == pytest.approx(8.0)
    assert default_kgrid()[-1] == pytest.approx(10.0)
    assert np.allclose(np.diff(make_kgrid(5.0, 11)), 0.5)


# -- curves ------------------------------------------------------------------

def p6_model(p6_jacobian, delta):
    return LinearRDModel(p6_jacobian.matrix, np.array([1.0, delta]))


def test_k0_reduces_to_reaction_matrix(p6_jacobian):
    curve = dispersion_curve(p6_model(p6_jacobian, 0.5), np.array([0.0]))
    np.testing.assert_allclose(curve.eigs[0], eigenvalues(p6_jacobian.matrix))
    assert curve.max_real[0] == eigenvalues(p6_jacobian.matrix).real.max()


def test_turing_case_interior_peak_matches_brute_force(p6_jacobian):
    model = p6_model(p6_jacobian, 0.01)
    mode = dominant_mode(dispersion_curve(model, make_kgrid(10.0)))
    fine = np.linspace(0, 10, 10_000)
    brute = [np.linalg.eigvals(model.operator(k)).real.max() for k in fine]
    j = int(np.argmax(brute))
    assert 0 < j < fine.size - 1
    assert mode.k_star > 0 and mode.lambda_star < 0
    assert abs(mode.k_star - fine[j]) < 10 / 512 / 2
    assert mode.lambda_star == pytest.approx(brute[j], abs=1e-4)


def test_trace_det_on_grid(p6_jacobian):
    model = p6_model(p6_jacobian, 0.01)
    k = make_kgrid(10.0)
    curve = dispersion_curve(model, k)
    tr = np.array([np.trace(model.operator(x)) for x in k])
    det = np.array([np.linalg.det(model.operator(x)) for x in k])
    np.testing.assert_allclose(curve.eigs.sum(axis=1), tr, atol=1e-9)
    np.testing.assert_allclose(np.prod(curve.eigs, axis=1), det, atol=1e-9 * np.abs(det).max())


@settings(max_examples=100, deadline=None)
@given(arrays(float, (2, 2), elements=st.floats(-10, 10)), st.floats(0.01, 2.0),
       st.floats(0.01, 2.0))
def test_large_k_decay(A, d1, d2):
    curve = dispersion_curve(LinearRDModel(A, np.array([d1, d2])), make_kgrid(200.0, 65))
    tail = curve.max_real[-20:]
    assert np.all(np.diff(tail) < 0)


def test_curve_matches_general_path_for_three_components():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(3, 3))
    D = np.array([1.0, 0.1, 0.5])
    k = make_kgrid(5.0, 33)
    curve = dispersion_curve(LinearRDModel(A, D), k)
    for i, x in enumerate(k):
        np.testing.assert_allclose(curve.eigs[i], lapack_sorted(A - x * x * np.diag(D)),
                                   atol=1e-10)


# -- dominant mode -----------------------------------------------------------

def _curve(k, y):
    y = np.asarray(y, dtype=float)
    return DispersionCurve(k=np.asarray(k, float), eigs=np.stack([y, y - 1], axis=1) + 0j)


def test_monotone_curve_peaks_at_zero():
    k = make_kgrid(5.0, 51)
    assert dominant_mode(_curve(k, -k**2)).k_star == 0.0


def test_constant_curve_tie_goes_to_smallest_k():
    k = make_kgrid(5.0, 51)
    assert dominant_mode(_curve(k, np.full(k.size, -0.3))) == DominantMode(0.0, -0.3)


def test_refinement_within_half_step_of_fine_argmax():
    f = lambda k: -((k - 2.37) ** 2) * (1 + 0.2 * np.sin(k)) - 0.1 * k
    k = make_kgrid(6.0, 61)
    mode = dominant_mode(_curve(k, f(k)))
    fine = np.linspace(0, 6.0, 6001)
    assert abs(mode.k_star - fine[np.argmax(f(fine))]) <= 0.5 * (k[1] - k[0])
    assert dominant_mode(_curve(k, f(k)), refine=False).k_star in k


def test_refinement_improves_on_grid_argmax(p6_jacobian):
    model = p6_model(p6_jacobian, 0.01)
    coarse = dispersion_curve(model, make_kgrid(10.0, 129))
    fine = dispersion_curve(model, make_kgrid(10.0, 128 * 100 + 1))
    k_ref = dominant_mode(fine, refine=False).k_star
    refined = dominant_mode(coarse).k_star
    raw = dominant_mode(coarse, refine=False).k_star
    assert abs(refined - k_ref) <= abs(raw - k_ref)
    assert abs(refined - k_ref) <= 0.5 * 10 / 128


# -- classification ----------------------------------------------------------

def test_classify_examples(p6_jacobian):
    assert classify(DominantMode(0.0, -1.0)) is Destabilization.HOMOGENEOUS
    assert classify(DominantMode(1.0, -1.0)) is Destabilization.HETEROGENEOUS
    assert classify(DominantMode(0.2, -1.0)) is Destabilization.HOMOGENEOUS
    mode = dominant_mode(dispersion_curve(p6_model(p6_jacobian, 0.01), default_kgrid(k_c=1.0)))
    assert classify(mode, 0.2) is Destabilization.HETEROGENEOUS
    with pytest.raises(ValueError):
        classify(mode, 0.0)


def test_saddle_node_case_is_homogeneous(p6_jacobian):
    mode = dominant_mode(dispersion_curve(p6_model(p6_jacobian, 0.5), default_kgrid()))
    assert mode.k_star == 0.0
    assert classify(mode) is Destabilization.HOMOGENEOUS
