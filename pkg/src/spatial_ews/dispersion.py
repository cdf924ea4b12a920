"""Dispersion relations of linear reaction-diffusion operators.

For ``z_t = A z + D z_xx`` a Fourier mode ``exp(lambda t + i k x)`` grows at
the eigenvalues of ``A - k^2 D``. The same engine serves the true model
(Jacobian plus known diffusion) and fitted operators.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LinearRDModel",
    "DispersionCurve",
    "DominantMode",
    "Destabilization",
    "eigenvalues",
    "make_kgrid",
    "default_kgrid",
    "dispersion_curve",
    "dominant_mode",
    "classify",
    "DEFAULT_KNUM",
]

DEFAULT_KNUM = 513


@dataclass(frozen=True)
class LinearRDModel:
    """Linear reaction-diffusion operator ``{A, D}`` with diagonal ``D``.

    Negative diffusion entries are allowed (a fit may produce them) and are
    reported through :attr:`negative_diffusion`.
    """

    A: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        D = np.asarray(self.D, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        if A.shape[0] < 2:
            raise ValueError("need at least two components")
        if D.shape != (A.shape[0],):
            raise ValueError(f"D must have {A.shape[0]} entries, got {D.shape}")
        if not (np.isfinite(A).all() and np.isfinite(D).all()):
            raise ValueError("A and D must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "D", D)

    @property
    def n_components(self) -> int:
        return self.A.shape[0]

    @property
    def negative_diffusion(self) -> bool:
        return bool((self.D < 0).any())

    @classmethod
    def from_jacobian(cls, jac, delta: float) -> "LinearRDModel":
        """Two-component operator with water diffusion 1 and vegetation ``delta``."""
        return cls(A=jac.matrix, D=np.array([1.0, delta]))

    def operator(self, k: float) -> np.ndarray:
        return self.A - k * k * np.diag(self.D)


@dataclass(frozen=True)
class DispersionCurve:
    """Eigenvalues of ``A - k^2 D`` on a wavenumber grid.

    ``eigs`` has shape ``(len(k), alpha)``, each row sorted by descending real
    part, so ``max_real == eigs[:, 0].real``.
    """

    k: np.ndarray
    eigs: np.ndarray

    @property
    def max_real(self) -> np.ndarray:
        return self.eigs[:, 0].real


@dataclass(frozen=True)
class DominantMode:
    k_star: float
    lambda_star: float


class Destabilization(str, enum.Enum):
    HOMOGENEOUS = "homogeneous"
    HETEROGENEOUS = "heterogeneous"


def _sort_eigs(vals: np.ndarray) -> np.ndarray:
    # descending real part, ties by descending imaginary part
    order = np.lexsort((-vals.imag, -vals.real), axis=-1)
    return np.take_along_axis(vals, order, axis=-1)


def _eig2(a, b, c, d) -> np.ndarray:
    """Roots of ``lam^2 - (a + d) lam + (a d - b c)``, vectorized.

    Uses ``((a - d)/2)^2 + b c`` for the discriminant (no cancellation between
    trace^2 and det) and recovers the smaller real root from the product.
    """
    a, b, c, d = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (a, b, c, d)))
    half_tr = 0.5 * (a + d)
    disc = (0.5 * (a - d)) ** 2 + b * c
    det = a * d - b * c
    out = np.empty(a.shape + (2,), dtype=complex)

    real = disc >= 0
    s = np.sqrt(np.where(real, disc, 0.0))
    q = half_tr + np.copysign(s, half_tr)
    safe = q != 0
    other = np.where(safe, det / np.where(safe, q, 1.0), half_tr - s)
    big = np.where(safe, q, half_tr + s)
    out[..., 0] = np.where(real, np.maximum(big, other), 0.0)
    out[..., 1] = np.where(real, np.minimum(big, other), 0.0)

    si = np.sqrt(np.where(real, 0.0, -disc))
    cplx = ~real
    out[..., 0] = np.where(cplx, half_tr + 1j * si, out[..., 0])
    out[..., 1] = np.where(cplx, half_tr - 1j * si, out[..., 1])
    return out


def eigenvalues(M) -> np.ndarray:
    """All eigenvalues of a real square matrix, sorted by descending real part.

    2x2 matrices use the closed-form quadratic; larger ones go to LAPACK.

    >>> eigenvalues([[0.0, 1.0], [-1.0, 0.0]])
    array([0.+1.j, 0.-1.j])
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.isfinite(M).all():
        raise ValueError("matrix has non-finite entries")
    if M.shape[0] == 2:
        return _eig2(M[0, 0], M[0, 1], M[1, 0], M[1, 1])
    return _sort_eigs(np.linalg.eigvals(M).astype(complex))


def make_kgrid(k_max: float, num: int = DEFAULT_KNUM) -> np.ndarray:
    if not (k_max > 0 and math.isfinite(k_max)):
        raise ValueError(f"k_max must be positive and finite, got {k_max}")
    if num < 3:
        raise ValueError("a k-grid needs at least 3 points")
    return np.linspace(0.0, k_max, num)


def default_kgrid(*, dx: float | None = None, k_c: float | None = None,
                  num: int = DEFAULT_KNUM) -> np.ndarray:
    """Uniform grid on ``[0, k_max]``.

    ``k_max`` is the Nyquist wavenumber ``pi / dx`` for data-derived curves;
    otherwise ``4 k_c``, or 10 when there is no critical wavenumber.
    """
    if dx is not None:
        k_max = math.pi / dx
    elif k_c:
        k_max = 4.0 * k_c
    else:
        k_max = 10.0
    return make_kgrid(k_max, num)


def dispersion_curve(model: LinearRDModel, k) -> DispersionCurve:
    k = np.asarray(k, dtype=float)
    if k.ndim != 1 or k.size == 0:
        raise ValueError("k must be a non-empty 1-d grid")
    k2 = k * k
    if model.n_components == 2:
        A, D = model.A, model.D
        eigs = _eig2(A[0, 0] - k2 * D[0], np.full_like(k, A[0, 1]),
                     np.full_like(k, A[1, 0]), A[1, 1] - k2 * D[1])
    else:
        mats = model.A[None, :, :] - k2[:, None, None] * np.diag(model.D)[None, :, :]
        eigs = _sort_eigs(np.linalg.eigvals(mats).astype(complex))
    return DispersionCurve(k=k, eigs=eigs)


def dominant_mode(curve: DispersionCurve, refine: bool = True) -> DominantMode:
    """Most unstable wavenumber and its growth rate.

    The grid argmax is taken (first occurrence, i.e. ties go to smaller k).
    With ``refine`` an interior maximum is improved by one parabolic step
    through the argmax and its two neighbours. The parabola is fitted in
    ``q = k^2``, the variable the operator ``A - k^2 D`` actually depends on,
    which removes most of the interpolation bias near small-k peaks.
    """
    k, y = curve.k, curve.max_real
    if k.size == 0:
        raise ValueError("empty dispersion curve")
    i = int(np.argmax(y))
    k_star, lam_star = float(k[i]), float(y[i])
    if refine and 0 < i < k.size - 1:
        x0, x1, x2 = k[i - 1] ** 2, k[i] ** 2, k[i + 1] ** 2
        y0, y1, y2 = y[i - 1], y[i], y[i + 1]
        d01 = (y1 - y0) / (x1 - x0)
        d12 = (y2 - y1) / (x2 - x1)
        curv = (d12 - d01) / (x2 - x0)
        if curv < 0:
            # vertex of the interpolating parabola
            xv = 0.5 * (x0 + x1) - d01 / (2.0 * curv)
            xv = min(max(xv, x0), x2)
            yv = y0 + d01 * (xv - x0) + curv * (xv - x0) * (xv - x1)
            if yv >= lam_star:
                k_star, lam_star = math.sqrt(xv), float(yv)
    return DominantMode(k_star=k_star, lambda_star=lam_star)


def classify(mode: DominantMode, k_threshold: float = 0.2) -> Destabilization:
    if k_threshold <= 0:
        raise ValueError("k_threshold must be positive")
    if mode.k_star <= k_threshold:
        return Destabilization.HOMOGENEOUS
    return Destabilization.HETEROGENEOUS
