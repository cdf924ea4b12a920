"""Dispersion-relation early warnings from spatio-temporal data.

Pipeline: spatial mean per frame as the equilibrium estimate, fluctuations
about it, time windows, finite-difference derivatives, a least-squares fit
of ``z_t = A z + D z_xx`` and finally the dispersion relation of the fit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dispersion import (
    DispersionCurve,
    DominantMode,
    LinearRDModel,
    default_kgrid,
    dispersion_curve,
    dominant_mode,
)
from .sim import SpatioTemporalData

__all__ = [
    "WindowPlan",
    "DerivativeSample",
    "FitResult",
    "RankDeficientError",
    "equilibrium_series",
    "fluctuations",
    "split_windows",
    "windows_for_intervals",
    "estimate_derivatives",
    "fit_linear_rd",
    "analyze_window",
    "TIME_STENCILS",
]

TIME_STENCILS = ("forward", "forward2")
MIN_WINDOW_FRAMES = 10

# rows of the regression handled per QR block
_QR_BLOCK_ROWS = 1 << 18


class RankDeficientError(np.linalg.LinAlgError):
    """The regressors do not determine the linear operator."""

    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (normal-matrix condition {condition:.3g})")
        self.condition = condition


@dataclass(frozen=True)
class WindowPlan:
    """Contiguous windows of ``length`` frames starting every ``stride`` frames.

    ``None`` for either means "the whole dataset".
    """

    length: int | None = None
    stride: int | None = None

    def __post_init__(self):
        if self.length is not None and self.length < MIN_WINDOW_FRAMES:
            raise ValueError(f"windows need >= {MIN_WINDOW_FRAMES} frames")
        if self.stride is not None and self.stride < 1:
            raise ValueError("stride must be >= 1")

    @classmethod
    def from_span(cls, span: float, dt_record: float,
                  stride: float | None = None) -> "WindowPlan":
        """Plan from time spans; a span of T holds ``T/dt + 1`` frames."""
        length = int(round(span / dt_record)) + 1
        hop = length - 1 if stride is None else int(round(stride / dt_record))
        return cls(length=length, stride=max(1, hop))


@dataclass(frozen=True)
class DerivativeSample:
    """Regression samples on the trimmed (interior, non-final) index set.

    All arrays have shape ``(alpha, n_frames', n_nodes')``.
    """

    z: np.ndarray
    z_t: np.ndarray
    z_xx: np.ndarray


@dataclass(frozen=True)
class FitResult:
    """Fitted operator with per-equation diagnostics."""

    model: LinearRDModel
    residual_rms: np.ndarray
    condition: np.ndarray
    n_samples: int

    @property
    def condition_max(self) -> float:
        return float(np.max(self.condition))

    @property
    def negative_diffusion(self) -> bool:
        return self.model.negative_diffusion


def equilibrium_series(data) -> np.ndarray:
    """Spatial mean per frame, shape ``(alpha, n_frames)``."""
    values = data.values if isinstance(data, SpatioTemporalData) else np.asarray(data)
    if values.shape[1] < 1:
        raise ValueError("need at least one frame")
    return values.mean(axis=2)


def fluctuations(data, eq_series: np.ndarray | None = None) -> np.ndarray:
    """Deviations from the per-frame equilibrium, shape ``(alpha, nt, nx)``."""
    values = data.values if isinstance(data, SpatioTemporalData) else np.asarray(data)
    if eq_series is None:
        eq_series = equilibrium_series(values)
    if eq_series.shape != values.shape[:2]:
        raise ValueError(
            f"equilibrium series shape {eq_series.shape} does not match data {values.shape}")
    z = values - eq_series[:, :, None]
    # second pass removes the rounding residue of the first subtraction
    z -= z.mean(axis=2, keepdims=True)
    return z


def split_windows(Z: np.ndarray, plan: WindowPlan) -> list[slice]:
    """Frame slices for each window; a trailing partial window is dropped."""
    nt = Z.shape[1]
    length = nt if plan.length is None else plan.length
    stride = length if plan.stride is None else plan.stride
    if length > nt:
        raise ValueError(f"window of {length} frames is longer than the data ({nt})")
    if length < MIN_WINDOW_FRAMES:
        raise ValueError(f"windows need >= {MIN_WINDOW_FRAMES} frames")
    return [slice(s, s + length) for s in range(0, nt - length + 1, stride)]


def windows_for_intervals(times: np.ndarray, intervals, tol: float | None = None) -> list[slice]:
    """Frame slices covering closed time intervals ``[t0, t1]``."""
    times = np.asarray(times)
    if tol is None:
        tol = 1e-6 * (times[1] - times[0]) if times.size > 1 else 1e-12
    out = []
    for t0, t1 in intervals:
        idx = np.flatnonzero((times >= t0 - tol) & (times <= t1 + tol))
        if idx.size < MIN_WINDOW_FRAMES:
            raise ValueError(f"interval [{t0}, {t1}] holds only {idx.size} frames")
        out.append(slice(int(idx[0]), int(idx[-1]) + 1))
    return out


def estimate_derivatives(Z: np.ndarray, dt_record: float, dx_effective: float,
                         stencil: str = "forward") -> DerivativeSample:
    """Finite-difference ``z_t`` and ``z_xx`` with regressors at frame ``t``.

    ``"forward"`` uses ``(Z[t+1] - Z[t]) / dt``, consistent with
    Euler-Maruyama data since the regressors never see the noise of the step
    they predict. ``"forward2"`` is the second-order one-sided
    ``(-3 Z[t] + 4 Z[t+1] - Z[t+2]) / (2 dt)``; it keeps that property and
    removes the O(dt) bias on smooth data. Boundary nodes are dropped.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 3:
        raise ValueError("Z must have shape (alpha, n_frames, n_nodes)")
    if stencil not in TIME_STENCILS:
        raise ValueError(f"unknown stencil {stencil!r}; choose from {TIME_STENCILS}")
    lag = 1 if stencil == "forward" else 2
    _, nt, nx = Z.shape
    if nt < lag + 1 or nx < 3:
        raise ValueError(
            f"need >= {lag + 1} frames and >= 3 nodes for derivatives, got {nt} x {nx}")
    n = nt - lag
    z = Z[:, :n, 1:-1]
    if stencil == "forward":
        z_t = (Z[:, 1:n + 1, 1:-1] - z) / dt_record
    else:
        z_t = (-3.0 * z + 4.0 * Z[:, 1:n + 1, 1:-1] - Z[:, 2:n + 2, 1:-1]) / (2.0 * dt_record)
    zn = Z[:, :n]
    z_xx = (zn[:, :, :-2] - 2.0 * zn[:, :, 1:-1] + zn[:, :, 2:]) / dx_effective**2
    return DerivativeSample(z=z, z_t=z_t, z_xx=z_xx)


def _stacked_r(columns_fn, n_rows: int, n_cols: int) -> np.ndarray:
    """R factor of a tall matrix built block-wise (TSQR)."""
    r = np.zeros((0, n_cols))
    for start in range(0, n_rows, _QR_BLOCK_ROWS):
        stop = min(n_rows, start + _QR_BLOCK_ROWS)
        block = columns_fn(start, stop)
        r = np.linalg.qr(np.vstack([r, block]), mode="r")
    return r


def fit_linear_rd(sample: DerivativeSample, rcond: float = 1e-12) -> FitResult:
    """Ordinary least squares for each equation separately.

    Equation ``i`` regresses ``z_t[i]`` on ``[z[0], ..., z[alpha-1], z_xx[i]]``
    and yields row ``i`` of ``A`` and the diffusion ``D[i]``. The regression
    is solved through an orthogonal (QR) factorization of the augmented
    matrix, assembled in row blocks to bound memory.

    Raises
    ------
    RankDeficientError
        If the regressor matrix is (numerically) rank deficient, e.g. for
        identically zero fluctuations.
    """
    alpha = sample.z.shape[0]
    n = sample.z[0].size
    n_cols = alpha + 1
    if n < n_cols + 1:
        raise ValueError(f"need more than {n_cols} samples per equation, got {n}")
    z_flat = sample.z.reshape(alpha, -1)
    A = np.empty((alpha, alpha))
    D = np.empty(alpha)
    rms = np.empty(alpha)
    cond = np.empty(alpha)
    for i in range(alpha):
        zxx = sample.z_xx[i].reshape(-1)
        zt = sample.z_t[i].reshape(-1)

        def cols(a, b, zxx=zxx, zt=zt):
            return np.column_stack([z_flat[:, a:b].T, zxx[a:b], zt[a:b]])

        r = _stacked_r(cols, n, n_cols + 1)
        rx, qty = r[:n_cols, :n_cols], r[:n_cols, n_cols]
        sv = np.linalg.svd(rx, compute_uv=False)
        if sv[0] == 0 or sv[-1] <= rcond * sv[0]:
            c = math.inf if sv[-1] == 0 else float((sv[0] / sv[-1]) ** 2)
            raise RankDeficientError(f"regressors for equation {i} are rank deficient", c)
        cond[i] = (sv[0] / sv[-1]) ** 2
        coef = np.linalg.solve(rx, qty)
        A[i] = coef[:alpha]
        D[i] = coef[alpha]
        rms[i] = abs(r[n_cols, n_cols]) / math.sqrt(n) if r.shape[0] > n_cols else 0.0
    return FitResult(model=LinearRDModel(A=A, D=D), residual_rms=rms,
                     condition=cond, n_samples=n)


def analyze_window(window: np.ndarray, dt_record: float, dx_effective: float,
                   kgrid: np.ndarray | None = None, stencil: str = "forward",
                   ) -> tuple[FitResult, DispersionCurve, DominantMode]:
    """Fit one window of fluctuations and extract its dominant mode."""
    sample = estimate_derivatives(window, dt_record, dx_effective, stencil)
    fit = fit_linear_rd(sample)
    if kgrid is None:
        kgrid = default_kgrid(dx=dx_effective)
    curve = dispersion_curve(fit.model, kgrid)
    return fit, curve, dominant_mode(curve, refine=True)
