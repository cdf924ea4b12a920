"""Ensemble summary statistics and mean(std) formatting."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Ellipse",
    "percentile_curve",
    "delta_stats",
    "covariance_ellipse",
    "silverman_bandwidth",
    "kde",
    "format_mean_std",
]


@dataclass(frozen=True)
class Ellipse:
    """One-standard-deviation ellipse of a 2-d point cloud.

    ``axes`` holds unit principal directions as columns, major axis first;
    ``radii`` are the matching standard deviations.
    """

    center: np.ndarray
    axes: np.ndarray
    radii: np.ndarray


def percentile_curve(curves, q: float) -> np.ndarray:
    """Pointwise empirical quantile across member curves.

    ``curves`` is an ``(n_members, n_k)`` array of ``max_real`` values;
    quantiles interpolate linearly between order statistics.
    """
    curves = np.asarray(curves, dtype=float)
    if curves.ndim != 2 or curves.shape[0] == 0:
        raise ValueError("need at least one member curve")
    if not 0 <= q <= 1:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    return np.quantile(curves, q, axis=0, method="linear")


def delta_stats(k_star, lambda_star, k_true: float, lambda_true: float):
    """Mean and sample std (n-1) of the errors in ``k*`` and ``lambda*``.

    Returns ``((mean_dk, std_dk), (mean_dlambda, std_dlambda))``.
    """
    dk = np.asarray(k_star, dtype=float) - k_true
    dl = np.asarray(lambda_star, dtype=float) - lambda_true
    if dk.size < 2:
        raise ValueError("need at least two members for a sample deviation")
    return ((float(dk.mean()), float(dk.std(ddof=1))),
            (float(dl.mean()), float(dl.std(ddof=1))))


def covariance_ellipse(points) -> Ellipse:
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2 or points.shape[0] < 2:
        raise ValueError("need at least two 2-d points")
    center = points.mean(axis=0)
    cov = np.cov(points, rowvar=False, ddof=1)
    if not np.any(cov):
        return Ellipse(center=center, axes=np.eye(2), radii=np.zeros(2))
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    radii = np.sqrt(np.clip(evals[order], 0.0, None))
    return Ellipse(center=center, axes=evecs[:, order], radii=radii)


def silverman_bandwidth(samples) -> float:
    """``1.06 sigma n^(-1/5)``, floored at ``1e-6 max(1, |mean|)``.

    The floor keeps degenerate (all equal or nearly equal) sample sets
    resolvable in floating point, e.g. ``k* = 0`` for every member.
    """
    samples = np.asarray(samples, dtype=float).reshape(-1)
    if samples.size == 0:
        raise ValueError("empty sample set")
    sigma = samples.std(ddof=1) if samples.size > 1 else 0.0
    floor = 1e-6 * max(1.0, abs(float(samples.mean())))
    return max(1.06 * sigma * samples.size ** (-0.2), floor)


def kde(samples, grid, bandwidth: float | None = None) -> np.ndarray:
    """Gaussian kernel density estimate evaluated on ``grid``."""
    samples = np.asarray(samples, dtype=float).reshape(-1)
    if samples.size == 0:
        raise ValueError("empty sample set")
    bw = silverman_bandwidth(samples) if bandwidth is None else bandwidth
    grid = np.asarray(grid, dtype=float)
    u = (grid[..., None] - samples) / bw
    return np.exp(-0.5 * u * u).sum(axis=-1) / (samples.size * bw * math.sqrt(2 * math.pi))


def format_mean_std(mean: float, std: float) -> str:
    """Concise uncertainty notation, e.g. ``(-0.06, 0.36) -> "-0.06(36)"``.

    The deviation is rounded to two significant digits and the mean to the
    same decimal place. Zero deviation renders as ``"<mean>(0)"``.
    """
    if std < 0 or math.isnan(std):
        raise ValueError(f"std must be >= 0, got {std}")
    if std == 0:
        return f"{float(mean)!r}(0)"
    if not math.isfinite(std) or not math.isfinite(mean):
        return f"{mean}({std})"
    decimals = 1 - math.floor(math.log10(std))
    rounded = round(std, decimals)
    # rounding may carry into a new leading digit (0.996 -> 1.0)
    decimals = 1 - math.floor(math.log10(rounded))
    rounded = round(std, decimals)
    if decimals > 0:
        m = f"{round(mean, decimals):.{decimals}f}"
        s = f"{round(rounded * 10**decimals):d}"
    else:
        m = f"{round(mean, decimals):.0f}"
        s = f"{round(rounded):d}"
    return f"{m}({s})"
