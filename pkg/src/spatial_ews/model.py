"""Analytics of the deterministic extended Klausmeier model.

The reaction terms are

    f(u, v) = p - u - u v^2
    g(u, v) = u v^2 (1 - h v) - m v

with water ``u`` diffusing at unit rate and vegetation ``v`` at rate
``delta``. This module provides the homogeneous equilibria, their reaction
Jacobian and the two destabilization thresholds (saddle-node and Turing).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

__all__ = [
    "ModelParams",
    "HomogeneousState",
    "Jacobian2",
    "RootFindingError",
    "reaction",
    "bare_state",
    "vegetated_states",
    "stable_state",
    "jacobian",
    "saddle_node_p",
    "turing_p",
    "critical_wavenumber",
]


class RootFindingError(RuntimeError):
    """A threshold root was bracketed but bisection did not converge."""


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the extended Klausmeier model.

    Parameters
    ----------
    p : float
        Rainfall, ``p >= 0``.
    m : float
        Vegetation mortality, ``m > 0``.
    h : float
        Carrying-capacity parameter, ``h >= 0``.
    delta : float
        Ratio of vegetation to water diffusion, ``delta > 0``.
    """

    p: float
    m: float = 0.5
    h: float = 0.1
    delta: float = 0.01

    def __post_init__(self):
        if not all(math.isfinite(x) for x in (self.p, self.m, self.h, self.delta)):
            raise ValueError("model parameters must be finite")
        if self.p < 0:
            raise ValueError(f"rainfall p must be >= 0, got {self.p}")
        if self.m <= 0:
            raise ValueError(f"mortality m must be > 0, got {self.m}")
        if self.h < 0:
            raise ValueError(f"h must be >= 0, got {self.h}")
        if self.delta <= 0:
            raise ValueError(f"delta must be > 0, got {self.delta}")

    @property
    def in_stability_regime(self) -> bool:
        """Whether ``0 < m <= 2 + 2 h^2`` (the vegetated state's trace stays negative)."""
        return 0 < self.m <= 2 + 2 * self.h**2

    def with_p(self, p: float) -> "ModelParams":
        return ModelParams(p=p, m=self.m, h=self.h, delta=self.delta)


@dataclass(frozen=True)
class HomogeneousState:
    """A spatially homogeneous steady state ``(u, v)``.

    ``branch`` is one of ``"bare"``, ``"unstable"`` (v1) or ``"stable"`` (v2).
    The v2 branch is only a stability *candidate*; it is stable for
    ``p > max(p_SN, p_T)``.
    """

    u: float
    v: float
    branch: str = ""


@dataclass(frozen=True)
class Jacobian2:
    """Reaction Jacobian ``[[a, b], [c, d]]`` at a homogeneous state."""

    a: float
    b: float
    c: float
    d: float

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=float)

    @property
    def trace(self) -> float:
        return self.a + self.d

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c


def reaction(params: ModelParams, u, v, p=None):
    """Evaluate the reaction terms ``(f, g)``; ``p`` overrides ``params.p``."""
    p = params.p if p is None else p
    uv2 = u * v * v
    f = p - u - uv2
    g = uv2 * (1.0 - params.h * v) - params.m * v
    return f, g


def _discriminant(p: float, m: float, h: float) -> float:
    return p * p - 4.0 * h * m * p - 4.0 * m * m


def bare_state(params: ModelParams) -> HomogeneousState:
    """The no-vegetation state ``(p, 0)``."""
    return HomogeneousState(u=float(params.p), v=0.0, branch="bare")


def vegetated_states(
    params: ModelParams,
) -> tuple[HomogeneousState, HomogeneousState] | None:
    """Both vegetated equilibria, or ``None`` below the saddle-node.

    Returns ``(v1_state, v2_state)``: the unstable branch first, then the
    stable candidate. Both coincide at ``p = p_SN``.
    """
    p, m, h = params.p, params.m, params.h
    disc = _discriminant(p, m, h)
    if disc < 0:
        return None
    s = math.sqrt(disc)
    denom_u = 2.0 + 2.0 * h * h
    denom_v = 2.0 * m + 2.0 * h * p
    base_u = 2.0 * h * m + p + 2.0 * h * h * p
    v1 = (p - s) / denom_v
    v2 = (p + s) / denom_v
    u1 = (base_u + s) / denom_u
    u2 = (base_u - s) / denom_u
    return (
        HomogeneousState(u=u1, v=v1, branch="unstable"),
        HomogeneousState(u=u2, v=v2, branch="stable"),
    )


def stable_state(params: ModelParams) -> HomogeneousState:
    """The v2 branch; raises ``ValueError`` when no vegetated state exists."""
    states = vegetated_states(params)
    if states is None:
        raise ValueError(
            f"no vegetated state for p={params.p} "
            f"(requires p >= p_SN={saddle_node_p(params.m, params.h):.6g})"
        )
    return states[1]


def jacobian(params: ModelParams, state: HomogeneousState) -> Jacobian2:
    u, v, h, m = state.u, state.v, params.h, params.m
    return Jacobian2(
        a=-1.0 - v * v,
        b=-2.0 * u * v,
        c=v * v * (1.0 - h * v),
        d=-m + 2.0 * u * v - 3.0 * h * u * v * v,
    )


def saddle_node_p(m: float, h: float) -> float:
    """Rainfall at the saddle-node, ``2 m (h + sqrt(1 + h^2))``."""
    return 2.0 * m * (h + math.sqrt(1.0 + h * h))


def _turing_function(p: float, m: float, h: float, delta: float) -> float:
    params = ModelParams(p=p, m=m, h=h, delta=delta)
    jac = jacobian(params, stable_state(params))
    return (jac.a * delta - jac.d) ** 2 + 4.0 * delta * jac.b * jac.c


def turing_p(
    m: float,
    h: float,
    delta: float,
    *,
    n_scan: int = 200,
    xtol: float = 1e-8,
) -> float | None:
    """Rainfall at the Turing bifurcation of the v2 branch, if any.

    Scans ``(p_SN, 100 p_SN]`` on a log grid for sign changes of
    ``(a delta - d)^2 + 4 delta b c`` and bisects each bracket. Roots where
    ``d <= delta |a|`` are spurious (no unstable band of wavenumbers) and are
    discarded. Of the remaining roots the largest is returned, since ``p`` is
    decreased towards the bifurcation.

    Returns ``None`` when the state destabilizes through the saddle-node.

    Raises
    ------
    RootFindingError
        If bisection fails on a bracketed root.
    """
    p_sn = saddle_node_p(m, h)
    ps = np.geomspace(p_sn * (1.0 + 1e-9), 100.0 * p_sn, n_scan)
    gs = np.array([_turing_function(p, m, h, delta) for p in ps])
    roots = []
    for i in np.flatnonzero(np.sign(gs[:-1]) * np.sign(gs[1:]) < 0):
        try:
            root, info = bisect(
                _turing_function,
                ps[i],
                ps[i + 1],
                args=(m, h, delta),
                xtol=xtol,
                maxiter=200,
                full_output=True,
                disp=False,
            )
        except (RuntimeError, ValueError) as exc:
            raise RootFindingError(f"bisection failed on [{ps[i]}, {ps[i + 1]}]") from exc
        if not info.converged:
            raise RootFindingError(
                f"bisection did not converge on [{ps[i]}, {ps[i + 1]}] "
                f"after {info.iterations} iterations"
            )
        params = ModelParams(p=root, m=m, h=h, delta=delta)
        jac = jacobian(params, stable_state(params))
        if jac.d > delta * abs(jac.a):
            roots.append(root)
    if not roots:
        return None
    return float(max(roots))


def critical_wavenumber(jac: Jacobian2, delta: float) -> float | None:
    """``sqrt((a delta + d) / (2 delta))``, or ``None`` when ``a delta + d < 0``."""
    num = jac.a * delta + jac.d
    if num < 0:
        return None
    return math.sqrt(num / (2.0 * delta))
