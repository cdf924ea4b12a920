"""Stochastic simulation of the extended Klausmeier model on a 1-d domain.

Method of lines with a central-difference Laplacian and no-flux boundaries,
integrated with Euler-Maruyama. Additive noise is white in time and either
white or squared-exponentially coloured in space.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .model import ModelParams, reaction, stable_state

__all__ = [
    "NoiseConfig",
    "Forcing",
    "SimConfig",
    "SpatioTemporalData",
    "BlowUpError",
    "StabilityWarning",
    "laplacian_neumann",
    "noise_kernel",
    "make_rng",
    "sample_noise_increment",
    "step_euler_maruyama",
    "simulate",
    "subsample",
]

log = logging.getLogger(__name__)

# noise is drawn in blocks of this many steps; fixed so that the random
# stream does not depend on t_end
_NOISE_BLOCK = 512


class BlowUpError(FloatingPointError):
    """The state became non-finite (typically a noise-induced blow-up)."""

    def __init__(self, step: int, t: float):
        super().__init__(f"non-finite state at step {step} (t={t:.6g})")
        self.step = step
        self.t = t


class StabilityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class NoiseConfig:
    """Additive noise: strength ``A`` and correlation length (0 means white)."""

    strength: float = 1.0
    correlation_length: float = 0.1

    def __post_init__(self):
        if self.strength < 0 or not math.isfinite(self.strength):
            raise ValueError(f"noise strength must be >= 0, got {self.strength}")
        if self.correlation_length < 0 or not math.isfinite(self.correlation_length):
            raise ValueError(
                f"correlation length must be >= 0, got {self.correlation_length}")


@dataclass(frozen=True)
class Forcing:
    """Rainfall ``p(t) = p0 - rate * t``; constant when ``rate == 0``."""

    p0: float
    rate: float = 0.0

    def at(self, t):
        return self.p0 - self.rate * t


@dataclass(frozen=True)
class SimConfig:
    """Full recipe for one stochastic run.

    ``record_start`` skips recording before that time; only frames whose step
    index is a multiple of ``record_stride`` are kept.
    """

    forcing: Forcing
    m: float = 0.5
    h: float = 0.1
    delta: float = 0.01
    L: float = 40.0
    dx: float = 0.1
    dt: float = 1e-4
    t_end: float = 1.0
    record_stride: int = 1
    record_start: float = 0.0
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    seed: int = 0

    def __post_init__(self):
        ModelParams(p=self.forcing.p0, m=self.m, h=self.h, delta=self.delta)
        if self.dx <= 0 or self.L <= 0:
            raise ValueError("L and dx must be positive")
        ratio = self.L / self.dx
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"L/dx must be integral, got {ratio}")
        if round(ratio) < 2:
            raise ValueError("need at least 3 grid nodes")
        if self.dt <= 0 or self.t_end <= 0:
            raise ValueError("dt and t_end must be positive")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if not 0 <= self.record_start <= self.t_end:
            raise ValueError("record_start must lie in [0, t_end]")
        if self.forcing.at(self.t_end) < 0 or self.forcing.at(0.0) < 0:
            raise ValueError("rainfall ramp goes negative within the horizon")
        bound = self.stability_bound
        if self.dt > bound:
            raise ValueError(
                f"dt={self.dt:g} violates the diffusive stability bound "
                f"dx^2/(2 max(1, delta)) = {bound:g}; reduce dt or increase dx")
        if self.dt > 0.5 * bound:
            warnings.warn(
                f"dt={self.dt:g} is within a factor 2 of the stability bound {bound:g}",
                StabilityWarning, stacklevel=2)
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a non-negative 64-bit integer")

    @property
    def stability_bound(self) -> float:
        return self.dx**2 / (2.0 * max(1.0, self.delta))

    @property
    def nx(self) -> int:
        return int(round(self.L / self.dx)) + 1

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def params_at(self, t: float) -> ModelParams:
        return ModelParams(p=float(self.forcing.at(t)), m=self.m, h=self.h, delta=self.delta)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        d["forcing"] = Forcing(**d["forcing"])
        d["noise"] = NoiseConfig(**d.get("noise", {}))
        return cls(**d)


@dataclass(frozen=True)
class SpatioTemporalData:
    """Recorded fields on a (time x space) grid.

    ``values`` has shape ``(alpha, n_times, n_space)``; ``names`` labels the
    first axis. ``meta`` carries the originating config and the effective
    recording steps ``dt_record`` and ``dx_effective``.
    """

    times: np.ndarray
    xs: np.ndarray
    values: np.ndarray
    names: tuple = ("u", "v")
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.ndim != 3:
            raise ValueError("values must have shape (alpha, n_times, n_space)")
        alpha, nt, nx = self.values.shape
        if len(self.names) != alpha:
            raise ValueError("one name per variable required")
        if self.times.shape != (nt,) or self.xs.shape != (nx,):
            raise ValueError(
                f"grid shapes {self.times.shape}, {self.xs.shape} do not match "
                f"values {self.values.shape}")
        if nt > 1 and not (np.diff(self.times) > 0).all():
            raise ValueError("times must be strictly increasing")
        self.values.setflags(write=False)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[self.names.index(name)]

    @property
    def dt_record(self) -> float:
        if "dt_record" in self.meta:
            return float(self.meta["dt_record"])
        return float(self.times[1] - self.times[0])

    @property
    def dx_effective(self) -> float:
        if "dx_effective" in self.meta:
            return float(self.meta["dx_effective"])
        return float(self.xs[1] - self.xs[0])


def laplacian_neumann(f: np.ndarray, dx: float) -> np.ndarray:
    """Second difference along the last axis with mirrored ghost nodes."""
    f = np.asarray(f, dtype=float)
    if f.shape[-1] < 3:
        raise ValueError("the Laplacian needs at least 3 grid points")
    out = np.empty_like(f)
    out[..., 1:-1] = f[..., :-2] - 2.0 * f[..., 1:-1] + f[..., 2:]
    out[..., 0] = 2.0 * (f[..., 1] - f[..., 0])
    out[..., -1] = 2.0 * (f[..., -2] - f[..., -1])
    out /= dx * dx
    return out


def noise_kernel(correlation_length: float, dx: float) -> np.ndarray:
    """Squared-exponential filter ``exp(-x^2 / l_c^2)``, cut at ``|x| <= 4 l_c``.

    Normalized to unit Euclidean norm so filtered white noise keeps unit
    pointwise variance. White noise (``l_c = 0``) gives the identity kernel.
    """
    if correlation_length == 0:
        return np.ones(1)
    half = int(math.floor(4.0 * correlation_length / dx + 1e-9))
    x = np.arange(-half, half + 1) * dx
    w = np.exp(-(x / correlation_length) ** 2)
    return w / np.linalg.norm(w)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox stream for one simulation."""
    return np.random.Generator(np.random.Philox(seed))


def _filter(white: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    if kernel.size == 1:
        return white
    # kernel is symmetric, so correlation == convolution
    return sliding_window_view(white, kernel.size, axis=-1) @ kernel


def sample_noise_increment(
    rng: np.random.Generator,
    nx: int,
    noise: NoiseConfig,
    dx: float,
    dt: float,
    size: int | None = None,
) -> np.ndarray:
    """Noise increments ``dF`` for both fields, shape ``(2, nx)``.

    White noise is drawn on the grid extended by the kernel half-width on
    both sides and filtered in 'valid' mode, so every node sees the same
    stationary statistics. The result is scaled by ``sqrt(dt)`` but not by
    the noise strength. ``size`` draws that many steps at once, giving shape
    ``(size, 2, nx)``.
    """
    if nx < 3:
        raise ValueError("need at least 3 grid nodes")
    kernel = noise_kernel(noise.correlation_length, dx)
    pad = kernel.size - 1
    shape = (2, nx + pad) if size is None else (size, 2, nx + pad)
    white = rng.standard_normal(shape)
    return _filter(white, kernel) * math.sqrt(dt)


def step_euler_maruyama(
    u: np.ndarray,
    v: np.ndarray,
    p_now: float,
    params: ModelParams,
    dt: float,
    dx: float,
    increments=None,
    strength: float = 0.0,
    reaction_terms: bool = True,
):
    """One Euler-Maruyama step; returns the new ``(u, v)``.

    ``increments`` are the ``sqrt(dt)``-scaled noise fields, multiplied by
    ``strength`` here. ``reaction_terms=False`` leaves pure diffusion, which
    is used to check conservation.
    """
    du = laplacian_neumann(u, dx)
    dv = params.delta * laplacian_neumann(v, dx)
    if reaction_terms:
        f, g = reaction(params, u, v, p=p_now)
        du += f
        dv += g
    u_new = u + dt * du
    v_new = v + dt * dv
    if increments is not None and strength:
        u_new += strength * increments[0]
        v_new += strength * increments[1]
    return u_new, v_new


def simulate(config: SimConfig) -> SpatioTemporalData:
    """Run one realization, starting from the v2 equilibrium at ``p(0)``.

    Raises
    ------
    BlowUpError
        If the state becomes non-finite; carries the failing step index.
    """
    nx, n_steps, dt, dx = config.nx, config.n_steps, config.dt, config.dx
    params = config.params_at(0.0)
    state = stable_state(params)
    u = np.full(nx, state.u)
    v = np.full(nx, state.v)

    first = int(math.ceil(config.record_start / dt - 1e-9))
    first += (-first) % config.record_stride
    rec_steps = np.arange(first, n_steps + 1, config.record_stride)
    values = np.empty((2, rec_steps.size, nx))
    rec_pos = 0

    rng = make_rng(config.seed)
    strength = config.noise.strength
    block = None
    ramp = config.forcing.rate != 0.0
    # overflow is caught below as a BlowUpError
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(n_steps + 1):
            if rec_pos < rec_steps.size and step == rec_steps[rec_pos]:
                values[0, rec_pos] = u
                values[1, rec_pos] = v
                rec_pos += 1
            if step == n_steps:
                break
            j = step % _NOISE_BLOCK
            if j == 0:
                block = sample_noise_increment(rng, nx, config.noise, dx, dt, size=_NOISE_BLOCK)
            p_now = config.forcing.at(step * dt) if ramp else config.forcing.p0
            u, v = step_euler_maruyama(u, v, p_now, params, dt, dx, block[j], strength)
            if not (np.isfinite(u).all() and np.isfinite(v).all()):
                raise BlowUpError(step + 1, (step + 1) * dt)

    times = rec_steps * dt
    xs = np.arange(nx) * dx
    meta = {
        "config": config.to_dict(),
        "seed": config.seed,
        "dt_record": dt * config.record_stride,
        "dx_effective": dx,
    }
    log.debug("simulated %d steps, recorded %d frames", n_steps, rec_steps.size)
    return SpatioTemporalData(times=times, xs=xs, values=values, meta=meta)


def _stride_for(fraction: float) -> int:
    if not 0 < fraction <= 1:
        raise ValueError(f"sampling fraction must lie in (0, 1], got {fraction}")
    return max(1, int(round(1.0 / fraction)))


def subsample(data: SpatioTemporalData, time_keep: float = 1.0,
              space_keep: float = 1.0) -> SpatioTemporalData:
    """Keep every ``round(1/f)``-th frame and node, starting with the first."""
    st, sx = _stride_for(time_keep), _stride_for(space_keep)
    if st == 1 and sx == 1:
        return data
    times = data.times[::st]
    xs = data.xs[::sx]
    if times.size < 3 or xs.size < 3:
        raise ValueError(
            f"subsampling leaves {times.size} frames x {xs.size} nodes; need >= 3 each")
    meta = dict(data.meta)
    meta["dt_record"] = data.dt_record * st
    meta["dx_effective"] = data.dx_effective * sx
    meta["time_keep"] = meta.get("time_keep", 1.0) * time_keep
    meta["space_keep"] = meta.get("space_keep", 1.0) * space_keep
    return replace(data, times=times, xs=xs,
                   values=np.ascontiguousarray(data.values[:, ::st, ::sx]), meta=meta)
