"""Numerical experiments 1-5 and seeded ensemble runs.

Each experiment is a grid of cells that vary one or two settings away from
the baseline (p=6, A=1, l_c=0.1, one time unit observed at full
resolution, dx=0.1). Every cell is run over the same list of seeds so that
noise realizations are shared across cells.
"""
from __future__ import annotations

import itertools
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dispersion import (
    DispersionCurve,
    DominantMode,
    LinearRDModel,
    classify,
    default_kgrid,
    dispersion_curve,
    dominant_mode,
)
from .estimator import FitResult, RankDeficientError, analyze_window, fluctuations
from .model import ModelParams, jacobian, stable_state, vegetated_states
from .sim import BlowUpError, Forcing, NoiseConfig, SimConfig, simulate, subsample
from .stats import (
    Ellipse,
    covariance_ellipse,
    delta_stats,
    kde,
    percentile_curve,
    silverman_bandwidth,
)

__all__ = [
    "EXPERIMENTS",
    "ExperimentSetting",
    "MemberResult",
    "EnsembleResult",
    "SummaryStats",
    "baseline_config",
    "experiment_grid",
    "run_member",
    "run_ensemble",
    "true_curve",
    "summarize",
    "default_workers",
]

log = logging.getLogger(__name__)

EXPERIMENTS = ("exp1", "exp2", "exp3", "exp4", "exp5")
WORKERS_ENV = "SPATIAL_EWS_WORKERS"

# exp1 follows the strengths used in the result tables, not Table 1's 0.01
EXP1_STRENGTHS = (0.1, 1.0, 10.0)
EXP1_CORRELATIONS = (0.0, 0.1, 0.2)
EXP2_TIMES = (0.2, 1.0, 5.0)
SAMPLINGS = (1.0, 0.5, 0.25)
EXP4_P = (2.0, 6.0, 20.0)
DELTAS = (0.01, 0.1, 0.5)
EXP5_INTERVALS = ((20.0, 18.0), (8.0, 6.0), (4.0, 2.0))
EXP5_RATE = 2.0
EXP5_P0 = 20.0


def default_workers() -> int:
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def baseline_config(delta: float = 0.01, **overrides) -> SimConfig:
    cfg = SimConfig(forcing=Forcing(p0=6.0), m=0.5, h=0.1, delta=delta, L=40.0,
                    dx=0.1, dt=1e-4, t_end=1.0,
                    noise=NoiseConfig(strength=1.0, correlation_length=0.1))
    return replace(cfg, **overrides) if overrides else cfg


@dataclass(frozen=True)
class ExperimentSetting:
    """One cell of an experiment grid.

    ``truth`` lists the parameters of the true dispersion overlay: one entry
    for autonomous runs, the window's initial and final rainfall for exp5.
    """

    name: str
    cell: dict
    sim: SimConfig
    time_keep: float = 1.0
    space_keep: float = 1.0
    truth: tuple = ()
    stencil: str = "forward"

    @property
    def label(self) -> str:
        parts = [f"{k}={v:g}" for k, v in self.cell.items()]
        return "_".join([self.name, *parts])

    @property
    def dx_effective(self) -> float:
        return self.sim.dx * max(1, int(round(1.0 / self.space_keep)))

    def kgrid(self) -> np.ndarray:
        return default_kgrid(dx=self.dx_effective)


def experiment_grid(name: str, delta: float = 0.01) -> list[ExperimentSetting]:
    """All cells of an experiment.

    ``delta`` selects the Turing (0.01) or saddle-node (0.5) case for exp1-3;
    exp4 and exp5 vary delta themselves and ignore it.
    """
    settings = []
    if name == "exp1":
        for lc, A in itertools.product(EXP1_CORRELATIONS, EXP1_STRENGTHS):
            cfg = baseline_config(delta, noise=NoiseConfig(strength=A, correlation_length=lc))
            settings.append(ExperimentSetting(
                name, {"delta": delta, "A": A, "lc": lc}, cfg,
                truth=(cfg.params_at(0.0),)))
    elif name == "exp2":
        for T, keep in itertools.product(EXP2_TIMES, SAMPLINGS):
            cfg = baseline_config(delta, t_end=T)
            settings.append(ExperimentSetting(
                name, {"delta": delta, "T": T, "time_keep": keep}, cfg,
                time_keep=keep, truth=(cfg.params_at(0.0),)))
    elif name == "exp3":
        for keep in SAMPLINGS:
            cfg = baseline_config(delta, dx=0.05)
            settings.append(ExperimentSetting(
                name, {"delta": delta, "space_keep": keep}, cfg,
                space_keep=keep, truth=(cfg.params_at(0.0),)))
    elif name == "exp4":
        for p, d in itertools.product(EXP4_P[::-1], DELTAS):
            cfg = baseline_config(d, forcing=Forcing(p0=p))
            settings.append(ExperimentSetting(
                name, {"p": p, "delta": d}, cfg, truth=(cfg.params_at(0.0),)))
    elif name == "exp5":
        for (p_hi, p_lo), d in itertools.product(EXP5_INTERVALS, DELTAS):
            t0 = (EXP5_P0 - p_hi) / EXP5_RATE
            t1 = (EXP5_P0 - p_lo) / EXP5_RATE
            cfg = baseline_config(d, forcing=Forcing(p0=EXP5_P0, rate=EXP5_RATE),
                                  t_end=t1, record_start=t0)
            settings.append(ExperimentSetting(
                name, {"p_start": p_hi, "p_end": p_lo, "delta": d}, cfg,
                truth=(cfg.params_at(t0), cfg.params_at(t1))))
    else:
        raise ValueError(f"unknown experiment {name!r}; choose from {EXPERIMENTS}")
    return settings


@dataclass(frozen=True)
class MemberResult:
    seed: int
    fit: FitResult | None = None
    curve: DispersionCurve | None = None
    mode: DominantMode | None = None
    error: str | None = None
    flags: tuple = ()

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class EnsembleResult:
    setting: ExperimentSetting
    seeds: tuple
    members: tuple

    @property
    def successful(self) -> list[MemberResult]:
        return [m for m in self.members if m.ok]

    @property
    def n_failed(self) -> int:
        return sum(not m.ok for m in self.members)


def _unstable_branch_v(cfg: SimConfig, p_values: np.ndarray) -> np.ndarray:
    uniq, inverse = np.unique(p_values, return_inverse=True)
    v1 = np.full(uniq.shape, np.inf)
    for i, p in enumerate(uniq):
        states = vegetated_states(cfg.params_at(0.0).with_p(float(p)))
        if states is not None:
            v1[i] = states[0].v
    return v1[inverse]


def _member_flags(data, Z, fit: FitResult, mode: DominantMode, cfg: SimConfig) -> tuple:
    flags = []
    if fit.negative_diffusion:
        flags.append("negative_diffusion")
    if mode.lambda_star > 0:
        flags.append("positive_growth")
    # excursions below the unstable branch point at alternative attractors
    v_min = data["v"].min(axis=1)
    p_frames = np.broadcast_to(cfg.forcing.at(data.times), data.times.shape)
    if (v_min < _unstable_branch_v(cfg, p_frames)).any():
        flags.append("below_unstable_branch")
    # typical (rms) fluctuation against the time-averaged equilibrium level
    eq = np.abs(data.values.mean(axis=2)).mean(axis=1)
    if (np.sqrt((Z * Z).mean(axis=(1, 2))) > 0.5 * eq).any():
        flags.append("large_fluctuations")
    return tuple(flags)


def run_member(setting: ExperimentSetting, seed: int) -> MemberResult:
    """simulate -> subsample -> analyze one window; failures are recorded."""
    cfg = replace(setting.sim, seed=int(seed))
    try:
        data = subsample(simulate(cfg), setting.time_keep, setting.space_keep)
        Z = fluctuations(data)
        fit, curve, mode = analyze_window(Z, data.dt_record, data.dx_effective,
                                          setting.kgrid(), setting.stencil)
    except BlowUpError as exc:
        return MemberResult(seed=int(seed), error=f"blow-up: {exc}")
    except RankDeficientError as exc:
        return MemberResult(seed=int(seed), error=f"rank-deficient: {exc}")
    flags = _member_flags(data, Z, fit, mode, cfg)
    return MemberResult(seed=int(seed), fit=fit, curve=curve, mode=mode, flags=flags)


def _run_member_args(args):
    return run_member(*args)


def run_ensemble(setting: ExperimentSetting, seeds=range(100),
                 workers: int | None = None) -> EnsembleResult:
    """Run every seed independently; results keep seed order."""
    seeds = tuple(int(s) for s in seeds)
    if not seeds:
        raise ValueError("empty seed list")
    workers = default_workers() if workers is None else workers
    jobs = [(setting, s) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            members = tuple(pool.map(_run_member_args, jobs))
    else:
        members = tuple(run_member(*job) for job in jobs)
    failed = sum(not m.ok for m in members)
    if failed:
        log.warning("%s: %d of %d members failed", setting.label, failed, len(seeds))
    return EnsembleResult(setting=setting, seeds=seeds, members=members)


def true_curve(params: ModelParams, kgrid) -> DispersionCurve:
    jac = jacobian(params, stable_state(params))
    return dispersion_curve(LinearRDModel.from_jacobian(jac, params.delta), kgrid)


@dataclass(frozen=True)
class SummaryStats:
    """Descriptive statistics of an ensemble on its common k-grid."""

    k: np.ndarray
    mean_curve: np.ndarray
    p05_curve: np.ndarray
    p95_curve: np.ndarray
    true_curves: tuple
    true_mode: DominantMode
    seeds: tuple
    scatter: np.ndarray
    delta_k: tuple | None
    delta_lambda: tuple | None
    ellipse: Ellipse | None
    kde_k: tuple
    kde_lambda: tuple
    theta_mean: dict
    theta_std: dict
    n_members: int
    n_failed: int
    flag_counts: dict = field(default_factory=dict)
    classification_counts: dict = field(default_factory=dict)


def _kde_on_span(samples, n: int = 256) -> tuple:
    samples = np.asarray(samples, dtype=float)
    bw = silverman_bandwidth(samples)
    grid = np.linspace(samples.min() - 5 * bw, samples.max() + 5 * bw, n)
    return grid, kde(samples, grid, bw)


def _theta(fit: FitResult) -> dict:
    A, D = fit.model.A, fit.model.D
    return {"a": A[0, 0], "b": A[0, 1], "c": A[1, 0], "d": A[1, 1],
            "D_u": D[0], "delta": D[1]}


def summarize(result: EnsembleResult, k_threshold: float = 0.2) -> SummaryStats:
    """Aggregate successful members in seed order.

    Errors in ``k*`` and ``lambda*`` are measured against the first truth
    entry (the initial parameters for exp5).
    """
    ok = sorted(result.successful, key=lambda m: m.seed)
    if not ok:
        raise ValueError(f"{result.setting.label}: no successful members")
    k = ok[0].curve.k
    curves = np.array([m.curve.max_real for m in ok])
    truths = tuple(true_curve(p, k) for p in result.setting.truth)
    true_mode = dominant_mode(truths[0], refine=True)
    scatter = np.array([[m.mode.k_star, m.mode.lambda_star] for m in ok])

    if len(ok) >= 2:
        dk, dl = delta_stats(scatter[:, 0], scatter[:, 1],
                             true_mode.k_star, true_mode.lambda_star)
        ellipse = covariance_ellipse(scatter)
    else:
        dk = dl = ellipse = None

    thetas = [_theta(m.fit) for m in ok]
    keys = thetas[0].keys()
    theta_mean = {key: float(np.mean([t[key] for t in thetas])) for key in keys}
    theta_std = {key: float(np.std([t[key] for t in thetas], ddof=1)) if len(ok) > 1
                 else 0.0 for key in keys}

    flag_counts: dict = {}
    for m in ok:
        for f in m.flags:
            flag_counts[f] = flag_counts.get(f, 0) + 1
    classes: dict = {}
    for m in ok:
        c = classify(m.mode, k_threshold).value
        classes[c] = classes.get(c, 0) + 1

    return SummaryStats(
        k=k,
        mean_curve=curves.mean(axis=0),
        p05_curve=percentile_curve(curves, 0.05),
        p95_curve=percentile_curve(curves, 0.95),
        true_curves=truths,
        true_mode=true_mode,
        seeds=tuple(m.seed for m in ok),
        scatter=scatter,
        delta_k=dk,
        delta_lambda=dl,
        ellipse=ellipse,
        kde_k=_kde_on_span(scatter[:, 0]),
        kde_lambda=_kde_on_span(scatter[:, 1]),
        theta_mean=theta_mean,
        theta_std=theta_std,
        n_members=len(result.members),
        n_failed=result.n_failed,
        flag_counts=flag_counts,
        classification_counts=classes,
    )
