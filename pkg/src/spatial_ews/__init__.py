"""Early warnings that tell tipping from Turing patterning.

Noisy spatio-temporal data are fitted to a linear reaction-diffusion
operator whose dispersion relation reveals whether the most unstable
perturbation is homogeneous (``k* = 0``, tipping) or patterned
(``k* > 0``, Turing). Synthetic data come from a stochastic extended
Klausmeier model.
"""
from .dispersion import (
    Destabilization,
    DispersionCurve,
    DominantMode,
    LinearRDModel,
    classify,
    default_kgrid,
    dispersion_curve,
    dominant_mode,
    eigenvalues,
    make_kgrid,
)
from .estimator import (
    FitResult,
    RankDeficientError,
    WindowPlan,
    analyze_window,
    equilibrium_series,
    estimate_derivatives,
    fit_linear_rd,
    fluctuations,
    split_windows,
)
from .model import (
    HomogeneousState,
    Jacobian2,
    ModelParams,
    bare_state,
    critical_wavenumber,
    jacobian,
    saddle_node_p,
    stable_state,
    turing_p,
    vegetated_states,
)
from .sim import (
    BlowUpError,
    Forcing,
    NoiseConfig,
    SimConfig,
    SpatioTemporalData,
    simulate,
    subsample,
)

__version__ = "0.1.0"
