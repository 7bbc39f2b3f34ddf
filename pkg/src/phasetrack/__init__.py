"""Monte Carlo tracking of a continuously diffusing optical phase.

Simulators for quadrature (dyne) detection of coherent and squeezed
beams with adaptive or heterodyne local-oscillator control, and for
single-photon Mach-Zehnder interferometry with exact Bayesian tracking,
plus the closed-form equilibrium predictions they are checked against.
"""

from .core import MODES, NoiseStream, SimParams, sample_interval, step_phase, wrap_to_pi
from .dyne import (
    DyneResult,
    DyneState,
    best_estimate,
    coherent_increment,
    epsilon_feedback,
    heterodyne_detuning,
    heterodyne_feedback,
    mark2_feedback,
    run_dyne,
    run_dyne_trajectory,
    squeezed_increment,
    update_filter,
)
from .mzi import (
    FourierPosterior,
    MziRecord,
    MziResult,
    adaptive_phi,
    bayes_update,
    detection_probability,
    diffuse_posterior,
    expected_sharpness,
    extract_abc,
    nonadaptive_phi,
    phase_estimate,
    posterior_density,
    run_mzi,
    run_mzi_trajectory,
    uniform_posterior,
)
from .stats import (
    SamplingPlan,
    VarianceAccumulator,
    pooled,
    schedule,
    variance_with_se,
)
from .sweep import (
    BudgetExceeded,
    OptimumResult,
    SweepConfig,
    SweepRow,
    emit_results,
    find_optimum,
    run_point,
    run_sweep,
)
from .theory import (
    REGIMES,
    TheoryPrediction,
    adaptive_coherent_variance,
    adaptive_squeezed_variance,
    heterodyne_coherent_variance,
    heterodyne_squeezed_variance,
    mzi_variance,
    optimal_parameters,
    predicted_variance,
)

__version__ = "0.1.0"

__all__ = [
    "MODES",
    "NoiseStream",
    "SimParams",
    "sample_interval",
    "step_phase",
    "wrap_to_pi",
    "DyneResult",
    "DyneState",
    "best_estimate",
    "coherent_increment",
    "epsilon_feedback",
    "heterodyne_detuning",
    "heterodyne_feedback",
    "mark2_feedback",
    "run_dyne",
    "run_dyne_trajectory",
    "squeezed_increment",
    "update_filter",
    "FourierPosterior",
    "MziRecord",
    "MziResult",
    "adaptive_phi",
    "bayes_update",
    "detection_probability",
    "diffuse_posterior",
    "expected_sharpness",
    "extract_abc",
    "nonadaptive_phi",
    "phase_estimate",
    "posterior_density",
    "run_mzi",
    "run_mzi_trajectory",
    "uniform_posterior",
    "SamplingPlan",
    "VarianceAccumulator",
    "pooled",
    "schedule",
    "variance_with_se",
    "BudgetExceeded",
    "OptimumResult",
    "SweepConfig",
    "SweepRow",
    "emit_results",
    "find_optimum",
    "run_point",
    "run_sweep",
    "REGIMES",
    "TheoryPrediction",
    "adaptive_coherent_variance",
    "adaptive_squeezed_variance",
    "heterodyne_coherent_variance",
    "heterodyne_squeezed_variance",
    "mzi_variance",
    "optimal_parameters",
    "predicted_variance",
]
