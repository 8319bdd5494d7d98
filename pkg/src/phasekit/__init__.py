"""Single-qubit phase estimation under phase diffusion."""

from ._validation import (
    DegenerateStateError,
    DomainError,
    PhasekitError,
    ZeroInformationError,
)
from .estimation import (
    BayesianPhaseEstimator,
    CountRecord,
    InversionPhaseEstimator,
    PhaseEstimate,
    Posterior,
    bayes_estimate,
    bayes_posterior,
    invert_counts,
    load_counts,
    log_likelihood,
)
from .experiment import (
    AdaptiveTrace,
    DetectorSpec,
    ExperimentConfig,
    SweepResult,
    adaptive_run,
    coincidence_counts,
    run_estimate,
    simulate_acquisition,
    sweep,
)
from .metrology import (
    Eigensystem,
    MeasurementSetting,
    cramer_rao,
    eigensystem,
    expectation,
    fisher_information,
    optimal_estimator,
    outcome_probabilities,
    qfi,
    qfi_spectral,
    sensitivity,
    shifted_state,
    sld,
)
from .qubit import (
    NoiseSpec,
    ProbeSpec,
    apply_dephasing,
    apply_phase_shift,
    evolve_master_equation,
    from_bloch,
    gaussian_phase_average,
    make_probe,
    to_bloch,
)

__version__ = "0.1.0"
