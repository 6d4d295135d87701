"""Continuous-variable black-box optimization with factorization-machine
surrogates, one-hot QUBO encodings, and annealing samplers."""

from .bubble import (
    AcousticDrive,
    BubbleTrajectory,
    IntegrationError,
    MarmottantParams,
    acoustic_pressure,
    buckling_radius,
    effective_surface_tension,
    integrate_marmottant,
    reference_trajectory,
)
from .encoding import (
    GridBlock,
    GridSpace,
    InfeasibleReport,
    QuboMatrix,
    adjacency_pairs,
    assemble_qubo,
    default_alpha,
    format_qubo_text,
    parse_qubo_text,
    penalty_qubo,
)
from .engine import (
    Dataset,
    LoopConfig,
    SamplerSpec,
    StepFailure,
    StepRecord,
    TrialResult,
    fmqa_step,
    init_dataset,
    r_squared,
    r_squared_standard,
    run_trial,
    success_count,
)
from .fm import (
    AmsgradState,
    FmGradients,
    FmParams,
    TrainConfig,
    amsgrad_step,
    fsr_penalty,
    gradients,
    init_params,
    l2_penalty,
    loss_mse,
    predict,
    predict_batch,
    total_loss,
    train,
)
from .objectives import (
    BubbleFit,
    Objective,
    ToyNorm,
    ToyQuadratic,
    h1_eval,
    h2_eval,
    h3_eval,
    make_objective,
    trajectory_misfit,
)
from .samplers import (
    AnnealSchedule,
    SampleSet,
    boltzmann_sample,
    brute_force_min,
    default_schedule,
    enumerate_feasible,
    predict_feasible_grid,
    simulated_anneal,
)

__version__ = "0.1.0"
