"""fedgp: federated Gaussian-process training, tracking, and forecasting.

Subpackages and modules:
    kernels    kernel families, composition, matrices/gradients, MC expectations
    gpcore     GP regression: NLL, gradients, posteriors, centralized fitting
    fedopt     consensus/proximal ADMM, FedAvg, FedProx over client objectives
    secureagg  pairwise-mask secure summation with dropout recovery
    tracking   GP state-space transition models for 2-D target tracking
    poefusion  generalized product-of-experts fusion of expert predictions
    harness    synthetic data, CSV/JSON plumbing, experiments, CLI
"""

from . import harness, kernels
from .errors import (
    ArgumentError,
    ConfigError,
    FederationError,
    FedGPError,
    IngestionError,
    NumericalError,
    OptimizationError,
)
from .fedopt import (
    ClientState,
    ConsensusState,
    FederationConfig,
    FrozenParamsObjective,
    GPNllObjective,
    QuadraticObjective,
    RoundRecord,
    SumObjective,
    cadmm_round,
    estimate_lipschitz,
    fedavg_round,
    fedprox_local_step,
    local_nll,
    local_nll_grad,
    make_client,
    make_gp_clients,
    make_quadratic_clients,
    minimize_objective,
    pxadmm_round,
    run_federation,
    split_dataset,
)
from .gpcore import (
    Dataset,
    FitConfig,
    FitResult,
    GaussianPrediction,
    GPModel,
    chol_with_jitter,
    fit_centralized,
    model_from_dict,
    nll,
    nll_grad,
    nll_value_and_grad,
    posterior,
    posterior_diag,
)
from .kernels import (
    GaussianInput,
    KernelSpec,
    arc_cosine,
    ard_se,
    expected_kernel_mc,
    expected_kernel_mc_stats,
    kernel_matrix,
    kernel_matrix_grad,
    kernel_pairs,
    kproduct,
    ksum,
    neural_net,
    periodic,
)
from .poefusion import (
    ExpertPrediction,
    FusionWeights,
    gpoe_fuse,
    gpoe_fuse_arrays,
    optimize_fusion_weights,
    project_simplex,
    uniform_weights,
)
from .secureagg import (
    FixedPointVector,
    MaskedShare,
    SeedEscrow,
    aggregate,
    decode,
    derive_pairwise_masks,
    encode,
    handle_dropout,
    masked_upload,
    share_from_bytes,
    share_to_bytes,
)
from .tracking import (
    TransitionModelPair,
    Trajectory,
    build_transition_dataset,
    evaluate_rmse,
    generate_synthetic_trajectories,
    predict_next_state,
    step_dataset,
    train_transition_federated,
)

__version__ = "0.1.0"
