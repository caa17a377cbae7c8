"""csmci: spatial Monte Carlo integration and GLS-composite estimators for Ising models.

Estimates intractable expectations on pairwise spin models by summing exactly
over a small region and sampling its boundary, then fuses several such
estimators through generalized least squares. Includes Gibbs samplers (with a
compiled sweep kernel), an exhaustive enumeration oracle for small graphs,
inverse-Ising learning, and an experiment harness.
"""

__version__ = "0.1.0"

from .errors import CsmciError
from .graphs import (
    Graph,
    Region,
    boundary_region,
    build_lattice_free,
    build_torus,
    instantiate_template,
    load_graph,
    parse_graph_spec,
    save_graph,
)
from .model import (
    MONOMIAL,
    IsingParams,
    Moments,
    TargetFunction,
    conditional_distribution,
    energy,
    enumerate_patterns,
    exact_expectation,
    exact_log_partition,
    exact_moments,
    exact_partition,
    load_model,
    random_params,
    save_model,
    zero_params,
)
from .sampling import (
    ChainBank,
    SampleSet,
    draw_exact_sample_set,
    draw_sample_set,
    gibbs_sweep,
    persistent_step,
)
from .estimators import (
    ComponentTrace,
    EstimatorSpec,
    conditional_expectation,
    mci_estimate,
    smci_estimate,
    smci_traces,
    template_spec,
)
from .gls import (
    CompositeEstimate,
    CovarianceMatrix,
    compose,
    exact_covariance,
    fisher_information,
    gls_weights,
    lagrange_weights,
    sample_covariance,
)
from .learning import (
    Dataset,
    MomentEstimator,
    TrainConfig,
    Trajectory,
    exact_ml,
    gradient,
    log_likelihood,
    parameter_mae,
    train,
)
from .experiments import (
    ExperimentConfig,
    ExperimentReport,
    covariance_mae,
    expectation_mae,
    fit_loglog_slope,
    load_config,
    preset,
    run_experiment,
)
from .kernels import BACKEND as KERNEL_BACKEND
