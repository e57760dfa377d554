"""cmdplab: a tabular constrained-MDP laboratory.

Two primal-dual policy-gradient algorithms learn from simulated evaluator
panels instead of observed rewards; exact linear-algebra solvers provide the
baselines they are measured against.
"""

from .core import (
    Cmdp,
    ParamKind,
    PolicyParams,
    PolicyTable,
    ValueBundle,
    discounted_visitation,
    exact_value,
    make_policy,
    occupancy_measure,
    policy_from_occupancy,
    policy_transition,
    uniform_policy,
)
from .envgen import EnvSpec, dirichlet_sample, generate_cmdp
from .feedback import (
    EvaluatorPanel,
    FeedbackEstimate,
    LinkFunction,
    absolute_query,
    bradley_terry,
    bt_forward,
    clip_probability,
    inverse_lipschitz,
    logistic_absolute,
    pairwise_query,
    probit,
)
from .harness import (
    RunConfig,
    parse_run_config,
    protocol_env_spec,
    protocol_npgpd_config,
    protocol_zpgpd_config,
    run_experiment,
    sweep,
)
from .npgpd import (
    FeedbackLinks,
    NpgpdConfig,
    NpgpdState,
    estimate_advantages,
    estimate_dual_signal,
    npgpd_dual_step,
    npgpd_primal_step,
    run_npgpd,
)
from .oracles import (
    InfeasibleEnvironment,
    SolveReport,
    constrained_optimum,
    slater_slack,
    value_iteration,
)
from .rng import RngStream
from .runlog import IterateLog, read_csv, verify_derived_columns
from .sampling import (
    Trajectory,
    TrajectoryBatch,
    discounted_return,
    finite_horizon_value,
    g_of_h,
    sample_batch,
    sample_trajectory,
)
from .zpgpd import (
    ZpgpdConfig,
    ZpgpdState,
    lambda_cap_from_slack,
    mu_from_theorem2,
    project_simplex_product,
    run_zpgpd,
    sample_unit_sphere,
    theorem2_step_sizes,
    zpgpd_gradient_estimate,
)
