"""Expected-free-energy planning as variational inference on factor graphs.

Discrete named-axis tensors, sum-product message passing with Bethe free
energy evaluation, entropy-based epistemic priors, receding-horizon
planning, two benchmark environments, and brute-force verification
oracles.
"""

from .kernels import BACKEND, USING_NUMBA
from .tensor import (
    DiscreteTensor,
    conditional_entropy,
    contract,
    entropy,
    kl_divergence,
    normalize,
    softmax,
)
from .graph import (
    FactorGraph,
    FactorNode,
    Marginals,
    VariableEdge,
    bethe_free_energy,
    run_inference,
    sum_product_message,
)
from .model import (
    ModelSpec,
    ObservationModel,
    StateFactor,
    TransitionModel,
    build_graph,
    filter_history,
)
from .epistemic import (
    EpistemicPriorSpec,
    EpistemicTerm,
    control_epistemic_prior,
    entropy_difference_score,
    factored_epistemic_prior,
    preference_prior,
    state_epistemic_prior,
)
from .planner import (
    AgentConfig,
    EpisodeRecord,
    InferenceTrace,
    PolicyPosterior,
    plan,
    run_episode,
    select_action,
)
from .oracle import (
    DecompositionReport,
    ExactPolicyEvaluation,
    exact_efe,
    exact_vfe,
    verify_decomposition,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "USING_NUMBA",
    "DiscreteTensor",
    "conditional_entropy",
    "contract",
    "entropy",
    "kl_divergence",
    "normalize",
    "softmax",
    "FactorGraph",
    "FactorNode",
    "Marginals",
    "VariableEdge",
    "bethe_free_energy",
    "run_inference",
    "sum_product_message",
    "ModelSpec",
    "ObservationModel",
    "StateFactor",
    "TransitionModel",
    "build_graph",
    "filter_history",
    "EpistemicPriorSpec",
    "EpistemicTerm",
    "control_epistemic_prior",
    "entropy_difference_score",
    "factored_epistemic_prior",
    "preference_prior",
    "state_epistemic_prior",
    "AgentConfig",
    "EpisodeRecord",
    "InferenceTrace",
    "PolicyPosterior",
    "plan",
    "run_episode",
    "select_action",
    "DecompositionReport",
    "ExactPolicyEvaluation",
    "exact_efe",
    "exact_vfe",
    "verify_decomposition",
]
