"""A-optimal sparse sensor selection.

Selects p sensor locations out of n candidates so that the least-squares
estimate of r latent variables has minimal average variance
(tr((C^T C)^{-1})).  Three solver families are provided: an ADMM solver with
group-sparsity proximal operators (the fast path), a greedy selector, and a
barrier/Newton convex relaxation, plus a POD data pipeline and a benchmark
CLI.
"""

from .admm import AdmmProblem, SolveReport, SparsityPenalty, lambda_sweep, polish, solve
from .core import (
    NoiseModel,
    SensorSelection,
    a_optimality,
    decoder_trace,
    estimate_latent,
    select_rows,
)
from .data import (
    CvSplit,
    PodBasis,
    RandomProblemSpec,
    SnapshotDataset,
    load_snapshots,
    make_cv_splits,
    pod_reduce,
    random_candidates,
    reconstruction_error,
    save_snapshots,
)
from .errors import (
    EmptySelectionError,
    IngestionError,
    InvalidParameterError,
    InvalidSelectionError,
    SensorSelectError,
    SingularSystemError,
    SolverBreakdownError,
    StalledDescentError,
)
from .greedy import GreedyConfig, greedy_select, greedy_step_scores
from .prox import (
    ThresholdSpec,
    block_hard_threshold,
    block_soft_threshold,
    l0_constrained_hard_threshold,
)
from .relax import (
    RelaxationProblem,
    newton_solve,
    relax_select,
    round_to_selection,
)

__version__ = "0.1.0"
