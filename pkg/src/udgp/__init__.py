"""udgp: reconstruction of 1D point sets from unassigned pairwise distances.

Points on a line (turnpike) or a loop (beltway) are recovered from the
multiset of their noisy pairwise distances by matching the quadratic-form
distance distribution of a relaxed N-hot density, solved with projected
gradient descent from a spectral initializer.  Includes an interval
backtracking baseline, recovery scoring, convergence diagnostics, and a
restriction-digest ingestion path for genome data.
"""

from .domain import (
    Density,
    DistanceMultiset,
    DistDistribution,
    Geometry,
    Grid,
    MultisetKind,
    PointConfig,
    add_noise,
    pairwise_distances,
    quantize_config,
    quantize_location,
)
from .distribution import (
    LagOperatorPlan,
    SmoothingParams,
    model_distribution,
    observed_distribution,
    pair_normalizer,
)
from .projection import ProjectionResult, project_l1_box, project_oracle
from .spectral import SpectralConfig, make_initializer, spectral_init
from .solver import SolveConfig, SolveResult, gradient, objective, solve
from .extract import ExtractResult, extract_points
from .baseline import BacktrackConfig, BacktrackResult, backtrack_turnpike, exhaustive_turnpike
from .evaluate import RecoveryScore, emd_1d, score_recovery, select_sigma
from .analysis import ConvergenceCert, certify, convergence_radius, estimate_lambda_E, quadratic_E
from .ingest import ENZYMES, Enzyme, digest, parse_fasta, read_distances, write_distances
from .pipeline import reconstruct

__version__ = "0.1.0"
