"""attrdesc: derivative-free optimization of renderer attribute distributions.

Tunes the Gaussian/mixture means of scene attributes so that features of
rendered samples match target feature statistics under the Frechet
distance, using greedy per-coordinate grid search plus baselines, with a
built-in synthetic oracle renderer and a wire protocol for real renderers.
"""

__version__ = "0.1.0"

from .attributes import (
    AttributeDecl,
    AttributeSchema,
    DistributionParams,
    SampleBatch,
    coordinate_list,
    default_params,
    sample_batch,
    uniform_batch,
    validate_params,
    validate_schema,
)
from .errors import (
    AttrDescError,
    DimensionMismatchError,
    FormatError,
    NotPSDError,
    OptimizerError,
    PeerError,
    ProtocolError,
    SchemaError,
    StatsError,
)
from .optimize import (
    RANDOM_ATTRIBUTES,
    EvalConfig,
    OptimizationTrace,
    OptimResult,
    ReinforceHyper,
    attribute_descent,
    evaluate,
    random_attributes,
    random_search,
    reinforce_search,
    uniform_baseline,
)
from .oracle import OracleConfig, OracleRenderer, Renderer, oracle_render, oracle_target_stats
from .protocol import ExternalRenderer, PeerSession, open_external
from .stats import (
    FeatureStats,
    accumulate_stats,
    frechet_distance,
    read_feature_matrix,
    read_stats,
    sqrt_psd,
    write_feature_matrix,
    write_stats,
)
