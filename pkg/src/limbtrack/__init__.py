"""Multi-person articulated pose tracking by subgraph multicut.

Body-part proposals become nodes of a spatio-temporal graph; solving a
minimum-cost subgraph multicut jointly selects true detections and
partitions them into person tracks.
"""

from .builder import (
    ConditionalAttachment,
    CostModels,
    CrossTypeRegressor,
    EdgeFeatureVector,
    LogisticModel,
    SidecarData,
    SparsityPattern,
    build_bu,
    build_tdbu,
    cross_type_cost,
    default_cost_models,
    edge_cost_from_probability,
    same_type_cost,
    train_logistic,
)
from .errors import (
    ConfigError,
    GraphStructureError,
    InfeasibleConstraintsError,
    ParseError,
    LimbTrackError,
)
from .metrics import ApReport, GroundTruth, GtPerson, MotaReport, ap_per_part, match_pckh, mota
from .model import (
    Detection,
    Edge,
    EdgeKind,
    PartType,
    ProblemGraph,
    Solution,
    SolverParams,
    node_cost,
    objective,
    validate,
)
from .pipeline import (
    SequenceConfig,
    TrackSet,
    extract_pose,
    filter_by_score,
    seed_head_tracks,
    track_full,
    track_sequence,
)
from .solver import (
    MoveLog,
    apply_constraints,
    solve_exact,
    solve_local_search,
    solve_local_search_logged,
)
from .synth import SynthConfig, SynthScene, gt_trackset, synth_generate
from .temporal import (
    CorrespondenceSet,
    DescriptorSet,
    RegionSpec,
    assemble_g,
    delta_dm,
    delta_l2,
    delta_sift,
)
from .training import fit_cross_type, fit_temporal_model

__version__ = "0.1.0"
