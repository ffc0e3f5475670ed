from .__about__ import __version__
from ._baselines import RansacConfig, branch_and_bound, minimal_sample_size, ransac_fit, ransac_iterations
from ._bench import ExperimentConfig, RunRecord, RunReport, compare_algorithms, run_experiment, verify_inliers
from ._box import Box, Tolerance, subdivide
from ._canonize import CanonicalGrid, canonize, round_to_step
from ._datagen import (
    SimilarityBracket,
    brute_force_vote,
    gen_alignment_instance,
    gen_hyperplane_instance,
    gen_line_instance,
    gen_pose_instance,
    gen_ray_instance,
    generate_instance,
    pose_error,
)
from ._errors import DomainError, InstanceFormatError, IvoteError, UnsupportedModelError, UsageError
from ._instance import GroundTruth, ProblemInstance, load_instance, save_instance, surfaces_from_instance
from ._interval import Interval
from ._models import (
    Ray3,
    SimilarityParams,
    hyperplane_surface_eval,
    line_surface_from_point,
    ray_surface_eval,
    similarity_surface_eval,
)
from ._pose import (
    Correspondence,
    PoseHypothesis,
    angle_axis_to_matrix,
    pose5_surface_eval,
    pose6_surface_eval,
    pose7_surface_eval,
    radial5_surface_eval,
    radial_angular_error,
    reprojection_angular_error,
    rotation_angle_between,
)
from ._surface import ParametricSurface, SpaceMap, SurfaceSet, get_family, model_tags
from ._tex import export_tex
from ._voting import (
    OperationCounts,
    VoteResult,
    VotingConfig,
    branchless_count_upper_bound,
    generalized_vote,
    intersects_box,
    intersects_box_exact,
    naive_vote,
    report_cells,
)

__all__ = [
    "__version__",
    "Box",
    "CanonicalGrid",
    "Correspondence",
    "DomainError",
    "ExperimentConfig",
    "GroundTruth",
    "InstanceFormatError",
    "Interval",
    "IvoteError",
    "OperationCounts",
    "ParametricSurface",
    "PoseHypothesis",
    "ProblemInstance",
    "RansacConfig",
    "Ray3",
    "RunRecord",
    "RunReport",
    "SimilarityBracket",
    "SimilarityParams",
    "SpaceMap",
    "SurfaceSet",
    "Tolerance",
    "UnsupportedModelError",
    "UsageError",
    "VoteResult",
    "VotingConfig",
    "angle_axis_to_matrix",
    "branch_and_bound",
    "branchless_count_upper_bound",
    "brute_force_vote",
    "canonize",
    "compare_algorithms",
    "export_tex",
    "gen_alignment_instance",
    "gen_hyperplane_instance",
    "gen_line_instance",
    "gen_pose_instance",
    "gen_ray_instance",
    "generalized_vote",
    "generate_instance",
    "get_family",
    "hyperplane_surface_eval",
    "intersects_box",
    "intersects_box_exact",
    "line_surface_from_point",
    "load_instance",
    "minimal_sample_size",
    "model_tags",
    "naive_vote",
    "pose5_surface_eval",
    "pose6_surface_eval",
    "pose7_surface_eval",
    "pose_error",
    "radial5_surface_eval",
    "radial_angular_error",
    "ransac_fit",
    "ransac_iterations",
    "ray_surface_eval",
    "report_cells",
    "reprojection_angular_error",
    "rotation_angle_between",
    "round_to_step",
    "run_experiment",
    "save_instance",
    "similarity_surface_eval",
    "subdivide",
    "surfaces_from_instance",
]
