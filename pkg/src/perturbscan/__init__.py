"""perturbscan: simulate sceneries with hidden path perturbations and detect them."""

from .measures import (
    Alphabet,
    DegeneratePairError,
    MeasureError,
    MeasurePair,
    centered_statistic_fn,
    chi_square_zeta,
    likelihood_ratio,
    relative_entropy,
    sample_label,
)
from .lattice import (
    Box,
    DriftTube,
    IntersectionTailEstimate,
    PathSample,
    StepBudgetError,
    StopRule,
    WalkSpec,
    drift_tube,
    estimate_intersection_tail,
    l1_shell,
    oriented_intersection_via_difference,
    range_intersection,
    sample_walk,
)
from .trees import (
    BAry,
    BranchingEstimate,
    Cut,
    ExplicitEdges,
    FlowTree,
    RandomTree,
    RayPrefix,
    SphericallySymmetric,
    TreeError,
    attach_flow,
    branching_number,
    build_tree,
    first_crossing_antichain,
    local_dimension_estimate,
    min_cut_sum,
    sample_ray,
    sample_tree_walk,
    split_rays_by_dimension,
)
from .scenery import (
    McGEstimate,
    Provenance,
    SceneryWindow,
    exact_f_sequence,
    exact_g_sequence,
    load_scenery,
    mc_g_estimate,
    sample_null,
    sample_perturbed,
    save_scenery,
)
from .detectors import (
    DetectorInapplicableError,
    DetectorOutcome,
    LrDetection,
    cube_scan_detect,
    cube_side,
    drift_tube_detect,
    lr_detect,
    radial_detect,
    tree_cut_detect,
)
from .harness import (
    DetectionReport,
    ExperimentConfig,
    emit_report,
    run_detection_experiment,
    run_threshold_sweep,
)

__version__ = "0.1.0"
