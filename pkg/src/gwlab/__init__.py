"""gwlab: nearest-unvisited-point walks on pairs of lines.

Seeded construction of point processes on one or two lines, two equivalent
greedy-walk engines with truncation-safe stopping, trajectory analysis
(hitting times, deficiency records, clusters, return events, replay
audits), batch experiment drivers, and a CLI (``gwlab``).
"""

from ._version import __version__
from .errors import PrefixLimitError, ValidationError
from .geometry import (
    INTERSECTING,
    PARALLEL,
    SINGLE_LINE,
    Site,
    Space,
    angle_from_slopes,
    boundary_margin,
    distance,
    norm,
)
from .processes import (
    CONSTRUCTIONS,
    FLAG_BOTH,
    FLAG_LINE0,
    FLAG_LINER,
    INTERSECTING_INDEPENDENT,
    PARALLEL_CONSTRUCTIONS,
    PARALLEL_DUPLICATED,
    PARALLEL_SHIFTED,
    PARALLEL_THINNED,
    SHIFT_RATIO_LIMIT,
    SINGLE_POISSON,
    ProcessSpec,
    Realization,
    generate,
    mirror_realization,
    realization_from_dict,
    realization_from_json,
    realization_to_dict,
    realization_to_json,
    sample_poisson,
    shift_realization,
)
from .seeding import RNG_ALGORITHM, make_generator, splitmix64, stream_seed
from .walk import (
    EXHAUSTED,
    RUN_TO_EXHAUSTION,
    TRUNCATED,
    TRUNCATION_SAFE,
    StopRule,
    Trajectory,
    couple_restrict,
    mirror_trajectory,
    run_walk,
    run_walk_naive,
    step_candidates,
    stop_margin,
    trajectories_equal,
    trajectory_from_binary,
    trajectory_to_binary,
    trajectory_to_json,
)
from .analysis import (
    ClusterDecomposition,
    ClusterMark,
    DxRecord,
    EventRecord,
    HittingTimes,
    IndentedEntryRecord,
    LemmaAudit,
    PovratakSummary,
    ReducedWalk,
    UVRecord,
    audit_lemmas,
    check_cluster_consecutive,
    check_indented_entry,
    check_povratak,
    check_reduced_alignment,
    compute_Dx,
    decompose_clusters,
    detect_A_events,
    detect_crossings,
    empirical_survival,
    extract_UV_sequences,
    extract_halfline_changes,
    intersect_Bn_bound,
    mark_leading_and_indented,
    parallel_Am_first_term,
    reduce_to_cluster_leads,
    theoretical_bounds,
    validate_dx_record,
)
from .experiments import (
    ExperimentConfig,
    RunSummary,
    aggregate,
    coupled_window_study,
    load_config,
    read_summaries_csv,
    run_experiment,
    sign_test_p,
    write_outputs,
    write_summaries_csv,
)
