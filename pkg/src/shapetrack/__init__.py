"""Shape- and position-aware association of video objects.

The package turns per-frame object masks and query embeddings into stable
tracks. Each object gets a polar histogram of outline anchor points about its
mask centroid; adding that histogram to the object's embedding makes two
same-looking objects distinguishable by silhouette and location, both when
matching across frames and when mining training pairs across a whole video.
"""

from .association import (
    MatchConfig,
    QueryRecord,
    TrackSet,
    hungarian,
    init_exemplar_tracks,
    spa_affinity,
)
from .errors import (
    ConfigMismatchError,
    DegenerateShapeError,
    DimensionMismatchError,
    EmptyAnchorsError,
    EmptyMaskError,
    FormatError,
    FrameMismatchError,
    FrameOrderError,
    InvalidCountError,
    MalformedIndicatorError,
    MissingBankError,
    MissingClassError,
    MissingContextError,
    MissingDescriptorError,
    ModeMismatchError,
    OutOfBoundsError,
    ShapeMismatchError,
    ShapeTrackError,
    UnknownAnchorError,
    UnknownTrackError,
    WindowTooLargeError,
    ZeroReferenceError,
)
from .descriptor import (
    DescriptorConfig,
    ShapePositionDescriptor,
    build_descriptor,
    delta_h,
    descriptor_from_mask,
    is_positive_pair,
)
from .mask_geometry import (
    AnchorSet,
    Contour,
    anchors_from_mask,
    centroid,
    extract_contour,
    grid_partition_features,
    region_mean_feature,
    sample_anchors,
    sample_feature,
)
from .metrics import (
    TrackScore,
    TubePair,
    match_tubes,
    score_association,
    tube_iou,
    tubes_from_trackset,
    windowed_tube_pq,
)
from .sampling import (
    ClassQueryBank,
    SampleBatch,
    gather_matched_queries,
    sample_baseline_batch,
    sample_stuff_batch,
    sample_thing_batch,
    update_bank,
)
from .synth import (
    ObjectSpec,
    SceneSpec,
    SceneTruth,
    attach_descriptors,
    generate,
    inject_identity_swap,
    linear_trajectory,
    mask_ref_name,
    orthogonal_prototypes,
)

__version__ = "0.1.0"

__all__ = [
    "AnchorSet",
    "ClassQueryBank",
    "Contour",
    "DescriptorConfig",
    "MatchConfig",
    "ObjectSpec",
    "QueryRecord",
    "SampleBatch",
    "SceneSpec",
    "SceneTruth",
    "ShapePositionDescriptor",
    "TrackScore",
    "TrackSet",
    "TubePair",
    "ConfigMismatchError",
    "DegenerateShapeError",
    "DimensionMismatchError",
    "EmptyAnchorsError",
    "EmptyMaskError",
    "FormatError",
    "FrameMismatchError",
    "FrameOrderError",
    "InvalidCountError",
    "MalformedIndicatorError",
    "MissingBankError",
    "MissingClassError",
    "MissingContextError",
    "MissingDescriptorError",
    "ModeMismatchError",
    "OutOfBoundsError",
    "ShapeMismatchError",
    "ShapeTrackError",
    "UnknownAnchorError",
    "UnknownTrackError",
    "WindowTooLargeError",
    "ZeroReferenceError",
    "anchors_from_mask",
    "attach_descriptors",
    "build_descriptor",
    "centroid",
    "delta_h",
    "descriptor_from_mask",
    "extract_contour",
    "gather_matched_queries",
    "generate",
    "grid_partition_features",
    "hungarian",
    "init_exemplar_tracks",
    "inject_identity_swap",
    "is_positive_pair",
    "linear_trajectory",
    "mask_ref_name",
    "match_tubes",
    "orthogonal_prototypes",
    "region_mean_feature",
    "sample_anchors",
    "sample_baseline_batch",
    "sample_feature",
    "sample_stuff_batch",
    "sample_thing_batch",
    "score_association",
    "spa_affinity",
    "tube_iou",
    "tubes_from_trackset",
    "update_bank",
    "windowed_tube_pq",
]
