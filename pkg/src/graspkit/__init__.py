"""Manipulation-example retrieval, geometric matching, and grasp-pose refinement.

The package turns a natural-language instruction plus a single RGB-D-derived
observation (dense features, image embedding, instance mask, depth) into a
grasp pose, by retrieving the closest example from a multi-source knowledge
base, verifying it geometrically, and refining its pose with a small-angle
rotation sweep over re-rendered splat scenes.
"""

from .fixtures import (
    build_kb_from_fixture,
    default_camera,
    embedding_with_cosine,
    gen_planted_rotation,
    gen_priority_kb,
    gen_self_consistency,
    gen_visual_kb,
    generate_all,
    make_blob_scene,
    write_example,
)
from .knowledge_base import (
    KnowledgeBase,
    KnowledgeBaseError,
    ManipulationExample,
    ValidationReport,
    build,
    get_example,
    normalize_object_name,
    validate,
)
from .matching import (
    GATE_ACCEPT,
    GATE_NEEDS_REFINEMENT,
    DenseFeatureMap,
    ImdResult,
    InstanceMask,
    imd,
    normalize_features,
    resize_mask_nearest,
    select_min_imd,
)
from .metrics import (
    MaskingResult,
    PoseLossConfig,
    mask_pose_parameters,
    mlm_cross_entropy,
    pose_loss,
    total_loss,
    unmask,
)
from .pipeline import (
    Observation,
    PipelineConfig,
    QueryResult,
    StageError,
    emit_prompt,
    load_camera_json,
    load_observation,
    result_to_json_text,
    run_query,
    save_camera_json,
)
from .refinement import (
    DepthMap,
    GraspPose,
    RefinedPose,
    RefinementResult,
    RotationCandidate,
    backproject,
    default_rotation_spec,
    make_rotation_candidates,
    normalized_to_pixel,
    pixel_to_normalized,
    refine,
    render_candidate,
    transform_pose,
)
from .retrieval import (
    BM25Index,
    Instruction,
    RetrievalConfig,
    RetrievalTrace,
    bm25_score,
    build_bm25_index,
    cosine,
    hybrid_retrieve,
    rank_visual,
    tokenize,
    visual_top_n,
)
from .rotations import (
    axis_angle_matrix,
    axis_angle_quat,
    is_rotation_matrix,
    matrix_to_quat,
    quat_conjugate,
    quat_mul,
    quat_normalize,
    quat_rotate,
    quat_to_matrix,
)
from .splats import (
    Camera,
    GaussianSet,
    RenderOutput,
    apply_rigid,
    empty_gaussian_set,
    gaussian_set_from_array,
    gaussian_set_to_array,
    project_point,
    render,
    render_as_features,
    write_ppm,
)
from .tensor_store import (
    ManifestError,
    ManifestRecord,
    TensorFormatError,
    dump_manifest,
    load_manifest,
    load_tensor,
    parse_record,
    read_tensor,
    save_tensor,
    write_tensor,
)

__version__ = "0.1.0"
