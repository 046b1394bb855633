"""Synthetic face-image dataset generation and verification evaluation.

The package samples a statistical 3D face model (shape, color, expression),
an empirical spherical-harmonics illumination prior, uniform head poses and
random backgrounds, renders with a built-in software rasterizer, and writes
fully annotated datasets with reproducible per-image parameter streams.
A separate toolkit scores face-verification embeddings (cosine similarity,
template softmax averaging, ROC / TAR@FAR, fold-held-out accuracy).
"""

from .background import BackgroundSource
from .camera import (
    PinholeCamera,
    PoseRanges,
    RigidPose,
    center_face,
    default_camera,
    face_to_camera_rotation,
    project,
    rotation_from_angles,
    sample_pose,
)
from .dataset import (
    GENERATOR_VERSION,
    DatasetReport,
    GenerationConfig,
    generate_dataset,
    preset_config,
    verify_dataset,
)
from .lighting import (
    IlluminationPrior,
    SphericalHarmonicsLighting,
    ambient_unit,
    default_prior,
    irradiance,
    load_prior,
    sample_illumination,
    save_prior,
    sh_basis,
    shade,
)
from .morphable import (
    FaceInstanceParams,
    FaceMesh,
    MorphableFaceModel,
    PrincipalComponentModel,
    TriangleTopology,
    compute_vertex_normals,
    instantiate,
    load_model,
    sample_coeffs,
    save_model,
)
from .pipeline import RenderOutput, render_face
from .rasterizer import FrameBuffer, composite_background, encode_image, rasterize
from .rng import derive_stream
from .toymodel import build_toy_model
from .verification import (
    EmbeddingSet,
    Pair,
    PairList,
    RocCurve,
    Template,
    compute_roc,
    cosine_similarity,
    cross_validated_accuracy,
    load_embeddings,
    load_pairs,
    load_templates,
    tar_at_far,
    template_similarity,
)

__version__ = "0.1.0"
