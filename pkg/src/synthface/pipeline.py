"""Single-image render pipeline: instantiate, frame, rasterize, composite, encode.

``render_face`` accepts either explicit nuisance parameters or the sampling
objects they come from.  When sampling, draws happen in a fixed order on
the caller's stream (pose, illumination, background) so a render is fully
reproducible from its stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .background import BackgroundSource
from .camera import (
    DEFAULT_FILL_FRACTION,
    PinholeCamera,
    PoseRanges,
    center_face,
    default_camera,
    face_to_camera_rotation,
    sample_pose,
)
from .lighting import IlluminationPrior, SphericalHarmonicsLighting, sample_illumination
from .morphable import FaceInstanceParams, MorphableFaceModel, instantiate
from .rasterizer import FrameBuffer, composite_background, encode_image, rasterize


@dataclass
class RenderOutput:
    """Encoded image plus every parameter that produced it."""

    image: np.ndarray
    annotation: dict


def render_face(
    model: MorphableFaceModel,
    params: FaceInstanceParams,
    pose: tuple[float, float, float] | PoseRanges,
    lighting: SphericalHarmonicsLighting | IlluminationPrior,
    background: BackgroundSource,
    camera: PinholeCamera | None = None,
    rng: np.random.Generator | None = None,
    fill_fraction: float = DEFAULT_FILL_FRACTION,
) -> RenderOutput:
    """Render one annotated face image.

    ``pose`` may be explicit (yaw, pitch, roll) radians or a PoseRanges to
    sample from; ``lighting`` may be explicit coefficients or a prior to
    sample from.  ``rng`` is required whenever something is sampled (pose,
    illumination, or a background draw).
    """
    if camera is None:
        camera = default_camera()
    if rng is None:
        rng = np.random.default_rng(0)

    mesh = instantiate(model, params)

    if isinstance(pose, PoseRanges):
        yaw, pitch, roll = sample_pose(pose, rng)
    else:
        yaw, pitch, roll = (float(v) for v in pose)

    if isinstance(lighting, IlluminationPrior):
        lighting = sample_illumination(lighting, rng)

    rotation = face_to_camera_rotation(yaw, pitch, roll)
    translation = center_face(mesh.positions, camera, rotation, fill_fraction)

    framebuffer = FrameBuffer.create(camera)
    rasterize(mesh, rotation, translation, camera, lighting, framebuffer)
    background_id, crop_rect = composite_background(framebuffer, background, rng)
    image = encode_image(framebuffer)

    annotation = {
        "shape_coeffs": [float(v) for v in params.shape_coeffs],
        "color_coeffs": [float(v) for v in params.color_coeffs],
        "expression_coeffs": [float(v) for v in params.expression_coeffs],
        "yaw": yaw,
        "pitch": pitch,
        "roll": roll,
        "rotation": [[float(v) for v in row] for row in rotation],
        "translation": [float(v) for v in translation],
        "lighting": [float(v) for v in lighting.flat()],
        "background_id": background_id,
        "background_crop": [int(v) for v in crop_rect],
    }
    return RenderOutput(image=image, annotation=annotation)
