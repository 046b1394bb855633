"""Rigid head pose, pinhole projection, head centering, pose sampling.

Axis conventions (fixed):
  * Model space: +y up, +x model-left, +z out of the face.
  * Pose rotation R = Rz(roll) @ Rx(pitch) @ Ry(yaw), applied in model axes;
    yaw = +90 deg maps (0,0,1) to (1,0,0).
  * Camera space: +x image-right, +y image-up, +z away from the camera
    (depth); pixel v grows downward, so v = cy - focal * y / z.
  * A fixed turn ``VIEW_TURN`` (180 deg about +y) is applied after the pose
    so the zero-pose face looks into the lens;
    full model-to-camera rotation = VIEW_TURN @ R.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GeometryError

NEAR_PLANE_MM = 10.0

# Default framing: focal such that a ~250 mm head at ~1 m fills ~65% of the frame.
DEFAULT_FOCAL_PER_PIXEL = 2.6
DEFAULT_FILL_FRACTION = 0.65


@dataclass(frozen=True)
class RigidPose:
    """Six-parameter pose: angles in radians, translation in camera mm."""

    yaw: float
    pitch: float
    roll: float
    translation: np.ndarray

    def __post_init__(self):
        for name in ("yaw", "pitch", "roll"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or abs(v) > math.pi:
                raise ConfigError(f"{name} must be finite with |angle| <= pi, got {v}")
        t = np.ascontiguousarray(self.translation, dtype=np.float64)
        if t.shape != (3,) or not np.all(np.isfinite(t)):
            raise ConfigError("translation must be a finite 3-vector")
        object.__setattr__(self, "translation", t)


@dataclass(frozen=True)
class PinholeCamera:
    focal_px: float
    principal_point: np.ndarray
    image_size: tuple[int, int]  # (width, height)

    def __post_init__(self):
        if not (self.focal_px > 0):
            raise ConfigError("focal_px must be positive")
        pp = np.ascontiguousarray(self.principal_point, dtype=np.float64)
        object.__setattr__(self, "principal_point", pp)
        w, h = self.image_size
        if w < 1 or h < 1:
            raise ConfigError("image_size must be positive")
        if not (0 <= pp[0] <= w and 0 <= pp[1] <= h):
            raise ConfigError("principal point must lie inside the image bounds")

    @property
    def width(self) -> int:
        return int(self.image_size[0])

    @property
    def height(self) -> int:
        return int(self.image_size[1])


def default_camera(width: int = 128, height: int | None = None) -> PinholeCamera:
    """Camera with the shipped framing defaults at the given resolution."""
    h = height if height is not None else width
    return PinholeCamera(
        focal_px=DEFAULT_FOCAL_PER_PIXEL * h,
        principal_point=np.array([width / 2.0, h / 2.0]),
        image_size=(width, h),
    )


@dataclass(frozen=True)
class PoseRanges:
    """Closed intervals for yaw/pitch/roll, radians internally."""

    yaw_range: tuple[float, float]
    pitch_range: tuple[float, float]
    roll_range: tuple[float, float]

    def __post_init__(self):
        for name in ("yaw_range", "pitch_range", "roll_range"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise ConfigError(f"{name}: invalid interval [{lo}, {hi}]")
            if lo < -math.pi - 1e-12 or hi > math.pi + 1e-12:
                raise ConfigError(f"{name} must lie within [-180, 180] degrees")
            object.__setattr__(self, name, (float(lo), float(hi)))

    @classmethod
    def from_degrees(cls, yaw, pitch, roll) -> "PoseRanges":
        conv = lambda pair: (math.radians(pair[0]), math.radians(pair[1]))
        return cls(conv(yaw), conv(pitch), conv(roll))

    def to_degrees(self) -> dict:
        return {
            "yaw": [math.degrees(v) for v in self.yaw_range],
            "pitch": [math.degrees(v) for v in self.pitch_range],
            "roll": [math.degrees(v) for v in self.roll_range],
        }

    def contains(self, yaw: float, pitch: float, roll: float, tol: float = 0.0) -> bool:
        for value, (lo, hi) in (
            (yaw, self.yaw_range),
            (pitch, self.pitch_range),
            (roll, self.roll_range),
        ):
            if value < lo - tol or value > hi + tol:
                return False
        return True


def _ry(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rx(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rz(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


# Fixed turn mounting the posed head in front of the lens (180 deg about +y).
VIEW_TURN = np.array([[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]])


def rotation_from_angles(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """Pose rotation Rz(roll) @ Rx(pitch) @ Ry(yaw) in model axes."""
    return _rz(roll) @ _rx(pitch) @ _ry(yaw)


def face_to_camera_rotation(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """Full model-to-camera rotation: the pose followed by the view turn."""
    return VIEW_TURN @ rotation_from_angles(yaw, pitch, roll)


def project(camera: PinholeCamera, points) -> np.ndarray:
    """Pinhole projection of camera-space points to pixels (v grows downward)."""
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    z = pts[:, 2]
    if np.any(z <= 0):
        raise GeometryError("cannot project points at or behind the camera (z <= 0)")
    uv = np.empty((pts.shape[0], 2))
    uv[:, 0] = camera.principal_point[0] + camera.focal_px * pts[:, 0] / z
    uv[:, 1] = camera.principal_point[1] - camera.focal_px * pts[:, 1] / z
    return uv[0] if single else uv


def _projected_bbox(camera: PinholeCamera, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    uv = project(camera, pts)
    return uv.min(axis=0), uv.max(axis=0)


def center_face(
    positions,
    camera: PinholeCamera,
    rotation: np.ndarray,
    fill_fraction: float = DEFAULT_FILL_FRACTION,
) -> np.ndarray:
    """Solve the translation that frames the rotated mesh.

    Depth is chosen so the projected bounding-box height equals
    ``fill_fraction * image_height`` (closed-form scale from a reference
    projection, then one verification pass); (t_x, t_y) are then iterated
    so the projected bounding-box center lands on the principal point.
    All internal reference choices depend only on the rotated geometry's
    extents, so constant model-space offsets cancel out of the framing.
    """
    if not (0.0 < fill_fraction < 1.0):
        raise ConfigError("fill_fraction must lie in (0, 1)")
    pts = np.asarray(positions, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise GeometryError("mesh has no vertices")
    q = pts @ np.asarray(rotation, dtype=np.float64).T

    lo, hi = q.min(axis=0), q.max(axis=0)
    span = hi - lo
    mid = 0.5 * (lo + hi)
    if span.max() < 1e-9:
        raise GeometryError("mesh collapses to a point; framing scale undefined")

    target_h = fill_fraction * camera.height

    def check_near(t_z: float) -> None:
        if (q[:, 2] + t_z).min() <= NEAR_PLANE_MM:
            raise GeometryError(
                f"framing would clip the near plane ({NEAR_PLANE_MM} mm); "
                "reduce fill_fraction or use a longer focal length"
            )

    # Reference projection at a safe depth, laterally centered.
    depth_ref = 4.0 * span.max() + NEAR_PLANE_MM
    t = np.array([-mid[0], -mid[1], depth_ref - mid[2]])
    bb_lo, bb_hi = _projected_bbox(camera, q + t)
    h_ref = bb_hi[1] - bb_lo[1]
    if h_ref < 1e-9:
        raise GeometryError("mesh has no projected height; framing scale undefined")

    # Closed-form scale, then one verification pass.
    depth = depth_ref * h_ref / target_h
    t[2] = depth - mid[2]
    check_near(t[2])
    bb_lo, bb_hi = _projected_bbox(camera, q + t)
    depth = depth * (bb_hi[1] - bb_lo[1]) / target_h
    t[2] = depth - mid[2]
    check_near(t[2])

    for _ in range(12):
        bb_lo, bb_hi = _projected_bbox(camera, q + t)
        center = 0.5 * (bb_lo + bb_hi)
        err = center - camera.principal_point
        if np.abs(err).max() < 1e-3:
            break
        t[0] -= err[0] * depth / camera.focal_px
        t[1] += err[1] * depth / camera.focal_px
    return t


def sample_pose(ranges: PoseRanges, rng: np.random.Generator) -> tuple[float, float, float]:
    """Independent uniform draws (yaw, pitch, roll), in that order, radians."""
    yaw = float(rng.uniform(*ranges.yaw_range))
    pitch = float(rng.uniform(*ranges.pitch_range))
    roll = float(rng.uniform(*ranges.roll_range))
    return yaw, pitch, roll
