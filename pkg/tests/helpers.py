"""Shared test fixtures for rasterizer-facing tests."""

import numpy as np

from synthface.camera import PinholeCamera
from synthface.morphable import FaceMesh, TriangleTopology, compute_vertex_normals

CAM64 = PinholeCamera(64.0, np.array([32.0, 32.0]), (64, 64))


def tri_mesh(cam_points: np.ndarray, colors=None) -> FaceMesh:
    """Single front-facing triangle given directly in camera coordinates."""
    pts = np.asarray(cam_points, dtype=np.float64)
    a, b, c = pts
    if np.cross(b - a, c - a)[2] >= 0:
        pts = pts[[0, 2, 1]]
    topo = TriangleTopology(np.array([[0, 1, 2]]))
    if colors is None:
        colors = np.full((3, 3), 0.5)
    normals = compute_vertex_normals(pts, topo)
    return FaceMesh(pts, np.asarray(colors, dtype=np.float64), normals, topo)


def screen_coords(cam: PinholeCamera, pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.float64)
    u = cam.principal_point[0] + cam.focal_px * pts[:, 0] / pts[:, 2]
    v = cam.principal_point[1] - cam.focal_px * pts[:, 1] / pts[:, 2]
    return np.stack([u, v], axis=1)


def random_triangle(stream: np.random.Generator) -> np.ndarray:
    """Camera-space triangle whose projection lands around the 64x64 frame."""
    uv = stream.uniform(-8.0, 72.0, size=(3, 2))
    z = stream.uniform(100.0, 1000.0, size=3)
    x = (uv[:, 0] - CAM64.principal_point[0]) * z / CAM64.focal_px
    y = -(uv[:, 1] - CAM64.principal_point[1]) * z / CAM64.focal_px
    return np.stack([x, y, z], axis=1)
