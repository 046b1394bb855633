"""Procedural stand-in face model for license-free tests and desk runs.

The mean head is a deterministic closed-form construction (no RNG): a
lat-long ellipsoid at head scale with a nose bump, two eye sockets and a
chin bump.  Shape, color and expression bases are smooth random lobe
fields, QR-orthonormalized so the result satisfies every model invariant.
Everything is derived from the seed, so the same seed produces a
bit-identical model file.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .morphable import (
    MorphableFaceModel,
    PrincipalComponentModel,
    TriangleTopology,
)
from .rng import derive_stream

# Ellipsoid semi-axes in mm: x = half width, y = half height, z = half depth.
HEAD_SEMI_AXES = (100.0, 140.0, 100.0)

# (direction on the unit head, amplitude mm, angular width rad)
_FEATURE_BUMPS = (
    ((0.0, -0.12, 1.0), 22.0, 0.22),   # nose
    ((0.35, 0.25, 1.0), -6.0, 0.18),   # right eye socket
    ((-0.35, 0.25, 1.0), -6.0, 0.18),  # left eye socket
    ((0.0, -0.65, 0.75), 6.0, 0.25),   # chin
)

_SKIN_BASE = (0.62, 0.40, 0.30)  # linear RGB

_LOBES_PER_COMPONENT = 6


def _grid_dimensions(vertex_budget: int) -> tuple[int, int]:
    segments = max(8, int(np.sqrt(2.0 * vertex_budget)))
    rings = max(3, (vertex_budget - 2) // segments)
    return rings, segments


def _unit_head(rings: int, segments: int) -> tuple[np.ndarray, np.ndarray]:
    """Lat-long unit sphere with poles; triangles wound outward."""
    thetas = np.pi * np.arange(1, rings + 1) / (rings + 1)
    phis = 2.0 * np.pi * np.arange(segments) / segments
    tt, pp = np.meshgrid(thetas, phis, indexing="ij")
    ring_pts = np.stack(
        [np.sin(tt) * np.cos(pp), np.cos(tt), np.sin(tt) * np.sin(pp)], axis=-1
    ).reshape(-1, 3)
    north = np.array([[0.0, 1.0, 0.0]])
    south = np.array([[0.0, -1.0, 0.0]])
    points = np.concatenate([north, ring_pts, south], axis=0)

    def rv(i: int, j: int) -> int:
        return 1 + i * segments + (j % segments)

    tris: list[tuple[int, int, int]] = []
    south_idx = 1 + rings * segments
    for j in range(segments):
        tris.append((0, rv(0, j + 1), rv(0, j)))
    for i in range(rings - 1):
        for j in range(segments):
            a, b = rv(i, j), rv(i, j + 1)
            c, d = rv(i + 1, j), rv(i + 1, j + 1)
            tris.append((a, b, d))
            tris.append((a, d, c))
    for j in range(segments):
        tris.append((south_idx, rv(rings - 1, j), rv(rings - 1, j + 1)))
    return points, np.asarray(tris, dtype=np.int32)


def _mean_head(unit_points: np.ndarray) -> np.ndarray:
    """Deterministic mean head: scaled ellipsoid plus feature bumps (mm)."""
    positions = unit_points * np.asarray(HEAD_SEMI_AXES)
    for direction, amplitude, width in _FEATURE_BUMPS:
        d = np.asarray(direction) / np.linalg.norm(direction)
        cosang = np.clip(unit_points @ d, -1.0, 1.0)
        angle = np.arccos(cosang)
        bump = amplitude * np.exp(-0.5 * (angle / width) ** 2)
        positions = positions + bump[:, None] * unit_points
    return positions


def _skin_mean(unit_points: np.ndarray) -> np.ndarray:
    base = np.asarray(_SKIN_BASE)
    shade = 1.0 + 0.12 * unit_points[:, 1]  # lighter toward the crown
    colors = base[None, :] * shade[:, None]
    return np.clip(colors, 0.05, 0.95)


def _smooth_fields(
    unit_points: np.ndarray,
    count: int,
    rng: np.random.Generator,
    region_weight: np.ndarray | None = None,
) -> np.ndarray:
    """Stack of smooth random lobe displacement fields, one column per component."""
    n = unit_points.shape[0]
    columns = np.empty((3 * n, count))
    for k in range(count):
        field = np.zeros((n, 3))
        for _ in range(_LOBES_PER_COMPONENT):
            center = rng.standard_normal(3)
            center /= np.linalg.norm(center)
            direction = rng.standard_normal(3)
            direction /= np.linalg.norm(direction)
            width = rng.uniform(0.5, 1.0)
            angle = np.arccos(np.clip(unit_points @ center, -1.0, 1.0))
            weight = np.exp(-0.5 * (angle / width) ** 2)
            field += weight[:, None] * direction
        if region_weight is not None:
            field *= region_weight[:, None]
        columns[:, k] = field.reshape(-1)
    return columns


def _orthonormal_basis(columns: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(columns)
    return q


def build_toy_model(
    seed: int,
    vertex_budget: int = 1200,
    shape_components: int = 12,
    color_components: int = 8,
    expression_components: int = 6,
) -> MorphableFaceModel:
    """Build the deterministic procedural head model.

    The same seed yields a bit-identical model.  Component counts must each
    be >= 1 and fit within the mesh's 3N degrees of freedom.
    """
    if vertex_budget < 100:
        raise ConfigError("vertex_budget must be >= 100")
    for name, k in (
        ("shape_components", shape_components),
        ("color_components", color_components),
        ("expression_components", expression_components),
    ):
        if k < 1:
            raise ConfigError(f"{name} must be >= 1")

    rings, segments = _grid_dimensions(vertex_budget)
    unit_points, triangles = _unit_head(rings, segments)
    n = unit_points.shape[0]
    if max(shape_components, color_components, expression_components) > 3 * n:
        raise ConfigError("component count exceeds mesh degrees of freedom")

    mean_positions = _mean_head(unit_points)
    mean_colors = _skin_mean(unit_points)

    shape_basis = _orthonormal_basis(
        _smooth_fields(unit_points, shape_components, derive_stream(seed, "toy-shape"))
    )
    color_basis = _orthonormal_basis(
        _smooth_fields(unit_points, color_components, derive_stream(seed, "toy-color"))
    )
    # Expressions act mostly on the lower face (mouth/jaw region).
    lower_face = 1.0 / (1.0 + np.exp((unit_points[:, 1] + 0.15) / 0.12))
    expression_basis = _orthonormal_basis(
        _smooth_fields(
            unit_points,
            expression_components,
            derive_stream(seed, "toy-expression"),
            region_weight=0.15 + 0.85 * lower_face,
        )
    )

    shape_std = 6.0 * 0.88 ** np.arange(shape_components)
    color_std = 0.07 * 0.90 ** np.arange(color_components)
    expression_std = 3.0 * 0.85 ** np.arange(expression_components)

    return MorphableFaceModel(
        shape=PrincipalComponentModel(mean_positions.reshape(-1), shape_basis, shape_std),
        color=PrincipalComponentModel(mean_colors.reshape(-1), color_basis, color_std),
        expression=PrincipalComponentModel(
            np.zeros(3 * n), expression_basis, expression_std
        ),
        topology=TriangleTopology(triangles),
    )
