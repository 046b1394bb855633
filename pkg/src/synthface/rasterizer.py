"""Software rasterizer: z-buffered, perspective-correct, deterministically tie-broken.

Sampling rule: a pixel is covered when its center lies inside the triangle,
with the top-left fill convention deciding centers exactly on an edge.  In
screen coordinates (x right, y down) triangles are orientation-normalized
to positive signed area; an edge then fills its boundary pixels iff it is
exactly horizontal pointing +x, or points upward (dy < 0).

The implementation is fragment-parallel: candidate fragments for all
triangles are generated in one batch and reduced per pixel by minimal
depth, with submission order breaking exact depth ties (first triangle
wins).  This is bit-identical to a sequential per-triangle loop with a
strict depth test, just without the Python-level loop.  Interpolation is
perspective-correct; shading happens once per visible pixel with the
renormalized camera-space normal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .background import BackgroundSource
from .camera import NEAR_PLANE_MM, PinholeCamera
from .color import linear_to_u8
from .errors import ConfigError
from .lighting import SphericalHarmonicsLighting, irradiance_many
from .morphable import FaceMesh


@dataclass
class FrameBuffer:
    """Linear-RGB color, camera-space depth, and face-coverage planes."""

    color: np.ndarray
    depth: np.ndarray
    coverage: np.ndarray

    @classmethod
    def create(cls, camera: PinholeCamera) -> "FrameBuffer":
        w, h = camera.image_size
        return cls(
            color=np.zeros((h, w, 3)),
            depth=np.full((h, w), np.inf),
            coverage=np.zeros((h, w), dtype=bool),
        )

    @property
    def width(self) -> int:
        return self.color.shape[1]

    @property
    def height(self) -> int:
        return self.color.shape[0]


def _top_left(dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """Vectorized top-left rule for edge vectors in y-down screen space."""
    return ((dy == 0.0) & (dx > 0.0)) | (dy < 0.0)


def rasterize(
    mesh: FaceMesh,
    rotation: np.ndarray,
    translation: np.ndarray,
    camera: PinholeCamera,
    lighting: SphericalHarmonicsLighting,
    framebuffer: FrameBuffer,
) -> None:
    """Render the posed mesh into ``framebuffer``.

    Vertices are mapped by ``rotation @ p + translation`` into camera space.
    Triangles with any vertex at or before the near plane are dropped (the
    framing step guarantees none for normal pipelines); back-facing
    triangles (camera-space geometric normal z >= 0) are culled.
    """
    if (framebuffer.width, framebuffer.height) != tuple(camera.image_size):
        raise ConfigError(
            f"framebuffer {framebuffer.width}x{framebuffer.height} does not match "
            f"camera image size {camera.image_size}"
        )
    rot = np.asarray(rotation, dtype=np.float64)
    cam_pts = mesh.positions @ rot.T + np.asarray(translation, dtype=np.float64)
    cam_nrm = mesh.normals @ rot.T

    tris = mesh.topology.triangles
    if tris.size == 0:
        return
    z_all = cam_pts[:, 2]
    in_front = (z_all[tris] > NEAR_PLANE_MM).all(axis=1)
    a = cam_pts[tris[:, 0]]
    face_n = np.cross(cam_pts[tris[:, 1]] - a, cam_pts[tris[:, 2]] - a)
    keep = in_front & (face_n[:, 2] < 0.0)
    if not keep.any():
        return
    tri_idx = tris[keep]

    # Screen coordinates for every vertex in front of the near plane.
    su = np.full(z_all.shape, np.nan)
    sv = np.full(z_all.shape, np.nan)
    ok = z_all > NEAR_PLANE_MM
    su[ok] = camera.principal_point[0] + camera.focal_px * cam_pts[ok, 0] / z_all[ok]
    sv[ok] = camera.principal_point[1] - camera.focal_px * cam_pts[ok, 1] / z_all[ok]

    # Normalize orientation to positive signed screen area (swap last two).
    area2 = (su[tri_idx[:, 1]] - su[tri_idx[:, 0]]) * (sv[tri_idx[:, 2]] - sv[tri_idx[:, 0]]) - (
        sv[tri_idx[:, 1]] - sv[tri_idx[:, 0]]
    ) * (su[tri_idx[:, 2]] - su[tri_idx[:, 0]])
    flip = area2 < 0.0
    swapped = tri_idx.copy()
    swapped[flip, 1], swapped[flip, 2] = tri_idx[flip, 2], tri_idx[flip, 1]
    tri_idx = swapped

    vx = su[tri_idx]  # (K, 3)
    vy = sv[tri_idx]
    vz = z_all[tri_idx]
    area2 = (vx[:, 1] - vx[:, 0]) * (vy[:, 2] - vy[:, 0]) - (vy[:, 1] - vy[:, 0]) * (
        vx[:, 2] - vx[:, 0]
    )

    live = area2 != 0.0
    w_img, h_img = framebuffer.width, framebuffer.height
    ix0 = np.maximum(0, np.ceil(vx.min(axis=1) - 0.5).astype(np.int64))
    ix1 = np.minimum(w_img - 1, np.floor(vx.max(axis=1) - 0.5).astype(np.int64))
    iy0 = np.maximum(0, np.ceil(vy.min(axis=1) - 0.5).astype(np.int64))
    iy1 = np.minimum(h_img - 1, np.floor(vy.max(axis=1) - 0.5).astype(np.int64))
    bw = np.where(live, ix1 - ix0 + 1, 0).clip(min=0)
    bh = np.where(live, iy1 - iy0 + 1, 0).clip(min=0)

    # One candidate fragment per (triangle, bbox pixel).
    counts = bw * bh
    total = int(counts.sum())
    if total == 0:
        return
    ft = np.repeat(np.arange(tri_idx.shape[0]), counts)  # fragment -> triangle (submission order)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    offset = np.arange(total) - np.repeat(starts, counts)
    frag_x = ix0[ft] + offset % bw[ft]
    frag_y = iy0[ft] + offset // bw[ft]
    qx = frag_x + 0.5
    qy = frag_y + 0.5

    ax, ay = vx[ft, 0], vy[ft, 0]
    bx, by = vx[ft, 1], vy[ft, 1]
    cx, cy = vx[ft, 2], vy[ft, 2]
    # Edge functions, each positive on the triangle's interior.
    e_a = (cx - bx) * (qy - by) - (cy - by) * (qx - bx)
    e_b = (ax - cx) * (qy - cy) - (ay - cy) * (qx - cx)
    e_c = (bx - ax) * (qy - ay) - (by - ay) * (qx - ax)
    tl_a = _top_left(vx[:, 2] - vx[:, 1], vy[:, 2] - vy[:, 1])[ft]
    tl_b = _top_left(vx[:, 0] - vx[:, 2], vy[:, 0] - vy[:, 2])[ft]
    tl_c = _top_left(vx[:, 1] - vx[:, 0], vy[:, 1] - vy[:, 0])[ft]
    inside = (
        ((e_a > 0.0) | ((e_a == 0.0) & tl_a))
        & ((e_b > 0.0) | ((e_b == 0.0) & tl_b))
        & ((e_c > 0.0) | ((e_c == 0.0) & tl_c))
    )
    if not inside.any():
        return

    ft = ft[inside]
    frag_x, frag_y = frag_x[inside], frag_y[inside]
    inv_area = 1.0 / area2[ft]
    wa = (e_a[inside] * inv_area) / vz[ft, 0]
    wb = (e_b[inside] * inv_area) / vz[ft, 1]
    wc = (e_c[inside] * inv_area) / vz[ft, 2]
    frag_z = 1.0 / (wa + wb + wc)

    # Per-pixel reduction: minimal depth wins, first-submitted at exact ties.
    pix = frag_y * w_img + frag_x
    order = np.lexsort((ft, frag_z, pix))
    first = np.ones(order.size, dtype=bool)
    first[1:] = pix[order][1:] != pix[order][:-1]
    win = order[first]

    upd = frag_z[win] < framebuffer.depth[frag_y[win], frag_x[win]]
    win = win[upd]
    if win.size == 0:
        return
    wx, wy = frag_x[win], frag_y[win]
    wz = frag_z[win]
    la = (wa * frag_z)[win]
    lb = (wb * frag_z)[win]
    lc = (wc * frag_z)[win]
    i0, i1, i2 = tri_idx[ft[win], 0], tri_idx[ft[win], 1], tri_idx[ft[win], 2]
    frag_nrm = la[:, None] * cam_nrm[i0] + lb[:, None] * cam_nrm[i1] + lc[:, None] * cam_nrm[i2]
    frag_alb = (
        la[:, None] * mesh.colors[i0] + lb[:, None] * mesh.colors[i1] + lc[:, None] * mesh.colors[i2]
    )

    length = np.linalg.norm(frag_nrm, axis=1)
    frag_nrm = np.where(
        length[:, None] > 1e-12, frag_nrm / np.maximum(length, 1e-12)[:, None], (0.0, 0.0, -1.0)
    )
    alb = np.clip(frag_alb, 0.0, 1.0)
    e = np.maximum(irradiance_many(lighting, frag_nrm), 0.0)

    framebuffer.depth[wy, wx] = wz
    framebuffer.coverage[wy, wx] = True
    framebuffer.color[wy, wx] = alb * e / np.pi


def composite_background(
    framebuffer: FrameBuffer, background: BackgroundSource, rng: np.random.Generator
) -> tuple[str, tuple[int, int, int, int]]:
    """Fill uncovered pixels from a sampled texture; covered pixels untouched.

    Returns the texture id and crop rectangle for the annotation; the draw
    happens even at full coverage so the record is always present.
    """
    sample = background.sample(rng, framebuffer.width, framebuffer.height)
    uncovered = ~framebuffer.coverage
    framebuffer.color[uncovered] = sample.pixels[uncovered]
    return sample.background_id, sample.crop_rect


def encode_image(framebuffer: FrameBuffer) -> np.ndarray:
    """Composited linear framebuffer to 8-bit sRGB raster."""
    return linear_to_u8(framebuffer.color)


def coverage_fraction(framebuffer: FrameBuffer) -> float:
    return float(framebuffer.coverage.mean())
