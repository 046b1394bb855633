"""Statistical face model: PCA attribute models, sampling, mesh instantiation.

A face model bundles three principal-component models (shape, per-vertex
color, additive expression offsets) over a shared vertex set plus triangle
connectivity.  Coefficients are stored standardized (z-scores); the
per-component standard deviations are applied at instantiation time, so the
same sampler works for any model.

Model files use the ``.pcmf`` format: a self-describing header followed by
little-endian float32 payloads (see :func:`save_model`).  Round trips are
bit-exact, which the dataset determinism contract relies on.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ModelFormatError

# Orthonormality tolerance for basis columns, checked on construction/load.
ORTHO_TOL = 1e-6

# Rejection sampling below this truncation bound would loop excessively;
# such configs are rejected outright.
MIN_TRUNCATION = 0.5

PCMF_MAGIC = b"PCMF"
PCMF_VERSION = 1


@dataclass(frozen=True)
class PrincipalComponentModel:
    """Gaussian generative model: mean + scaled orthonormal basis.

    ``mean`` has length ``3 * vertex_count`` (millimeters for shape models,
    linear RGB for color models).  ``basis`` is ``3N x K`` with orthonormal
    columns; ``stddevs`` holds K positive, non-increasing model-unit scales.
    """

    mean: np.ndarray
    basis: np.ndarray
    stddevs: np.ndarray

    def __post_init__(self):
        mean = np.ascontiguousarray(self.mean, dtype=np.float32)
        basis = np.ascontiguousarray(self.basis, dtype=np.float32)
        stddevs = np.ascontiguousarray(self.stddevs, dtype=np.float32)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "stddevs", stddevs)
        if mean.ndim != 1 or mean.size % 3 != 0:
            raise ModelFormatError("mean must be a flat vector of length 3*vertex_count")
        if basis.ndim != 2 or basis.shape[0] != mean.size:
            raise ModelFormatError(
                f"basis rows ({basis.shape[0] if basis.ndim == 2 else '?'}) "
                f"must equal mean length ({mean.size})"
            )
        if stddevs.ndim != 1 or stddevs.size != basis.shape[1]:
            raise ModelFormatError("stddevs length must equal basis column count")
        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(basis)):
            raise ModelFormatError("model payload contains non-finite values")
        if not np.all(stddevs > 0):
            raise ModelFormatError("stddevs must be strictly positive")
        if np.any(np.diff(stddevs.astype(np.float64)) > 0):
            raise ModelFormatError("stddevs must be non-increasing")
        gram = basis.astype(np.float64).T @ basis.astype(np.float64)
        dev = np.abs(gram - np.eye(basis.shape[1])).max() if basis.shape[1] else 0.0
        if dev > ORTHO_TOL:
            raise ModelFormatError(
                f"basis columns not orthonormal: max |B^T B - I| = {dev:.3e} > {ORTHO_TOL}"
            )

    @property
    def vertex_count(self) -> int:
        return self.mean.size // 3

    @property
    def component_count(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True)
class TriangleTopology:
    """Mesh connectivity: one row of vertex indices per triangle."""

    triangles: np.ndarray

    def __post_init__(self):
        tri = np.ascontiguousarray(self.triangles, dtype=np.int32)
        object.__setattr__(self, "triangles", tri)
        if tri.ndim != 2 or tri.shape[1] != 3:
            raise ModelFormatError("triangles must be an array of index triplets")
        if tri.size and tri.min() < 0:
            raise ModelFormatError("triangle indices must be non-negative")
        degenerate = (
            (tri[:, 0] == tri[:, 1]) | (tri[:, 1] == tri[:, 2]) | (tri[:, 0] == tri[:, 2])
        )
        if degenerate.any():
            raise ModelFormatError(
                f"{int(degenerate.sum())} triangles have repeated vertex indices"
            )

    def validate_vertex_count(self, vertex_count: int) -> None:
        if self.triangles.size and self.triangles.max() >= vertex_count:
            raise ModelFormatError(
                f"triangle index {int(self.triangles.max())} out of range "
                f"for {vertex_count} vertices"
            )

    @property
    def triangle_count(self) -> int:
        return self.triangles.shape[0]


@dataclass(frozen=True)
class MorphableFaceModel:
    """Shape, color and expression models over one vertex set."""

    shape: PrincipalComponentModel
    color: PrincipalComponentModel
    expression: PrincipalComponentModel
    topology: TriangleTopology

    def __post_init__(self):
        n = self.shape.vertex_count
        if self.color.vertex_count != n or self.expression.vertex_count != n:
            raise ModelFormatError("shape, color and expression must share vertex_count")
        if np.abs(self.expression.mean).max(initial=0.0) > 1e-9:
            raise ModelFormatError("expression mean must be a zero offset")
        self.topology.validate_vertex_count(n)

    @property
    def vertex_count(self) -> int:
        return self.shape.vertex_count


@dataclass(frozen=True)
class FaceInstanceParams:
    """Standardized coefficients selecting one face instance."""

    shape_coeffs: np.ndarray
    color_coeffs: np.ndarray
    expression_coeffs: np.ndarray

    def __post_init__(self):
        for name in ("shape_coeffs", "color_coeffs", "expression_coeffs"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            object.__setattr__(self, name, arr)
            if arr.ndim != 1 or not np.all(np.isfinite(arr)):
                raise ConfigError(f"{name} must be a finite 1-D vector")

    @classmethod
    def zeros(cls, model: MorphableFaceModel) -> "FaceInstanceParams":
        return cls(
            np.zeros(model.shape.component_count),
            np.zeros(model.color.component_count),
            np.zeros(model.expression.component_count),
        )


@dataclass(frozen=True)
class FaceMesh:
    """Instantiated model: positions (mm), linear-RGB vertex colors, unit normals."""

    positions: np.ndarray
    colors: np.ndarray
    normals: np.ndarray
    topology: TriangleTopology = field(repr=False)

    @property
    def vertex_count(self) -> int:
        return self.positions.shape[0]


def sample_coeffs(rng: np.random.Generator, count: int, truncation: float) -> np.ndarray:
    """Draw standardized coefficients: i.i.d. standard normals, rejection-truncated.

    Each coordinate is redrawn until it lies within ``[-truncation, truncation]``.
    Truncation bounds below 0.5 are rejected as configuration errors.
    """
    if count < 1:
        raise ConfigError("coefficient count must be >= 1")
    if truncation < MIN_TRUNCATION:
        raise ConfigError(
            f"truncation bound {truncation} is below the supported minimum {MIN_TRUNCATION}"
        )
    draws = rng.standard_normal(count)
    out_of_bound = np.abs(draws) > truncation
    while out_of_bound.any():
        draws[out_of_bound] = rng.standard_normal(int(out_of_bound.sum()))
        out_of_bound = np.abs(draws) > truncation
    return draws


def instantiate(model: MorphableFaceModel, params: FaceInstanceParams) -> FaceMesh:
    """Build the mesh for one coefficient vector.

    positions = shape.mean + shape.basis (c_s * sigma_s) + expr.basis (c_e * sigma_e);
    colors come from the color model the same way (no expression term).
    Vertex normals are recomputed from the deformed positions.
    """
    if params.shape_coeffs.size != model.shape.component_count:
        raise ConfigError(
            f"shape coefficient count {params.shape_coeffs.size} != "
            f"model component count {model.shape.component_count}"
        )
    if params.color_coeffs.size != model.color.component_count:
        raise ConfigError(
            f"color coefficient count {params.color_coeffs.size} != "
            f"model component count {model.color.component_count}"
        )
    if params.expression_coeffs.size != model.expression.component_count:
        raise ConfigError(
            f"expression coefficient count {params.expression_coeffs.size} != "
            f"model component count {model.expression.component_count}"
        )

    shape = model.shape
    expr = model.expression
    color = model.color
    pos = shape.mean.astype(np.float64)
    pos = pos + shape.basis.astype(np.float64) @ (params.shape_coeffs * shape.stddevs.astype(np.float64))
    pos = pos + expr.basis.astype(np.float64) @ (params.expression_coeffs * expr.stddevs.astype(np.float64))
    col = color.mean.astype(np.float64)
    col = col + color.basis.astype(np.float64) @ (params.color_coeffs * color.stddevs.astype(np.float64))

    positions = pos.reshape(-1, 3)
    normals = compute_vertex_normals(positions, model.topology)
    return FaceMesh(positions, col.reshape(-1, 3), normals, model.topology)


def compute_vertex_normals(positions: np.ndarray, topology: TriangleTopology) -> np.ndarray:
    """Area-weighted vertex normals; isolated vertices default to (0, 0, 1).

    The unnormalized cross product of two triangle edges has magnitude
    proportional to the triangle area, so summing raw cross products per
    vertex gives the area weighting for free.
    """
    positions = np.asarray(positions, dtype=np.float64)
    tri = topology.triangles
    acc = np.zeros_like(positions)
    if tri.size:
        a = positions[tri[:, 0]]
        face_n = np.cross(positions[tri[:, 1]] - a, positions[tri[:, 2]] - a)
        for corner in range(3):
            np.add.at(acc, tri[:, corner], face_n)
    length = np.linalg.norm(acc, axis=1)
    isolated = length < 1e-20
    safe = np.where(isolated, 1.0, length)
    normals = acc / safe[:, None]
    normals[isolated] = (0.0, 0.0, 1.0)
    return normals


def _pack_array(arr: np.ndarray, dtype: str) -> bytes:
    return np.ascontiguousarray(arr, dtype=np.dtype(dtype).newbyteorder("<")).tobytes()


def save_model(model: MorphableFaceModel, path) -> None:
    """Write a ``.pcmf`` model file (header + little-endian payloads)."""
    n = model.vertex_count
    header = PCMF_MAGIC + struct.pack(
        "<IIIIII",
        PCMF_VERSION,
        n,
        model.shape.component_count,
        model.color.component_count,
        model.expression.component_count,
        model.topology.triangle_count,
    )
    chunks = [header]
    for pcm in (model.shape, model.color, model.expression):
        chunks.append(_pack_array(pcm.mean, "f4"))
        chunks.append(_pack_array(pcm.basis, "f4"))
        chunks.append(_pack_array(pcm.stddevs, "f4"))
    chunks.append(_pack_array(model.topology.triangles, "u4"))
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def load_model(path) -> MorphableFaceModel:
    """Read a ``.pcmf`` file, validating every model invariant."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from exc

    header_size = 4 + 6 * 4
    if len(blob) < header_size or blob[:4] != PCMF_MAGIC:
        raise ModelFormatError(f"{path}: not a .pcmf model file (bad magic/header)")
    version, n, k_s, k_c, k_e, n_tri = struct.unpack_from("<IIIIII", blob, 4)
    if version != PCMF_VERSION:
        raise ModelFormatError(f"{path}: unsupported format version {version}")

    offset = header_size

    def take(count: int, dtype: str) -> np.ndarray:
        nonlocal offset
        dt = np.dtype(dtype).newbyteorder("<")
        nbytes = count * dt.itemsize
        if offset + nbytes > len(blob):
            raise ModelFormatError(f"{path}: truncated file (payload ends early)")
        arr = np.frombuffer(blob, dtype=dt, count=count, offset=offset).copy()
        offset += nbytes
        return arr

    pcms = []
    for k in (k_s, k_c, k_e):
        mean = take(3 * n, "f4")
        basis = take(3 * n * k, "f4").reshape(3 * n, k)
        stddevs = take(k, "f4")
        pcms.append(PrincipalComponentModel(mean, basis, stddevs))
    triangles = take(3 * n_tri, "u4").astype(np.int32).reshape(n_tri, 3)
    if offset != len(blob):
        raise ModelFormatError(f"{path}: {len(blob) - offset} trailing bytes after payload")

    topology = TriangleTopology(triangles)
    return MorphableFaceModel(pcms[0], pcms[1], pcms[2], topology)
