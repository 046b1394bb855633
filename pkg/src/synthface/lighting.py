"""Spherical-harmonics environment lighting and Lambertian shading.

Conventions (fixed; convert external coefficient tables to match):
  * Real SH basis, unit-normalized (integral of Y^2 over the sphere = 1),
    bands 0-2, index order [Y00, Y1-1, Y10, Y11, Y2-2, Y2-1, Y20, Y21, Y22].
  * 27 coefficients per lighting: 9 per color channel, channel-major R,G,B.
  * Irradiance uses the clamped-cosine band constants (pi, 2pi/3, pi/4) and
    is NOT clamped; shading clamps at zero and divides by pi, so a constant
    unit-radiance environment returns the albedo unchanged.
  * The lighting frame is the camera frame: +x image-right, +y image-up,
    +z from the camera into the scene (a frontal key light has direction
    toward the camera, i.e. -z).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, PriorFormatError

Y00 = 0.28209479177387814  # sqrt(1 / (4 pi))
_Y1 = 0.4886025119029199   # sqrt(3 / (4 pi))
_Y2 = 1.0925484305920792   # sqrt(15 / (4 pi))
_Y20 = 0.31539156525252005  # sqrt(5 / (16 pi))
_Y22 = 0.5462742152960396   # sqrt(15 / (16 pi))

# Clamped-cosine convolution constants per coefficient (band 0, 1, 1, 1, 2...).
BAND_FACTORS = np.array(
    [np.pi] + [2.0 * np.pi / 3.0] * 3 + [np.pi / 4.0] * 5
)

COEFF_COUNT = 27
_UNIT_TOL = 1e-6


def _check_unit(vec: np.ndarray, what: str) -> None:
    norm = float(np.linalg.norm(vec))
    if abs(norm - 1.0) > _UNIT_TOL:
        raise ConfigError(f"{what} must be a unit vector (|v| = {norm:.8f})")


def sh_basis_many(directions: np.ndarray) -> np.ndarray:
    """Evaluate the 9 basis functions at each row of ``directions`` (assumed unit)."""
    d = np.asarray(directions, dtype=np.float64)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    out = np.empty(d.shape[:-1] + (9,))
    out[..., 0] = Y00
    out[..., 1] = _Y1 * y
    out[..., 2] = _Y1 * z
    out[..., 3] = _Y1 * x
    out[..., 4] = _Y2 * x * y
    out[..., 5] = _Y2 * y * z
    out[..., 6] = _Y20 * (3.0 * z * z - 1.0)
    out[..., 7] = _Y2 * x * z
    out[..., 8] = _Y22 * (x * x - y * y)
    return out


def sh_basis(direction) -> np.ndarray:
    """Real SH basis values [Y00..Y22] at a unit direction."""
    d = np.asarray(direction, dtype=np.float64)
    _check_unit(d, "direction")
    return sh_basis_many(d)


@dataclass(frozen=True)
class SphericalHarmonicsLighting:
    """27-coefficient environment radiance: rows R, G, B; 9 SH values each."""

    coeffs: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.coeffs, dtype=np.float64)
        object.__setattr__(self, "coeffs", arr)
        if arr.shape != (3, 9):
            raise ConfigError(f"lighting coefficients must have shape (3, 9), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ConfigError("lighting coefficients must be finite")

    @classmethod
    def from_flat(cls, values) -> "SphericalHarmonicsLighting":
        """Build from 27 channel-major values ([R:9][G:9][B:9])."""
        arr = np.asarray(values, dtype=np.float64).reshape(-1)
        if arr.size != COEFF_COUNT:
            raise ConfigError(f"expected {COEFF_COUNT} coefficients, got {arr.size}")
        return cls(arr.reshape(3, 9))

    def flat(self) -> np.ndarray:
        return self.coeffs.reshape(-1).copy()


def ambient_unit() -> SphericalHarmonicsLighting:
    """The constant environment L(w) == 1 in every channel."""
    coeffs = np.zeros((3, 9))
    coeffs[:, 0] = 1.0 / Y00
    return SphericalHarmonicsLighting(coeffs)


def irradiance_many(lighting: SphericalHarmonicsLighting, normals: np.ndarray) -> np.ndarray:
    """Unclamped Lambertian irradiance per channel for each unit normal row."""
    basis = sh_basis_many(normals)
    return basis @ (lighting.coeffs * BAND_FACTORS).T


def irradiance(lighting: SphericalHarmonicsLighting, normal) -> np.ndarray:
    """Irradiance (R, G, B) at one unit normal; may be negative, never clamped here."""
    n = np.asarray(normal, dtype=np.float64)
    _check_unit(n, "normal")
    return irradiance_many(lighting, n)


def shade_many(albedo: np.ndarray, lighting: SphericalHarmonicsLighting, normals: np.ndarray) -> np.ndarray:
    """Radiosity-convention shading for stacked albedo/normal rows (albedo in [0,1])."""
    e = np.maximum(irradiance_many(lighting, normals), 0.0)
    return np.asarray(albedo, dtype=np.float64) * e / np.pi


def shade(albedo, lighting: SphericalHarmonicsLighting, normal) -> np.ndarray:
    """Shade one surface point: albedo * max(E, 0) / pi.

    Under the unit-radiance environment this returns the albedo exactly,
    which anchors the whole pipeline's intensity scale.
    """
    a = np.asarray(albedo, dtype=np.float64)
    if a.shape != (3,) or np.any(a < 0.0) or np.any(a > 1.0):
        raise ConfigError("albedo must be three channels in [0, 1]")
    n = np.asarray(normal, dtype=np.float64)
    _check_unit(n, "normal")
    return shade_many(a, lighting, n)


@dataclass(frozen=True)
class IlluminationPrior:
    """Empirical lighting distribution: stored samples + optional Gaussian jitter.

    ``jitter_scale`` is relative to the per-coefficient empirical standard
    deviation across the stored samples, so it is dimensionless and a
    single-sample prior never jitters.
    """

    samples: np.ndarray
    jitter_scale: float = 0.0

    def __post_init__(self):
        arr = np.ascontiguousarray(self.samples, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != COEFF_COUNT:
            raise PriorFormatError(
                f"prior samples must be rows of {COEFF_COUNT} values, got shape {arr.shape}"
            )
        if arr.shape[0] < 1:
            raise PriorFormatError("prior must contain at least one sample")
        if not np.all(np.isfinite(arr)):
            raise PriorFormatError("prior contains non-finite values")
        if self.jitter_scale < 0:
            raise ConfigError("jitter_scale must be non-negative")
        object.__setattr__(self, "samples", arr)

    @property
    def sample_count(self) -> int:
        return self.samples.shape[0]

    def coefficient_stds(self) -> np.ndarray:
        return self.samples.std(axis=0)


def sample_illumination(prior: IlluminationPrior, rng: np.random.Generator) -> SphericalHarmonicsLighting:
    """Pick one stored sample uniformly, optionally jittered.

    Draw order (fixed for reproducibility): sample index, then the 27
    jitter normals when jitter is enabled.
    """
    idx = int(rng.integers(prior.sample_count))
    coeffs = prior.samples[idx].copy()
    if prior.jitter_scale > 0.0:
        coeffs += rng.standard_normal(COEFF_COUNT) * prior.jitter_scale * prior.coefficient_stds()
    return SphericalHarmonicsLighting.from_flat(coeffs)


def load_prior(path, jitter_scale: float = 0.0) -> IlluminationPrior:
    """Parse a prior file: one sample per line, 27 decimals, ``#`` comments."""
    rows = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                fields = stripped.split()
                if len(fields) != COEFF_COUNT:
                    raise PriorFormatError(
                        f"{path}:{lineno}: expected {COEFF_COUNT} values, got {len(fields)}"
                    )
                try:
                    rows.append([float(f) for f in fields])
                except ValueError as exc:
                    raise PriorFormatError(f"{path}:{lineno}: {exc}") from exc
    except OSError as exc:
        raise PriorFormatError(f"cannot read prior file {path}: {exc}") from exc
    if not rows:
        raise PriorFormatError(f"{path}: no samples found")
    return IlluminationPrior(np.asarray(rows), jitter_scale=jitter_scale)


def save_prior(prior: IlluminationPrior, path) -> None:
    """Write a prior in the loadable text format (full float precision)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# spherical-harmonics illumination prior: 27 values per row,"
                 " channel-major [R:9][G:9][B:9]\n")
        for row in prior.samples:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


# Built-in prior: 12 hand-tuned conditions. Each is an ambient floor plus a
# band-attenuated directional key light, with a per-channel color tint.
_UNIT_AMBIENT = 1.0 / Y00
_KEY_GAIN = 3.0
_BAND2_SOFTEN = 0.6

_DEFAULT_CONDITIONS = (
    # (ambient, key direction or None, key strength, (r, g, b) tint)
    (1.00, None, 0.0, (1.00, 1.00, 1.00)),          # bright ambient
    (0.45, None, 0.0, (1.00, 1.00, 1.00)),          # dim ambient
    (0.55, (0.0, 0.0, -1.0), 0.90, (1.08, 1.00, 0.88)),   # frontal warm
    (0.55, (0.0, 0.0, -1.0), 0.70, (0.92, 0.98, 1.10)),   # frontal cool
    (0.50, (-0.8, 0.15, -0.6), 1.00, (1.05, 1.00, 0.92)),  # left key
    (0.50, (0.8, 0.15, -0.6), 1.00, (1.05, 1.00, 0.92)),   # right key
    (0.50, (0.0, 0.9, -0.45), 1.10, (1.00, 1.00, 1.00)),   # overhead
    (0.45, (0.0, -0.85, -0.55), 0.80, (1.02, 1.00, 0.96)),  # under-light
    (0.60, (-0.5, 0.35, -0.8), 0.85, (1.06, 1.00, 0.90)),  # 3/4 left warm
    (0.60, (0.5, 0.35, -0.8), 0.85, (0.94, 1.00, 1.08)),   # 3/4 right cool
    (0.55, (-0.6, 0.3, 0.74), 0.90, (1.00, 1.00, 1.00)),   # back-left rim
    (0.35, (0.95, 0.1, -0.3), 1.30, (1.04, 1.00, 0.94)),   # strong side
)

DEFAULT_PRIOR_JITTER = 0.15


def default_prior(jitter_scale: float = DEFAULT_PRIOR_JITTER) -> IlluminationPrior:
    """The built-in 12-condition prior used when no external prior is given."""
    rows = []
    for ambient, direction, strength, tint in _DEFAULT_CONDITIONS:
        per_channel = np.zeros((3, 9))
        per_channel[:, 0] = ambient * _UNIT_AMBIENT
        if direction is not None:
            d = np.asarray(direction, dtype=np.float64)
            d /= np.linalg.norm(d)
            key = sh_basis_many(d) * strength * _KEY_GAIN
            key[4:] *= _BAND2_SOFTEN
            per_channel += key[None, :]
        per_channel *= np.asarray(tint)[:, None]
        rows.append(per_channel.reshape(-1))
    return IlluminationPrior(np.asarray(rows), jitter_scale=jitter_scale)
