"""Background textures: raster directories with a procedural fallback.

Sampling policy: pick a texture uniformly, take a random axis-aligned crop
at least as large as the frame, scale to the frame.  Directory entries are
enumerated in lexicographic order so texture ids index deterministically.
The procedural source synthesizes a smooth two-octave noise texture from a
single key drawn off the caller's stream, so generation never fails for
lack of texture files.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .color import u8_to_linear
from .errors import ConfigError

logger = logging.getLogger(__name__)

_RASTER_SUFFIXES = {".png", ".jpg", ".jpeg"}


def _axis_weights(n_out: int, n_in: int) -> np.ndarray:
    """Row-stochastic bilinear interpolation weights (n_out, n_in)."""
    pos = np.linspace(0.0, n_in - 1.0, n_out)
    lo = np.clip(np.floor(pos).astype(int), 0, n_in - 2)
    frac = pos - lo
    weights = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    weights[rows, lo] = 1.0 - frac
    weights[rows, lo + 1] += frac
    return weights


def _bilinear_upsample(grid: np.ndarray, height: int, width: int) -> np.ndarray:
    """Upsample a coarse (gh, gw, 3) grid to (height, width, 3)."""
    wy = _axis_weights(height, grid.shape[0])
    wx = _axis_weights(width, grid.shape[1])
    rows = np.tensordot(wy, grid, axes=(1, 0))  # (height, gw, 3)
    return np.tensordot(rows, wx, axes=(1, 1)).transpose(0, 2, 1)


def _procedural_texture(key: int, width: int, height: int) -> np.ndarray:
    """Deterministic smooth noise in linear RGB, keyed by ``key`` alone."""
    local = np.random.Generator(np.random.PCG64(key))
    coarse = local.uniform(0.08, 0.85, size=(5, 5, 3))
    detail = local.uniform(-0.10, 0.10, size=(13, 13, 3))
    tex = _bilinear_upsample(coarse, height, width) + _bilinear_upsample(detail, height, width)
    return np.clip(tex, 0.0, 1.0)


@dataclass(frozen=True)
class BackgroundSample:
    """One sampled background: linear RGB pixels plus its annotation record."""

    pixels: np.ndarray  # (height, width, 3) linear RGB
    background_id: str
    crop_rect: tuple[int, int, int, int]  # (x, y, width, height) in source pixels


@dataclass(frozen=True)
class BackgroundSource:
    """Uniform sampler over a texture directory, or procedural noise."""

    directory: Path | None = None
    files: tuple[str, ...] = field(default=())

    @classmethod
    def procedural(cls) -> "BackgroundSource":
        return cls(directory=None, files=())

    @classmethod
    def from_directory(cls, path) -> "BackgroundSource":
        directory = Path(path)
        if not directory.is_dir():
            raise ConfigError(f"background directory not found: {directory}")
        files = tuple(
            sorted(p.name for p in directory.iterdir() if p.suffix.lower() in _RASTER_SUFFIXES)
        )
        if not files:
            raise ConfigError(f"no PNG/JPEG textures in {directory}")
        return cls(directory=directory, files=files)

    @property
    def is_procedural(self) -> bool:
        return self.directory is None

    def sample(self, rng: np.random.Generator, width: int, height: int) -> BackgroundSample:
        """Draw one background for a (width x height) frame."""
        if self.is_procedural:
            key = int(rng.integers(0, 2**63))
            pixels = _procedural_texture(key, width, height)
            return BackgroundSample(pixels, f"procedural:{key}", (0, 0, width, height))

        start = int(rng.integers(len(self.files)))
        for attempt in range(len(self.files)):
            name = self.files[(start + attempt) % len(self.files)]
            try:
                with Image.open(self.directory / name) as img:
                    raster = np.asarray(img.convert("RGB"), dtype=np.uint8)
            except Exception as exc:
                logger.warning("skipping unreadable texture %s: %s", name, exc)
                continue
            return self._crop_and_scale(raster, name, rng, width, height)
        logger.warning("no readable textures in %s; using procedural fallback", self.directory)
        key = int(rng.integers(0, 2**63))
        pixels = _procedural_texture(key, width, height)
        return BackgroundSample(pixels, f"procedural:{key}", (0, 0, width, height))

    def _crop_and_scale(
        self, raster: np.ndarray, name: str, rng: np.random.Generator, width: int, height: int
    ) -> BackgroundSample:
        img_h, img_w = raster.shape[:2]
        max_scale = min(img_w / width, img_h / height)
        if max_scale <= 1.0:
            crop = (0, 0, img_w, img_h)
        else:
            s = float(rng.uniform(1.0, max_scale))
            cw = min(img_w, int(round(s * width)))
            ch = min(img_h, int(round(s * height)))
            x = int(rng.integers(0, img_w - cw + 1))
            y = int(rng.integers(0, img_h - ch + 1))
            crop = (x, y, cw, ch)
        x, y, cw, ch = crop
        patch = raster[y : y + ch, x : x + cw]
        if (cw, ch) != (width, height):
            patch = np.asarray(
                Image.fromarray(patch).resize((width, height), Image.BILINEAR), dtype=np.uint8
            )
        return BackgroundSample(u8_to_linear(patch), f"file:{name}", crop)
