"""sRGB transfer functions and 8-bit quantization.

The framebuffer works in linear radiance; images are encoded once at the
end.  Quantization uses round-half-up so the mapping is monotone and
platform-independent, and the u8 -> linear -> u8 round trip is exact.
"""

from __future__ import annotations

import numpy as np

_LINEAR_CUTOFF = 0.0031308
_ENCODED_CUTOFF = 0.04045


def srgb_encode(linear: np.ndarray) -> np.ndarray:
    """Linear [0,1] to sRGB-encoded [0,1] (no quantization)."""
    lin = np.asarray(linear, dtype=np.float64)
    low = 12.92 * lin
    high = 1.055 * np.power(np.maximum(lin, _LINEAR_CUTOFF), 1.0 / 2.4) - 0.055
    return np.where(lin <= _LINEAR_CUTOFF, low, high)


def srgb_decode(encoded: np.ndarray) -> np.ndarray:
    """sRGB-encoded [0,1] to linear [0,1]."""
    enc = np.asarray(encoded, dtype=np.float64)
    low = enc / 12.92
    high = np.power((np.maximum(enc, _ENCODED_CUTOFF) + 0.055) / 1.055, 2.4)
    return np.where(enc <= _ENCODED_CUTOFF, low, high)


def linear_to_u8(linear: np.ndarray) -> np.ndarray:
    """Clamp to [0,1], apply the sRGB transfer, round half up to 8 bits."""
    encoded = srgb_encode(np.clip(linear, 0.0, 1.0))
    return np.floor(encoded * 255.0 + 0.5).astype(np.uint8)


def u8_to_linear(raster: np.ndarray) -> np.ndarray:
    """8-bit sRGB raster to linear float64."""
    return srgb_decode(np.asarray(raster, dtype=np.float64) / 255.0)
