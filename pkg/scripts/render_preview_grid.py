#!/usr/bin/env python3
"""Render a preview grid: rows = identities, columns = nuisance draws.

Each row keeps one identity's shape/color coefficients fixed while pose,
expression, illumination and background are resampled per column, which is
exactly the dataset generator's identity/nuisance split.
"""

import argparse
from pathlib import Path

import numpy as np
from PIL import Image

from synthface.background import BackgroundSource
from synthface.dataset import preset_config
from synthface.lighting import default_prior
from synthface.morphable import FaceInstanceParams, sample_coeffs
from synthface.camera import default_camera
from synthface.pipeline import render_face
from synthface.rng import derive_stream
from synthface.toymodel import build_toy_model


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=4, help="identities")
    parser.add_argument("--cols", type=int, default=6, help="samples per identity")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--size", type=int, default=128)
    parser.add_argument("--preset", default="syn-1m", help="pose ranges source")
    parser.add_argument("--out", default="preview_grid.png")
    args = parser.parse_args()

    model = build_toy_model(args.seed)
    prior = default_prior()
    background = BackgroundSource.procedural()
    camera = default_camera(args.size)
    ranges = preset_config(args.preset).pose_ranges

    grid = np.zeros((args.rows * args.size, args.cols * args.size, 3), dtype=np.uint8)
    for r in range(args.rows):
        id_stream = derive_stream(args.seed, "id", r)
        shape = sample_coeffs(id_stream, model.shape.component_count, 3.0)
        color = sample_coeffs(id_stream, model.color.component_count, 3.0)
        for c in range(args.cols):
            stream = derive_stream(args.seed, "sample", r, c)
            expression = sample_coeffs(stream, model.expression.component_count, 3.0)
            params = FaceInstanceParams(shape, color, expression)
            result = render_face(model, params, ranges, prior, background, camera, stream)
            grid[
                r * args.size : (r + 1) * args.size, c * args.size : (c + 1) * args.size
            ] = result.image

    out = Path(args.out)
    Image.fromarray(grid, "RGB").save(out)
    print(f"wrote {out} ({args.rows}x{args.cols} renders at {args.size}px)")


if __name__ == "__main__":
    main()
