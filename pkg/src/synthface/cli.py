"""Command-line entry point.

Subcommands: ``build-toy-model``, ``render``, ``generate`` and ``eval``
(``verify-dataset`` / ``roc`` / ``accuracy``).  Exit codes: 0 success,
1 usage error, 2 data error (malformed model/prior/embeddings/dataset),
3 I/O failure.  Structured logs go to stderr; data goes to files/stdout.
Every run logs its resolved effective configuration (seed included)
before doing work.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds
from .background import BackgroundSource
from .camera import default_camera
from .errors import (
    ConfigError,
    DatasetError,
    EvalFormatError,
    GeometryError,
    ModelFormatError,
    PriorFormatError,
)
from .lighting import ambient_unit, default_prior, load_prior
from .morphable import FaceInstanceParams, load_model, sample_coeffs, save_model
from .pipeline import render_face
from .rng import derive_stream
from .toymodel import build_toy_model
from .verification import (
    compute_roc,
    cross_validated_accuracy,
    load_embeddings,
    load_pairs,
    load_templates,
    pair_scores,
    roc_to_csv,
    tar_at_far,
)

logger = logging.getLogger("synthface")

THREADS_ENV = "SYNTHFACE_THREADS"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_IO = 3


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _log_effective(name: str, config: dict) -> None:
    logger.info("%s effective config: %s", name, json.dumps(config, sort_keys=True))


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _write_json(data: dict, out: str | None) -> None:
    payload = json.dumps(data, sort_keys=True, indent=2) + "\n"
    if out:
        Path(out).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)


def cmd_build_toy_model(args) -> int:
    if args.components < 1 or args.color_components < 1 or args.expression_components < 1:
        raise ConfigError("component counts must be >= 1")
    _log_effective(
        "build-toy-model",
        {
            "seed": args.seed,
            "vertices": args.vertices,
            "components": args.components,
            "color_components": args.color_components,
            "expression_components": args.expression_components,
            "out": args.out,
        },
    )
    model = build_toy_model(
        args.seed,
        args.vertices,
        args.components,
        args.color_components,
        args.expression_components,
    )
    save_model(model, args.out)
    logger.info("wrote %s (%d vertices, %d triangles)",
                args.out, model.vertex_count, model.topology.triangle_count)
    return EXIT_OK


def _resolve_model(spec: str):
    if spec.startswith("toy:"):
        return build_toy_model(int(spec.split(":", 1)[1]))
    return load_model(spec)


def cmd_render(args) -> int:
    config = {
        "model": args.model,
        "prior": args.prior,
        "background": args.background,
        "seed": args.seed,
        "yaw": args.yaw,
        "pitch": args.pitch,
        "roll": args.roll,
        "size": args.size,
        "fill": args.fill,
        "ambient": args.ambient,
        "mean_face": args.mean_face,
        "out": args.out,
    }
    _log_effective("render", config)
    model = _resolve_model(args.model)
    prior = default_prior() if args.prior == "builtin" else load_prior(args.prior)
    background = (
        BackgroundSource.procedural()
        if args.background == "procedural"
        else BackgroundSource.from_directory(args.background)
    )
    camera = default_camera(args.size, args.size)
    rng = derive_stream(args.seed, "render")

    if args.mean_face:
        params = FaceInstanceParams.zeros(model)
    else:
        params = FaceInstanceParams(
            sample_coeffs(rng, model.shape.component_count, 3.0),
            sample_coeffs(rng, model.color.component_count, 3.0),
            sample_coeffs(rng, model.expression.component_count, 3.0),
        )

    if args.yaw is None and args.pitch is None and args.roll is None:
        pose = ds.preset_config("syn-1m").pose_ranges
    else:
        pose = tuple(math.radians(v or 0.0) for v in (args.yaw, args.pitch, args.roll))

    lighting = ambient_unit() if args.ambient else prior
    result = render_face(
        model, params, pose, lighting, background, camera, rng, fill_fraction=args.fill
    )

    from PIL import Image

    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(result.image, mode="RGB").save(out_path, format="PNG")
    annotation = dict(result.annotation)
    annotation.update(
        {
            "identity_id": 0,
            "sample_id": 0,
            "image_path": out_path.name,
            "generator_version": ds.GENERATOR_VERSION,
        }
    )
    ann_path = out_path.with_suffix(".json")
    ann_path.write_text(json.dumps(annotation, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    logger.info("wrote %s and %s", out_path, ann_path)
    return EXIT_OK


def cmd_generate(args) -> int:
    if args.config:
        config = ds.GenerationConfig.from_json_file(args.config)
        if args.out:
            config = ds.GenerationConfig.from_dict({**config.to_dict(), "output_dir": args.out})
        if args.seed is not None:
            config = ds.GenerationConfig.from_dict({**config.to_dict(), "master_seed": args.seed})
    else:
        if not args.out:
            raise ConfigError("--out is required with --preset")
        config = ds.preset_config(
            args.preset,
            scale=args.scale,
            master_seed=args.seed if args.seed is not None else ds.DEFAULT_MASTER_SEED,
            output_dir=args.out,
        )
    _log_effective("generate", {**config.to_dict(), "workers": args.workers, "resume": args.resume})
    manifest = ds.generate_dataset(config, workers=args.workers, resume=args.resume)
    _write_json(
        {
            "manifest": str(Path(config.output_dir) / ds.MANIFEST_NAME),
            "images": manifest["totals"]["images"],
            "identities": manifest["totals"]["identities"],
        },
        None,
    )
    return EXIT_OK


def cmd_eval_verify(args) -> int:
    _log_effective("eval verify-dataset", {"manifest": args.manifest})
    report = ds.verify_dataset(args.manifest)
    _write_json(report.to_dict(), args.out)
    if not report.ok:
        logger.error(
            "verification failed: %d failures, %d missing, %d orphans",
            len(report.failures), len(report.missing), len(report.orphans),
        )
        return EXIT_DATA
    return EXIT_OK


def _load_eval_inputs(args):
    embeddings = load_embeddings(args.embeddings)
    templates = load_templates(args.templates) if args.templates else None
    pairs = load_pairs(args.pairs, embeddings=None if templates else embeddings)
    if templates:
        for pair in pairs.pairs:
            if pair.id_a not in templates or pair.id_b not in templates:
                missing = pair.id_a if pair.id_a not in templates else pair.id_b
                raise EvalFormatError(f"pair references unknown template {missing!r}")
    return embeddings, pairs, templates


def cmd_eval_roc(args) -> int:
    _log_effective(
        "eval roc",
        {"embeddings": args.embeddings, "pairs": args.pairs, "templates": args.templates,
         "beta": args.beta, "far": args.far},
    )
    embeddings, pairs, templates = _load_eval_inputs(args)
    scores = pair_scores(pairs, embeddings, templates, beta=args.beta)
    labels = np.array([p.same for p in pairs.pairs])
    if not labels.any() or labels.all():
        raise EvalFormatError("pairs file must contain both 'same' and 'diff' pairs")
    curve = compute_roc(scores[labels], scores[~labels])
    metrics = {
        "kind": "roc",
        "far_target": args.far,
        "tar_at_far": tar_at_far(curve, args.far),
        "positive_pairs": int(labels.sum()),
        "negative_pairs": int((~labels).sum()),
        "beta": args.beta,
        "points": len(curve.thresholds),
    }
    _write_json(metrics, args.out_json)
    if args.out_csv:
        Path(args.out_csv).write_text(roc_to_csv(curve), encoding="utf-8")
        logger.info("wrote ROC points to %s", args.out_csv)
    return EXIT_OK


def cmd_eval_accuracy(args) -> int:
    _log_effective(
        "eval accuracy",
        {"embeddings": args.embeddings, "pairs": args.pairs, "templates": args.templates,
         "beta": args.beta, "folds": args.folds},
    )
    embeddings, pairs, templates = _load_eval_inputs(args)
    if pairs.fold_count < 2:
        pairs = pairs.with_folds(args.folds)
    mean, per_fold = cross_validated_accuracy(pairs, embeddings, templates, beta=args.beta)
    metrics = {
        "kind": "accuracy",
        "mean_accuracy": mean,
        "fold_accuracies": per_fold,
        "folds": len(per_fold),
        "pairs": len(pairs),
        "beta": args.beta,
    }
    _write_json(metrics, args.out_json)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="synthface", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-toy-model", help="build the procedural model and save it")
    p.add_argument("--seed", type=int, default=ds.DEFAULT_MASTER_SEED)
    p.add_argument("--vertices", type=int, default=1200)
    p.add_argument("--components", type=int, default=12, help="shape components")
    p.add_argument("--color-components", type=int, default=8)
    p.add_argument("--expression-components", type=int, default=6)
    p.add_argument("--out", required=True, help="output .pcmf path")
    p.set_defaults(func=cmd_build_toy_model)

    p = sub.add_parser("render", help="render one annotated face image")
    p.add_argument("--model", default=ds.DEFAULT_TOY_SPEC, help=".pcmf path or toy:<seed>")
    p.add_argument("--prior", default="builtin", help="prior file or 'builtin'")
    p.add_argument("--background", default="procedural", help="texture dir or 'procedural'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--yaw", type=float, default=None, help="degrees; omit all three to sample")
    p.add_argument("--pitch", type=float, default=None)
    p.add_argument("--roll", type=float, default=None)
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--fill", type=float, default=0.65)
    p.add_argument("--ambient", action="store_true", help="unit ambient light instead of prior")
    p.add_argument("--mean-face", action="store_true", help="zero coefficients")
    p.add_argument("--out", required=True, help="output PNG path")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("generate", help="generate an annotated dataset")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="JSON config file")
    src.add_argument("--preset", choices=sorted(ds.PRESETS))
    p.add_argument("--scale", type=int, default=1, help="divide preset identity count")
    p.add_argument("--seed", type=int, default=None, help="master seed override")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--workers", "-j", type=int, default=_default_workers())
    p.add_argument("--resume", action="store_true", help="skip existing outputs")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eval", help="verification metrics and dataset checks")
    esub = p.add_subparsers(dest="eval_command", required=True)

    e = esub.add_parser("verify-dataset", help="re-check a generated dataset")
    e.add_argument("--manifest", required=True)
    e.add_argument("--out", default=None, help="write report JSON here instead of stdout")
    e.set_defaults(func=cmd_eval_verify)

    e = esub.add_parser("roc", help="ROC / TAR@FAR from embeddings and labeled pairs")
    e.add_argument("--embeddings", required=True)
    e.add_argument("--pairs", required=True)
    e.add_argument("--templates", default=None)
    e.add_argument("--beta", type=float, default=1.0)
    e.add_argument("--far", type=float, default=0.1)
    e.add_argument("--out-json", default=None)
    e.add_argument("--out-csv", default=None)
    e.set_defaults(func=cmd_eval_roc)

    e = esub.add_parser("accuracy", help="fold-held-out verification accuracy")
    e.add_argument("--embeddings", required=True)
    e.add_argument("--pairs", required=True)
    e.add_argument("--templates", default=None)
    e.add_argument("--beta", type=float, default=1.0)
    e.add_argument("--folds", type=int, default=10, help="used when pairs carry no folds")
    e.add_argument("--out-json", default=None)
    e.set_defaults(func=cmd_eval_accuracy)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        logger.error("%s", exc)
        return EXIT_USAGE
    except (ModelFormatError, PriorFormatError, EvalFormatError, DatasetError, GeometryError) as exc:
        logger.error("%s", exc)
        return EXIT_DATA
    except OSError as exc:
        logger.error("I/O failure: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
