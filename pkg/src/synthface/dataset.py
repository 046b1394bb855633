"""Dataset generation: identity/sample loops, parallel scheduling, manifests.

Determinism contract: every parameter of image (j, i) is drawn from streams
derived only from the master seed and the indices — identity appearance
from ``derive(seed, "id", j)``, per-image nuisances from
``derive(seed, "sample", j, i)`` in the fixed order (expression, pose,
illumination, background).  Output bytes are therefore identical for a
given config regardless of worker count, scheduling, or resumption.

Layout: ``<out>/id_<j>/img_<i>.png`` + ``.json`` per image, zero-padded,
with ``manifest.json`` written last (config copy, per-record checksums,
totals).  All writes are atomic (temp file + rename).
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import math
import multiprocessing
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from threadpoolctl import threadpool_limits

from .background import BackgroundSource
from .camera import PinholeCamera, PoseRanges, default_camera
from .errors import ConfigError, DatasetError
from .lighting import IlluminationPrior, default_prior, load_prior
from .morphable import (
    MIN_TRUNCATION,
    FaceInstanceParams,
    MorphableFaceModel,
    load_model,
    sample_coeffs,
)
from .pipeline import render_face
from .rng import derive_stream
from .toymodel import build_toy_model

logger = logging.getLogger(__name__)

GENERATOR_VERSION = "synthface-0.1.0"
MANIFEST_NAME = "manifest.json"
DEFAULT_MASTER_SEED = 20260809
DEFAULT_TOY_SPEC = f"toy:{DEFAULT_MASTER_SEED}"

# Dataset recipes shipped as presets; `scale` divides the identity count
# (and with it the total image count) for desk-scale runs.
PRESETS: dict[str, dict] = {
    "syn-1m": {
        "identity_count": 10_000,
        "samples_per_identity": 100,
        "yaw_deg": (-90.0, 90.0),
        "pitch_deg": (-30.0, 30.0),
        "roll_deg": (-15.0, 15.0),
    },
    "syn-front": {
        "identity_count": 10_000,
        "samples_per_identity": 100,
        "yaw_deg": (-35.0, 35.0),
        "pitch_deg": (-30.0, 30.0),
        "roll_deg": (-15.0, 15.0),
    },
    "syn-2m": {
        "identity_count": 20_000,
        "samples_per_identity": 100,
        "yaw_deg": (-90.0, 90.0),
        "pitch_deg": (-30.0, 30.0),
        "roll_deg": (-15.0, 15.0),
    },
}


@dataclass(frozen=True)
class GenerationConfig:
    identity_count: int
    samples_per_identity: int
    pose_ranges: PoseRanges
    master_seed: int = DEFAULT_MASTER_SEED
    truncation: float = 3.0
    image_size: tuple[int, int] = (128, 128)
    model: str = DEFAULT_TOY_SPEC
    prior: str = "builtin"
    background: str = "procedural"
    output_dir: str = "dataset"

    def __post_init__(self):
        if self.identity_count < 1 or self.samples_per_identity < 1:
            raise ConfigError("identity_count and samples_per_identity must be >= 1")
        if self.truncation < MIN_TRUNCATION:
            raise ConfigError(f"truncation must be >= {MIN_TRUNCATION}")
        size = self.image_size
        if isinstance(size, int):
            size = (size, size)
        size = (int(size[0]), int(size[1]))
        if min(size) < 8:
            raise ConfigError("image_size must be at least 8 pixels")
        object.__setattr__(self, "image_size", size)

    @property
    def total_images(self) -> int:
        return self.identity_count * self.samples_per_identity

    def to_dict(self) -> dict:
        return {
            "identity_count": self.identity_count,
            "samples_per_identity": self.samples_per_identity,
            "pose_ranges_deg": self.pose_ranges.to_degrees(),
            "truncation": self.truncation,
            "image_size": list(self.image_size),
            "model": self.model,
            "prior": self.prior,
            "background": self.background,
            "master_seed": self.master_seed,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GenerationConfig":
        try:
            ranges_deg = data["pose_ranges_deg"]
            pose_ranges = PoseRanges.from_degrees(
                ranges_deg["yaw"], ranges_deg["pitch"], ranges_deg["roll"]
            )
            return cls(
                identity_count=int(data["identity_count"]),
                samples_per_identity=int(data["samples_per_identity"]),
                pose_ranges=pose_ranges,
                master_seed=int(data.get("master_seed", DEFAULT_MASTER_SEED)),
                truncation=float(data.get("truncation", 3.0)),
                image_size=data.get("image_size", 128),
                model=str(data.get("model", DEFAULT_TOY_SPEC)),
                prior=str(data.get("prior", "builtin")),
                background=str(data.get("background", "procedural")),
                output_dir=str(data.get("output_dir", "dataset")),
            )
        except KeyError as exc:
            raise ConfigError(f"config missing required key: {exc}") from exc

    @classmethod
    def from_json_file(cls, path) -> "GenerationConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_dict(data)


def preset_config(
    name: str,
    scale: int = 1,
    master_seed: int = DEFAULT_MASTER_SEED,
    output_dir: str = "dataset",
    **overrides,
) -> GenerationConfig:
    """Instantiate a shipped recipe, dividing the identity count by ``scale``."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    if scale < 1:
        raise ConfigError("scale must be >= 1")
    recipe = PRESETS[name]
    kwargs = dict(
        identity_count=max(1, recipe["identity_count"] // scale),
        samples_per_identity=recipe["samples_per_identity"],
        pose_ranges=PoseRanges.from_degrees(
            recipe["yaw_deg"], recipe["pitch_deg"], recipe["roll_deg"]
        ),
        master_seed=master_seed,
        output_dir=output_dir,
    )
    kwargs.update(overrides)
    return GenerationConfig(**kwargs)


@dataclass
class RenderContext:
    """Immutable per-worker assets resolved from a config."""

    config: GenerationConfig
    model: MorphableFaceModel
    prior: IlluminationPrior
    background: BackgroundSource
    camera: PinholeCamera

    @classmethod
    def from_config(cls, config: GenerationConfig) -> "RenderContext":
        model_spec = config.model
        if model_spec.startswith("toy:"):
            try:
                seed = int(model_spec.split(":", 1)[1])
            except ValueError as exc:
                raise ConfigError(f"bad toy model spec {model_spec!r}") from exc
            model = build_toy_model(seed)
        else:
            model = load_model(model_spec)
        prior = default_prior() if config.prior == "builtin" else load_prior(config.prior)
        background = (
            BackgroundSource.procedural()
            if config.background == "procedural"
            else BackgroundSource.from_directory(config.background)
        )
        camera = default_camera(*config.image_size)
        return cls(config, model, prior, background, camera)


def _id_dir_name(config: GenerationConfig, j: int) -> str:
    width = max(5, len(str(config.identity_count - 1)))
    return f"id_{j:0{width}d}"


def _img_stem(config: GenerationConfig, i: int) -> str:
    width = max(4, len(str(config.samples_per_identity - 1)))
    return f"img_{i:0{width}d}"


def identity_params(ctx: RenderContext, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Identity appearance coefficients, drawn once per identity stream."""
    stream = derive_stream(ctx.config.master_seed, "id", j)
    shape = sample_coeffs(stream, ctx.model.shape.component_count, ctx.config.truncation)
    color = sample_coeffs(stream, ctx.model.color.component_count, ctx.config.truncation)
    return shape, color


def _atomic_write(path: Path, payload: bytes) -> None:
    tmp = path.with_name(f"{path.name}.tmp{os.getpid()}")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def _encode_png(image: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(image, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def render_one(ctx: RenderContext, j: int, i: int, resume: bool = False) -> dict:
    """Render, annotate and write image (j, i); returns its manifest record."""
    config = ctx.config
    out_root = Path(config.output_dir)
    id_dir = out_root / _id_dir_name(config, j)
    stem = _img_stem(config, i)
    img_path = id_dir / f"{stem}.png"
    ann_path = id_dir / f"{stem}.json"
    rel_img = img_path.relative_to(out_root).as_posix()
    rel_ann = ann_path.relative_to(out_root).as_posix()

    if resume and img_path.exists() and ann_path.exists():
        png_bytes = img_path.read_bytes()
        ann_bytes = ann_path.read_bytes()
    else:
        shape, color = identity_params(ctx, j)
        stream = derive_stream(config.master_seed, "sample", j, i)
        expression = sample_coeffs(
            stream, ctx.model.expression.component_count, config.truncation
        )
        params = FaceInstanceParams(shape, color, expression)
        result = render_face(
            ctx.model,
            params,
            ctx.config.pose_ranges,
            ctx.prior,
            ctx.background,
            ctx.camera,
            rng=stream,
        )
        annotation = dict(result.annotation)
        annotation.update(
            {
                "identity_id": j,
                "sample_id": i,
                "image_path": rel_img,
                "generator_version": GENERATOR_VERSION,
            }
        )
        png_bytes = _encode_png(result.image)
        ann_bytes = (json.dumps(annotation, sort_keys=True, indent=2) + "\n").encode()
        id_dir.mkdir(parents=True, exist_ok=True)
        _atomic_write(img_path, png_bytes)
        _atomic_write(ann_path, ann_bytes)

    return {
        "identity_id": j,
        "sample_id": i,
        "image_path": rel_img,
        "annotation_path": rel_ann,
        "image_sha256": hashlib.sha256(png_bytes).hexdigest(),
        "annotation_sha256": hashlib.sha256(ann_bytes).hexdigest(),
    }


_WORKER: RenderContext | None = None
_WORKER_RESUME = False


def _init_worker(config_dict: dict, resume: bool) -> None:
    global _WORKER, _WORKER_RESUME
    # Image-level process parallelism only: BLAS thread pools inside a
    # worker would oversubscribe the cores and spin between the small
    # per-image kernels.
    threadpool_limits(limits=1, user_api="blas")
    _WORKER = RenderContext.from_config(GenerationConfig.from_dict(config_dict))
    _WORKER_RESUME = resume


def _run_task(task: tuple[int, int]) -> dict:
    assert _WORKER is not None
    return render_one(_WORKER, task[0], task[1], resume=_WORKER_RESUME)


def generate_dataset(
    config: GenerationConfig, workers: int = 1, resume: bool = False
) -> dict:
    """Generate the full dataset and write its manifest (returned as a dict)."""
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    out_root = Path(config.output_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    tasks = [
        (j, i)
        for j in range(config.identity_count)
        for i in range(config.samples_per_identity)
    ]
    logger.info(
        "generating %d images (%d identities x %d samples) with %d worker(s)",
        len(tasks),
        config.identity_count,
        config.samples_per_identity,
        workers,
    )

    if workers == 1:
        with threadpool_limits(limits=1, user_api="blas"):
            ctx = RenderContext.from_config(config)
            records = [render_one(ctx, j, i, resume=resume) for j, i in tasks]
    else:
        methods = multiprocessing.get_all_start_methods()
        mp = multiprocessing.get_context("fork" if "fork" in methods else "spawn")
        chunksize = max(1, len(tasks) // (workers * 8))
        with mp.Pool(
            processes=workers, initializer=_init_worker, initargs=(config.to_dict(), resume)
        ) as pool:
            records = list(pool.imap_unordered(_run_task, tasks, chunksize=chunksize))

    records.sort(key=lambda r: (r["identity_id"], r["sample_id"]))
    # The manifest's config copy is self-describing: the dataset root is
    # wherever the manifest sits, so identical configs written to different
    # directories produce byte-identical manifests.
    config_copy = config.to_dict()
    config_copy["output_dir"] = "."
    manifest = {
        "generator_version": GENERATOR_VERSION,
        "config": config_copy,
        "records": records,
        "totals": {
            "identities": config.identity_count,
            "samples_per_identity": config.samples_per_identity,
            "images": len(records),
        },
    }
    payload = (json.dumps(manifest, sort_keys=True, indent=2) + "\n").encode()
    _atomic_write(out_root / MANIFEST_NAME, payload)
    logger.info("wrote %s", out_root / MANIFEST_NAME)
    return manifest


@dataclass
class DatasetReport:
    """Per-record verification outcome for a generated dataset."""

    total: int = 0
    passed: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)
    missing: list[str] = field(default_factory=list)
    orphans: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures and not self.missing and not self.orphans

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "passed": self.passed,
            "ok": self.ok,
            "failures": [{"path": p, "reason": r} for p, r in self.failures],
            "missing": list(self.missing),
            "orphans": list(self.orphans),
        }


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def verify_dataset(manifest_path) -> DatasetReport:
    """Re-check checksums, annotation ranges and identity constancy."""
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DatasetError(f"cannot read manifest {manifest_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{manifest_path}: invalid JSON: {exc}") from exc

    root = manifest_path.parent
    config = GenerationConfig.from_dict(manifest["config"])
    records = manifest["records"]
    report = DatasetReport(total=len(records))

    if len(records) != config.total_images:
        report.failures.append(
            (MANIFEST_NAME, f"record count {len(records)} != expected {config.total_images}")
        )

    identity_coeffs: dict[int, tuple] = {}
    referenced: set[str] = {MANIFEST_NAME}
    for record in records:
        rel_img, rel_ann = record["image_path"], record["annotation_path"]
        referenced.update((rel_img, rel_ann))
        img_path, ann_path = root / rel_img, root / rel_ann
        problems = []
        if not img_path.exists():
            report.missing.append(rel_img)
            continue
        if not ann_path.exists():
            report.missing.append(rel_ann)
            continue
        if _sha256_file(img_path) != record["image_sha256"]:
            problems.append("image checksum mismatch")
        if _sha256_file(ann_path) != record["annotation_sha256"]:
            problems.append("annotation checksum mismatch")
        try:
            ann = json.loads(ann_path.read_text(encoding="utf-8"))
            problems.extend(_check_annotation(ann, record, config))
            key = int(record["identity_id"])
            coeffs = (tuple(ann["shape_coeffs"]), tuple(ann["color_coeffs"]))
            if key in identity_coeffs:
                if identity_coeffs[key] != coeffs:
                    problems.append("identity coefficients differ within identity")
            else:
                identity_coeffs[key] = coeffs
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            problems.append(f"annotation unreadable: {exc}")
        if problems:
            report.failures.append((rel_img, "; ".join(problems)))
        else:
            report.passed += 1

    for path in sorted(root.rglob("*")):
        if path.is_file():
            rel = path.relative_to(root).as_posix()
            if rel not in referenced:
                report.orphans.append(rel)
    return report


def _check_annotation(ann: dict, record: dict, config: GenerationConfig) -> list[str]:
    problems = []
    if ann.get("identity_id") != record["identity_id"]:
        problems.append("identity_id mismatch")
    if ann.get("sample_id") != record["sample_id"]:
        problems.append("sample_id mismatch")
    tol = 1e-12
    if not config.pose_ranges.contains(ann["yaw"], ann["pitch"], ann["roll"], tol=tol):
        problems.append(
            f"pose ({ann['yaw']:.6f}, {ann['pitch']:.6f}, {ann['roll']:.6f}) "
            "outside configured ranges"
        )
    for key in ("shape_coeffs", "color_coeffs", "expression_coeffs"):
        values = ann[key]
        if any(abs(v) > config.truncation + tol for v in values):
            problems.append(f"{key} exceeds truncation bound {config.truncation}")
    if len(ann["lighting"]) != 27 or not all(math.isfinite(v) for v in ann["lighting"]):
        problems.append("lighting must be 27 finite values")
    return problems
