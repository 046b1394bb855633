import json
import math
from pathlib import Path

import numpy as np
import pytest

from synthface.camera import PoseRanges
from synthface.dataset import (
    DEFAULT_MASTER_SEED,
    GenerationConfig,
    MANIFEST_NAME,
    PRESETS,
    generate_dataset,
    preset_config,
    verify_dataset,
)
from synthface.errors import ConfigError


def tiny_config(out: Path, identities=2, samples=3, **kw) -> GenerationConfig:
    return GenerationConfig(
        identity_count=identities,
        samples_per_identity=samples,
        pose_ranges=PoseRanges.from_degrees((-90, 90), (-30, 30), (-15, 15)),
        image_size=64,
        output_dir=str(out),
        **kw,
    )


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds") / "run"
    config = tiny_config(out)
    manifest = generate_dataset(config, workers=1)
    return out, config, manifest


def test_structure_and_counts(tiny_run):
    out, config, manifest = tiny_run
    assert manifest["totals"]["images"] == 6
    assert len(manifest["records"]) == 6
    pngs = sorted(p.relative_to(out).as_posix() for p in out.rglob("*.png"))
    assert pngs == [
        "id_00000/img_0000.png", "id_00000/img_0001.png", "id_00000/img_0002.png",
        "id_00001/img_0000.png", "id_00001/img_0001.png", "id_00001/img_0002.png",
    ]
    assert len(list(out.rglob("*.json"))) == 7  # 6 annotations + manifest


def test_identity_coefficients_constant_within_identity(tiny_run):
    out, _, manifest = tiny_run
    per_identity = {}
    for record in manifest["records"]:
        ann = json.loads((out / record["annotation_path"]).read_text())
        key = record["identity_id"]
        coeffs = (tuple(ann["shape_coeffs"]), tuple(ann["color_coeffs"]))
        per_identity.setdefault(key, set()).add(coeffs)
    assert all(len(v) == 1 for v in per_identity.values())
    assert per_identity[0] != per_identity[1]


def test_annotations_record_radians_and_rotation(tiny_run):
    out, config, manifest = tiny_run
    ann = json.loads((out / manifest["records"][0]["annotation_path"]).read_text())
    assert config.pose_ranges.contains(ann["yaw"], ann["pitch"], ann["roll"])
    rot = np.asarray(ann["rotation"])
    assert np.allclose(rot.T @ rot, np.eye(3), atol=1e-12)
    assert ann["generator_version"].startswith("synthface-")


def test_same_config_reruns_byte_identical(tmp_path):
    out = tmp_path / "rerun"
    config = tiny_config(out)
    generate_dataset(config, workers=1)
    snapshot = {
        p.relative_to(out).as_posix(): p.read_bytes() for p in out.rglob("*") if p.is_file()
    }
    for p in list(out.rglob("*")):
        if p.is_file():
            p.unlink()
    generate_dataset(tiny_config(out), workers=1)
    again = {
        p.relative_to(out).as_posix(): p.read_bytes() for p in out.rglob("*") if p.is_file()
    }
    assert snapshot == again


def test_worker_count_does_not_change_bytes(tmp_path):
    cfg1 = tiny_config(tmp_path / "w1", identities=3, samples=4)
    cfg2 = tiny_config(tmp_path / "w2", identities=3, samples=4)
    generate_dataset(cfg1, workers=1)
    generate_dataset(cfg2, workers=2)
    m1 = (tmp_path / "w1" / MANIFEST_NAME).read_bytes()
    m2 = (tmp_path / "w2" / MANIFEST_NAME).read_bytes()
    assert m1 == m2  # config copy is root-relative, so fully comparable
    for rel in [r["image_path"] for r in json.loads(m1)["records"]]:
        assert (tmp_path / "w1" / rel).read_bytes() == (tmp_path / "w2" / rel).read_bytes()


def test_syn_front_scaled_run_respects_yaw_limit(tmp_path):
    config = preset_config(
        "syn-front",
        scale=1000,
        output_dir=str(tmp_path / "front"),
        identity_count=5,
        samples_per_identity=10,
        image_size=(64, 64),
    )
    manifest = generate_dataset(config, workers=2)
    limit = math.radians(35.0)
    for record in manifest["records"]:
        ann = json.loads((tmp_path / "front" / record["annotation_path"]).read_text())
        assert -limit <= ann["yaw"] <= limit


def test_verify_passes_untouched_dataset(tiny_run):
    out, _, _ = tiny_run
    report = verify_dataset(out / MANIFEST_NAME)
    assert report.ok
    assert report.passed == report.total == 6
    assert report.orphans == [] and report.missing == []


def test_verify_flags_corruption_missing_orphans_and_ranges(tmp_path):
    out = tmp_path / "corrupt"
    manifest = generate_dataset(tiny_config(out), workers=1)
    records = manifest["records"]

    # flip one byte in one image
    img0 = out / records[0]["image_path"]
    blob = bytearray(img0.read_bytes())
    blob[-1] ^= 0xFF
    img0.write_bytes(bytes(blob))

    # push one annotation's yaw outside the configured range
    ann1_path = out / records[1]["annotation_path"]
    ann1 = json.loads(ann1_path.read_text())
    ann1["yaw"] = math.radians(120.0)
    ann1_path.write_text(json.dumps(ann1, sort_keys=True, indent=2) + "\n")

    # remove one image, add one orphan
    (out / records[2]["image_path"]).unlink()
    (out / "stray.txt").write_text("orphan")

    report = verify_dataset(out / MANIFEST_NAME)
    assert not report.ok
    failed = dict(report.failures)
    assert "image checksum mismatch" in failed[records[0]["image_path"]]
    assert "outside configured ranges" in failed[records[1]["image_path"]]
    # editing the annotation also breaks its checksum
    assert "annotation checksum mismatch" in failed[records[1]["image_path"]]
    assert report.missing == [records[2]["image_path"]]
    assert report.orphans == ["stray.txt"]
    assert report.passed == 3


def test_resume_regenerates_only_missing(tmp_path):
    out = tmp_path / "resume"
    config = tiny_config(out)
    manifest = generate_dataset(config, workers=1)
    target = manifest["records"][4]
    original = (out / target["image_path"]).read_bytes()
    mtimes = {
        p.as_posix(): p.stat().st_mtime_ns for p in out.rglob("*.png")
    }
    (out / target["image_path"]).unlink()

    manifest2 = generate_dataset(tiny_config(out), workers=1, resume=True)
    assert manifest2 == manifest
    assert (out / target["image_path"]).read_bytes() == original
    for p in out.rglob("*.png"):
        if p.as_posix() != (out / target["image_path"]).as_posix():
            assert p.stat().st_mtime_ns == mtimes[p.as_posix()]


def test_preset_recipes():
    assert PRESETS["syn-1m"]["identity_count"] == 10_000
    assert PRESETS["syn-1m"]["samples_per_identity"] == 100
    assert PRESETS["syn-2m"]["identity_count"] == 20_000
    assert PRESETS["syn-front"]["yaw_deg"] == (-35.0, 35.0)
    cfg = preset_config("syn-1m", scale=1000)
    assert cfg.identity_count == 10 and cfg.samples_per_identity == 100
    assert cfg.master_seed == DEFAULT_MASTER_SEED
    with pytest.raises(ConfigError):
        preset_config("nope")
    with pytest.raises(ConfigError):
        preset_config("syn-1m", scale=0)


def test_config_roundtrip_and_validation(tmp_path):
    config = tiny_config(tmp_path / "x", truncation=2.5)
    again = GenerationConfig.from_dict(config.to_dict())
    assert again.to_dict() == config.to_dict()
    with pytest.raises(ConfigError):
        tiny_config(tmp_path / "y", identities=0)
    with pytest.raises(ConfigError):
        tiny_config(tmp_path / "z", truncation=0.1)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(config.to_dict()))
    assert GenerationConfig.from_json_file(path).to_dict() == config.to_dict()
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        GenerationConfig.from_json_file(bad)
