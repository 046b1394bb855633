import numpy as np
import pytest
from PIL import Image

from synthface.background import BackgroundSource, _procedural_texture
from synthface.errors import ConfigError
from synthface.rng import derive_stream


def _write_texture(path, size=(200, 160), seed=0):
    data = np.random.default_rng(seed).integers(0, 256, (size[1], size[0], 3), dtype=np.uint8)
    Image.fromarray(data, "RGB").save(path)


def test_procedural_texture_keyed_deterministically():
    a = _procedural_texture(123, 64, 64)
    b = _procedural_texture(123, 64, 64)
    c = _procedural_texture(124, 64, 64)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert a.shape == (64, 64, 3)
    assert a.min() >= 0.0 and a.max() <= 1.0


def test_procedural_sample_reproducible():
    src = BackgroundSource.procedural()
    s1 = src.sample(derive_stream(5, "bg"), 32, 32)
    s2 = src.sample(derive_stream(5, "bg"), 32, 32)
    assert s1.background_id == s2.background_id
    assert np.array_equal(s1.pixels, s2.pixels)
    assert s1.crop_rect == (0, 0, 32, 32)


def test_directory_enumeration_is_lexicographic(tmp_path):
    for name in ("zebra.png", "alpha.png", "mid.jpg", "notes.txt"):
        if name.endswith(".txt"):
            (tmp_path / name).write_text("ignored")
        else:
            _write_texture(tmp_path / name)
    src = BackgroundSource.from_directory(tmp_path)
    assert src.files == ("alpha.png", "mid.jpg", "zebra.png")


def test_directory_sample_crops_at_least_frame(tmp_path):
    _write_texture(tmp_path / "t.png", size=(320, 260))
    src = BackgroundSource.from_directory(tmp_path)
    for k in range(5):
        s = src.sample(derive_stream(k, "crop"), 64, 48)
        x, y, w, h = s.crop_rect
        assert w >= 64 and h >= 48
        assert x >= 0 and y >= 0 and x + w <= 320 and y + h <= 260
        assert s.pixels.shape == (48, 64, 3)
        assert s.background_id == "file:t.png"


def test_small_texture_uses_full_image(tmp_path):
    _write_texture(tmp_path / "small.png", size=(40, 30))
    src = BackgroundSource.from_directory(tmp_path)
    s = src.sample(derive_stream(0, "crop"), 64, 64)
    assert s.crop_rect == (0, 0, 40, 30)
    assert s.pixels.shape == (64, 64, 3)


def test_unreadable_texture_skipped_with_fallback(tmp_path, caplog):
    (tmp_path / "aaa.png").write_bytes(b"not a png at all")
    _write_texture(tmp_path / "bbb.png")
    src = BackgroundSource.from_directory(tmp_path)
    # force the broken file to be picked first by scanning all start indices
    seen = set()
    for k in range(16):
        s = src.sample(derive_stream(k, "skip"), 16, 16)
        seen.add(s.background_id)
    assert seen == {"file:bbb.png"}


def test_all_unreadable_falls_back_to_procedural(tmp_path):
    (tmp_path / "x.png").write_bytes(b"junk")
    src = BackgroundSource.from_directory(tmp_path)
    s = src.sample(derive_stream(1, "fb"), 16, 16)
    assert s.background_id.startswith("procedural:")


def test_directory_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        BackgroundSource.from_directory(tmp_path / "missing")
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(ConfigError, match="no PNG/JPEG"):
        BackgroundSource.from_directory(empty)
