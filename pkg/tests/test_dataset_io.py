import json

import numpy as np
import pytest
from PIL import Image

from rpcp.dataset_io import (
    AugConfig,
    ClassScheme,
    PairDescriptor,
    load_pair,
    parse_config,
    scan_dataset,
    write_pair,
)
from rpcp.errors import ConfigError, DataMismatchError, DatasetIOError


def _png(path, array):
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(array, dtype=np.uint8)).save(path)


def _dirs(tmp_path, images, masks):
    for s in images:
        _png(tmp_path / "img" / f"{s}.png", np.zeros((2, 2, 3)))
    for s in masks:
        _png(tmp_path / "msk" / f"{s}.png", np.zeros((2, 2)))
    (tmp_path / "img").mkdir(exist_ok=True)
    (tmp_path / "msk").mkdir(exist_ok=True)
    return tmp_path / "img", tmp_path / "msk"


class TestScan:
    def test_pairs_sorted_by_id(self, tmp_path):
        pairs = scan_dataset(*_dirs(tmp_path, ["b", "a"], ["a", "b"]))
        assert [p.id for p in pairs] == ["a", "b"]
        assert pairs[0].image_path.name == "a.png"

    def test_missing_mask(self, tmp_path):
        with pytest.raises(DataMismatchError, match="a \\(no mask\\)"):
            scan_dataset(*_dirs(tmp_path, ["a"], []))

    def test_orphans_on_both_sides(self, tmp_path):
        with pytest.raises(DataMismatchError) as ei:
            scan_dataset(*_dirs(tmp_path, ["a", "c"], ["a", "b"]))
        assert ei.value.no_mask == ["c"]
        assert ei.value.no_image == ["b"]

    def test_missing_directory(self, tmp_path):
        with pytest.raises(DatasetIOError):
            scan_dataset(tmp_path / "nope", tmp_path)

    def test_non_png_ignored(self, tmp_path):
        img, msk = _dirs(tmp_path, ["a"], ["a"])
        (img / "notes.txt").write_text("x")
        assert [p.id for p in scan_dataset(img, msk)] == ["a"]


class TestLoad:
    def test_full_bytes_map_to_one(self, tmp_path):
        _png(tmp_path / "i.png", np.full((2, 2, 3), 255))
        _png(tmp_path / "m.png", np.zeros((2, 2)))
        image, label = load_pair(PairDescriptor(tmp_path / "i.png", tmp_path / "m.png", "x"), ClassScheme())
        assert image.dtype == np.float64
        assert np.all(image == 1.0)
        assert label.shape == (2, 2)

    def test_out_of_scheme_value(self, tmp_path):
        m = np.zeros((3, 3))
        m[1, 2] = 7
        _png(tmp_path / "i.png", np.zeros((3, 3, 3)))
        _png(tmp_path / "m.png", m)
        scheme = ClassScheme(4, ("a", "b", "c", "d"), 2, 0)
        with pytest.raises(DataMismatchError, match=r"value 7 at pixel 5"):
            load_pair(PairDescriptor(tmp_path / "i.png", tmp_path / "m.png", "x"), scheme)

    def test_dimension_mismatch(self, tmp_path):
        _png(tmp_path / "i.png", np.zeros((1024, 1024, 3)))
        _png(tmp_path / "m.png", np.zeros((512, 512)))
        with pytest.raises(DataMismatchError, match="1024x1024.*512x512"):
            load_pair(PairDescriptor(tmp_path / "i.png", tmp_path / "m.png", "x"), ClassScheme())

    def test_rejects_rgb_mask(self, tmp_path):
        _png(tmp_path / "i.png", np.zeros((2, 2, 3)))
        _png(tmp_path / "m.png", np.zeros((2, 2, 3)))
        with pytest.raises(DataMismatchError, match="single-channel"):
            load_pair(PairDescriptor(tmp_path / "i.png", tmp_path / "m.png", "x"), ClassScheme())

    def test_undecodable(self, tmp_path):
        (tmp_path / "i.png").write_bytes(b"not a png")
        _png(tmp_path / "m.png", np.zeros((2, 2)))
        with pytest.raises(DatasetIOError, match="i.png"):
            load_pair(PairDescriptor(tmp_path / "i.png", tmp_path / "m.png", "x"), ClassScheme())


class TestWrite:
    def test_round_trip(self, tmp_path, rng):
        image = rng.uniform(size=(9, 7, 3))
        label = rng.integers(0, 3, size=(9, 7)).astype(np.uint8)
        ip, mp = write_pair(image, label, (tmp_path / "i", tmp_path / "m"), "p")
        back, back_label = load_pair(PairDescriptor(ip, mp, "p"), ClassScheme())
        np.testing.assert_array_equal(back_label, label)
        assert np.abs(back - image).max() <= 1 / (2 * 255) + 1e-12

    def test_half_intensity(self, tmp_path):
        image = np.full((1, 1, 3), 0.5)
        ip, mp = write_pair(image, np.zeros((1, 1), np.uint8), (tmp_path, tmp_path / "m"), "p")
        assert np.asarray(Image.open(ip))[0, 0, 0] == 128
        back, _ = load_pair(PairDescriptor(ip, mp, "p"), ClassScheme())
        assert back[0, 0, 0] == pytest.approx(0.50196, abs=1e-5)

    def test_empty_id(self, tmp_path):
        with pytest.raises(ValueError):
            write_pair(np.zeros((1, 1, 3)), np.zeros((1, 1), np.uint8), (tmp_path, tmp_path), "")


class TestConfig:
    def test_empty_document_defaults(self):
        cfg = parse_config("")
        assert cfg.patches_per_image == 1
        assert (cfg.rp.h, cfg.rp.w) == (3, 3)
        assert cfg.rp.sigma == 0.20
        assert cfg.rp.alpha == 0.8
        assert cfg.scale_range == (0.8, 1.2)
        assert cfg.rotation_range == (0.0, 360.0)
        assert (cfg.min_patch_area, cfg.max_attempts, cfg.margin) == (16, 100, 0)
        assert parse_config("{}") == cfg

    def test_override_keeps_rest(self):
        cfg = parse_config('{"patches_per_image": 4}')
        assert cfg.patches_per_image == 4
        assert cfg.rp == AugConfig().rp

    @pytest.mark.parametrize("doc, key", [
        ({"alpha": 1.5}, "alpha"),
        ({"sigma": -0.1}, "sigma"),
        ({"scale_range": [1.2, 0.8]}, "scale_range"),
        ({"rotation_range": [0, 400]}, "rotation_range"),
        ({"filter_size": 4}, "filter_size"),
        ({"max_attempts": 0}, "max_attempts"),
        ({"margin": -1}, "margin"),
        ({"patches_per_image": 1.5}, "patches_per_image"),
        ({"sigmaa": 0.2}, "sigmaa"),
        ({"classes": {"count": 3, "colour": 1}}, "classes.colour"),
        ({"classes": {"source_class": 0, "valid_class": 0}}, "classes"),
        ({"connectivity": 6}, "connectivity"),
    ])
    def test_rejects_and_names_key(self, doc, key):
        with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
            parse_config(json.dumps(doc))

    def test_not_json(self):
        with pytest.raises(ConfigError):
            parse_config("{nope")

    def test_to_dict_round_trips(self):
        doc = {"seed": 7, "patches_per_image": 2, "filter_size": [5, 3], "sigma": 0.1,
               "classes": {"count": 4, "names": ["bg", "h", "l", "d"], "source_class": 3,
                           "valid_class": 1, "excluded": [0]}}
        cfg = parse_config(json.dumps(doc))
        assert parse_config(json.dumps(cfg.to_dict())) == cfg
        assert cfg.class_scheme.included_classes == [1, 2, 3]
