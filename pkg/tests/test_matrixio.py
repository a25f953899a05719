import numpy as np
import pytest

from partforge.errors import (
    BadMagicError,
    DanglingReferenceError,
    InconsistentDimensionError,
    InconsistentRegionCountError,
    IoFailureError,
    MissingFileError,
    NonFiniteValueError,
    ParseError,
    TruncatedPayloadError,
)
from partforge.matrixio import (
    HEADER_SIZE,
    MAGIC,
    RegionGeometry,
    load_geometry,
    load_manifest,
    load_matrix,
    save_geometry,
    save_matrix,
    write_manifest,
)


class TestMatrixFile:
    def test_round_trip_identity(self, tmp_path):
        path = tmp_path / "m.dmx"
        values = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]], dtype=np.float32)
        save_matrix(values, path)
        loaded = load_matrix(path)
        assert loaded.shape == (2, 3)
        np.testing.assert_array_equal(loaded, values)

    def test_single_value_file_size(self, tmp_path):
        # magic (4) + rows/cols (8) + one float32 payload value (4)
        path = tmp_path / "one.dmx"
        save_matrix(np.zeros((1, 1)), path)
        assert path.stat().st_size == HEADER_SIZE + 4 == 16

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.dmx"
        path.write_bytes(b"XXXX" + b"\x00" * 12)
        with pytest.raises(BadMagicError):
            load_matrix(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingFileError):
            load_matrix(tmp_path / "nope.dmx")

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "trunc.dmx"
        save_matrix(np.ones((2, 2)), path)
        data = path.read_bytes()
        path.write_bytes(data[:-4])
        with pytest.raises(TruncatedPayloadError):
            load_matrix(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        path = tmp_path / "extra.dmx"
        save_matrix(np.ones((2, 2)), path)
        path.write_bytes(path.read_bytes() + b"\x00\x00")
        with pytest.raises(TruncatedPayloadError):
            load_matrix(path)

    def test_non_finite_payload_names_offset(self, tmp_path):
        path = tmp_path / "nan.dmx"
        payload = np.array([[1.0, np.nan], [3.0, 4.0]], dtype="<f4")
        path.write_bytes(MAGIC + np.array([2, 2], dtype="<u4").tobytes() + payload.tobytes())
        with pytest.raises(NonFiniteValueError) as err:
            load_matrix(path)
        assert str(HEADER_SIZE + 4) in str(err.value)

    def test_save_rejects_non_finite(self, tmp_path):
        with pytest.raises(NonFiniteValueError):
            save_matrix(np.array([[np.inf]]), tmp_path / "inf.dmx")

    def test_save_to_unwritable_location(self, tmp_path):
        with pytest.raises(IoFailureError):
            save_matrix(np.ones((1, 1)), tmp_path / "no" / "such" / "dir.dmx")

    def test_round_trip_bytes_random_matrices(self, tmp_path):
        rng = np.random.default_rng(7)
        for case in range(50):
            rows = int(rng.integers(1, 12))
            cols = int(rng.integers(1, 12))
            values = rng.standard_normal((rows, cols)).astype(np.float32)
            path = tmp_path / f"m{case}.dmx"
            save_matrix(values, path)
            first = path.read_bytes()
            save_matrix(load_matrix(path), path)
            assert path.read_bytes() == first

    def test_large_round_trip_bitwise(self, tmp_path):
        rng = np.random.default_rng(11)
        values = rng.standard_normal((512, 1000)).astype(np.float32)
        path = tmp_path / "big.dmx"
        save_matrix(values, path)
        np.testing.assert_array_equal(load_matrix(path), values)

    def test_zero_dimension_header_rejected(self, tmp_path):
        path = tmp_path / "zero.dmx"
        path.write_bytes(MAGIC + np.array([0, 3], dtype="<u4").tobytes())
        with pytest.raises(TruncatedPayloadError):
            load_matrix(path)


class TestGeometry:
    def test_round_trip(self, tmp_path):
        geom = RegionGeometry(
            boxes=np.array([[0.0, 0.0, 10.0, 10.0], [5.0, 5.0, 20.0, 30.0]]),
            image_width=640, image_height=480,
        )
        path = tmp_path / "g.dmx"
        save_geometry(geom, path)
        loaded = load_geometry(path)
        assert loaded.image_width == 640
        assert loaded.image_height == 480
        np.testing.assert_array_equal(loaded.boxes, geom.boxes)

    def test_invalid_boxes_rejected(self):
        with pytest.raises(ParseError):
            RegionGeometry(boxes=np.array([[5.0, 0.0, 2.0, 10.0]]),
                           image_width=640, image_height=480)
        with pytest.raises(ParseError):
            RegionGeometry(boxes=np.array([[0.0, 0.0, 700.0, 10.0]]),
                           image_width=640, image_height=480)

    def test_centers(self):
        geom = RegionGeometry(boxes=np.array([[0.0, 0.0, 10.0, 20.0]]),
                              image_width=100, image_height=100)
        np.testing.assert_array_equal(geom.centers(), [[5.0, 10.0]])

    def test_wrong_column_count_rejected(self, tmp_path):
        path = tmp_path / "bad-geom.dmx"
        save_matrix(np.ones((3, 5)), path)
        with pytest.raises(ParseError):
            load_geometry(path)

    def test_size_row_only_rejected(self, tmp_path):
        path = tmp_path / "empty-geom.dmx"
        save_matrix(np.array([[64.0, 48.0, 0.0, 0.0]]), path)
        with pytest.raises(ParseError):
            load_geometry(path)


def _write_image_files(root, image_id, dim=4, n_regions=3, global_dim=None):
    rng = np.random.default_rng(abs(hash(image_id)) % (2 ** 31))
    save_matrix(rng.standard_normal((dim, n_regions)).astype(np.float32),
                root / f"{image_id}.regions.dmx")
    save_geometry(
        RegionGeometry(
            boxes=np.tile([0.0, 0.0, 10.0, 10.0], (n_regions, 1)),
            image_width=64, image_height=48,
        ),
        root / f"{image_id}.geom.dmx",
    )
    save_matrix(rng.standard_normal((global_dim or dim, 1)).astype(np.float32),
                root / f"{image_id}.global.dmx")


def _entry(image_id, split="train", label="a"):
    return {
        "id": image_id,
        "regions": f"{image_id}.regions.dmx",
        "geometry": f"{image_id}.geom.dmx",
        "global": f"{image_id}.global.dmx",
        "label": label,
        "split": split,
    }


class TestManifest:
    def test_valid_manifest(self, tmp_path):
        for image_id in ("a", "b"):
            _write_image_files(tmp_path, image_id, dim=4, n_regions=3)
        write_manifest({"images": [_entry("a"), _entry("b", split="test")]},
                       tmp_path / "manifest.json")
        manifest = load_manifest(tmp_path / "manifest.json")
        assert manifest.region_dim == 4
        assert manifest.regions_per_image == 3
        assert manifest.ids("train") == ["a"]
        assert manifest.load_regions("a").shape == (4, 3)
        assert manifest.load_global("b").shape == (4,)

    def test_inconsistent_region_count(self, tmp_path):
        _write_image_files(tmp_path, "a", n_regions=3)
        _write_image_files(tmp_path, "b", n_regions=4)
        write_manifest({"images": [_entry("a"), _entry("b")]}, tmp_path / "manifest.json")
        with pytest.raises(InconsistentRegionCountError):
            load_manifest(tmp_path / "manifest.json")

    def test_inconsistent_dimension(self, tmp_path):
        _write_image_files(tmp_path, "a", dim=4)
        _write_image_files(tmp_path, "b", dim=5)
        write_manifest({"images": [_entry("a"), _entry("b")]}, tmp_path / "manifest.json")
        with pytest.raises(InconsistentDimensionError):
            load_manifest(tmp_path / "manifest.json")

    def test_dangling_reference(self, tmp_path):
        _write_image_files(tmp_path, "a")
        write_manifest({"images": [_entry("a"), _entry("ghost")]},
                       tmp_path / "manifest.json")
        with pytest.raises(DanglingReferenceError):
            load_manifest(tmp_path / "manifest.json")

    def test_geometry_count_mismatch(self, tmp_path):
        _write_image_files(tmp_path, "a", n_regions=3)
        save_geometry(
            RegionGeometry(boxes=np.tile([0.0, 0.0, 5.0, 5.0], (2, 1)),
                           image_width=64, image_height=48),
            tmp_path / "a.geom.dmx",
        )
        write_manifest({"images": [_entry("a")]}, tmp_path / "manifest.json")
        with pytest.raises(InconsistentRegionCountError):
            load_manifest(tmp_path / "manifest.json")

    def test_duplicate_ids(self, tmp_path):
        _write_image_files(tmp_path, "a")
        write_manifest({"images": [_entry("a"), _entry("a")]}, tmp_path / "manifest.json")
        with pytest.raises(ParseError):
            load_manifest(tmp_path / "manifest.json")

    def test_bad_split(self, tmp_path):
        _write_image_files(tmp_path, "a")
        write_manifest({"images": [_entry("a", split="validation")]},
                       tmp_path / "manifest.json")
        with pytest.raises(ParseError):
            load_manifest(tmp_path / "manifest.json")

    def test_junk_validation(self, tmp_path):
        for image_id in ("q", "d"):
            _write_image_files(tmp_path, image_id)
        doc = {"images": [_entry("q", split="query"), _entry("d", split="database")],
               "junk": {"q": ["d"]}}
        write_manifest(doc, tmp_path / "manifest.json")
        manifest = load_manifest(tmp_path / "manifest.json")
        assert manifest.junk_for("q") == frozenset({"d"})

        doc["junk"] = {"q": ["ghost"]}
        write_manifest(doc, tmp_path / "manifest.json")
        with pytest.raises(DanglingReferenceError):
            load_manifest(tmp_path / "manifest.json")

    def test_not_json(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text("not json at all {", encoding="utf-8")
        with pytest.raises(ParseError):
            load_manifest(path)
