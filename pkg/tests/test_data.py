import json

import numpy as np
import pytest
from PIL import Image

from gemix.data import (
    DatasetLayoutError,
    ImageDecodeError,
    LabeledSample,
    balanced_subsample,
    group_by_class,
    label_class,
    load_class_folders,
    load_dataset,
    one_hot,
    save_dataset,
    split_train_val,
)


def write_png(path, array):
    Image.fromarray(array.astype(np.uint8), mode="L").save(path)


def make_tree(root, images_per_class=(2, 2, 2), size=8):
    """Class-folder tree with deterministic uint8 gradient images."""
    for cls, count in enumerate(images_per_class):
        folder = root / f"class_{cls}"
        folder.mkdir(parents=True)
        for i in range(count):
            value = (cls * 40 + i * 10) % 256
            write_png(folder / f"{i}.png", np.full((size, size), value))
    return root


def tiny_samples(counts, k=3):
    """Cheap samples sharing one image buffer; identity still distinguishes them."""
    image = np.zeros((1, 1, 1), dtype=np.float32)
    out = []
    for cls, count in enumerate(counts):
        out.extend(LabeledSample(image, one_hot(cls, k)) for _ in range(count))
    return out


class TestLoadClassFolders:
    def test_basic_layout(self, tmp_path):
        make_tree(tmp_path)
        samples = load_class_folders(tmp_path, 3, 8)
        assert len(samples) == 6
        for sample in samples:
            assert sample.image.shape == (8, 8, 1)
            assert sample.image.dtype == np.float32
            assert sample.provenance == "real"
            assert np.isclose(sample.label.sum(), 1.0) and sample.label.max() == 1.0
        assert sorted(label_class(s) for s in samples) == [0, 0, 1, 1, 2, 2]

    def test_values_are_uint8_grid(self, tmp_path):
        make_tree(tmp_path, (1,), size=4)
        sample = load_class_folders(tmp_path, 1, 4)[0]
        assert np.all(sample.image == np.float32(0 / 255.0))

    def test_wrong_folder_count(self, tmp_path):
        make_tree(tmp_path)
        with pytest.raises(DatasetLayoutError, match="expected exactly 4"):
            load_class_folders(tmp_path, 4, 8)

    def test_empty_class_folder_named(self, tmp_path):
        make_tree(tmp_path, (2, 2))
        (tmp_path / "class_zz").mkdir()
        with pytest.raises(DatasetLayoutError, match="class_zz"):
            load_class_folders(tmp_path, 3, 8)

    def test_undecodable_file_names_path(self, tmp_path):
        make_tree(tmp_path, (1,))
        bad = tmp_path / "class_0" / "broken.png"
        bad.write_bytes(b"this is not an image")
        with pytest.raises(ImageDecodeError, match="broken.png"):
            load_class_folders(tmp_path, 1, 8)

    def test_resize_to_target(self, tmp_path):
        folder = tmp_path / "only"
        folder.mkdir()
        write_png(folder / "big.png", np.full((512, 512), 200))
        sample = load_class_folders(tmp_path, 1, 128)[0]
        assert sample.image.shape == (128, 128, 1)
        # bilinear resize of a constant image is constant
        assert np.allclose(sample.image, 200 / 255.0, atol=1e-6)

    def test_bilinear_downsample_averages(self, tmp_path):
        folder = tmp_path / "only"
        folder.mkdir()
        # vertical gradient keeps its monotonicity through bilinear resize
        gradient = np.tile(np.arange(0, 256, 16, dtype=np.uint8)[:, None], (1, 16))
        write_png(folder / "grad.png", gradient)
        sample = load_class_folders(tmp_path, 1, 8)[0]
        column = sample.image[:, 0, 0]
        assert np.all(np.diff(column) > 0)


class TestBalancedSubsample:
    def test_exact_uniform_histogram(self):
        samples = tiny_samples((30, 40, 50))
        out = balanced_subsample(samples, 25, np.random.default_rng(0))
        assert len(out) == 75
        counts = np.bincount([label_class(s) for s in out], minlength=3)
        assert counts.tolist() == [25, 25, 25]

    def test_without_replacement(self):
        samples = tiny_samples((30, 30, 30))
        out = balanced_subsample(samples, 20, np.random.default_rng(1))
        assert len({id(s) for s in out}) == len(out)

    def test_whole_class_is_permutation(self):
        samples = tiny_samples((10,), k=1)
        out = balanced_subsample(samples, 10, np.random.default_rng(2))
        assert {id(s) for s in out} == {id(s) for s in samples}

    def test_deterministic_given_seed(self):
        samples = tiny_samples((30, 30, 30))
        a = balanced_subsample(samples, 10, np.random.default_rng(3))
        b = balanced_subsample(samples, 10, np.random.default_rng(3))
        assert [id(s) for s in a] == [id(s) for s in b]

    def test_shortfall_names_class_and_gap(self):
        samples = tiny_samples((30, 4, 30))
        with pytest.raises(ValueError, match=r"class 1 has only 4.*short by 6"):
            balanced_subsample(samples, 10, np.random.default_rng(4))


class TestSplitTrainVal:
    def test_80_20_at_scale(self):
        samples = tiny_samples((10_000, 10_000, 10_000))
        split = split_train_val(samples, 0.8, np.random.default_rng(0))
        assert len(split.train) == 24_000
        assert len(split.val) == 6_000
        counts = np.bincount([label_class(s) for s in split.train], minlength=3)
        assert counts.tolist() == [8000, 8000, 8000]

    def test_small_class(self):
        split = split_train_val(tiny_samples((10,), k=1), 0.8, np.random.default_rng(1))
        assert (len(split.train), len(split.val)) == (8, 2)

    def test_is_a_partition(self):
        samples = tiny_samples((13, 17, 19))
        split = split_train_val(samples, 0.7, np.random.default_rng(2))
        train_ids = {id(s) for s in split.train}
        val_ids = {id(s) for s in split.val}
        assert not train_ids & val_ids
        assert train_ids | val_ids == {id(s) for s in samples}

    def test_ratio_within_one_sample_per_class(self):
        samples = tiny_samples((13, 17, 19))
        split = split_train_val(samples, 0.7, np.random.default_rng(3))
        for cls, total in enumerate((13, 17, 19)):
            got = sum(1 for s in split.train if label_class(s) == cls)
            assert abs(got - 0.7 * total) <= 0.5 + 1e-9

    def test_deterministic_given_seed(self):
        samples = tiny_samples((9, 9))
        a = split_train_val(samples, 0.5, np.random.default_rng(4))
        b = split_train_val(samples, 0.5, np.random.default_rng(4))
        assert [id(s) for s in a.train] == [id(s) for s in b.train]

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            split_train_val([], 0.8, np.random.default_rng(0))

    def test_bad_fraction_rejected(self):
        for fraction in (0.0, 1.0, -0.1):
            with pytest.raises(ValueError):
                split_train_val(tiny_samples((4,), k=1), fraction, np.random.default_rng(0))


class TestGroupByClass:
    def test_buckets(self):
        samples = tiny_samples((2, 3, 1))
        groups = group_by_class(samples, 3)
        assert [len(g) for g in groups] == [2, 3, 1]


class TestPersistence:
    @staticmethod
    def mixed_samples(rng, n=5, k=3):
        out = []
        for i in range(n):
            image = rng.random((6, 6, 1), dtype=np.float32)
            raw = rng.random(k) + 1e-3
            out.append(LabeledSample(image, raw / raw.sum(), provenance="gemix"))
        return out

    def test_round_trip_bit_exact(self, tmp_path):
        samples = self.mixed_samples(np.random.default_rng(0))
        manifest = save_dataset(samples, tmp_path / "ds")
        assert manifest.name == "manifest.json"
        loaded = load_dataset(tmp_path / "ds")
        assert len(loaded) == len(samples)
        for before, after in zip(samples, loaded):
            assert before.image.tobytes() == after.image.tobytes()
            assert np.max(np.abs(before.label - after.label)) <= 1e-6
            assert after.provenance == "gemix"

    def test_sidecar_schema(self, tmp_path):
        samples = self.mixed_samples(np.random.default_rng(1))
        save_dataset(samples, tmp_path / "ds")
        rows = [json.loads(line) for line in (tmp_path / "ds" / "labels.jsonl").read_text().splitlines()]
        assert len(rows) == 5
        for row in rows:
            assert set(row) == {"path", "weights", "provenance"}
            assert abs(sum(row["weights"]) - 1.0) <= 1e-6
            assert row["provenance"] == "gemix"

    def test_manifest_metadata(self, tmp_path):
        samples = self.mixed_samples(np.random.default_rng(2))
        save_dataset(samples, tmp_path / "ds")
        manifest = json.loads((tmp_path / "ds" / "manifest.json").read_text())
        assert manifest["count"] == 5
        assert manifest["num_classes"] == 3
        assert (manifest["height"], manifest["width"], manifest["channels"]) == (6, 6, 1)
        loaded = load_dataset(tmp_path / "ds")
        assert len(loaded) == manifest["count"]
        assert loaded[0].label.size == manifest["num_classes"]

    def test_empty_dataset_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="empty"):
            save_dataset([], tmp_path / "ds")

    def test_missing_manifest_rejected(self, tmp_path):
        (tmp_path / "ds").mkdir()
        with pytest.raises(DatasetLayoutError, match="manifest"):
            load_dataset(tmp_path / "ds")

    def test_count_mismatch_detected(self, tmp_path):
        samples = self.mixed_samples(np.random.default_rng(3))
        save_dataset(samples, tmp_path / "ds")
        manifest_path = tmp_path / "ds" / "manifest.json"
        manifest = json.loads(manifest_path.read_text())
        manifest["count"] = 99
        manifest_path.write_text(json.dumps(manifest))
        with pytest.raises(DatasetLayoutError, match="count"):
            load_dataset(tmp_path / "ds")

    def test_version_mismatch_detected(self, tmp_path):
        samples = self.mixed_samples(np.random.default_rng(4))
        save_dataset(samples, tmp_path / "ds")
        manifest_path = tmp_path / "ds" / "manifest.json"
        manifest = json.loads(manifest_path.read_text())
        manifest["format_version"] = 99
        manifest_path.write_text(json.dumps(manifest))
        with pytest.raises(DatasetLayoutError, match="version"):
            load_dataset(tmp_path / "ds")


class TestSampleValidation:
    def test_rejects_out_of_range_image(self):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            LabeledSample(np.full((2, 2, 1), 1.5, np.float32), one_hot(0, 2))

    def test_rejects_bad_label_sum(self):
        with pytest.raises(ValueError, match="sum"):
            LabeledSample(np.zeros((2, 2, 1), np.float32), np.array([0.5, 0.4]))

    def test_rejects_unknown_provenance(self):
        with pytest.raises(ValueError, match="provenance"):
            LabeledSample(np.zeros((2, 2, 1), np.float32), one_hot(0, 2), provenance="made-up")
