import numpy as np
import pytest

from services.datasets import (
    Dataset,
    generate_dataset,
    load_dataset,
    save_dataset,
    split_dataset,
)
from services.errors import ConfigError, DataError, DimensionError


def test_blobs_schema():
    dataset = generate_dataset("blobs", 200, seed=7)
    assert len(dataset) == 200
    assert dataset.dim == 2
    assert set(dataset.labels.tolist()) == {0, 1}
    assert dataset.features.min() >= 0.0 and dataset.features.max() <= 1.0


def test_digits_are_normalized():
    dataset = generate_dataset("digits8x8", 300, seed=3)
    assert dataset.features.shape == (300, 64)
    assert dataset.features.min() >= 0.0 and dataset.features.max() <= 1.0
    assert dataset.num_classes == 10


def test_generation_rejects_bad_requests():
    with pytest.raises(ConfigError):
        generate_dataset("blobs", 9, seed=0)
    with pytest.raises(ConfigError):
        generate_dataset("mnist", 100, seed=0)
    with pytest.raises(ConfigError):
        generate_dataset("digits8x8", 5000, seed=0)


def test_same_seed_gives_identical_file(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    save_dataset(generate_dataset("blobs", 200, seed=7), a)
    save_dataset(generate_dataset("blobs", 200, seed=7), b)
    assert a.read_bytes() == b.read_bytes()
    save_dataset(generate_dataset("blobs", 200, seed=8), b)
    assert a.read_bytes() != b.read_bytes()


def test_csv_round_trip_is_exact(tmp_path):
    dataset = generate_dataset("digits8x8", 50, seed=1)
    path = tmp_path / "digits.csv"
    save_dataset(dataset, path)
    assert path.read_text().startswith("# label,f0,f1,")
    loaded = load_dataset(path)
    np.testing.assert_array_equal(loaded.features, dataset.features)
    np.testing.assert_array_equal(loaded.labels, dataset.labels)


def test_load_dataset_errors(tmp_path):
    with pytest.raises(DataError):
        load_dataset(tmp_path / "missing.csv")

    ragged = tmp_path / "ragged.csv"
    ragged.write_text("0,0.1,0.2\n1,0.3\n")
    with pytest.raises(DataError, match="line 2"):
        load_dataset(ragged)

    garbage = tmp_path / "garbage.csv"
    garbage.write_text("# header\n0,0.1,abc\n")
    with pytest.raises(DataError, match="line 2"):
        load_dataset(garbage)

    empty = tmp_path / "empty.csv"
    empty.write_text("# only a header\n")
    with pytest.raises(DataError):
        load_dataset(empty)


def test_dataset_shape_check():
    with pytest.raises(DimensionError):
        Dataset(np.zeros((3, 2)), np.zeros(4))


def test_split_is_stratified_and_deterministic():
    dataset = generate_dataset("blobs", 200, seed=2)
    train, test = split_dataset(dataset, 0.25, seed=2)
    assert len(train) == 150 and len(test) == 50
    assert abs(test.labels.mean() - dataset.labels.mean()) < 0.05
    again_train, again_test = split_dataset(dataset, 0.25, seed=2)
    np.testing.assert_array_equal(train.features, again_train.features)
    np.testing.assert_array_equal(test.labels, again_test.labels)


def test_split_needs_every_class_on_both_sides():
    dataset = Dataset(np.arange(10.0).reshape(10, 1), np.arange(10))
    with pytest.raises(DataError):
        split_dataset(dataset, 0.25, seed=0)
