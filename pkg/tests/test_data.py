import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from samplecover.data import (DataFormatError, DataPoint, DistanceMatrix, Sample, TensorShape,
                              load_cifar_batch, load_dataset, load_distance_matrix,
                              load_manifest, load_orbit_manifest, save_distance_matrix,
                              save_manifest, subsample_indices)

import oracles


def write_manifest(tmp_path, payload: bytes, labels, shape, dtype="u8", name="ds"):
    (tmp_path / f"{name}.bin").write_bytes(payload)
    (tmp_path / f"{name}.lab").write_bytes(np.asarray(labels, dtype="<u2").tobytes())
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps({"shape": list(shape), "dtype": dtype,
                                "records": f"{name}.bin", "labels": f"{name}.lab"}))
    return path


def test_tensor_shape_rejects_nonpositive():
    assert TensorShape(32, 32, 3).size == 3072
    with pytest.raises(ValueError):
        TensorShape(0, 4, 1)


def test_datapoint_length_must_match_shape():
    with pytest.raises(ValueError):
        DataPoint(np.zeros(5), TensorShape(2, 2, 1))
    with pytest.raises(ValueError):
        DataPoint(np.array([0, np.nan, 0, 0]), TensorShape(2, 2, 1))


def test_eight_bit_manifest_scales_to_unit_interval(tmp_path):
    path = write_manifest(tmp_path, bytes([0, 255, 0, 255, 255, 0, 51, 0]), [3, 7], (2, 2, 1))
    s = load_manifest(path)
    assert len(s) == 2
    assert s.shape == TensorShape(2, 2, 1)
    np.testing.assert_array_equal(s[0].values, [0.0, 1.0, 0.0, 1.0])
    np.testing.assert_allclose(s[1].values, [1.0, 0.0, 0.2, 0.0], rtol=1e-7)
    assert list(s.labels) == [3, 7]


def test_label_count_mismatch_names_the_file(tmp_path):
    path = write_manifest(tmp_path, bytes(8), [1, 2, 3], (2, 2, 1))
    with pytest.raises(DataFormatError, match="label count mismatch") as err:
        load_manifest(path)
    assert "ds.lab" in str(err.value)


def test_truncated_records_report_the_record(tmp_path):
    path = write_manifest(tmp_path, bytes(7), [1, 2], (2, 2, 1))
    with pytest.raises(DataFormatError, match="record 1"):
        load_manifest(path)


def test_missing_manifest_file(tmp_path):
    with pytest.raises(DataFormatError, match="missing"):
        load_manifest(tmp_path / "absent.json")


def test_cifar_record_matches_byte_reader(tmp_path):
    rng = np.random.default_rng(4)
    raw = rng.integers(0, 256, size=3 * 3073, dtype=np.uint8).tobytes()
    batch = tmp_path / "data_batch_1.bin"
    batch.write_bytes(raw)
    s = load_cifar_batch(batch)
    assert len(s) == 3 and s.shape == TensorShape(32, 32, 3)
    for i in range(3):
        label, pixels = oracles.read_cifar_record(raw, i)
        assert s.labels[i] == label
        np.testing.assert_allclose(s.images[i], np.array(pixels, dtype=np.float32), rtol=0, atol=0)
    # directory form reads the same batches
    assert load_dataset(tmp_path) == s


def test_cifar_truncated_batch(tmp_path):
    p = tmp_path / "b.bin"
    p.write_bytes(bytes(3073 + 100))
    with pytest.raises(DataFormatError, match="record 1 is truncated"):
        load_cifar_batch(p)


@pytest.mark.parametrize("dtype", ["u8", "f32"])
def test_manifest_round_trip(tmp_path, dtype):
    rng = np.random.default_rng(0)
    images = rng.integers(0, 256, size=(5, 3, 4, 2)).astype(np.float32) / 255
    s = Sample(images, [0, 1, 2, 1, 0])
    save_manifest(s, tmp_path / "m.json", dtype)
    assert load_manifest(tmp_path / "m.json") == s


def test_distance_matrix_round_trip_is_bit_exact(tmp_path):
    m = np.array([[0.0, 0.1, 1 / 3], [0.1, 0.0, 2.0 ** -60], [1 / 3, 2.0 ** -60, 0.0]])
    save_distance_matrix(m, tmp_path / "d.dist")
    raw = (tmp_path / "d.dist").read_bytes()
    assert oracles.read_distance_file(raw) == m.tolist()
    back = load_distance_matrix(tmp_path / "d.dist")
    assert back.entries.tobytes() == m.tobytes()


def test_one_by_one_zero_matrix_is_valid(tmp_path):
    save_distance_matrix(np.zeros((1, 1)), tmp_path / "one.dist")
    assert load_distance_matrix(tmp_path / "one.dist").n == 1


def test_header_value_count_mismatch(tmp_path):
    p = tmp_path / "bad.dist"
    p.write_bytes(struct.pack("<Q", 4) + struct.pack("<15d", *([0.0] * 15)))
    with pytest.raises(DataFormatError, match="n=4"):
        load_distance_matrix(p)


def test_asymmetric_matrix_rejected_on_save(tmp_path):
    with pytest.raises(ValueError, match="symmetric"):
        save_distance_matrix(np.array([[0.0, 1.0], [2.0, 0.0]]), tmp_path / "x.dist")
    assert not (tmp_path / "x.dist").exists()


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)),
                  elements=st.floats(0, 1e6, allow_nan=False)))
def test_distance_file_round_trip_property(tmp_path_factory, a):
    n = min(a.shape)
    m = a[:n, :n]
    m = np.triu(m, 1) + np.triu(m, 1).T
    path = tmp_path_factory.mktemp("d") / "m.dist"
    save_distance_matrix(m, path)
    assert load_distance_matrix(path) == DistanceMatrix(m)


def test_subsample_balanced_and_deterministic():
    labels = np.repeat(np.arange(4), 30)
    a = subsample_indices(labels, 10, seed=3, balanced=True)
    assert np.array_equal(a, subsample_indices(labels, 10, seed=3, balanced=True))
    counts = np.bincount(labels[a], minlength=4)
    assert sorted(counts) == [2, 2, 3, 3]
    with pytest.raises(ValueError):
        subsample_indices(labels, 121, 0)


def test_orbit_manifest_npy_and_raw(tmp_path):
    a = np.arange(12, dtype=np.uint8).reshape(2, 2, 3)
    np.save(tmp_path / "v0.npy", a)
    (tmp_path / "v1.raw").write_bytes((255 - a).tobytes())
    (tmp_path / "orbits.json").write_text(json.dumps(
        {"dtype": "u8", "shape": [2, 2, 3], "orbits": {"0": ["v0.npy", "v1.raw"]}}))
    table = load_orbit_manifest(tmp_path / "orbits.json")
    assert table[0].shape == (2, 2, 2, 3)
    np.testing.assert_allclose(table[0][0], a / 255, rtol=1e-6)
    np.testing.assert_allclose(table[0][1], (255 - a) / 255, rtol=1e-6)


def test_orbit_manifest_shape_mismatch(tmp_path):
    np.save(tmp_path / "v0.npy", np.zeros((3, 3, 3), dtype=np.uint8))
    (tmp_path / "o.json").write_text(json.dumps({"0": ["v0.npy"]}))
    with pytest.raises(DataFormatError, match="shape mismatch"):
        load_orbit_manifest(tmp_path / "o.json", shape=(2, 2, 3))
