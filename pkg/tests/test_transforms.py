import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import ndimage

from samplecover.data import DataPoint
from samplecover.transforms import (TransformSpec, color_jitter, compose, cutout_box,
                                    materialize_orbit, orbit_size, pad_crop, parse_transform,
                                    preset, rotate, spec_from_json, spec_to_json)

RNG = np.random.default_rng(11)
IMG = RNG.random((8, 8, 3)).astype(np.float32)


def test_flip_orbit_is_identity_then_mirror():
    orb = materialize_orbit(IMG, preset("flip"), seed=0, point_index=0)
    assert len(orb) == 2
    np.testing.assert_array_equal(orb.members[0], IMG)
    np.testing.assert_array_equal(orb.members[1], IMG[:, ::-1, :])


def test_identity_orbit_has_one_member():
    orb = materialize_orbit(DataPoint.from_image(IMG), preset("base"), 0, 0)
    assert len(orb) == 1
    np.testing.assert_array_equal(orb.members[0], IMG)


def test_rotate_covers_integer_degrees_in_range():
    spec = preset("rotate")
    assert orbit_size(spec, IMG.shape) == 61
    orb = materialize_orbit(IMG, spec, 0, 0)
    np.testing.assert_array_equal(orb.members[0], IMG)


@pytest.mark.parametrize("name", ["crop", "cutout", "colorjitter"])
def test_sampled_presets_hold_identity_plus_fifty(name):
    assert orbit_size(preset(name), (32, 32, 3)) == 51


def test_flip_rotate_product_size():
    assert orbit_size(compose([preset("flip"), preset("rotate")]), (32, 32, 3)) == 122


def test_product_over_budget_is_sampled_with_identity_first():
    spec = compose([preset("rotate"), preset("crop")], sample_budget=100)
    orb = materialize_orbit(IMG, spec, 3, 2)
    assert len(orb) == 100
    np.testing.assert_array_equal(orb.members[0], IMG)


@pytest.mark.parametrize("angle", [-30.0, -7.0, 13.0, 29.0])
def test_rotation_matches_bilinear_reference(angle):
    ref = ndimage.rotate(IMG.astype(np.float64), angle, reshape=False, order=1,
                         mode="grid-constant", cval=0.0)
    np.testing.assert_allclose(rotate(IMG, angle), ref, atol=1e-6)


def test_quarter_turn_is_counter_clockwise():
    np.testing.assert_array_equal(rotate(IMG, 90.0), np.rot90(IMG, 1, axes=(0, 1)))


def test_pad_crop_centre_is_identity_and_edges_replicate():
    np.testing.assert_array_equal(pad_crop(IMG, 4, 4, 4), IMG)
    shifted = pad_crop(IMG, 4, 0, 0)
    np.testing.assert_array_equal(shifted[:4, :4], np.broadcast_to(IMG[0, 0], (4, 4, 3)))


def test_cutout_box_side():
    # 5% of a 32x32 image, square: floor(sqrt(51.2)) = 7
    assert cutout_box((32, 32, 3), 0.05, 1.0) == (7, 7)


def test_color_jitter_neutral_parameters_keep_image():
    np.testing.assert_allclose(color_jitter(IMG, 1.0, 1.0, 1.0), IMG, atol=1e-6)


def test_color_jitter_zero_saturation_is_gray():
    out = color_jitter(IMG, 1.0, 1.0, 0.0)
    np.testing.assert_allclose(out[..., 0], out[..., 1], atol=1e-6)
    np.testing.assert_allclose(out[..., 1], out[..., 2], atol=1e-6)


def test_orbit_is_deterministic_and_order_free():
    spec = preset("crop")
    a = materialize_orbit(IMG, spec, seed=5, point_index=9)
    materialize_orbit(IMG * 0.5, spec, seed=5, point_index=3)
    b = materialize_orbit(IMG, spec, seed=5, point_index=9)
    np.testing.assert_array_equal(a.members, b.members)
    c = materialize_orbit(IMG, spec, seed=6, point_index=9)
    assert not np.array_equal(a.members, c.members)


def test_growing_budget_only_appends():
    small = materialize_orbit(IMG, preset("cutout", sample_budget=10), 1, 0).members
    big = materialize_orbit(IMG, preset("cutout", sample_budget=30), 1, 0).members
    np.testing.assert_array_equal(big[:11], small)


def test_members_are_read_only_and_in_unit_range():
    orb = materialize_orbit(IMG, preset("colorjitter"), 0, 0)
    assert orb.members.min() >= 0 and orb.members.max() <= 1
    with pytest.raises(ValueError):
        orb.members[0, 0, 0, 0] = 1.0


def test_precomputed_orbit_prepends_identity(tmp_path):
    views = RNG.random((24, 8, 8, 3)).astype(np.float32)
    spec = preset("3dview", orbits={0: views})
    orb = materialize_orbit(IMG, spec, 0, 0)
    assert len(orb) == 25
    np.testing.assert_array_equal(orb.members[0], IMG)
    np.testing.assert_array_equal(orb.members[1:], views)
    with pytest.raises(KeyError):
        materialize_orbit(IMG, spec, 0, 1)


def test_precomputed_from_manifest(tmp_path):
    np.save(tmp_path / "a.npy", (IMG * 255).astype(np.uint8))
    (tmp_path / "o.json").write_text(json.dumps({"4": ["a.npy"]}))
    spec = parse_transform(f"3dview:{tmp_path / 'o.json'}")
    orb = materialize_orbit(IMG, spec, 0, 4)
    assert len(orb) == 2
    np.testing.assert_allclose(orb.members[1], np.floor(IMG * 255) / 255, atol=1e-6)


def test_invalid_specs():
    with pytest.raises(ValueError):
        TransformSpec("shear")
    with pytest.raises(ValueError):
        preset("rotate", degrees=(10, -10))
    with pytest.raises(ValueError):
        preset("crop", sample_budget=0)
    with pytest.raises(ValueError):
        compose([preset("flip")])
    with pytest.raises(ValueError):
        preset("3dview")
    with pytest.raises(ValueError, match="exceeds"):
        materialize_orbit(IMG, preset("crop", size=(20, 20)), 0, 0)


def test_spec_json_round_trip_and_parsing():
    spec = compose([preset("flip"), preset("rotate", degrees=(-10, 10), step=2.0)])
    assert spec_from_json(spec_to_json(spec)) == spec
    assert parse_transform(spec_to_json(spec)) == spec
    assert parse_transform("flip+rotate") == compose([preset("flip"), preset("rotate")])
    assert parse_transform("crop").tag == "crop"
    with pytest.raises(ValueError):
        parse_transform("nonsense")


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["flip", "rotate", "crop", "cutout", "colorjitter"]),
       st.integers(0, 2 ** 31), st.integers(0, 10_000))
def test_identity_member_property(name, seed, idx):
    spec = preset(name, sample_budget=5) if name in ("crop", "cutout", "colorjitter") else preset(name)
    orb = materialize_orbit(IMG, spec, seed, idx)
    np.testing.assert_array_equal(orb.members[0], IMG)
    assert orb.members.shape[1:] == IMG.shape
