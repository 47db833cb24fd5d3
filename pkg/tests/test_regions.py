import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import box
from tumorkit import (
    ArityError,
    ConfigError,
    DecodeConfig,
    LabelError,
    LabelVolume,
    PostprocessConfig,
    ProbabilityStack,
    RangeError,
    ShapeError,
    fuse_ensemble,
    labels_to_regions,
    postprocess_enhancing,
    regions_to_labels,
)
from tumorkit.regions import region_mask

label_maps = arrays(np.uint8, st.tuples(st.integers(1, 6), st.integers(1, 6), st.integers(1, 6)),
                    elements=st.integers(0, 3))


def stack(wt, tc, et, spacing=(1.0, 1.0, 1.0)):
    return ProbabilityStack(np.asarray(wt, np.float32), np.asarray(tc, np.float32), np.asarray(et, np.float32), spacing)


def test_labels_to_regions_single_voxels():
    lab = LabelVolume(np.array([[[0, 1, 2, 3]]], np.uint8))
    s = labels_to_regions(lab)
    assert s.wt.tolist() == [[[0, 1, 1, 1]]]
    assert s.tc.tolist() == [[[0, 1, 0, 1]]]
    assert s.et.tolist() == [[[0, 0, 0, 1]]]
    assert s.wt.dtype == np.float32


def test_regions_to_labels_hierarchy():
    s = stack([[[0.2, 0.9, 0.9, 0.9, 0.1]]], [[[0.2, 0.1, 0.6, 0.6, 0.1]]], [[[0.1, 0.1, 0.1, 0.7, 0.8]]])
    # ET overrides even when the enclosing regions are below threshold
    assert regions_to_labels(s).data.tolist() == [[[0, 2, 1, 3, 3]]]


def test_threshold_is_inclusive():
    s = stack([[[0.5]]], [[[0.0]]], [[[0.0]]])
    assert regions_to_labels(s).data.tolist() == [[[2]]]
    assert regions_to_labels(s, DecodeConfig(tau_wt=0.6)).data.tolist() == [[[0]]]


@pytest.mark.parametrize("tau", [0.0, 1.0, -0.1, 1.5])
def test_decode_config_rejects_bad_tau(tau):
    with pytest.raises(ConfigError):
        DecodeConfig(tau_et=tau)


def test_decode_rejects_out_of_range():
    with pytest.raises(RangeError):
        regions_to_labels(stack([[[1.2]]], [[[0.0]]], [[[0.0]]]))


def test_invalid_labels_rejected():
    with pytest.raises(LabelError):
        labels_to_regions(LabelVolume(np.array([[[4]]], np.uint8)))


@settings(max_examples=60, deadline=None)
@given(label_maps)
def test_round_trip_and_nesting(data):
    lab = LabelVolume(data, (1.0, 2.0, 0.5))
    s = labels_to_regions(lab)
    assert np.all(s.wt >= s.tc) and np.all(s.tc >= s.et)
    back = regions_to_labels(s)
    assert np.array_equal(back.data, data)
    assert back.spacing == lab.spacing


def test_region_mask_membership():
    lab = LabelVolume(np.array([[[0, 1, 2, 3]]], np.uint8))
    assert region_mask(lab, "TC").data.tolist() == [[[False, True, False, True]]]


def test_fuse_weighted_mean():
    a = stack([[[0.0, 1.0]]], [[[0.2, 0.2]]], [[[0.0, 0.0]]])
    b = stack([[[1.0, 1.0]]], [[[0.8, 0.4]]], [[[0.0, 0.6]]])
    f = fuse_ensemble([a, b])
    np.testing.assert_allclose(f.wt, [[[0.5, 1.0]]])
    np.testing.assert_allclose(f.tc, [[[0.5, 0.3]]], rtol=1e-6)
    f = fuse_ensemble([a, b], weights=[3, 1])
    np.testing.assert_allclose(f.wt, [[[0.25, 1.0]]])
    np.testing.assert_allclose(f.et, [[[0.0, 0.15]]], rtol=1e-6)


def test_fuse_zero_weight_ignores_member():
    a = stack([[[0.3]]], [[[0.3]]], [[[0.3]]])
    b = stack([[[0.9]]], [[[0.9]]], [[[0.9]]])
    f = fuse_ensemble([a, b], weights=[1, 0])
    assert f.wt.tolist() == a.wt.tolist()


@pytest.mark.parametrize("n", [1, 2, 5])
def test_fuse_identical_is_identity(n, rng):
    s = stack(*(rng.random((4, 5, 6)).astype(np.float32) for _ in range(3)), spacing=(1.0, 1.0, 3.0))
    f = fuse_ensemble([s] * n)
    for r in ("WT", "TC", "ET"):
        assert np.array_equal(f.channel(r), s.channel(r))
    assert f.spacing == s.spacing


def test_fuse_errors():
    a = stack(np.zeros((2, 2, 2)), np.zeros((2, 2, 2)), np.zeros((2, 2, 2)))
    b = stack(np.zeros((2, 2, 3)), np.zeros((2, 2, 3)), np.zeros((2, 2, 3)))
    with pytest.raises(ArityError):
        fuse_ensemble([])
    with pytest.raises(ShapeError):
        fuse_ensemble([a, b])
    with pytest.raises(ArityError):
        fuse_ensemble([a, a], weights=[1])
    with pytest.raises(ConfigError):
        fuse_ensemble([a, a], weights=[1, -1])
    with pytest.raises(ConfigError):
        fuse_ensemble([a, a], weights=[0, 0])


def et_labels(*boxes, shape=(20, 20, 20), background=2):
    data = np.zeros(shape, np.uint8)
    data[2:18, 2:18, 2:18] = background
    for lo, hi in boxes:
        data[box(shape, lo, hi)] = 3
    return LabelVolume(data)


def test_small_total_et_is_relabeled():
    # 6*6*5 = 180 block plus a 19-voxel tail: 199 voxels, one short of the default
    data = et_labels(((3, 3, 3), (9, 9, 8))).data.copy()
    data[3, 3, 8:18] = 3
    data[3, 4, 8:17] = 3
    lab = LabelVolume(data)
    assert int((lab.data == 3).sum()) == 199
    out = postprocess_enhancing(lab)
    assert not (out.data == 3).any()
    assert np.array_equal(out.data == 1, lab.data == 3)

    data[3, 4, 17] = 3
    out = postprocess_enhancing(LabelVolume(data))
    assert int((out.data == 3).sum()) == 200


def test_small_component_removed_large_kept():
    lab = et_labels(((3, 3, 3), (9, 9, 12)), ((15, 15, 15), (16, 16, 20)))
    assert int((lab.data == 3).sum()) == 6 * 6 * 9 + 5
    out = postprocess_enhancing(lab)
    assert int((out.data == 3).sum()) == 324
    assert (out.data[15, 15, 15:20] == 1).all()


def test_relabel_target_configurable():
    lab = et_labels(((3, 3, 3), (4, 4, 6)))
    out = postprocess_enhancing(lab, PostprocessConfig(relabel_target=2))
    assert out.data[3, 3, 3] == 2


def test_component_removal_can_trigger_total_rule():
    # 205 voxels; the 5-voxel speck goes first, leaving exactly 200
    big = ((3, 3, 3), (8, 8, 11))  # 5*5*8 = 200
    lab = et_labels(big, ((15, 15, 15), (16, 16, 20)))
    out = postprocess_enhancing(lab)
    assert int((out.data == 3).sum()) == 200
    out = postprocess_enhancing(lab, PostprocessConfig(et_total_min=201))
    assert not (out.data == 3).any()


def test_no_et_is_noop():
    lab = et_labels()
    assert postprocess_enhancing(lab) is lab


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 60), st.integers(0, 8))
def test_postprocess_idempotent_and_local(seed, total_min, comp_min):
    rng = np.random.default_rng(seed)
    data = rng.choice(np.arange(4, dtype=np.uint8), size=(8, 8, 8), p=[0.4, 0.2, 0.2, 0.2])
    lab = LabelVolume(data)
    cfg = PostprocessConfig(et_total_min=total_min, et_component_min=comp_min)
    once = postprocess_enhancing(lab, cfg)
    twice = postprocess_enhancing(once, cfg)
    assert np.array_equal(once.data, twice.data)
    changed = once.data != data
    assert np.all(data[changed] == 3)
    assert np.all(once.data[changed] == cfg.relabel_target)


def test_postprocess_config_validation():
    with pytest.raises(ConfigError):
        PostprocessConfig(et_total_min=-1)
    with pytest.raises(ConfigError):
        PostprocessConfig(relabel_target=3)
