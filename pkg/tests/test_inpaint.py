import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import box
from oracles import brute_dilate, brute_masked_ssim
from tumorkit import (
    BinaryMask,
    ConfigError,
    EmptyMaskError,
    InfeasibleError,
    LabelVolume,
    ShapeError,
    SsimConfig,
    SurrogateConfig,
    Volume3,
    gen_surrogate_mask,
    masked_mse,
    masked_psnr,
    masked_ssim,
    merge_and_dilate_roi,
)
from tumorkit.inpaint import psnr_from_mse


def vol(a):
    return Volume3(np.asarray(a, dtype=np.float64))


def test_roi_single_voxel_radius_one():
    lab = np.zeros((5, 5, 5), np.uint8)
    lab[2, 2, 2] = 3
    roi = merge_and_dilate_roi(LabelVolume(lab), radius=1)
    assert roi.count == 7


def test_roi_merges_all_labels(rng):
    lab = rng.choice(np.arange(4, dtype=np.uint8), size=(7, 7, 7), p=[0.94, 0.02, 0.02, 0.02])
    roi = merge_and_dilate_roi(LabelVolume(lab), radius=2)
    assert np.array_equal(roi.data, brute_dilate(lab > 0, "ball", 2))


BRAIN = box((24, 24, 24), (2, 2, 2), (22, 22, 22))
TUMOR = box((24, 24, 24), (8, 8, 8), (14, 14, 14))


def test_surrogate_deterministic_and_contained():
    brain, roi = BinaryMask(BRAIN), BinaryMask(TUMOR)
    a = gen_surrogate_mask(brain, roi, seed=7)
    b = gen_surrogate_mask(brain, roi, seed=7)
    assert np.array_equal(a.data, b.data)
    assert a.count > 0
    assert not (a.data & TUMOR).any()
    assert not (a.data & ~BRAIN).any()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 4), st.integers(0, 4))
def test_surrogate_invariants(seed, count, r):
    cfg = SurrogateConfig(count=count, radius_range=(r, r + 2))
    m = gen_surrogate_mask(BinaryMask(BRAIN), BinaryMask(TUMOR), seed, cfg)
    assert m.count > 0
    assert not (m.data & (TUMOR | ~BRAIN)).any()


def test_surrogate_seeds_differ():
    masks = {gen_surrogate_mask(BinaryMask(BRAIN), BinaryMask(TUMOR), s).data.tobytes() for s in range(5)}
    assert len(masks) > 1


def test_surrogate_infeasible():
    with pytest.raises(InfeasibleError):
        gen_surrogate_mask(BinaryMask(TUMOR), BinaryMask(BRAIN), seed=0)


def test_surrogate_config_validation():
    with pytest.raises(ConfigError):
        SurrogateConfig(count=0)
    with pytest.raises(ConfigError):
        SurrogateConfig(radius_range=(5, 2))


def test_mse_only_counts_masked_voxels():
    ref = np.zeros((2, 2, 2))
    pred = ref.copy()
    pred[0, 0, 0] = 0.3
    pred[1, 1, 1] = 100.0
    mask = np.zeros((2, 2, 2), bool)
    mask[0, 0, :] = True
    assert masked_mse(vol(pred), vol(ref), BinaryMask(mask)) == pytest.approx(0.09 / 2)


def test_psnr_closed_forms():
    assert psnr_from_mse(0.01) == 20.0
    assert psnr_from_mse(0.0) == math.inf
    assert psnr_from_mse(0.0533) == pytest.approx(12.7327, abs=1e-4)
    assert psnr_from_mse(0.04, peak=2.0) == pytest.approx(20.0)
    with pytest.raises(ConfigError):
        psnr_from_mse(1.0, peak=0)


def test_psnr_from_volumes():
    ref = np.zeros((2, 2, 2))
    pred = np.full((2, 2, 2), 0.1)
    assert masked_psnr(vol(pred), vol(ref), BinaryMask(np.ones((2, 2, 2)))) == pytest.approx(20.0, abs=1e-12)


def test_identical_inputs(rng):
    x = vol(rng.random((6, 6, 6)))
    m = BinaryMask(rng.random((6, 6, 6)) < 0.5)
    assert masked_mse(x, x, m) == 0.0
    assert masked_psnr(x, x, m) == math.inf
    assert masked_ssim(x, x, m) == pytest.approx(1.0, abs=1e-12)


def test_ssim_constant_images_closed_form():
    x, y = vol(np.full((5, 5, 5), 0.3)), vol(np.full((5, 5, 5), 0.5))
    m = BinaryMask(np.ones((5, 5, 5)))
    c1 = 1e-4
    expected = (2 * 0.3 * 0.5 + c1) / (0.3**2 + 0.5**2 + c1)
    assert abs(masked_ssim(x, y, m) - expected) < 1e-9


def test_ssim_anticorrelated_is_negative(rng):
    x = rng.random((8, 8, 8))
    m = BinaryMask(np.ones((8, 8, 8)))
    assert masked_ssim(vol(x), vol(1 - x), m) < 0


@pytest.mark.parametrize("window", [3, 5, 7])
def test_ssim_matches_brute_force(window, rng):
    x, y = rng.random((7, 6, 5)), rng.random((7, 6, 5))
    m = rng.random((7, 6, 5)) < 0.6
    got = masked_ssim(vol(x), vol(y), BinaryMask(m), SsimConfig(window=window))
    assert got == pytest.approx(brute_masked_ssim(x, y, m, window), abs=1e-10)


def test_ssim_symmetric(rng):
    x, y = vol(rng.random((6, 6, 6))), vol(rng.random((6, 6, 6)))
    m = BinaryMask(box((6, 6, 6), (1, 1, 1), (5, 5, 5)))
    assert masked_ssim(x, y, m) == pytest.approx(masked_ssim(y, x, m), abs=1e-15)


def test_out_of_mask_changes_are_invisible(rng):
    x, y = rng.random((9, 9, 9)), rng.random((9, 9, 9))
    mask = box((9, 9, 9), (2, 2, 2), (6, 7, 5))
    m = BinaryMask(mask)
    before = (masked_mse(vol(x), vol(y), m), masked_psnr(vol(x), vol(y), m), masked_ssim(vol(x), vol(y), m))
    x2, y2 = x.copy(), y.copy()
    x2[~mask] = rng.random(int((~mask).sum())) * 50
    y2[~mask] = -3.0
    after = (masked_mse(vol(x2), vol(y2), m), masked_psnr(vol(x2), vol(y2), m), masked_ssim(vol(x2), vol(y2), m))
    assert before == after


def test_metric_errors():
    x = vol(np.zeros((2, 2, 2)))
    with pytest.raises(EmptyMaskError):
        masked_mse(x, x, BinaryMask(np.zeros((2, 2, 2))))
    with pytest.raises(ShapeError):
        masked_ssim(x, vol(np.zeros((2, 2, 3))), BinaryMask(np.ones((2, 2, 2))))
    with pytest.raises(ConfigError):
        SsimConfig(window=4)
