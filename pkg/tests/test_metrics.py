import math

import numpy as np
import pytest
from skimage.metrics import structural_similarity

from pathosynth import Volume, metric_dice, metric_l1, metric_psnr, metric_ssim, psnr_from_mse

from oracles import oracle_l1_mean


def pair(dims=(32, 32, 32), noise=0.1, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.random(dims).astype(np.float32)
    b = np.clip(a + noise * rng.standard_normal(dims), 0, 1).astype(np.float32)
    return a, b


class TestL1:
    def test_identical_zero(self):
        a, _ = pair()
        assert metric_l1(a, a) == 0.0

    def test_matches_loop_oracle(self):
        a, b = pair(dims=(8, 8, 8))
        assert metric_l1(a, b) == pytest.approx(oracle_l1_mean(a, b), rel=1e-12)

    def test_accepts_volumes(self):
        a, b = pair(dims=(12, 12, 12))
        assert metric_l1(Volume(a), Volume(b)) == metric_l1(a, b)


class TestPsnr:
    def test_closed_form_exact(self):
        assert psnr_from_mse(0.01) == 20.0

    def test_identical_is_infinite_sentinel(self):
        a, _ = pair()
        assert math.isinf(metric_psnr(a, a))

    def test_strictly_decreasing_in_mse(self):
        a = np.full((8, 8, 8), 0.5, np.float32)
        values = [
            metric_psnr(a, np.clip(a + off, 0, 1)) for off in (0.01, 0.05, 0.1, 0.2)
        ]
        assert all(x > y for x, y in zip(values, values[1:]))

    def test_known_value(self):
        a = np.zeros((4, 4, 4), np.float32)
        b = np.full((4, 4, 4), 0.5, np.float32)
        assert metric_psnr(a, b) == pytest.approx(10 * math.log10(1 / 0.25), rel=1e-12)


class TestSsim:
    def test_self_similarity_is_one(self):
        a, _ = pair()
        assert metric_ssim(a, a) == pytest.approx(1.0, abs=1e-6)

    def test_matches_independent_reference(self):
        a, b = pair(seed=7)
        mine = metric_ssim(a, b)
        ref = structural_similarity(
            a.astype(np.float64),
            b.astype(np.float64),
            gaussian_weights=True,
            sigma=1.5,
            use_sample_covariance=False,
            data_range=1.0,
        )
        assert mine == pytest.approx(ref, abs=1e-4)

    def test_decreases_with_noise(self):
        a, slight = pair(noise=0.02, seed=3)
        _, heavy = pair(noise=0.3, seed=3)
        assert metric_ssim(a, slight) > metric_ssim(a, heavy)

    def test_too_small_volume_rejected(self):
        with pytest.raises(ValueError):
            metric_ssim(np.zeros((8, 8, 8)), np.zeros((8, 8, 8)))


class TestDice:
    def test_identical_masks(self):
        m = (np.arange(64).reshape(4, 4, 4) % 3 == 0).astype(np.float32)
        assert metric_dice(m, m) == 1.0

    def test_disjoint_masks(self):
        a = np.zeros((4, 4, 4), np.float32)
        b = np.zeros((4, 4, 4), np.float32)
        a[:2] = 1.0
        b[2:] = 1.0
        assert metric_dice(a, b) == 0.0

    def test_half_overlap(self):
        a = np.zeros((4, 4, 4), np.float32)
        b = np.zeros((4, 4, 4), np.float32)
        a[:2] = 1.0
        b[1:3] = 1.0
        assert metric_dice(a, b) == pytest.approx(0.5)

    def test_both_empty_is_one(self):
        z = np.zeros((4, 4, 4), np.float32)
        assert metric_dice(z, z) == 1.0

    def test_threshold_applied(self):
        a = np.full((4, 4, 4), 0.6, np.float32)
        b = np.full((4, 4, 4), 0.4, np.float32)
        assert metric_dice(a, b, threshold=0.5) == 0.0
        assert metric_dice(a, b, threshold=0.3) == 1.0
