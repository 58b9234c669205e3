import numpy as np
import pytest

from pathosynth import (
    ContrastSpec,
    LabelVolume,
    ModalityClass,
    ProbVolume,
    ShiftDirection,
    TissueClass,
    Volume,
    anomaly_probability,
    enhance_pathology,
    sample_anomaly_free,
    white_gray_means,
)
from pathosynth.errors import (
    GridMismatchError,
    MissingLabelError,
    MissingTissueClassError,
    VolumeError,
)

from conftest import DEFAULT_TABLE, make_labels
from oracles import oracle_anomaly_probability, oracle_class_mean


def region_mask(dims=(8, 8, 8)):
    mask = np.zeros(dims, bool)
    mask[2:6, 2:6, 2:6] = True
    return mask


class TestAnomalyProbability:
    def test_zero_outside_region(self):
        rng = np.random.default_rng(0)
        img = Volume(rng.random((8, 8, 8), dtype=np.float32))
        mask = region_mask()
        p = anomaly_probability(img, mask, ModalityClass.T1W_LIKE)
        assert p.data[~mask].max() == 0.0

    def test_endpoints(self):
        rng = np.random.default_rng(1)
        img = Volume(rng.random((8, 8, 8), dtype=np.float32))
        mask = region_mask()
        vals = img.data[mask]
        t1 = anomaly_probability(img, mask, ModalityClass.T1W_LIKE)
        fl = anomaly_probability(img, mask, ModalityClass.T2W_FLAIR_LIKE)
        assert t1.data[mask][np.argmin(vals)] == 1.0
        assert fl.data[mask][np.argmax(vals)] == 1.0

    def test_midpoint_is_half(self):
        data = np.zeros((4, 4, 4), np.float32)
        mask = np.zeros((4, 4, 4), bool)
        mask[0, 0, :3] = True
        data[0, 0, 0] = 0.2
        data[0, 0, 1] = 0.6
        data[0, 0, 2] = 0.4  # midpoint of [0.2, 0.6]
        p = anomaly_probability(Volume(data), mask, ModalityClass.T1W_LIKE)
        assert p.data[0, 0, 2] == pytest.approx(0.5, abs=1e-7)

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(2)
        img = Volume(rng.random((8, 8, 8), dtype=np.float32))
        mask = rng.random((8, 8, 8)) < 0.3
        for modality, t1w_like in [
            (ModalityClass.T1W_LIKE, True),
            (ModalityClass.T2W_FLAIR_LIKE, False),
        ]:
            mine = anomaly_probability(img, mask, modality).data
            ref = oracle_anomaly_probability(img.data, mask, t1w_like)
            np.testing.assert_allclose(mine, ref, atol=1e-7)

    def test_degenerate_flat_region_is_one(self):
        img = Volume(np.full((8, 8, 8), 0.5, np.float32))
        mask = region_mask()
        p = anomaly_probability(img, mask, ModalityClass.T1W_LIKE)
        assert np.all(p.data[mask] == 1.0)
        assert np.all(p.data[~mask] == 0.0)

    def test_monotone_direction_by_modality(self):
        rng = np.random.default_rng(3)
        img = Volume(rng.random((8, 8, 8), dtype=np.float32))
        mask = region_mask()
        t1 = anomaly_probability(img, mask, ModalityClass.T1W_LIKE)
        fl = anomaly_probability(img, mask, ModalityClass.T2W_FLAIR_LIKE)
        iv = img.data[mask].astype(np.float64)
        assert np.corrcoef(iv, t1.data[mask])[0, 1] < 0
        assert np.corrcoef(iv, fl.data[mask])[0, 1] > 0

    def test_grid_mismatch(self):
        img = Volume(np.zeros((4, 4, 4), np.float32))
        with pytest.raises(GridMismatchError):
            anomaly_probability(img, np.zeros((5, 5, 5), bool), ModalityClass.T1W_LIKE)


class TestSampleAnomalyFree:
    def test_degenerate_sigma_gives_constant_regions(self):
        labels = make_labels((16, 16, 16))
        spec = ContrastSpec({0: (0.0, 0.0), 1: (0.5, 0.0), 2: (0.3, 0.0), 3: (0.9, 0.0)}, 7)
        out = sample_anomaly_free(labels, spec)
        for lab, mu in [(0, 0.0), (1, 0.5), (2, 0.3), (3, 0.9)]:
            region = out.data[labels.data == lab]
            assert np.all(region == np.float32(mu))

    def test_per_label_means_match_requests(self):
        # Monte-Carlo: sample mean within 4*sigma/sqrt(n) per label
        dims = (32, 32, 32)
        labels = LabelVolume(
            (np.indices(dims)[0] >= dims[0] // 2).astype(np.int32) + 1,
            {1: TissueClass.WHITE_MATTER, 2: TissueClass.GRAY_MATTER},
        )
        sigma = 0.05
        spec = ContrastSpec({1: (0.6, sigma), 2: (0.3, sigma)}, 11)
        out = sample_anomaly_free(labels, spec)
        for lab, mu in [(1, 0.6), (2, 0.3)]:
            region = out.data[labels.data == lab].astype(np.float64)
            assert region.size >= 10_000
            assert abs(region.mean() - mu) < 4 * sigma / np.sqrt(region.size)

    def test_same_seed_bit_identical(self):
        labels = make_labels((12, 12, 12))
        spec = ContrastSpec({0: (0.0, 0.02), 1: (0.5, 0.05), 2: (0.3, 0.05), 3: (0.9, 0.01)}, 13)
        a = sample_anomaly_free(labels, spec)
        b = sample_anomaly_free(labels, spec)
        assert np.array_equal(a.data, b.data)

    def test_missing_label_named_in_error(self):
        labels = make_labels((8, 8, 8))
        with pytest.raises(MissingLabelError, match="3"):
            sample_anomaly_free(labels, ContrastSpec({0: (0, 0), 1: (0.5, 0), 2: (0.4, 0)}, 0))

    def test_output_clamped(self):
        labels = LabelVolume(np.ones((16, 16, 16), np.int32), {1: TissueClass.OTHER})
        out = sample_anomaly_free(labels, ContrastSpec({1: (0.95, 0.5)}, 5))
        assert out.data.min() >= 0.0 and out.data.max() <= 1.0


class TestWhiteGrayMeans:
    def test_constant_image(self):
        labels = make_labels((12, 12, 12))
        v = Volume(np.full((12, 12, 12), 0.7, np.float32))
        assert white_gray_means(v, labels) == (pytest.approx(0.7), pytest.approx(0.7))

    def test_piecewise_constant(self):
        labels = make_labels((12, 12, 12))
        data = np.where(labels.data == 1, 0.8, np.where(labels.data == 2, 0.4, 0.1))
        mw, mg = white_gray_means(Volume(data.astype(np.float32)), labels)
        assert mw == pytest.approx(0.8, abs=1e-7)
        assert mg == pytest.approx(0.4, abs=1e-7)

    def test_matches_loop_oracle(self):
        labels = make_labels((10, 10, 10))
        rng = np.random.default_rng(17)
        v = Volume(rng.random((10, 10, 10), dtype=np.float32))
        mw, mg = white_gray_means(v, labels)
        assert mw == pytest.approx(oracle_class_mean(v.data, labels.data, {1}), rel=1e-12)
        assert mg == pytest.approx(oracle_class_mean(v.data, labels.data, {2}), rel=1e-12)

    def test_missing_class_raises(self):
        labels = LabelVolume(
            np.ones((6, 6, 6), np.int32),
            {0: TissueClass.BACKGROUND, 1: TissueClass.WHITE_MATTER},
        )
        with pytest.raises(MissingTissueClassError, match="gray-matter"):
            white_gray_means(Volume(np.zeros((6, 6, 6), np.float32)), labels)


def two_tissue_setup(white_value: float, gray_value: float, dims=(10, 10, 10)):
    half = dims[0] // 2
    labels = np.ones(dims, np.int32)
    labels[half:] = 2
    lv = LabelVolume(
        labels, {1: TissueClass.WHITE_MATTER, 2: TissueClass.GRAY_MATTER}
    )
    data = np.where(labels == 1, white_value, gray_value).astype(np.float32)
    return Volume(data), lv


class TestEnhancePathology:
    def test_zero_probability_is_identity(self):
        base, labels = two_tissue_setup(0.8, 0.4)
        p = ProbVolume(np.zeros(base.dims, np.float32))
        out, draw = enhance_pathology(base, p, labels, 21)
        assert np.array_equal(out.data, base.data)
        assert draw.direction is ShiftDirection.DARKEN

    def test_darken_branch_statistics(self):
        base, labels = two_tissue_setup(0.8, 0.4, dims=(6, 6, 6))
        p = ProbVolume(np.ones(base.dims, np.float32))
        n = 2000
        deltas = np.array(
            [enhance_pathology(base, p, labels, seed)[1].delta for seed in range(n)]
        )
        assert abs(deltas.mean() + 0.4) < 3 * 0.4 / np.sqrt(n)

    def test_brighten_branch_statistics(self):
        base, labels = two_tissue_setup(0.3, 0.5, dims=(6, 6, 6))
        p = ProbVolume(np.ones(base.dims, np.float32))
        n = 2000
        draws = [enhance_pathology(base, p, labels, seed)[1] for seed in range(n)]
        assert all(d.direction is ShiftDirection.BRIGHTEN for d in draws)
        deltas = np.array([d.delta for d in draws])
        assert abs(deltas.mean() - 0.15) < 3 * 0.15 / np.sqrt(n)

    def test_change_sign_matches_delta_sign(self):
        base, labels = two_tissue_setup(0.8, 0.4)
        prob = np.zeros(base.dims, np.float32)
        prob[2:5, 2:5, 2:5] = 1.0
        p = ProbVolume(prob)
        out, draw = enhance_pathology(base, p, labels, 33)
        change = out.data.astype(np.float64) - base.data.astype(np.float64)
        inside = prob > 0
        if draw.delta < 0:
            assert np.all(change[inside] <= 0)
        else:
            assert np.all(change[inside] >= 0)
        assert np.array_equal(out.data[~inside], base.data[~inside])

    def test_untouched_where_probability_zero_bitwise(self):
        base, labels = two_tissue_setup(0.8, 0.4)
        prob = np.zeros(base.dims, np.float32)
        prob[0, 0, 0] = 1.0
        out, _ = enhance_pathology(base, ProbVolume(prob), labels, 5)
        flat_in = base.data[prob == 0]
        flat_out = out.data[prob == 0]
        assert np.array_equal(flat_in, flat_out)

    def test_per_component_draws(self):
        base, labels = two_tissue_setup(0.8, 0.4, dims=(12, 12, 12))
        prob = np.zeros(base.dims, np.float32)
        prob[1:3, 1:3, 1:3] = 1.0
        prob[8:10, 8:10, 8:10] = 1.0
        out, draws = enhance_pathology(base, ProbVolume(prob), labels, 9, per_component=True)
        assert isinstance(draws, list) and len(draws) == 2
        assert draws[0].delta != draws[1].delta

    def test_grid_mismatch(self):
        base, labels = two_tissue_setup(0.8, 0.4)
        with pytest.raises(GridMismatchError):
            enhance_pathology(base, ProbVolume(np.zeros((4, 4, 4), np.float32)), labels, 0)

    def test_draw_invariant_enforced(self):
        from pathosynth import PathologyDraw

        with pytest.raises(VolumeError):
            PathologyDraw(0.1, ShiftDirection.BRIGHTEN, white_mean=0.8, gray_mean=0.4)
