import numpy as np
import pytest

from modir import autodiff as ad
from modir import losses
from modir.autodiff import Tensor
from modir.metrics import dice_score, folding_percent, tre
from modir.network import warp
from modir.synth import SynthConfig, dataset, gen_gt_dvf, gen_pair


def make(seed=0, **kw):
    cfg = SynthConfig(seed=seed, **kw)
    return cfg, np.random.default_rng([cfg.seed, 0])


class TestGtDvf:
    def test_zero_magnitude_gives_zero_field(self):
        cfg, rng = make(magnitude=0.0)
        u = gen_gt_dvf(cfg, rng)
        np.testing.assert_array_equal(u, np.zeros_like(u))

    def test_peak_magnitude_matches_config(self):
        cfg, rng = make(magnitude=3.0)
        u = gen_gt_dvf(cfg, rng)
        peak = np.sqrt((u[0] ** 2).sum(axis=0)).max()
        assert peak == pytest.approx(3.0, rel=1e-12)

    def test_no_folding_at_default_magnitude(self):
        for seed in range(5):
            cfg, rng = make(seed=seed)
            assert folding_percent(gen_gt_dvf(cfg, rng)) == 0.0

    def test_same_seed_same_field(self):
        cfg1, rng1 = make(seed=5)
        cfg2, rng2 = make(seed=5)
        np.testing.assert_array_equal(gen_gt_dvf(cfg1, rng1), gen_gt_dvf(cfg2, rng2))

    def test_magnitude_cap_enforced(self):
        with pytest.raises(ValueError):
            SynthConfig(magnitude=20.0)


class TestGenPair:
    def test_zero_magnitude_means_identical_images(self):
        cfg, rng = make(magnitude=0.0, noise=0.0, conflict=0.0)
        pair = gen_pair(cfg, rng)
        np.testing.assert_allclose(pair.source_image, pair.target_image, atol=1e-12)
        pre = np.linalg.norm(pair.source_landmarks - pair.target_landmarks, axis=1)
        np.testing.assert_allclose(pre, 0.0, atol=1e-12)

    def test_pre_registration_tre_equals_displacement_at_landmarks(self):
        cfg, rng = make(seed=2)
        pair = gen_pair(cfg, rng)
        r = tre(np.zeros_like(pair.gt_dvf), pair.target_landmarks, pair.source_landmarks)
        pre = np.linalg.norm(pair.source_landmarks - pair.target_landmarks, axis=1).mean()
        assert r.mean == pytest.approx(pre, rel=1e-12)

    @pytest.mark.parametrize("seed", range(4))
    def test_perfect_prediction_oracle(self, seed):
        cfg, rng = make(seed=seed)
        pair = gen_pair(cfg, rng)
        ad.reset_tape()
        warped = warp(Tensor(pair.source_image), Tensor(pair.gt_dvf))
        l_img = losses.loss_ncc(warped, Tensor(pair.target_image)).item()
        warped_mask = warp(Tensor(pair.source_mask), Tensor(pair.gt_dvf)).data
        ad.reset_tape()
        assert l_img <= 0.02
        assert dice_score(warped_mask, pair.target_mask).mean >= 98.0
        assert tre(pair.gt_dvf, pair.target_landmarks, pair.source_landmarks).mean <= 0.2

    def test_masks_binary_and_landmarks_in_bounds(self):
        cfg, rng = make(seed=3)
        pair = gen_pair(cfg, rng)
        for m in (pair.source_mask, pair.target_mask):
            assert set(np.unique(m)).issubset({0.0, 1.0})
        s = cfg.size
        for pts in (pair.target_landmarks, pair.source_landmarks):
            assert np.all(pts >= 0) and np.all(pts <= s - 1)

    def test_landmark_count(self):
        cfg, rng = make(seed=1)
        pair = gen_pair(cfg, rng)
        assert len(pair.target_landmarks) == 23

    def test_conflict_mode_changes_target_only_locally(self):
        base = gen_pair(*make(seed=4, conflict=0.0))
        conf = gen_pair(*make(seed=4, conflict=1.0))
        np.testing.assert_array_equal(base.source_image, conf.source_image)
        diff = np.abs(base.target_image - conf.target_image)
        assert diff.max() > 0.01  # the injected structure exists
        assert (diff > 0.01).mean() < 0.2  # and is localized


class TestDataset:
    def test_split_is_disjoint_and_sized(self):
        pairs, train_idx, eval_idx = dataset(SynthConfig(seed=0), 10)
        assert len(pairs) == 10
        assert sorted(train_idx + eval_idx) == list(range(10))
        assert len(train_idx) == 8 and len(eval_idx) == 2

    def test_regeneration_is_identical(self):
        a, _, _ = dataset(SynthConfig(seed=9), 3)
        b, _, _ = dataset(SynthConfig(seed=9), 3)
        for pa, pb in zip(a, b):
            np.testing.assert_array_equal(pa.source_image, pb.source_image)
            np.testing.assert_array_equal(pa.gt_dvf, pb.gt_dvf)

    def test_pairs_differ_across_indices(self):
        pairs, _, _ = dataset(SynthConfig(seed=0), 4)
        for i in range(1, 4):
            assert np.abs(pairs[i].source_image - pairs[0].source_image).max() > 0.0

    def test_count_validation(self):
        with pytest.raises(ValueError):
            dataset(SynthConfig(seed=0), 0)
