import numpy as np
import pytest

from adaflow.errors import ConfigError, DataError
from adaflow.partition import (ClipPartition, PartitionParams, adaptive_partition,
                               window_check, yt_diagnostic)
from adaflow.similarity import FeatureVolume, Heatmap, HeatmapCache


def orthogonal_scene_volume(scene_lengths, h=2, w=2, d=None):
    """Scenes use disjoint basis dims: within-scene similarity 1, across 0."""
    hw = h * w
    scenes = len(scene_lengths)
    d = d or scenes * hw
    frames = []
    for s, length in enumerate(scene_lengths):
        tokens = np.zeros((hw, d), dtype=np.float32)
        for t in range(hw):
            tokens[t, s * hw + t] = 1.0
        frames.extend([tokens.reshape(h, w, d)] * length)
    return FeatureVolume(np.stack(frames))


class TestWindowCheck:
    def test_uniform_ones(self):
        hm = Heatmap(np.ones((10, 10), dtype=np.float32))
        assert window_check(hm, 4, 2, 0.6)

    def test_zero_block_fails(self):
        vals = np.full((10, 10), 0.9, dtype=np.float32)
        vals[4:8, 4:8] = 0.0  # aligned with the window placed at (4, 4)
        assert not window_check(Heatmap(vals), 4, 2, 0.6)
        assert window_check(Heatmap(np.full((10, 10), 0.9, dtype=np.float32)), 4, 2, 0.6)

    def test_window_larger_than_grid_degrades(self):
        hm = Heatmap(np.full((3, 3), 0.7, dtype=np.float32))
        assert window_check(hm, 42, 21, 0.6)
        assert not window_check(hm, 42, 21, 0.75)

    def test_clamped_final_placement_sees_edge(self):
        # 7x7 grid, 4x4 windows, step 2: naive placements 0 and 2; the clamped
        # final placement at 3 must still catch a bad bottom-right corner.
        vals = np.ones((7, 7), dtype=np.float32)
        vals[5:, 5:] = -1.0
        assert not window_check(Heatmap(vals), 4, 2, 0.6)


class TestClipPartition:
    def test_bounds_and_clip_of(self):
        part = ClipPartition(starts=[0, 4, 9], n=12)
        assert part.ranges() == [(0, 4), (4, 9), (9, 12)]
        assert part.clip_of(0) == 0
        assert part.clip_of(8) == 1
        assert part.clip_of(11) == 2

    def test_invalid_starts(self):
        with pytest.raises(DataError):
            ClipPartition(starts=[1, 3], n=5)
        with pytest.raises(DataError):
            ClipPartition(starts=[0, 3, 3], n=5)
        with pytest.raises(DataError):
            ClipPartition(starts=[0, 7], n=5)

    def test_params_validation(self):
        with pytest.raises(ConfigError):
            PartitionParams(window=4, step=5)
        with pytest.raises(ConfigError):
            PartitionParams(mean_threshold=1.5)
        with pytest.raises(ConfigError):
            PartitionParams(boundary="middle")


class TestAdaptivePartition:
    def test_single_frame(self):
        vol = orthogonal_scene_volume([1])
        part = adaptive_partition(vol, PartitionParams())
        assert part.starts == [0]

    def test_constant_video_single_clip(self):
        vol = orthogonal_scene_volume([12])
        part = adaptive_partition(vol, PartitionParams())
        assert part.starts == [0]

    def test_two_scene_literal_boundary(self):
        # Scene A frames 0-9, orthogonal scene B frames 10-19. The literal
        # recurrence fails at pair (0, 10), so the next clip starts at 11.
        vol = orthogonal_scene_volume([10, 10])
        part = adaptive_partition(vol, PartitionParams())
        assert part.starts == [0, 11]

    def test_two_scene_strict_boundary(self):
        vol = orthogonal_scene_volume([10, 10])
        part = adaptive_partition(vol, PartitionParams(boundary="strict"))
        assert part.starts == [0, 10]

    def test_thresholds_at_minus_one_merge_everything(self):
        vol = orthogonal_scene_volume([3, 3, 3])
        params = PartitionParams(mean_threshold=-1.0, window_threshold=-1.0)
        assert adaptive_partition(vol, params).starts == [0]

    def test_max_threshold_yields_max_literal_clips(self, rng):
        # Every consecutive pair has heatmap mean < 1, so every check fails:
        # the recurrence can at best emit a start every other frame.
        n = 9
        vol = FeatureVolume(rng.standard_normal((n, 2, 2, 16)).astype(np.float32))
        part = adaptive_partition(vol, PartitionParams(mean_threshold=1.0))
        assert part.starts == [0, 2, 4, 6, 8]
        assert part.num_clips == (n + 1) // 2

    def test_coverage_is_exact(self, rng):
        for seed in range(5):
            gen = np.random.default_rng(seed)
            vol = FeatureVolume(gen.standard_normal((11, 2, 3, 8)).astype(np.float32))
            part = adaptive_partition(vol, PartitionParams(mean_threshold=0.3))
            frames = [i for start, end in part.ranges() for i in range(start, end)]
            assert frames == list(range(11))

    def test_monotone_in_mean_threshold(self):
        # Random-walk volumes: similarity decays smoothly with distance.
        for seed in range(8):
            gen = np.random.default_rng(100 + seed)
            steps = gen.standard_normal((16, 3, 3, 12)) * 0.35
            vol = FeatureVolume(np.cumsum(steps, axis=0).astype(np.float32)
                                + gen.standard_normal((1, 3, 3, 12)).astype(np.float32))
            cache = HeatmapCache(vol)
            counts = [adaptive_partition(vol, PartitionParams(mean_threshold=ms), cache).num_clips
                      for ms in (-0.5, 0.0, 0.25, 0.5, 0.75, 0.95)]
            assert counts == sorted(counts)

    def test_deterministic_across_caches(self, rng):
        vol = FeatureVolume(rng.standard_normal((10, 2, 2, 6)).astype(np.float32))
        params = PartitionParams(mean_threshold=0.4)
        a = adaptive_partition(vol, params)
        b = adaptive_partition(vol, params, HeatmapCache(vol, capacity=2))
        assert a.starts == b.starts


class TestYtDiagnostic:
    def test_single_frame(self, rng):
        frames = rng.standard_normal((1, 4, 5, 3)).astype(np.float32)
        out, boundaries = yt_diagnostic(frames, ClipPartition([0], 1))
        assert out.shape == (4, 1, 3)
        assert np.array_equal(out[:, 0], frames[0, :, 2])
        assert boundaries == []

    def test_three_constant_frames(self):
        frames = np.stack([np.full((2, 3), v, dtype=np.float32) for v in (1.0, 2.0, 3.0)])
        out, _ = yt_diagnostic(frames, ClipPartition([0], 3))
        assert out.shape == (2, 3)
        assert np.array_equal(out, [[1, 2, 3], [1, 2, 3]])

    def test_boundary_markers_drop_leading_zero(self, rng):
        frames = rng.standard_normal((4, 2, 2, 1)).astype(np.float32)
        _, boundaries = yt_diagnostic(frames, ClipPartition([0, 2], 4))
        assert boundaries == [2]
