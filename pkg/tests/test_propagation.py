import numpy as np
import pytest

from adaflow.errors import DataError
from adaflow.keyframes import KeyframeSchedule, select_keyframes
from adaflow.partition import ClipPartition
from adaflow.propagation import (load_correspondences, precompute_correspondences, propagate,
                                 resize_position_map, save_correspondences)
from adaflow.similarity import FeatureVolume, PositionMap, correspondence_map

from conftest import ref_correspondence


def shifted_volume(n, h, w, d, rng):
    """Frame f is frame 0 cyclically shifted by f columns; tokens well separated."""
    base = rng.standard_normal((h, w, d)).astype(np.float32) * 3.0
    return FeatureVolume(np.stack([np.roll(base, f, axis=1) for f in range(n)]))


def fixed_schedule(rows):
    return KeyframeSchedule(timesteps=len(rows), schedule=[list(r) for r in rows], seed=0)


class TestPrecompute:
    def test_length_one_clip_identity(self, rng):
        vol = FeatureVolume(rng.standard_normal((1, 2, 3, 4)).astype(np.float32))
        part = ClipPartition([0], 1)
        sched = fixed_schedule([[0], [0]])
        corr = precompute_correspondences(vol, part, sched)
        assert np.array_equal(corr.map_for(0, 0).flat(), np.arange(6))

    def test_identical_frames_identity_map(self, rng):
        frame = rng.standard_normal((2, 2, 8)).astype(np.float32)
        vol = FeatureVolume(np.stack([frame, frame.copy()]))
        part = ClipPartition([0], 2)
        corr = precompute_correspondences(vol, part, fixed_schedule([[1]]))
        assert np.array_equal(corr.map_for(0, 1).flat(), np.arange(4))

    def test_cyclic_shift_recovered_exhaustively(self, rng):
        vol = shifted_volume(3, 4, 4, 16, rng)
        part = ClipPartition([0], 3)
        corr = precompute_correspondences(vol, part, fixed_schedule([[1]]))
        got = corr.map_for(0, 1).flat()
        brute = ref_correspondence(vol.frame(0), vol.frame(1))
        assert np.array_equal(got, brute)
        # Frame 1 is frame 0 shifted right by one column, so position (r, c)
        # of frame 0 matches (r, c+1) of frame 1.
        expected = np.array([[r * 4 + (c + 1) % 4 for c in range(4)] for r in range(4)])
        assert np.array_equal(got, expected.reshape(-1))

    def test_covers_all_candidates_and_adjacent_pairs(self, rng):
        vol = FeatureVolume(rng.standard_normal((6, 2, 2, 5)).astype(np.float32))
        part = ClipPartition([0, 3], 6)
        sched = fixed_schedule([[0, 4], [2, 4], [1, 5]])
        corr = precompute_correspondences(vol, part, sched)
        for i in range(0, 3):
            for j in (0, 1, 2):
                assert corr.map_for(i, j) is not None
        for i in range(3, 6):
            for j in (4, 5):
                assert corr.map_for(i, j) is not None
        assert corr.map_for(1, 2) is not None   # adjacent pair inside clip 0
        assert corr.map_for(4, 5) is not None
        with pytest.raises(DataError):
            corr.map_for(0, 4)  # cross-clip pair is never stored
        assert corr.index_count == len(corr.maps) * 4

    def test_one_shot_reuse_across_timesteps(self, rng):
        vol = FeatureVolume(rng.standard_normal((4, 2, 2, 6)).astype(np.float32))
        part = ClipPartition([0], 4)
        sched = fixed_schedule([[2]] * 50)
        corr = precompute_correspondences(vol, part, sched)
        assert corr.computed_once
        # The object consulted at timestep 49 is the object from timestep 0.
        assert corr.map_for(1, 2) is corr.map_for(1, 2)

    def test_matches_per_timestep_recomputation_oracle(self, rng):
        vol = FeatureVolume(rng.standard_normal((5, 3, 2, 7)).astype(np.float32))
        part = ClipPartition([0, 2], 5)
        sched = select_keyframes(part, 6, seed=3)
        corr = precompute_correspondences(vol, part, sched)
        for t in range(sched.timesteps):
            for k, (start, end) in enumerate(part.ranges()):
                keyframe = sched.row(t)[k]
                for i in range(start, end):
                    if i == keyframe:
                        continue
                    fresh = correspondence_map(vol.frame(i), vol.frame(keyframe))
                    assert np.array_equal(corr.map_for(i, keyframe).flat(), fresh.flat())


class TestResizePositionMap:
    def test_same_resolution_passthrough(self):
        pm = PositionMap(2, 3, np.arange(6).reshape(2, 3)[::-1].copy())
        assert np.array_equal(resize_position_map(pm, 2, 3), pm.flat())

    def test_identity_survives_2x_upsample(self):
        pm = PositionMap.identity(3, 4)
        up = resize_position_map(pm, 6, 8)
        assert np.array_equal(up, np.arange(48))

    def test_identity_survives_fractional_upsample(self):
        pm = PositionMap.identity(3, 3)
        up = resize_position_map(pm, 4, 5)
        assert np.array_equal(up, np.arange(20))

    def test_downsample_rescales_by_floor(self):
        pm = PositionMap.identity(4, 4)
        down = resize_position_map(pm, 2, 2)
        assert np.array_equal(down, np.arange(4))

    def test_targets_always_in_range(self, rng):
        for _ in range(30):
            h, w = rng.integers(1, 7, size=2)
            oh, ow = rng.integers(1, 11, size=2)
            targets = rng.integers(0, h * w, size=(h, w)).astype(np.int32)
            out = resize_position_map(PositionMap(int(h), int(w), targets), int(oh), int(ow))
            assert out.shape == (oh * ow,)
            assert out.min() >= 0 and out.max() < oh * ow


class TestPropagate:
    def build(self, rng, n=4, starts=(0,), h=2, w=2, d=6):
        vol = FeatureVolume(rng.standard_normal((n, h, w, d)).astype(np.float32))
        part = ClipPartition(list(starts), n)
        return vol, part

    def test_identity_maps_copy_keyframe_everywhere(self, rng):
        frame = rng.standard_normal((2, 2, 8)).astype(np.float32)
        vol = FeatureVolume(np.stack([frame] * 3))
        part = ClipPartition([0], 3)
        sched = fixed_schedule([[1]])
        corr = precompute_correspondences(vol, part, sched)
        key_out = rng.standard_normal((2, 2, 5)).astype(np.float32)
        out = propagate({1: key_out}, corr, 0, part, sched)
        for i in range(3):
            assert np.array_equal(out[i], key_out)

    def test_two_frame_gather_by_hand(self, rng):
        # 1x2 grid, map [1, 0]: frame 0's output must be keyframe output
        # reversed.
        f0 = np.array([[[1.0, 0.0], [0.0, 1.0]]], dtype=np.float32)
        f1 = f0[:, ::-1].copy()
        vol = FeatureVolume(np.stack([f0, f1]))
        part = ClipPartition([0], 2)
        sched = fixed_schedule([[1]])
        corr = precompute_correspondences(vol, part, sched)
        assert corr.map_for(0, 1).flat().tolist() == [1, 0]
        key_out = np.array([[[10.0], [20.0]]], dtype=np.float32)
        out = propagate({1: key_out}, corr, 0, part, sched)
        assert out[0].reshape(-1).tolist() == [20.0, 10.0]
        assert out[1].reshape(-1).tolist() == [10.0, 20.0]

    def test_keyframe_passthrough_bit_exact(self, rng):
        vol, part = self.build(rng, n=5, starts=(0, 3))
        sched = select_keyframes(part, 3, seed=1)
        corr = precompute_correspondences(vol, part, sched)
        for t in range(3):
            outputs = {f: rng.standard_normal((2, 2, 3)).astype(np.float32)
                       for f in sched.row(t)}
            result = propagate(outputs, corr, t, part, sched)
            for f, arr in outputs.items():
                assert result[f].tobytes() == arr.tobytes()

    def test_gather_only_tokens_verbatim(self, rng):
        vol, part = self.build(rng, n=6, starts=(0, 4))
        sched = select_keyframes(part, 2, seed=9)
        corr = precompute_correspondences(vol, part, sched)
        outputs = {f: rng.standard_normal((2, 2, 3)).astype(np.float32) for f in sched.row(0)}
        result = propagate(outputs, corr, 0, part, sched)
        for k, (start, end) in enumerate(part.ranges()):
            key_tokens = {outputs[sched.row(0)[k]].reshape(4, 3)[p].tobytes() for p in range(4)}
            for i in range(start, end):
                for p in range(4):
                    assert result[i].reshape(4, 3)[p].tobytes() in key_tokens

    def test_2x_resolution_identity_map(self, rng):
        frame = rng.standard_normal((2, 2, 8)).astype(np.float32)
        vol = FeatureVolume(np.stack([frame, frame.copy()]))
        part = ClipPartition([0], 2)
        sched = fixed_schedule([[1]])
        corr = precompute_correspondences(vol, part, sched)
        key_out = rng.standard_normal((4, 4, 3)).astype(np.float32)  # 2x the feature grid
        out = propagate({1: key_out}, corr, 0, part, sched)
        assert np.array_equal(out[0], key_out)

    def test_missing_keyframe_output_names_coordinates(self, rng):
        vol, part = self.build(rng, n=4, starts=(0, 2))
        sched = fixed_schedule([[0, 2]])
        corr = precompute_correspondences(vol, part, sched)
        with pytest.raises(DataError, match="timestep 0.*clip 1"):
            propagate({0: np.zeros((2, 2, 1), dtype=np.float32)}, corr, 0, part, sched)


class TestPersistence:
    def test_roundtrip(self, rng, tmp_path):
        vol = FeatureVolume(rng.standard_normal((4, 2, 3, 5)).astype(np.float32))
        part = ClipPartition([0, 2], 4)
        sched = fixed_schedule([[1, 3]])
        corr = precompute_correspondences(vol, part, sched)
        path = tmp_path / "corr.aftn"
        save_correspondences(corr, sched, 0, str(path))
        keyframe_of, maps = load_correspondences(str(path))
        assert keyframe_of == [1, 1, 3, 3]
        for i in range(4):
            assert np.array_equal(maps[i].flat(), corr.map_for(i, keyframe_of[i]).flat())
